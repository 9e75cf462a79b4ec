// three.js view of the robot and scenario: stick-figure links posed by
// forward kinematics from telemetry, the experiment area, task objects,
// contact force arrows, and the latest cropped point cloud.

import * as THREE from "three";

import { PointCloud, RobotState } from "./codec.js";
import { FramePose, ModelDocument, RobotStructure } from "./model.js";

const AREA_COLOR = 0x3a5f3a;
const BONE_COLOR = 0x8899aa;
const BASE_COLOR = 0x4466aa;
const FOOT_COLOR = 0xddaa33;
const EE_COLOR = 0xcc4444;
const FORCE_COLOR = 0x44cc66;
const FORCE_SCALE = 0.003; // m per N

export interface ScenarioView {
  area?: { x: number[]; y: number[] };
  targets?: Record<string, { position: number[]; radius?: number }>;
  box?: { position: number[]; size?: number[]; handle: number[]; wire: number[] };
}

interface Bone {
  mesh: THREE.Mesh;
  parentLink: string;
  childLink: string;
}

export class ConsoleScene {
  readonly scene = new THREE.Scene();
  readonly camera: THREE.PerspectiveCamera;
  private renderer: THREE.WebGLRenderer;
  private structure: RobotStructure;
  private bones: Bone[] = [];
  private feet = new Map<string, THREE.Mesh>();
  private forceArrows = new Map<string, THREE.ArrowHelper>();
  private baseMesh: THREE.Mesh;
  private eeMesh: THREE.Mesh;
  private cloudPoints: THREE.Points;
  private cloudGeometry = new THREE.BufferGeometry();

  constructor(canvas: HTMLCanvasElement, doc: ModelDocument) {
    this.structure = new RobotStructure(doc);
    this.renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
    this.camera = new THREE.PerspectiveCamera(50, 4 / 3, 0.01, 50);
    this.camera.up.set(0, 0, 1);
    this.camera.position.set(-1.6, -1.4, 1.2);
    this.camera.lookAt(0.6, 0, 0.3);

    this.scene.background = new THREE.Color(0x10141a);
    const sun = new THREE.DirectionalLight(0xffffff, 2.2);
    sun.position.set(-2, -3, 5);
    this.scene.add(sun);
    this.scene.add(new THREE.AmbientLight(0x667788, 1.2));

    const grid = new THREE.GridHelper(8, 32, 0x333b44, 0x232930);
    grid.rotation.x = Math.PI / 2;
    this.scene.add(grid);

    this.baseMesh = new THREE.Mesh(
      new THREE.BoxGeometry(...baseBoxDims(doc)),
      new THREE.MeshStandardMaterial({ color: BASE_COLOR }),
    );
    this.scene.add(this.baseMesh);

    const boneMaterial = new THREE.MeshStandardMaterial({ color: BONE_COLOR });
    for (const entry of this.structure.chain) {
      const mesh = new THREE.Mesh(new THREE.CylinderGeometry(0.016, 0.016, 1, 8), boneMaterial);
      this.bones.push({ mesh, parentLink: entry.parentLink, childLink: entry.childLink });
      this.scene.add(mesh);
    }
    for (const name of this.structure.contactNames) {
      const foot = new THREE.Mesh(
        new THREE.SphereGeometry(0.03, 12, 12),
        new THREE.MeshStandardMaterial({ color: FOOT_COLOR }),
      );
      this.feet.set(name, foot);
      this.scene.add(foot);
      const arrow = new THREE.ArrowHelper(
        new THREE.Vector3(0, 0, 1),
        new THREE.Vector3(),
        0.001,
        FORCE_COLOR,
      );
      this.forceArrows.set(name, arrow);
      this.scene.add(arrow);
    }
    this.eeMesh = new THREE.Mesh(
      new THREE.SphereGeometry(0.035, 12, 12),
      new THREE.MeshStandardMaterial({ color: EE_COLOR }),
    );
    this.scene.add(this.eeMesh);

    this.cloudPoints = new THREE.Points(
      this.cloudGeometry,
      new THREE.PointsMaterial({ size: 0.02, vertexColors: true }),
    );
    this.scene.add(this.cloudPoints);
  }

  addScenario(view: ScenarioView): void {
    if (view.area) {
      const [x0, x1] = view.area.x;
      const [y0, y1] = view.area.y;
      const outline = new THREE.LineLoop(
        new THREE.BufferGeometry().setFromPoints([
          new THREE.Vector3(x0, y0, 0.002),
          new THREE.Vector3(x1, y0, 0.002),
          new THREE.Vector3(x1, y1, 0.002),
          new THREE.Vector3(x0, y1, 0.002),
        ]),
        new THREE.LineBasicMaterial({ color: AREA_COLOR }),
      );
      this.scene.add(outline);
    }
    for (const [name, target] of Object.entries(view.targets ?? {})) {
      const mesh = new THREE.Mesh(
        new THREE.SphereGeometry(target.radius ?? 0.05, 16, 16),
        new THREE.MeshStandardMaterial({
          color: name === "a" ? 0x3377cc : 0xcc7733,
          transparent: true,
          opacity: 0.45,
        }),
      );
      mesh.position.set(target.position[0], target.position[1], target.position[2]);
      this.scene.add(mesh);
    }
    if (view.box) {
      const size = view.box.size ?? [0.3, 0.3, 0.3];
      const box = new THREE.Mesh(
        new THREE.BoxGeometry(size[0], size[1], size[2]),
        new THREE.MeshStandardMaterial({ color: 0x775544 }),
      );
      box.position.set(view.box.position[0], view.box.position[1], view.box.position[2]);
      this.scene.add(box);
      for (const [point, color] of [
        [view.box.handle, 0xdddd55],
        [view.box.wire, 0xdd5555],
      ] as const) {
        const marker = new THREE.Mesh(
          new THREE.SphereGeometry(0.02, 10, 10),
          new THREE.MeshStandardMaterial({ color }),
        );
        marker.position.set(point[0], point[1], point[2]);
        this.scene.add(marker);
      }
    }
  }

  applyState(state: RobotState): void {
    const poses = this.structure.linkPoses(state.basePos, state.baseQuat, state.q);
    const base = poses.get(this.structure.baseLink) as FramePose;
    setPose(this.baseMesh, base);
    for (const bone of this.bones) {
      const a = poses.get(bone.parentLink) as FramePose;
      const b = poses.get(bone.childLink) as FramePose;
      orientBone(bone.mesh, a.pos, b.pos);
    }
    this.structure.contactNames.forEach((name, i) => {
      const pose = this.structure.framePose(poses, name);
      const foot = this.feet.get(name) as THREE.Mesh;
      foot.position.set(pose.pos[0], pose.pos[1], pose.pos[2]);
      const arrow = this.forceArrows.get(name) as THREE.ArrowHelper;
      if (i < state.nContacts) {
        const fx = state.contactForces[i * 3];
        const fy = state.contactForces[i * 3 + 1];
        const fz = state.contactForces[i * 3 + 2];
        const norm = Math.hypot(fx, fy, fz);
        arrow.position.set(pose.pos[0], pose.pos[1], pose.pos[2]);
        if (norm > 1e-6) {
          arrow.setDirection(new THREE.Vector3(fx / norm, fy / norm, fz / norm));
          arrow.setLength(Math.min(0.5, norm * FORCE_SCALE), 0.03, 0.015);
          arrow.visible = true;
        } else {
          arrow.visible = false;
        }
      } else {
        arrow.visible = false;
      }
    });
    if (this.structure.endEffector !== "") {
      const ee = this.structure.framePose(poses, this.structure.endEffector);
      this.eeMesh.position.set(ee.pos[0], ee.pos[1], ee.pos[2]);
    }
  }

  applyCloud(cloud: PointCloud): void {
    const colors = new Float32Array(cloud.count * 3);
    for (let i = 0; i < colors.length; i++) {
      colors[i] = cloud.colors[i] / 255;
    }
    this.cloudGeometry.setAttribute("position", new THREE.BufferAttribute(cloud.points, 3));
    this.cloudGeometry.setAttribute("color", new THREE.BufferAttribute(colors, 3));
    this.cloudGeometry.computeBoundingSphere();
  }

  resize(width: number, height: number): void {
    this.renderer.setSize(width, height, false);
    this.camera.aspect = width / Math.max(1, height);
    this.camera.updateProjectionMatrix();
  }

  render(): void {
    this.renderer.render(this.scene, this.camera);
  }
}

function setPose(object: THREE.Object3D, pose: FramePose): void {
  object.position.set(pose.pos[0], pose.pos[1], pose.pos[2]);
  object.quaternion.set(pose.quat[1], pose.quat[2], pose.quat[3], pose.quat[0]);
}

const UP = new THREE.Vector3(0, 1, 0); // cylinder axis in its local frame

function orientBone(mesh: THREE.Mesh, a: [number, number, number], b: [number, number, number]): void {
  const from = new THREE.Vector3(a[0], a[1], a[2]);
  const to = new THREE.Vector3(b[0], b[1], b[2]);
  const dir = to.clone().sub(from);
  const length = Math.max(1e-4, dir.length());
  mesh.position.copy(from.clone().add(to).multiplyScalar(0.5));
  mesh.quaternion.setFromUnitVectors(UP, dir.normalize());
  mesh.scale.set(1, length, 1);
}

// Equivalent solid box dimensions from the base link's mass and diagonal
// inertia, so the body in the view has believable proportions.
function baseBoxDims(doc: ModelDocument): [number, number, number] {
  const base = doc.links.find((l) => l.name === "base") ?? doc.links[0];
  const m = base.mass;
  const ixx = base.inertia[0][0];
  const iyy = base.inertia[1][1];
  const izz = base.inertia[2][2];
  const lx2 = (6 / m) * (iyy + izz - ixx);
  const ly2 = (6 / m) * (ixx + izz - iyy);
  const lz2 = (6 / m) * (ixx + iyy - izz);
  const safe = (v: number) => Math.sqrt(Math.max(0.0004, v));
  return [safe(lx2), safe(ly2), safe(lz2)];
}
