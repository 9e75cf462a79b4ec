// Robot model document (as served by GET /api/model) and the forward
// kinematics needed to pose the 3D view from RobotState telemetry.
//
// Quaternions are [w, x, y, z] to match the wire format.

export interface ModelOrigin {
  xyz?: number[];
  rpy?: number[];
}

export interface ModelLink {
  name: string;
  mass: number;
  inertia: number[][];
  com?: number[];
}

export interface ModelJoint {
  name: string;
  kind: "floating" | "revolute";
  parent: string;
  child: string;
  origin?: ModelOrigin;
  axis?: number[];
  position_limits?: number[];
  torque_limits?: number[];
}

export interface ModelFrame {
  name: string;
  link: string;
  offset?: number[];
  rpy?: number[];
}

export interface ModelDocument {
  name?: string;
  links: ModelLink[];
  joints: ModelJoint[];
  contacts?: ModelFrame[];
  frames?: ModelFrame[];
  legs?: Record<string, { hip_frame: string; foot: string }>;
  home?: Record<string, number>;
  end_effector?: string;
  gripper_joint?: string;
}

export type Vec3 = [number, number, number];
export type Quat = [number, number, number, number];

export function quatMultiply(a: Quat, b: Quat): Quat {
  return [
    a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
    a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
    a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
    a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
  ];
}

export function quatNormalize(q: Quat): Quat {
  const n = Math.hypot(q[0], q[1], q[2], q[3]);
  if (n === 0) {
    return [1, 0, 0, 0];
  }
  return [q[0] / n, q[1] / n, q[2] / n, q[3] / n];
}

export function quatFromAxisAngle(axis: Vec3, angle: number): Quat {
  const n = Math.hypot(axis[0], axis[1], axis[2]);
  if (n === 0) {
    return [1, 0, 0, 0];
  }
  const half = angle / 2;
  const s = Math.sin(half) / n;
  return [Math.cos(half), axis[0] * s, axis[1] * s, axis[2] * s];
}

export function quatRotate(q: Quat, v: Vec3): Vec3 {
  // v + 2 w (u x v) + 2 (u x (u x v)) with u the vector part
  const [w, x, y, z] = q;
  const cx = y * v[2] - z * v[1];
  const cy = z * v[0] - x * v[2];
  const cz = x * v[1] - y * v[0];
  const ccx = y * cz - z * cy;
  const ccy = z * cx - x * cz;
  const ccz = x * cy - y * cx;
  return [v[0] + 2 * (w * cx + ccx), v[1] + 2 * (w * cy + ccy), v[2] + 2 * (w * cz + ccz)];
}

export function quatFromRpy(roll: number, pitch: number, yaw: number): Quat {
  const qz = quatFromAxisAngle([0, 0, 1], yaw);
  const qy = quatFromAxisAngle([0, 1, 0], pitch);
  const qx = quatFromAxisAngle([1, 0, 0], roll);
  return quatMultiply(quatMultiply(qz, qy), qx);
}

export interface FramePose {
  pos: Vec3;
  quat: Quat;
}

interface ChainEntry {
  childLink: string;
  parentLink: string;
  originPos: Vec3;
  originQuat: Quat;
  axis: Vec3;
  slot: number; // index into the actuated configuration vector
}

// Structure derived from a model document: actuated joint order (the order
// of revolute joints in the document, matching RobotState.q), the kinematic
// chain sorted parents first, and every addressable frame.
export class RobotStructure {
  readonly doc: ModelDocument;
  readonly actuatedNames: string[];
  readonly baseLink: string;
  readonly chain: ChainEntry[];
  readonly frames: Map<string, { link: string; offset: Vec3; quat: Quat }>;
  readonly contactNames: string[];
  readonly endEffector: string;

  constructor(doc: ModelDocument) {
    this.doc = doc;
    const floating = doc.joints.filter((j) => j.kind === "floating");
    if (floating.length !== 1) {
      throw new Error(`model needs exactly one floating joint, found ${floating.length}`);
    }
    this.baseLink = floating[0].child;

    const revolute = doc.joints.filter((j) => j.kind === "revolute");
    this.actuatedNames = revolute.map((j) => j.name);
    const slots = new Map(revolute.map((j, i) => [j.name, i]));

    // sort joints parents first by walking out from the base
    const byParent = new Map<string, ModelJoint[]>();
    for (const j of revolute) {
      const list = byParent.get(j.parent) ?? [];
      list.push(j);
      byParent.set(j.parent, list);
    }
    this.chain = [];
    const queue = [this.baseLink];
    while (queue.length > 0) {
      const link = queue.shift() as string;
      for (const j of byParent.get(link) ?? []) {
        const xyz = j.origin?.xyz ?? [0, 0, 0];
        const rpy = j.origin?.rpy ?? [0, 0, 0];
        this.chain.push({
          childLink: j.child,
          parentLink: j.parent,
          originPos: [xyz[0], xyz[1], xyz[2]],
          originQuat: quatFromRpy(rpy[0], rpy[1], rpy[2]),
          axis: (j.axis ?? [0, 0, 1]) as Vec3,
          slot: slots.get(j.name) as number,
        });
        queue.push(j.child);
      }
    }
    if (this.chain.length !== revolute.length) {
      throw new Error("model joints do not form a tree rooted at the base");
    }

    this.frames = new Map();
    for (const link of doc.links) {
      this.frames.set(link.name, { link: link.name, offset: [0, 0, 0], quat: [1, 0, 0, 0] });
    }
    for (const fr of [...(doc.frames ?? []), ...(doc.contacts ?? [])]) {
      const off = fr.offset ?? [0, 0, 0];
      const rpy = fr.rpy ?? [0, 0, 0];
      this.frames.set(fr.name, {
        link: fr.link,
        offset: [off[0], off[1], off[2]],
        quat: quatFromRpy(rpy[0], rpy[1], rpy[2]),
      });
    }
    this.contactNames = (doc.contacts ?? []).map((c) => c.name);
    this.endEffector = doc.end_effector ?? "";
  }

  // World pose of every link given the floating base pose and the actuated
  // configuration in RobotState.q order.
  linkPoses(basePos: ArrayLike<number>, baseQuat: ArrayLike<number>, q: ArrayLike<number>): Map<string, FramePose> {
    if (q.length !== this.actuatedNames.length) {
      throw new Error(`expected ${this.actuatedNames.length} joint values, got ${q.length}`);
    }
    const poses = new Map<string, FramePose>();
    poses.set(this.baseLink, {
      pos: [basePos[0], basePos[1], basePos[2]],
      quat: quatNormalize([baseQuat[0], baseQuat[1], baseQuat[2], baseQuat[3]]),
    });
    for (const entry of this.chain) {
      const parent = poses.get(entry.parentLink);
      if (parent === undefined) {
        throw new Error(`parent link ${entry.parentLink} not yet posed`);
      }
      const pos = addVec(parent.pos, quatRotate(parent.quat, entry.originPos));
      const spin = quatFromAxisAngle(entry.axis, q[entry.slot]);
      const quat = quatMultiply(quatMultiply(parent.quat, entry.originQuat), spin);
      poses.set(entry.childLink, { pos, quat });
    }
    return poses;
  }

  framePose(linkPoses: Map<string, FramePose>, name: string): FramePose {
    const fr = this.frames.get(name);
    if (fr === undefined) {
      throw new Error(`unknown frame ${name}`);
    }
    const base = linkPoses.get(fr.link);
    if (base === undefined) {
      throw new Error(`frame ${name} sits on unposed link ${fr.link}`);
    }
    return {
      pos: addVec(base.pos, quatRotate(base.quat, fr.offset)),
      quat: quatMultiply(base.quat, fr.quat),
    };
  }
}

function addVec(a: Vec3, b: Vec3): Vec3 {
  return [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
}
