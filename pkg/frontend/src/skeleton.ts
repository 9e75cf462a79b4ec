// Virtual-suit skeleton synthesis: turns console gesture state into wire
// SkeletonFrame messages with the same geometry a recorded suit produces,
// so the service's triggers and retargeting behave identically.

import {
  BODY_SEGMENTS,
  HAND_SEGMENTS,
  SkeletonFrame,
} from "./codec.js";
import { Quat, Vec3, quatFromAxisAngle, quatMultiply, quatRotate } from "./model.js";

export const PELVIS = 0;
export const RIGHT_SHOULDER = 7;
export const RIGHT_WRIST = 10;
export const LEFT_SHOULDER = 11;
export const LEFT_WRIST = 14;

export const PELVIS_Z = 1.0;
export const LEFT_LOW_Z = 0.7; // below the waist: walking trigger
export const LEFT_HIGH_Z = 1.3; // above the waist: gripper trigger
const SHOULDER_OFFSET: Vec3 = [0.0, -0.2, 0.45];
export const WRIST_NEUTRAL: Vec3 = [0.3, 0.0, -0.2]; // relative to the shoulder
const RIGHT_DROP = 0.8; // lowers the wrist below the waist: homing trigger

// per hand: thumb, index, middle, ring, pinky with four segments each
const FINGER_BASES = [0, 4, 8, 12, 16];
const GRIP_FINGERS = FINGER_BASES.slice(1);

export interface HandBlock {
  pos: Float32Array; // HAND_SEGMENTS x 3
  quat: Float32Array; // HAND_SEGMENTS x 4
}

// Synthetic hand whose detected closure equals the given value: the four
// non-thumb fingers curl by closure * 90 degrees spread over their joints.
export function handSegments(closure: number): HandBlock {
  const c = Math.min(1, Math.max(0, closure));
  const pos = new Float32Array(HAND_SEGMENTS * 3);
  const quat = new Float32Array(HAND_SEGMENTS * 4);
  for (let i = 0; i < HAND_SEGMENTS; i++) {
    quat[i * 4] = 1.0;
  }
  const half = (c * (Math.PI / 2)) / 2;
  const step: Quat = [Math.cos(half), 0, Math.sin(half), 0];
  FINGER_BASES.forEach((base, f) => {
    for (let k = 0; k < 4; k++) {
      pos[(base + k) * 3] = k * 0.03;
      pos[(base + k) * 3 + 1] = (f - 2) * 0.02;
    }
    if (GRIP_FINGERS.includes(base)) {
      let q: Quat = [quat[base * 4], quat[base * 4 + 1], quat[base * 4 + 2], quat[base * 4 + 3]];
      for (let k = base + 1; k < base + 4; k++) {
        q = quatMultiply(q, step);
        quat.set(q, k * 4);
      }
    }
  });
  return { pos, quat };
}

export interface SuitGesture {
  pelvisXY: [number, number]; // displacement driving the walk command
  pelvisYaw: number;
  leftClosure: number; // 0 open, 1 fist
  rightClosure: number;
  leftHigh: boolean; // left hand above the waist selects the gripper trigger
  rightLow: boolean; // right hand below the waist selects the homing trigger
  wristOffset: Vec3; // right wrist displacement from its neutral pose
  wristRpy: Vec3; // right wrist orientation, roll pitch yaw
}

export function neutralGesture(): SuitGesture {
  return {
    pelvisXY: [0, 0],
    pelvisYaw: 0,
    leftClosure: 0,
    rightClosure: 0,
    leftHigh: false,
    rightLow: false,
    wristOffset: [0, 0, 0],
    wristRpy: [0, 0, 0],
  };
}

// One synthetic capture sample for the current gesture. Matches the
// scripted-operator geometry: pelvis at z = 1, right shoulder offset
// [0, -0.2, 0.45], wrist neutral [0.3, 0, -0.2] from the shoulder.
export function synthesizeFrame(t: number, g: SuitGesture): SkeletonFrame {
  const bodyPos = new Float32Array(BODY_SEGMENTS * 3);
  const bodyQuat = new Float32Array(BODY_SEGMENTS * 4);
  for (let i = 0; i < BODY_SEGMENTS; i++) {
    bodyQuat[i * 4] = 1.0;
  }
  const yawQuat = quatFromAxisAngle([0, 0, 1], g.pelvisYaw);

  const pelvis: Vec3 = [g.pelvisXY[0], g.pelvisXY[1], PELVIS_Z];
  setRow3(bodyPos, PELVIS, pelvis);
  bodyQuat.set(yawQuat, PELVIS * 4);

  const shoulder = addVec(pelvis, quatRotate(yawQuat, SHOULDER_OFFSET));
  setRow3(bodyPos, RIGHT_SHOULDER, shoulder);

  const wristLocal: Vec3 = [
    WRIST_NEUTRAL[0] + g.wristOffset[0],
    WRIST_NEUTRAL[1] + g.wristOffset[1],
    WRIST_NEUTRAL[2] + g.wristOffset[2] - (g.rightLow ? RIGHT_DROP : 0),
  ];
  setRow3(bodyPos, RIGHT_WRIST, addVec(shoulder, quatRotate(yawQuat, wristLocal)));
  const wristQuat = quatMultiply(
    yawQuat,
    quatMultiply(
      quatFromAxisAngle([0, 0, 1], g.wristRpy[2]),
      quatMultiply(
        quatFromAxisAngle([0, 1, 0], g.wristRpy[1]),
        quatFromAxisAngle([1, 0, 0], g.wristRpy[0]),
      ),
    ),
  );
  bodyQuat.set(wristQuat, RIGHT_WRIST * 4);

  const leftZ = g.leftHigh ? LEFT_HIGH_Z : LEFT_LOW_Z;
  setRow3(
    bodyPos,
    LEFT_WRIST,
    addVec(pelvis, quatRotate(yawQuat, [0.25, 0.25, leftZ - PELVIS_Z])),
  );

  const left = handSegments(g.leftClosure);
  const right = handSegments(g.rightClosure);
  return {
    kind: "skeleton",
    timestamp: t,
    bodyPos,
    bodyQuat,
    leftHandPos: left.pos,
    leftHandQuat: left.quat,
    rightHandPos: right.pos,
    rightHandQuat: right.quat,
  };
}

function setRow3(block: Float32Array, row: number, v: Vec3): void {
  block[row * 3] = v[0];
  block[row * 3 + 1] = v[1];
  block[row * 3 + 2] = v[2];
}

function addVec(a: Vec3, b: Vec3): Vec3 {
  return [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
}
