// Operator input sources: the virtual-suit gesture driver, the gamepad
// sampler, and the send-rate limiter that keeps the console at or below
// one control frame per 10 ms.

import { GamepadSnapshot } from "./codec.js";
import { SuitGesture, neutralGesture } from "./skeleton.js";

export const MIN_SEND_INTERVAL_MS = 10; // one skeleton frame per 10 ms, tops
export const GAMEPAD_INTERVAL_MS = 16; // snapshots at roughly 60 Hz

export type Clock = () => number; // milliseconds

// Allows at most one send per interval; callers ask before each send.
export class RateLimiter {
  private last = -Infinity;

  constructor(
    private intervalMs: number,
    private clock: Clock = () => performance.now(),
  ) {}

  tryAcquire(): boolean {
    const now = this.clock();
    if (now - this.last < this.intervalMs) {
      return false;
    }
    this.last = now;
    return true;
  }
}

export interface KeyState {
  forward: boolean; // W
  back: boolean; // S
  left: boolean; // A
  right: boolean; // D
  yawLeft: boolean; // Q
  yawRight: boolean; // E
  leftClose: boolean; // F, closes the left hand
  rightClose: boolean; // J, closes the right hand
  leftHigh: boolean; // C toggles, held state passed here
  rightLow: boolean; // V toggles
}

export function emptyKeys(): KeyState {
  return {
    forward: false,
    back: false,
    left: false,
    right: false,
    yawLeft: false,
    yawRight: false,
    leftClose: false,
    rightClose: false,
    leftHigh: false,
    rightLow: false,
  };
}

const PELVIS_RATE = 0.25; // m/s of operator pelvis displacement while held
const PELVIS_SPAN = 0.35; // m, maximum displacement from the anchor
const YAW_RATE = 0.9; // rad/s
const YAW_SPAN = 0.7; // rad
const RETURN_RATE = 1.2; // m/s drift back to neutral with no key held
const CLOSURE_RATE = 12.0; // 1/s, fast enough to beat the debounce cleanly

// Integrates held keys and the wrist marker into a suit gesture. WASD-style
// keys displace the pelvis from its neutral anchor (retargeting turns the
// standing offset into a steady walk velocity); releasing them glides the
// pelvis back so the commanded velocity returns to zero.
export class VirtualSuit {
  gesture: SuitGesture = neutralGesture();

  step(dt: number, keys: KeyState): SuitGesture {
    const g = this.gesture;
    g.pelvisXY[0] = slide(g.pelvisXY[0], axis(keys.forward, keys.back), dt, PELVIS_SPAN);
    g.pelvisXY[1] = slide(g.pelvisXY[1], axis(keys.left, keys.right), dt, PELVIS_SPAN);
    g.pelvisYaw = slide(g.pelvisYaw, axis(keys.yawLeft, keys.yawRight), dt, YAW_SPAN, YAW_RATE);
    g.leftClosure = approach(g.leftClosure, keys.leftClose ? 1 : 0, CLOSURE_RATE * dt);
    g.rightClosure = approach(g.rightClosure, keys.rightClose ? 1 : 0, CLOSURE_RATE * dt);
    g.leftHigh = keys.leftHigh;
    g.rightLow = keys.rightLow;
    return g;
  }

  setWristOffset(x: number, y: number, z: number): void {
    this.gesture.wristOffset = [x, y, z];
  }

  setWristRpy(roll: number, pitch: number, yaw: number): void {
    this.gesture.wristRpy = [roll, pitch, yaw];
  }

  releaseAll(): void {
    this.gesture.leftClosure = 0;
    this.gesture.rightClosure = 0;
  }
}

function axis(pos: boolean, neg: boolean): number {
  return (pos ? 1 : 0) - (neg ? 1 : 0);
}

function slide(
  value: number,
  direction: number,
  dt: number,
  span: number,
  rate: number = PELVIS_RATE,
): number {
  if (direction !== 0) {
    const v = value + direction * rate * dt;
    return Math.min(span, Math.max(-span, v));
  }
  return approach(value, 0, RETURN_RATE * dt);
}

function approach(value: number, target: number, maxStep: number): number {
  const gap = target - value;
  if (Math.abs(gap) <= maxStep) {
    return target;
  }
  return value + Math.sign(gap) * maxStep;
}

// Gamepad button bits shared with the wire protocol.
export const BUTTON_GRIPPER = 1;
export const BUTTON_HOMING = 2;
export const BUTTON_LIFT = 4;
export const BUTTON_WRIST = 8;

export interface PadLike {
  axes: ReadonlyArray<number>;
  buttons: ReadonlyArray<{ pressed: boolean; value: number }>;
}

// Standard-mapping pad to wire snapshot: sticks pass through, the analog
// triggers become the shoulder pair, and A/B/LB/RB become the button bits.
export function padSnapshot(pad: PadLike, timestampS: number): GamepadSnapshot {
  const ax = (i: number) => (pad.axes.length > i ? clamp1(pad.axes[i]) : 0);
  const pressed = (i: number) => pad.buttons.length > i && pad.buttons[i].pressed;
  const trigger = (i: number) => (pad.buttons.length > i ? clamp01(pad.buttons[i].value) : 0);
  let buttons = 0;
  if (pressed(0)) buttons |= BUTTON_GRIPPER; // A
  if (pressed(1)) buttons |= BUTTON_HOMING; // B
  if (pressed(4)) buttons |= BUTTON_LIFT; // LB
  if (pressed(5)) buttons |= BUTTON_WRIST; // RB
  return {
    kind: "gamepad",
    timestamp: timestampS,
    // suit-forward convention: stick up (negative browser y) walks forward
    leftStick: new Float32Array([ax(0), -ax(1)]),
    rightStick: new Float32Array([ax(2), -ax(3)]),
    shoulders: new Float32Array([trigger(6), trigger(7)]),
    buttons,
  };
}

function clamp1(v: number): number {
  return Math.min(1, Math.max(-1, v));
}

function clamp01(v: number): number {
  return Math.min(1, Math.max(0, v));
}
