// Wire codec mirroring the service's binary protocol: a 6-byte header
// (version u8, type u8, payload length u32) followed by a packed
// little-endian payload. Floats are f32 except timestamps, which are f64.

export const PROTOCOL_VERSION = 1;

export const MSG_SKELETON = 1;
export const MSG_COMMAND = 2;
export const MSG_ROBOT_STATE = 3;
export const MSG_POINT_CLOUD = 4;
export const MSG_IMAGE_META = 5;
export const MSG_GAMEPAD = 6;
export const MSG_ACK = 7;

export const BODY_SEGMENTS = 19;
export const HAND_SEGMENTS = 20;

const HEADER_SIZE = 6;

export class ProtocolError extends Error {}
export class TruncatedMessage extends ProtocolError {}
export class BadVersion extends ProtocolError {}
export class BadType extends ProtocolError {}
export class LengthMismatch extends ProtocolError {}

export interface SkeletonFrame {
  kind: "skeleton";
  timestamp: number;
  bodyPos: Float32Array; // BODY_SEGMENTS x 3, row major
  bodyQuat: Float32Array; // BODY_SEGMENTS x 4, [w, x, y, z]
  leftHandPos: Float32Array; // HAND_SEGMENTS x 3
  leftHandQuat: Float32Array;
  rightHandPos: Float32Array;
  rightHandQuat: Float32Array;
}

export interface CommandMessage {
  kind: "command";
  timestamp: number;
  armActive: boolean;
  walkActive: boolean;
  gripperClosed: boolean;
  homingActive: boolean;
  armPose: Float32Array; // [x, z, roll, pitch, yaw]
  walk: Float32Array; // [vx, vy, wz]
}

export interface RobotState {
  kind: "robot_state";
  timestamp: number;
  basePos: Float32Array;
  baseQuat: Float32Array; // [w, x, y, z]
  q: Float32Array;
  qd: Float32Array;
  tau: Float32Array;
  contactForces: Float32Array; // nContacts x 3, row major
  nContacts: number;
  triggerMask: number;
  status: number;
}

export interface PointCloud {
  kind: "point_cloud";
  points: Float32Array; // n x 3
  colors: Uint8Array; // n x 3
  count: number;
}

export interface ImageMeta {
  kind: "image_meta";
  timestamp: number;
  width: number;
  height: number;
  compressed: boolean;
  data: Uint8Array;
}

export interface GamepadSnapshot {
  kind: "gamepad";
  timestamp: number;
  leftStick: Float32Array; // [x, y]
  rightStick: Float32Array;
  shoulders: Float32Array;
  buttons: number;
}

export interface Ack {
  kind: "ack";
  timestamp: number;
  code: number;
}

export type WireMessage =
  | SkeletonFrame
  | CommandMessage
  | RobotState
  | PointCloud
  | ImageMeta
  | GamepadSnapshot
  | Ack;

export const TRIGGER_GRIPPER = 1;
export const TRIGGER_WALKING = 2;
export const TRIGGER_ARM = 4;
export const TRIGGER_HOMING = 8;

export const STATUS_OK = 0;
export const STATUS_DEGRADED = 1;
export const STATUS_FAULT = 2;

class Writer {
  private view: DataView;
  private offset = 0;

  constructor(size: number) {
    this.view = new DataView(new ArrayBuffer(size));
  }

  f64(v: number): void {
    this.view.setFloat64(this.offset, v, true);
    this.offset += 8;
  }

  f32Block(values: ArrayLike<number>): void {
    for (let i = 0; i < values.length; i++) {
      this.view.setFloat32(this.offset, values[i], true);
      this.offset += 4;
    }
  }

  u8(v: number): void {
    this.view.setUint8(this.offset, v & 0xff);
    this.offset += 1;
  }

  u16(v: number): void {
    this.view.setUint16(this.offset, v, true);
    this.offset += 2;
  }

  u32(v: number): void {
    this.view.setUint32(this.offset, v >>> 0, true);
    this.offset += 4;
  }

  bytes(data: Uint8Array): void {
    new Uint8Array(this.view.buffer, this.offset, data.length).set(data);
    this.offset += data.length;
  }

  finish(): Uint8Array {
    if (this.offset !== this.view.byteLength) {
      throw new ProtocolError(
        `encoder wrote ${this.offset} of ${this.view.byteLength} planned bytes`,
      );
    }
    return new Uint8Array(this.view.buffer);
  }
}

class Reader {
  private view: DataView;
  private base: Uint8Array;
  offset = 0;

  constructor(payload: Uint8Array) {
    this.base = payload;
    this.view = new DataView(payload.buffer, payload.byteOffset, payload.byteLength);
  }

  get length(): number {
    return this.view.byteLength;
  }

  private need(count: number): void {
    if (this.offset + count > this.view.byteLength) {
      throw new LengthMismatch("payload shorter than its declared contents");
    }
  }

  f64(): number {
    this.need(8);
    const v = this.view.getFloat64(this.offset, true);
    this.offset += 8;
    return v;
  }

  f32Block(count: number): Float32Array {
    this.need(4 * count);
    const out = new Float32Array(count);
    for (let i = 0; i < count; i++) {
      out[i] = this.view.getFloat32(this.offset, true);
      this.offset += 4;
    }
    return out;
  }

  u8(): number {
    this.need(1);
    const v = this.view.getUint8(this.offset);
    this.offset += 1;
    return v;
  }

  u16(): number {
    this.need(2);
    const v = this.view.getUint16(this.offset, true);
    this.offset += 2;
    return v;
  }

  u32(): number {
    this.need(4);
    const v = this.view.getUint32(this.offset, true);
    this.offset += 4;
    return v;
  }

  bytes(count: number): Uint8Array {
    this.need(count);
    const out = this.base.slice(this.offset, this.offset + count);
    this.offset += count;
    return out;
  }

  done(): void {
    if (this.offset !== this.view.byteLength) {
      throw new LengthMismatch(
        `${this.view.byteLength - this.offset} trailing bytes in payload`,
      );
    }
  }
}

const SKELETON_ROWS = BODY_SEGMENTS + 2 * HAND_SEGMENTS;
const SKELETON_PAYLOAD = 8 + SKELETON_ROWS * 7 * 4;

function checkBlock(name: string, block: ArrayLike<number>, length: number): void {
  if (block.length !== length) {
    throw new ProtocolError(`${name} needs ${length} values, got ${block.length}`);
  }
}

function encodeSkeleton(m: SkeletonFrame): Uint8Array {
  checkBlock("bodyPos", m.bodyPos, BODY_SEGMENTS * 3);
  checkBlock("bodyQuat", m.bodyQuat, BODY_SEGMENTS * 4);
  for (const [pos, quat] of [
    [m.leftHandPos, m.leftHandQuat],
    [m.rightHandPos, m.rightHandQuat],
  ] as const) {
    checkBlock("handPos", pos, HAND_SEGMENTS * 3);
    checkBlock("handQuat", quat, HAND_SEGMENTS * 4);
  }
  const w = new Writer(SKELETON_PAYLOAD);
  w.f64(m.timestamp);
  const blocks: Array<[Float32Array, Float32Array, number]> = [
    [m.bodyPos, m.bodyQuat, BODY_SEGMENTS],
    [m.leftHandPos, m.leftHandQuat, HAND_SEGMENTS],
    [m.rightHandPos, m.rightHandQuat, HAND_SEGMENTS],
  ];
  for (const [pos, quat, rows] of blocks) {
    for (let r = 0; r < rows; r++) {
      w.f32Block(pos.subarray(r * 3, r * 3 + 3));
      w.f32Block(quat.subarray(r * 4, r * 4 + 4));
    }
  }
  return w.finish();
}

function decodeSkeleton(payload: Uint8Array): SkeletonFrame {
  if (payload.length !== SKELETON_PAYLOAD) {
    throw new LengthMismatch(
      `skeleton payload is ${payload.length} bytes, expected ${SKELETON_PAYLOAD}`,
    );
  }
  const r = new Reader(payload);
  const timestamp = r.f64();
  const blocks: Array<[Float32Array, Float32Array]> = [];
  for (const rows of [BODY_SEGMENTS, HAND_SEGMENTS, HAND_SEGMENTS]) {
    const pos = new Float32Array(rows * 3);
    const quat = new Float32Array(rows * 4);
    for (let i = 0; i < rows; i++) {
      pos.set(r.f32Block(3), i * 3);
      quat.set(r.f32Block(4), i * 4);
    }
    blocks.push([pos, quat]);
  }
  r.done();
  return {
    kind: "skeleton",
    timestamp,
    bodyPos: blocks[0][0],
    bodyQuat: blocks[0][1],
    leftHandPos: blocks[1][0],
    leftHandQuat: blocks[1][1],
    rightHandPos: blocks[2][0],
    rightHandQuat: blocks[2][1],
  };
}

function encodeCommand(m: CommandMessage): Uint8Array {
  checkBlock("armPose", m.armPose, 5);
  checkBlock("walk", m.walk, 3);
  const flags =
    (m.armActive ? 1 : 0) |
    (m.walkActive ? 2 : 0) |
    (m.gripperClosed ? 4 : 0) |
    (m.homingActive ? 8 : 0);
  const w = new Writer(9 + 4 * 8);
  w.f64(m.timestamp);
  w.u8(flags);
  w.f32Block(m.armPose);
  w.f32Block(m.walk);
  return w.finish();
}

function decodeCommand(payload: Uint8Array): CommandMessage {
  if (payload.length !== 41) {
    throw new LengthMismatch(`command payload is ${payload.length} bytes, expected 41`);
  }
  const r = new Reader(payload);
  const timestamp = r.f64();
  const flags = r.u8();
  const armPose = r.f32Block(5);
  const walk = r.f32Block(3);
  r.done();
  return {
    kind: "command",
    timestamp,
    armActive: (flags & 1) !== 0,
    walkActive: (flags & 2) !== 0,
    gripperClosed: (flags & 4) !== 0,
    homingActive: (flags & 8) !== 0,
    armPose,
    walk,
  };
}

function encodeRobotState(m: RobotState): Uint8Array {
  const n = m.q.length;
  if (m.qd.length !== n || m.tau.length !== n) {
    throw new ProtocolError("joint arrays must share one length");
  }
  checkBlock("basePos", m.basePos, 3);
  checkBlock("baseQuat", m.baseQuat, 4);
  const nc = m.contactForces.length / 3;
  if (!Number.isInteger(nc)) {
    throw new ProtocolError("contact forces need 3 values per contact");
  }
  const w = new Writer(8 + 12 + 16 + 2 + 12 * n + 1 + 12 * nc + 2);
  w.f64(m.timestamp);
  w.f32Block(m.basePos);
  w.f32Block(m.baseQuat);
  w.u16(n);
  w.f32Block(m.q);
  w.f32Block(m.qd);
  w.f32Block(m.tau);
  w.u8(nc);
  w.f32Block(m.contactForces);
  w.u8(m.triggerMask);
  w.u8(m.status);
  return w.finish();
}

function decodeRobotState(payload: Uint8Array): RobotState {
  const r = new Reader(payload);
  const timestamp = r.f64();
  const basePos = r.f32Block(3);
  const baseQuat = r.f32Block(4);
  const n = r.u16();
  const q = r.f32Block(n);
  const qd = r.f32Block(n);
  const tau = r.f32Block(n);
  const nc = r.u8();
  const contactForces = r.f32Block(nc * 3);
  const triggerMask = r.u8();
  const status = r.u8();
  r.done();
  return {
    kind: "robot_state",
    timestamp,
    basePos,
    baseQuat,
    q,
    qd,
    tau,
    contactForces,
    nContacts: nc,
    triggerMask,
    status,
  };
}

function encodeCloud(m: PointCloud): Uint8Array {
  const n = m.count;
  if (m.points.length !== n * 3 || m.colors.length !== n * 3) {
    throw new ProtocolError("point cloud needs 3 floats and 3 bytes per point");
  }
  const w = new Writer(4 + 15 * n);
  w.u32(n);
  for (let i = 0; i < n; i++) {
    w.f32Block(m.points.subarray(i * 3, i * 3 + 3));
    w.bytes(new Uint8Array([m.colors[i * 3], m.colors[i * 3 + 1], m.colors[i * 3 + 2]]));
  }
  return w.finish();
}

function decodeCloud(payload: Uint8Array): PointCloud {
  if (payload.length < 4) {
    throw new LengthMismatch("point cloud payload shorter than its count field");
  }
  const r = new Reader(payload);
  const n = r.u32();
  if (payload.length !== 4 + 15 * n) {
    throw new LengthMismatch(
      `point cloud payload is ${payload.length} bytes, expected ${4 + 15 * n}`,
    );
  }
  const points = new Float32Array(n * 3);
  const colors = new Uint8Array(n * 3);
  for (let i = 0; i < n; i++) {
    points.set(r.f32Block(3), i * 3);
    colors.set(r.bytes(3), i * 3);
  }
  r.done();
  return { kind: "point_cloud", points, colors, count: n };
}

function encodeImageMeta(m: ImageMeta): Uint8Array {
  const w = new Writer(17 + m.data.length);
  w.f64(m.timestamp);
  w.u16(m.width);
  w.u16(m.height);
  w.u8(m.compressed ? 1 : 0);
  w.u32(m.data.length);
  w.bytes(m.data);
  return w.finish();
}

function decodeImageMeta(payload: Uint8Array): ImageMeta {
  if (payload.length < 17) {
    throw new LengthMismatch("image meta payload shorter than its header");
  }
  const r = new Reader(payload);
  const timestamp = r.f64();
  const width = r.u16();
  const height = r.u16();
  const compressed = r.u8() !== 0;
  const count = r.u32();
  if (payload.length !== 17 + count) {
    throw new LengthMismatch("image meta byte count disagrees with payload length");
  }
  const data = r.bytes(count);
  r.done();
  return { kind: "image_meta", timestamp, width, height, compressed, data };
}

function encodeGamepad(m: GamepadSnapshot): Uint8Array {
  checkBlock("leftStick", m.leftStick, 2);
  checkBlock("rightStick", m.rightStick, 2);
  checkBlock("shoulders", m.shoulders, 2);
  const w = new Writer(36);
  w.f64(m.timestamp);
  w.f32Block(m.leftStick);
  w.f32Block(m.rightStick);
  w.f32Block(m.shoulders);
  w.u32(m.buttons);
  return w.finish();
}

function decodeGamepad(payload: Uint8Array): GamepadSnapshot {
  if (payload.length !== 36) {
    throw new LengthMismatch(`gamepad payload is ${payload.length} bytes, expected 36`);
  }
  const r = new Reader(payload);
  const timestamp = r.f64();
  const leftStick = r.f32Block(2);
  const rightStick = r.f32Block(2);
  const shoulders = r.f32Block(2);
  const buttons = r.u32();
  r.done();
  return { kind: "gamepad", timestamp, leftStick, rightStick, shoulders, buttons };
}

function encodeAck(m: Ack): Uint8Array {
  const w = new Writer(12);
  w.f64(m.timestamp);
  w.u32(m.code);
  return w.finish();
}

function decodeAck(payload: Uint8Array): Ack {
  if (payload.length !== 12) {
    throw new LengthMismatch(`ack payload is ${payload.length} bytes, expected 12`);
  }
  const r = new Reader(payload);
  const timestamp = r.f64();
  const code = r.u32();
  r.done();
  return { kind: "ack", timestamp, code };
}

const TYPE_OF_KIND: Record<WireMessage["kind"], number> = {
  skeleton: MSG_SKELETON,
  command: MSG_COMMAND,
  robot_state: MSG_ROBOT_STATE,
  point_cloud: MSG_POINT_CLOUD,
  image_meta: MSG_IMAGE_META,
  gamepad: MSG_GAMEPAD,
  ack: MSG_ACK,
};

type Decoder = (payload: Uint8Array) => WireMessage;

const DECODERS: Record<number, Decoder> = {
  [MSG_SKELETON]: decodeSkeleton,
  [MSG_COMMAND]: decodeCommand,
  [MSG_ROBOT_STATE]: decodeRobotState,
  [MSG_POINT_CLOUD]: decodeCloud,
  [MSG_IMAGE_META]: decodeImageMeta,
  [MSG_GAMEPAD]: decodeGamepad,
  [MSG_ACK]: decodeAck,
};

function encodePayload(message: WireMessage): Uint8Array {
  switch (message.kind) {
    case "skeleton":
      return encodeSkeleton(message);
    case "command":
      return encodeCommand(message);
    case "robot_state":
      return encodeRobotState(message);
    case "point_cloud":
      return encodeCloud(message);
    case "image_meta":
      return encodeImageMeta(message);
    case "gamepad":
      return encodeGamepad(message);
    case "ack":
      return encodeAck(message);
    default:
      throw new BadType(`cannot encode kind ${(message as WireMessage).kind}`);
  }
}

export function messageType(message: WireMessage): number {
  const t = TYPE_OF_KIND[message.kind];
  if (t === undefined) {
    throw new BadType(`cannot encode kind ${message.kind}`);
  }
  return t;
}

export function encode(message: WireMessage): Uint8Array {
  const payload = encodePayload(message);
  const out = new Uint8Array(HEADER_SIZE + payload.length);
  const view = new DataView(out.buffer);
  view.setUint8(0, PROTOCOL_VERSION);
  view.setUint8(1, messageType(message));
  view.setUint32(2, payload.length, true);
  out.set(payload, HEADER_SIZE);
  return out;
}

function checkHeader(buffer: Uint8Array): [number, number] {
  if (buffer.length < HEADER_SIZE) {
    throw new TruncatedMessage(
      `buffer holds ${buffer.length} bytes, header needs ${HEADER_SIZE}`,
    );
  }
  const view = new DataView(buffer.buffer, buffer.byteOffset, buffer.byteLength);
  const version = view.getUint8(0);
  const kind = view.getUint8(1);
  const length = view.getUint32(2, true);
  if (version !== PROTOCOL_VERSION) {
    throw new BadVersion(`protocol version ${version}, expected ${PROTOCOL_VERSION}`);
  }
  if (!(kind in DECODERS)) {
    throw new BadType(`unknown message type byte ${kind}`);
  }
  return [kind, length];
}

export function decode(buffer: Uint8Array): WireMessage {
  const [kind, length] = checkHeader(buffer);
  const end = HEADER_SIZE + length;
  if (buffer.length < end) {
    throw new TruncatedMessage(
      `payload truncated: have ${buffer.length - HEADER_SIZE} of ${length} bytes`,
    );
  }
  if (buffer.length > end) {
    throw new LengthMismatch(`${buffer.length - end} trailing bytes after one message`);
  }
  return DECODERS[kind](buffer.subarray(HEADER_SIZE, end));
}

// Incremental splitter for a byte stream of concatenated messages.
export class StreamDecoder {
  private buffer = new Uint8Array(0);

  get pending(): number {
    return this.buffer.length;
  }

  feed(chunk: Uint8Array): WireMessage[] {
    if (this.buffer.length === 0) {
      this.buffer = new Uint8Array(chunk);
    } else {
      const joined = new Uint8Array(this.buffer.length + chunk.length);
      joined.set(this.buffer, 0);
      joined.set(chunk, this.buffer.length);
      this.buffer = joined;
    }
    const out: WireMessage[] = [];
    for (;;) {
      let header: [number, number];
      try {
        header = checkHeader(this.buffer);
      } catch (err) {
        if (err instanceof TruncatedMessage) {
          break;
        }
        throw err;
      }
      const end = HEADER_SIZE + header[1];
      if (this.buffer.length < end) {
        break;
      }
      out.push(DECODERS[header[0]](this.buffer.subarray(HEADER_SIZE, end)));
      this.buffer = this.buffer.slice(end);
    }
    return out;
  }
}
