// Round-trip and robustness checks for the wire codec on randomized
// messages, plus stream splitting across arbitrary fragmentation.

import { describe, expect, it } from "vitest";

import {
  Ack,
  BODY_SEGMENTS,
  CommandMessage,
  GamepadSnapshot,
  HAND_SEGMENTS,
  ImageMeta,
  PointCloud,
  ProtocolError,
  RobotState,
  StreamDecoder,
  WireMessage,
  decode,
  encode,
} from "../src/codec.js";

// deterministic 32-bit linear congruential generator
function makeRng(seed: number): () => number {
  let s = seed >>> 0;
  return () => {
    s = (Math.imul(s, 1664525) + 1013904223) >>> 0;
    return s / 2 ** 32;
  };
}

function f32s(rng: () => number, n: number, scale = 2): Float32Array {
  const out = new Float32Array(n);
  for (let i = 0; i < n; i++) {
    out[i] = (rng() - 0.5) * scale;
  }
  return out;
}

function randomSkeleton(rng: () => number, t: number): WireMessage {
  return {
    kind: "skeleton",
    timestamp: t,
    bodyPos: f32s(rng, BODY_SEGMENTS * 3),
    bodyQuat: f32s(rng, BODY_SEGMENTS * 4),
    leftHandPos: f32s(rng, HAND_SEGMENTS * 3),
    leftHandQuat: f32s(rng, HAND_SEGMENTS * 4),
    rightHandPos: f32s(rng, HAND_SEGMENTS * 3),
    rightHandQuat: f32s(rng, HAND_SEGMENTS * 4),
  };
}

function randomState(rng: () => number, t: number): RobotState {
  const n = Math.floor(rng() * 24);
  const nc = Math.floor(rng() * 6);
  return {
    kind: "robot_state",
    timestamp: t,
    basePos: f32s(rng, 3),
    baseQuat: f32s(rng, 4),
    q: f32s(rng, n),
    qd: f32s(rng, n),
    tau: f32s(rng, n),
    contactForces: f32s(rng, nc * 3, 100),
    nContacts: nc,
    triggerMask: Math.floor(rng() * 16),
    status: Math.floor(rng() * 3),
  };
}

function randomCloud(rng: () => number): PointCloud {
  const n = Math.floor(rng() * 50);
  const colors = new Uint8Array(n * 3);
  for (let i = 0; i < colors.length; i++) {
    colors[i] = Math.floor(rng() * 256);
  }
  return { kind: "point_cloud", points: f32s(rng, n * 3, 6), colors, count: n };
}

function sampleMessages(rng: () => number, t: number): WireMessage[] {
  const command: CommandMessage = {
    kind: "command",
    timestamp: t,
    armActive: rng() < 0.5,
    walkActive: rng() < 0.5,
    gripperClosed: rng() < 0.5,
    homingActive: rng() < 0.5,
    armPose: f32s(rng, 5),
    walk: f32s(rng, 3),
  };
  const data = new Uint8Array(Math.floor(rng() * 40));
  for (let i = 0; i < data.length; i++) {
    data[i] = Math.floor(rng() * 256);
  }
  const meta: ImageMeta = {
    kind: "image_meta",
    timestamp: t,
    width: Math.floor(rng() * 2000),
    height: Math.floor(rng() * 2000),
    compressed: rng() < 0.5,
    data,
  };
  const pad: GamepadSnapshot = {
    kind: "gamepad",
    timestamp: t,
    leftStick: f32s(rng, 2, 2),
    rightStick: f32s(rng, 2, 2),
    shoulders: f32s(rng, 2, 1),
    buttons: Math.floor(rng() * 16),
  };
  const ack: Ack = { kind: "ack", timestamp: t, code: Math.floor(rng() * 100) };
  return [randomSkeleton(rng, t), command, randomState(rng, t), randomCloud(rng), meta, pad, ack];
}

function expectSame(a: WireMessage, b: WireMessage): void {
  expect(b.kind).toBe(a.kind);
  for (const [key, value] of Object.entries(a)) {
    const other = (b as unknown as Record<string, unknown>)[key];
    if (value instanceof Float32Array || value instanceof Uint8Array) {
      expect(Array.from(other as ArrayLike<number>)).toEqual(Array.from(value));
    } else {
      expect(other).toEqual(value);
    }
  }
}

describe("codec round trips", () => {
  it("reproduces every field for every message type", () => {
    const rng = makeRng(1234);
    for (let round = 0; round < 200; round++) {
      for (const message of sampleMessages(rng, round * 0.01)) {
        expectSame(message, decode(encode(message)));
      }
    }
  });

  it("rejects garbage without crashing", () => {
    const rng = makeRng(99);
    for (let i = 0; i < 500; i++) {
      const blob = new Uint8Array(Math.floor(rng() * 64));
      for (let k = 0; k < blob.length; k++) {
        blob[k] = Math.floor(rng() * 256);
      }
      try {
        decode(blob);
      } catch (err) {
        expect(err).toBeInstanceOf(ProtocolError);
      }
    }
  });

  it("rejects trailing bytes and truncations", () => {
    const blob = encode({ kind: "ack", timestamp: 1, code: 2 });
    expect(() => decode(blob.subarray(0, blob.length - 1))).toThrow(ProtocolError);
    const padded = new Uint8Array(blob.length + 1);
    padded.set(blob, 0);
    expect(() => decode(padded)).toThrow(ProtocolError);
  });
});

describe("stream decoder", () => {
  it("splits a concatenated stream regardless of chunking", () => {
    const rng = makeRng(7);
    const messages = [
      ...sampleMessages(rng, 0.01),
      ...sampleMessages(rng, 0.02),
      ...sampleMessages(rng, 0.03),
    ];
    const chunks = messages.map((m) => encode(m));
    const total = chunks.reduce((n, c) => n + c.length, 0);
    const stream = new Uint8Array(total);
    let at = 0;
    for (const c of chunks) {
      stream.set(c, at);
      at += c.length;
    }
    for (const chunkSize of [1, 3, 17, 1000, total]) {
      const decoder = new StreamDecoder();
      const out: WireMessage[] = [];
      for (let i = 0; i < total; i += chunkSize) {
        out.push(...decoder.feed(stream.subarray(i, Math.min(total, i + chunkSize))));
      }
      expect(out.length).toBe(messages.length);
      expect(decoder.pending).toBe(0);
      messages.forEach((m, i) => expectSame(m, out[i]));
    }
  });
});
