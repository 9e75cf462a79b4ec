// Golden parity with the service codec: fixture bytes were produced by the
// Python encoder, so decoding them must reproduce every field and
// re-encoding the fields must reproduce the bytes exactly.

import { readFileSync } from "node:fs";

import { describe, expect, it } from "vitest";

import { WireMessage, decode, encode } from "../src/codec.js";

interface Entry {
  kind: string;
  hex: string;
  fields: Record<string, unknown>;
}

const fixtures: { entries: Entry[] } = JSON.parse(
  readFileSync(new URL("../fixtures/wire_fixtures.json", import.meta.url), "utf8"),
);

function fromHex(hex: string): Uint8Array {
  const out = new Uint8Array(hex.length / 2);
  for (let i = 0; i < out.length; i++) {
    out[i] = parseInt(hex.slice(i * 2, i * 2 + 2), 16);
  }
  return out;
}

function flat(rows: unknown): Float32Array {
  return new Float32Array((rows as number[][]).flat());
}

// Rebuild the console-side message from the Python-decoded field dump.
function messageOf(entry: Entry): WireMessage {
  const f = entry.fields;
  switch (entry.kind) {
    case "skeleton":
      return {
        kind: "skeleton",
        timestamp: f.timestamp as number,
        bodyPos: flat(f.body_pos),
        bodyQuat: flat(f.body_quat),
        leftHandPos: flat(f.left_hand_pos),
        leftHandQuat: flat(f.left_hand_quat),
        rightHandPos: flat(f.right_hand_pos),
        rightHandQuat: flat(f.right_hand_quat),
      };
    case "command":
      return {
        kind: "command",
        timestamp: f.timestamp as number,
        armActive: f.arm_active as boolean,
        walkActive: f.walk_active as boolean,
        gripperClosed: f.gripper_closed as boolean,
        homingActive: f.homing_active as boolean,
        armPose: new Float32Array(f.arm_pose as number[]),
        walk: new Float32Array(f.walk as number[]),
      };
    case "robot_state":
    case "robot_state_empty": {
      const forces = f.contact_forces as number[][];
      return {
        kind: "robot_state",
        timestamp: f.timestamp as number,
        basePos: new Float32Array(f.base_pos as number[]),
        baseQuat: new Float32Array(f.base_quat as number[]),
        q: new Float32Array(f.q as number[]),
        qd: new Float32Array(f.qd as number[]),
        tau: new Float32Array(f.tau as number[]),
        contactForces: flat(forces),
        nContacts: forces.length,
        triggerMask: f.trigger_mask as number,
        status: f.status as number,
      };
    }
    case "point_cloud":
    case "point_cloud_empty": {
      const points = f.points as number[][];
      return {
        kind: "point_cloud",
        points: flat(points),
        colors: new Uint8Array((f.colors as number[][]).flat()),
        count: points.length,
      };
    }
    case "image_meta":
      return {
        kind: "image_meta",
        timestamp: f.timestamp as number,
        width: f.width as number,
        height: f.height as number,
        compressed: f.compressed as boolean,
        data: new Uint8Array(f.data as number[]),
      };
    case "gamepad":
      return {
        kind: "gamepad",
        timestamp: f.timestamp as number,
        leftStick: new Float32Array(f.left_stick as number[]),
        rightStick: new Float32Array(f.right_stick as number[]),
        shoulders: new Float32Array(f.shoulders as number[]),
        buttons: f.buttons as number,
      };
    case "ack":
      return { kind: "ack", timestamp: f.timestamp as number, code: f.code as number };
    default:
      throw new Error(`fixture kind ${entry.kind} not handled`);
  }
}

describe("golden wire fixtures", () => {
  it("covers every message type", () => {
    const kinds = new Set(fixtures.entries.map((e) => e.kind.replace(/_empty$/, "")));
    expect([...kinds].sort()).toEqual(
      ["ack", "command", "gamepad", "image_meta", "point_cloud", "robot_state", "skeleton"].sort(),
    );
  });

  for (const entry of fixtures.entries) {
    it(`decodes and re-encodes ${entry.kind} byte for byte`, () => {
      const blob = fromHex(entry.hex);
      const want = messageOf(entry);
      const got = decode(blob);
      expect(got.kind).toBe(want.kind);
      for (const [key, value] of Object.entries(want)) {
        const other = (got as unknown as Record<string, unknown>)[key];
        if (value instanceof Float32Array || value instanceof Uint8Array) {
          expect(Array.from(other as ArrayLike<number>)).toEqual(Array.from(value));
        } else {
          expect(other).toEqual(value);
        }
      }
      expect(Buffer.from(encode(want)).toString("hex")).toBe(entry.hex);
    });
  }
});
