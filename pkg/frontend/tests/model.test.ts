// Forward kinematics against poses computed by the service's kinematics
// for the default model, covering the neutral stance and random states.

import { readFileSync } from "node:fs";

import { describe, expect, it } from "vitest";

import { ModelDocument, Quat, RobotStructure } from "../src/model.js";

interface FkCase {
  base_pos: number[];
  base_quat: number[];
  q: number[];
  frames: Record<string, { pos: number[]; quat: number[] }>;
}

const fixtures: { model: ModelDocument; cases: FkCase[] } = JSON.parse(
  readFileSync(new URL("../fixtures/fk_fixtures.json", import.meta.url), "utf8"),
);

describe("robot structure", () => {
  const structure = new RobotStructure(fixtures.model);

  it("derives the actuated order from the document", () => {
    expect(structure.actuatedNames.length).toBe(18);
    expect(structure.actuatedNames[0]).toBe("lf_hip_roll");
    expect(structure.baseLink).toBe("base");
    expect(structure.contactNames).toEqual(["lf_foot", "rf_foot", "lh_foot", "rh_foot"]);
  });

  it("rejects a joint count mismatch", () => {
    expect(() => structure.linkPoses([0, 0, 0], [1, 0, 0, 0], new Float32Array(5))).toThrow(
      /18 joint values/,
    );
  });

  fixtures.cases.forEach((fkCase, index) => {
    it(`matches the reference poses for case ${index}`, () => {
      const poses = structure.linkPoses(fkCase.base_pos, fkCase.base_quat, fkCase.q);
      for (const [name, want] of Object.entries(fkCase.frames)) {
        const got = structure.framePose(poses, name);
        for (let k = 0; k < 3; k++) {
          expect(Math.abs(got.pos[k] - want.pos[k])).toBeLessThan(1e-9);
        }
        // q and -q are the same rotation
        const dot = quatDot(got.quat, want.quat as Quat);
        expect(Math.abs(Math.abs(dot) - 1)).toBeLessThan(1e-9);
      }
    });
  });
});

function quatDot(a: Quat, b: Quat): number {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3];
}
