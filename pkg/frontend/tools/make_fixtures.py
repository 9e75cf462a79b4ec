"""Regenerate the golden fixtures the console tests compare against.

Run from the repository root with the telemanip package installed:

    python3 frontend/tools/make_fixtures.py

Writes frontend/fixtures/wire_fixtures.json (encoded bytes plus decoded
field values for every message type) and frontend/fixtures/fk_fixtures.json
(the default model document plus world frame poses for a few states).
"""

import json
from pathlib import Path

import numpy as np

from telemanip.kinematics import frame_pose
from telemanip.model import load_model, neutral_state
from telemanip.protocol import (
    Ack,
    CommandMessage,
    ImageMeta,
    PointCloud,
    RobotStateMessage,
    decode,
    encode,
)
from telemanip.scripts import synth_frame
from telemanip.teleop import GamepadSnapshot

OUT = Path(__file__).resolve().parent.parent / "fixtures"


def listify(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, bytes):
        return list(value)
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    return value


def wire_entry(kind, message):
    blob = encode(message)
    decoded = decode(blob)
    fields = {k: listify(v) for k, v in vars(decoded).items()}
    return {"kind": kind, "hex": blob.hex(), "fields": fields}


def wire_fixtures():
    rng = np.random.default_rng(7)
    frame = synth_frame(
        12.34,
        pelvis_xy=np.array([0.21, -0.14]),
        pelvis_yaw=0.37,
        left_z=0.7,
        left_closure=0.85,
        right_closure=0.15,
        wrist_offset=np.array([0.04, -0.02, 0.1]),
    )
    state = RobotStateMessage(
        timestamp=3.21,
        base_pos=rng.normal(size=3),
        base_quat=np.array([0.9, 0.1, -0.3, 0.2]) / np.linalg.norm([0.9, 0.1, -0.3, 0.2]),
        q=rng.normal(size=18),
        qd=rng.normal(size=18),
        tau=rng.normal(size=18),
        contact_forces=rng.normal(size=(4, 3)) * 40.0,
        trigger_mask=0b0110,
        status=1,
    )
    cloud = PointCloud(
        points=rng.normal(size=(25, 3)).astype(np.float32),
        colors=rng.integers(0, 256, size=(25, 3), dtype=np.uint8),
    )
    command = CommandMessage(
        timestamp=0.5,
        arm_active=True,
        walk_active=False,
        gripper_closed=True,
        homing_active=False,
        arm_pose=np.array([0.4, 0.3, 0.05, -0.1, 0.2]),
        walk=np.array([0.15, -0.05, 0.1]),
    )
    meta = ImageMeta(timestamp=9.0, width=320, height=240, compressed=True, data=bytes(range(17)))
    pad = GamepadSnapshot(
        timestamp=4.5,
        left_stick=np.array([0.3, -0.8]),
        right_stick=np.array([-0.2, 0.55]),
        shoulders=np.array([0.9, 0.0]),
        buttons=0b1010,
    )
    entries = [
        wire_entry("skeleton", frame),
        wire_entry("command", command),
        wire_entry("robot_state", state),
        wire_entry("point_cloud", cloud),
        wire_entry("image_meta", meta),
        wire_entry("gamepad", pad),
        wire_entry("ack", Ack(timestamp=1.25, code=3)),
        wire_entry(
            "robot_state_empty",
            RobotStateMessage(
                timestamp=0.0,
                base_pos=np.zeros(3),
                base_quat=np.array([1.0, 0, 0, 0]),
                q=np.zeros(0),
                qd=np.zeros(0),
                tau=np.zeros(0),
                contact_forces=np.zeros((0, 3)),
            ),
        ),
        wire_entry("point_cloud_empty", PointCloud(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.uint8))),
    ]
    return {"entries": entries}


FK_FRAMES = ("lf_foot", "rf_foot", "lh_foot", "rh_foot", "ee", "arm_link3", "lf_lower", "rh_upper")


def fk_case(model, state):
    frames = {}
    for name in FK_FRAMES:
        pos, quat = frame_pose(model, state, name)
        frames[name] = {"pos": pos.tolist(), "quat": quat.tolist()}
    return {
        "base_pos": state.base_pos.tolist(),
        "base_quat": state.base_quat.tolist(),
        "q": state.q_a.tolist(),
        "frames": frames,
    }


def fk_fixtures():
    import importlib.resources as resources

    doc = json.loads(resources.files("telemanip").joinpath("data/models/default.json").read_text())
    model = load_model("default")
    rng = np.random.default_rng(3)
    cases = [fk_case(model, neutral_state(model))]
    for _ in range(3):
        state = neutral_state(model)
        state.base_pos = state.base_pos + rng.normal(scale=0.2, size=3)
        raw = rng.normal(size=4)
        state.base_quat = raw / np.linalg.norm(raw)
        state.q_a = state.q_a + rng.normal(scale=0.3, size=model.actuated_count)
        cases.append(fk_case(model, state))
    return {"model": doc, "cases": cases}


def main():
    OUT.mkdir(exist_ok=True)
    (OUT / "wire_fixtures.json").write_text(json.dumps(wire_fixtures(), indent=1))
    (OUT / "fk_fixtures.json").write_text(json.dumps(fk_fixtures(), indent=1))
    print("wrote", OUT / "wire_fixtures.json")
    print("wrote", OUT / "fk_fixtures.json")


if __name__ == "__main__":
    main()
