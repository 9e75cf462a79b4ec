"""Scenario files, the scripted run loop, scene events, logs, and metrics.

A scenario JSON describes the scene (floor, target spheres, a box with a
lid handle and a wire grasp point, the experiment area), the input source,
and the run duration. run_scenario closes the 500 Hz control loop over the
simulator, detects scene events, and emits a wire-format log plus a metric
summary. Runs are deterministic: the same scenario and input frames give
bit-identical logs.
"""

from __future__ import annotations

import csv
import dataclasses
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .control import CONTROL_DT, SIM_DT, ControlError, ControlInputs, TrotController
from .gait import GaitParams
from .kinematics import frame_pose
from .model import RobotModel, default_model, neutral_state
from .protocol import (
    STATUS_DEGRADED,
    STATUS_OK,
    CommandMessage,
    RobotStateMessage,
    decode,
    encode,
    read_log,
    write_log,
)
from .rotations import quat_from_axis_angle
from .sim import step
from .teleop import SkeletonFrame, TeleopOutput, TeleopSession

TICKS_PER_FRAME = 5  # 500 Hz control, 100 Hz skeleton input

GRASP_RADIUS = 0.03
LID_RETRACT = 0.10
WIRE_PULL = 0.15
SLIP_TOLERANCE = 0.002

TRIGGER_GRIPPER = 1
TRIGGER_WALKING = 2
TRIGGER_ARM = 4
TRIGGER_HOMING = 8

TASKS = ("loco", "manip", "combo", "eod")


class ScenarioError(ValueError):
    pass


@dataclass
class TargetSphere:
    position: np.ndarray
    radius: float

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(3)
        if self.radius <= 0:
            raise ScenarioError("target radius must be positive")


@dataclass
class BoxPrimitive:
    """Closed box; the lid handle and the wire are grasp points."""

    position: np.ndarray
    size: np.ndarray
    handle: np.ndarray
    wire: np.ndarray

    def __post_init__(self):
        for name in ("position", "size", "handle", "wire"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float).reshape(3))
        if np.any(self.size <= 0):
            raise ScenarioError("box size must be positive")


@dataclass
class Scenario:
    name: str
    task: str
    duration: float
    seed: int = 0
    area_x: tuple[float, float] = (-1.5, 2.5)
    area_y: tuple[float, float] = (-1.5, 1.5)
    targets: dict[str, TargetSphere] = field(default_factory=dict)
    box: BoxPrimitive | None = None
    start_xy: np.ndarray = field(default_factory=lambda: np.zeros(2))
    start_yaw: float = 0.0
    gait: dict = field(default_factory=dict)

    def __post_init__(self):
        self.start_xy = np.asarray(self.start_xy, dtype=float).reshape(2)
        self.validate()

    def validate(self) -> None:
        if self.task not in TASKS:
            raise ScenarioError(f"unknown task '{self.task}', expected one of {TASKS}")
        if self.duration < 0:
            raise ScenarioError("duration must be non-negative")
        if self.area_x[0] >= self.area_x[1] or self.area_y[0] >= self.area_y[1]:
            raise ScenarioError("experiment area must have positive extent")
        for name, target in self.targets.items():
            if not self._inside_area(target.position):
                raise ScenarioError(f"target '{name}' lies outside the experiment area")
        if self.box is not None:
            for label, point in (("box", self.box.position), ("handle", self.box.handle), ("wire", self.box.wire)):
                if not self._inside_area(point):
                    raise ScenarioError(f"{label} lies outside the experiment area")
        if not self._inside_area(np.array([*self.start_xy, 0.0])):
            raise ScenarioError("start position lies outside the experiment area")

    def _inside_area(self, point: np.ndarray) -> bool:
        return (
            self.area_x[0] <= point[0] <= self.area_x[1]
            and self.area_y[0] <= point[1] <= self.area_y[1]
        )

    def gait_params(self, model: RobotModel) -> GaitParams:
        params = GaitParams.for_model(model)
        if self.gait:
            fields = {f.name for f in dataclasses.fields(GaitParams)}
            unknown = set(self.gait) - fields
            if unknown:
                raise ScenarioError(f"unknown gait overrides {sorted(unknown)}")
            params = dataclasses.replace(params, **self.gait)
        return params

    def initial_state(self, model: RobotModel):
        state = neutral_state(model)
        state.base_pos = state.base_pos + np.array([*self.start_xy, 0.0])
        state.base_quat = quat_from_axis_angle(np.array([0.0, 0.0, 1.0]), self.start_yaw)
        return state


def scenario_from_dict(data: dict) -> Scenario:
    known = {
        "name",
        "task",
        "duration",
        "seed",
        "area",
        "targets",
        "box",
        "start",
        "gait",
    }
    unknown = set(data) - known
    if unknown:
        raise ScenarioError(f"unknown scenario keys {sorted(unknown)}")
    for key in ("name", "task", "duration"):
        if key not in data:
            raise ScenarioError(f"scenario is missing required key '{key}'")
    area = data.get("area", {})
    targets = {
        name: TargetSphere(spec["position"], spec.get("radius", 0.05))
        for name, spec in data.get("targets", {}).items()
    }
    box = None
    if "box" in data:
        b = data["box"]
        box = BoxPrimitive(
            position=b["position"],
            size=b.get("size", [0.3, 0.3, 0.3]),
            handle=b["handle"],
            wire=b["wire"],
        )
    start = data.get("start", {})
    return Scenario(
        name=data["name"],
        task=data["task"],
        duration=float(data["duration"]),
        seed=int(data.get("seed", 0)),
        area_x=tuple(area.get("x", (-1.5, 2.5))),
        area_y=tuple(area.get("y", (-1.5, 1.5))),
        targets=targets,
        box=box,
        start_xy=start.get("xy", [0.0, 0.0]),
        start_yaw=float(start.get("yaw", 0.0)),
        gait=data.get("gait", {}),
    )


BUNDLED_SCENARIOS = ("loco", "manip", "combo", "eod")


def load_scenario(source) -> Scenario:
    """Load a scenario JSON from a path or one of the bundled names."""
    path = Path(source)
    if not path.exists() and str(source) in BUNDLED_SCENARIOS:
        text = (
            resources.files("telemanip.data.scenarios").joinpath(f"{source}.json").read_text()
        )
        return scenario_from_dict(json.loads(text))
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario file {path} is not valid JSON: {exc}") from exc
    return scenario_from_dict(data)


@dataclass
class Metrics:
    completion: bool
    completion_time: float | None
    final_ee_error: float
    violations: int


@dataclass
class SimLog:
    """Per-tick wire messages plus the out-of-band event list."""

    control_dt: float
    states: list[RobotStateMessage] = field(default_factory=list)
    commands: list[CommandMessage] = field(default_factory=list)
    events: list[tuple[float, str]] = field(default_factory=list)

    def messages(self):
        for state, command in zip(self.states, self.commands):
            yield state
            yield command

    def to_bytes(self) -> bytes:
        return b"".join(encode(m) for m in self.messages())

    def write(self, path) -> int:
        return write_log(path, list(self.messages()))


class SceneTracker:
    """Detects scene events from the observed robot trajectory.

    The lid opens when the gripper closes within GRASP_RADIUS of the handle
    and then retracts LID_RETRACT while still closed; the wire is pulled
    when, after the lid is open, the gripper closes at the wire point and
    moves it WIRE_PULL away. Releasing the gripper early resets a grasp.
    """

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.reached: dict[str, float] = {}
        self.lid_open_at: float | None = None
        self.wire_pulled_at: float | None = None
        self.failed = False
        self._grasp_anchor: np.ndarray | None = None
        self._grasp_object: str | None = None

    def _update_grasp(self, t: float, ee: np.ndarray, closed: bool, events: list):
        box = self.scenario.box
        if box is None:
            return
        if not closed:
            self._grasp_anchor = None
            self._grasp_object = None
            return
        if self._grasp_anchor is None:
            if self.lid_open_at is None and np.linalg.norm(ee - box.handle) < GRASP_RADIUS:
                self._grasp_anchor = ee.copy()
                self._grasp_object = "lid"
                events.append((t, "lid_grasped"))
            elif (
                self.lid_open_at is not None
                and self.wire_pulled_at is None
                and np.linalg.norm(ee - box.wire) < GRASP_RADIUS
            ):
                self._grasp_anchor = ee.copy()
                self._grasp_object = "wire"
                events.append((t, "wire_grasped"))
            return
        moved = float(np.linalg.norm(ee - self._grasp_anchor))
        if self._grasp_object == "lid" and moved >= LID_RETRACT:
            self.lid_open_at = t
            self._grasp_anchor = None
            self._grasp_object = None
            events.append((t, "lid_open"))
        elif self._grasp_object == "wire" and moved >= WIRE_PULL:
            self.wire_pulled_at = t
            self._grasp_anchor = None
            self._grasp_object = None
            events.append((t, "wire_pulled"))

    def update(self, t: float, state, ee: np.ndarray, gripper_closed: bool) -> list:
        events: list[tuple[float, str]] = []
        for name, target in self.scenario.targets.items():
            if name in self.reached:
                continue
            probe = state.base_pos[0:2] if name == "a" else ee
            ref = target.position[0 : len(probe)]
            if np.linalg.norm(probe - ref) < target.radius:
                self.reached[name] = t
                events.append((t, f"reached_{name}"))
        self._update_grasp(t, ee, gripper_closed, events)
        if not self.scenario._inside_area(state.base_pos) and not self.failed:
            self.failed = True
            events.append((t, "left_area"))
        return events

    def completion(self) -> tuple[bool, float | None]:
        if self.failed:
            return False, None
        task = self.scenario.task
        if task == "loco":
            done_at = self.reached.get("a")
        elif task in ("manip", "combo"):
            done_at = self.reached.get("b")
        else:
            done_at = self.wire_pulled_at if self.lid_open_at is not None else None
        return done_at is not None, done_at


def trigger_mask(held: TeleopOutput | None) -> int:
    if held is None:
        return 0
    mask = 0
    if held.gripper_closed:
        mask |= TRIGGER_GRIPPER
    if held.walking_active:
        mask |= TRIGGER_WALKING
    if held.arm is not None:
        mask |= TRIGGER_ARM
    if held.homing_active:
        mask |= TRIGGER_HOMING
    return mask


def _command_message(t: float, held: TeleopOutput | None) -> CommandMessage:
    if held is None:
        return CommandMessage(timestamp=t)
    return CommandMessage(
        timestamp=t,
        arm_active=held.arm is not None,
        walk_active=held.walking_active,
        gripper_closed=held.gripper_closed,
        homing_active=held.homing_active,
        arm_pose=held.arm.pose.copy() if held.arm is not None else np.zeros(5),
        walk=held.walk.to_array(),
    )


class ReplaySource:
    """Feeds skeleton frames recorded in a .skel log, in order."""

    def __init__(self, frames):
        self.frames = list(frames)
        self.cursor = 0

    @classmethod
    def from_file(cls, path) -> "ReplaySource":
        messages = read_log(path)
        frames = [m for m in messages if isinstance(m, SkeletonFrame)]
        if not frames:
            raise ScenarioError(f"input log {path} holds no skeleton frames")
        return cls(frames)

    def frame(self, t, state, controller) -> SkeletonFrame | None:
        if self.cursor >= len(self.frames):
            return None
        frame = self.frames[self.cursor]
        self.cursor += 1
        return frame


def run_scenario(
    scenario: Scenario,
    model: RobotModel | None = None,
    source=None,
) -> tuple[SimLog, Metrics, list[SkeletonFrame]]:
    """Run the closed loop and return the log, metrics, and consumed frames.

    source may be anything with frame(t, state, controller) -> SkeletonFrame
    or None; None selects the scripted virtual operator for scenario.task.
    Violations counted: QP-infeasible ticks plus entries of any stance foot
    into slip or penetration beyond SLIP_TOLERANCE of its contact anchor.
    """
    model = model if model is not None else default_model()
    if source is None:
        from .scripts import make_policy

        source = make_policy(scenario, model)
    params = scenario.gait_params(model)
    controller = TrotController(model, params=params)
    teleop = TeleopSession(model, gait_params=params)
    state = scenario.initial_state(model)
    tracker = SceneTracker(scenario)
    log = SimLog(control_dt=CONTROL_DT)
    frames: list[SkeletonFrame] = []
    held: TeleopOutput | None = None
    violations = 0
    in_violation: set[str] = set()
    ticks = int(round(scenario.duration / CONTROL_DT))
    stop_at: float | None = None

    t = 0.0
    for i in range(ticks):
        inputs = None
        if i % TICKS_PER_FRAME == 0:
            frame = source.frame(t, state, controller)
            if frame is not None:
                # consume exactly what a .skel log would hold, so a recorded
                # stream replays bit-identically (wire floats are 32-bit)
                frame = decode(encode(frame))
                held = teleop.process(frame, controller.arm_pose)
                inputs = ControlInputs.from_teleop(held)
                frames.append(frame)
                for name, action in held.events:
                    log.events.append((t, f"{name}_{action}"))
        try:
            out = controller.tick(t, state, inputs)
        except ControlError as exc:
            log.events.append((t, f"controller_failed: {exc}"))
            violations += 1
            break
        status = STATUS_OK
        if not out.solution.ok:
            status = STATUS_DEGRADED
            violations += 1
        for name in out.events:
            log.events.append((t, name))
        for _ in range(int(round(CONTROL_DT / SIM_DT))):
            state = step(model, state, out.tau, out.contacts, SIM_DT).state
        t = (i + 1) * CONTROL_DT

        for foot, anchor in out.contacts.items():
            pos, _ = frame_pose(model, state, foot)
            bad = (
                np.linalg.norm(pos[0:2] - anchor[0:2]) > SLIP_TOLERANCE
                or abs(pos[2]) > SLIP_TOLERANCE
            )
            if bad and foot not in in_violation:
                violations += 1
                in_violation.add(foot)
            elif not bad:
                in_violation.discard(foot)
        ee, _ = frame_pose(model, state, model.end_effector)
        closed = held.gripper_closed if held is not None else False
        for when, name in tracker.update(t, state, ee, closed):
            log.events.append((when, name))

        forces = out.solution.forces if out.solution.ok else np.zeros((0, 3))
        log.states.append(
            RobotStateMessage(
                timestamp=t,
                base_pos=state.base_pos.copy(),
                base_quat=state.base_quat.copy(),
                q=state.q_a.copy(),
                qd=state.qd_a.copy(),
                tau=np.asarray(out.tau, dtype=float).copy(),
                contact_forces=np.asarray(forces, dtype=float).reshape(-1, 3),
                trigger_mask=trigger_mask(held),
                status=status,
            )
        )
        log.commands.append(_command_message(t, held))
        if tracker.failed:
            break
        # once the task is done, settle for a second and cut the run short
        if stop_at is None and tracker.completion()[0]:
            stop_at = t + 1.0
        if stop_at is not None and t >= stop_at:
            break

    completion, done_at = tracker.completion()
    if ticks == 0:
        final_error = 0.0
    else:
        ee, _ = frame_pose(model, state, model.end_effector)
        if scenario.task in ("manip", "combo") and "b" in scenario.targets:
            goal = scenario.targets["b"].position
        else:
            goal = controller.commanded_ee_position(t, state)
        final_error = float(np.linalg.norm(ee - goal))
    metrics = Metrics(
        completion=completion,
        completion_time=done_at,
        final_ee_error=final_error,
        violations=violations,
    )
    return log, metrics, frames


def write_metrics_csv(path, scenario: Scenario, metrics: Metrics) -> None:
    path = Path(path)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ["scenario", "task", "completion", "completion_time_s", "final_ee_error_m", "violations"]
        )
        writer.writerow(
            [
                scenario.name,
                scenario.task,
                int(metrics.completion),
                "" if metrics.completion_time is None else f"{metrics.completion_time:.3f}",
                f"{metrics.final_ee_error:.6f}",
                metrics.violations,
            ]
        )
