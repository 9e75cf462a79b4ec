"""Operator input mapping: hand-closure triggers and relative scaled retargeting.

Four triggers share two hands: closing the left hand above the waist drives
the gripper, below the waist enables walking; the right hand above the waist
enables arm control, below it starts homing. While a trigger holds, commands
follow anchor + gain * (operator pose - pose at activation), so only motion
after the closing instant matters and slow sensor drift cancels out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .gait import GaitParams
from .model import RobotModel
from .rotations import (
    matrix_to_rpy,
    quat_multiply,
    quat_to_matrix,
    wrap_angle,
    yaw_of_quat,
)

BODY_SEGMENTS = 19
HAND_SEGMENTS = 20

# body segment slots (pelvis through lower legs)
PELVIS = 0
RIGHT_SHOULDER = 7
RIGHT_WRIST = 10
LEFT_SHOULDER = 11
LEFT_WRIST = 14

BODY_SEGMENT_NAMES = (
    "pelvis",
    "l5",
    "l3",
    "t12",
    "t8",
    "neck",
    "head",
    "right_shoulder",
    "right_upper_arm",
    "right_forearm",
    "right_wrist",
    "left_shoulder",
    "left_upper_arm",
    "left_forearm",
    "left_wrist",
    "right_upper_leg",
    "right_lower_leg",
    "left_upper_leg",
    "left_lower_leg",
)

# per hand: thumb, index, middle, ring, pinky with four segments each
FINGER_BASES = (0, 4, 8, 12, 16)
GRIP_FINGERS = FINGER_BASES[1:]  # thumb excluded from the closure measure

CLOSURE_THRESHOLD = 0.7
CLOSURE_HYSTERESIS = 0.1
CLOSURE_DEBOUNCE = 0.03

TRIGGER_NAMES = ("gripper", "walking", "arm", "homing")


class TeleopError(RuntimeError):
    pass


@dataclass
class SkeletonFrame:
    """One motion-capture sample: 19 body and 2 x 20 hand segment poses."""

    timestamp: float
    body_pos: np.ndarray  # (19, 3) world positions
    body_quat: np.ndarray  # (19, 4) unit quaternions [w, x, y, z]
    left_hand_pos: np.ndarray  # (20, 3)
    left_hand_quat: np.ndarray  # (20, 4)
    right_hand_pos: np.ndarray  # (20, 3)
    right_hand_quat: np.ndarray  # (20, 4)

    def validate(self) -> None:
        shapes = (
            (self.body_pos, (BODY_SEGMENTS, 3)),
            (self.body_quat, (BODY_SEGMENTS, 4)),
            (self.left_hand_pos, (HAND_SEGMENTS, 3)),
            (self.left_hand_quat, (HAND_SEGMENTS, 4)),
            (self.right_hand_pos, (HAND_SEGMENTS, 3)),
            (self.right_hand_quat, (HAND_SEGMENTS, 4)),
        )
        for arr, want in shapes:
            if np.asarray(arr).shape != want:
                raise TeleopError(
                    f"skeleton frame segment block has shape {np.asarray(arr).shape}, expected {want}"
                )

    @property
    def pelvis_height(self) -> float:
        return float(self.body_pos[PELVIS, 2])

    @property
    def pelvis_yaw(self) -> float:
        return yaw_of_quat(self.body_quat[PELVIS])

    @property
    def left_hand_height(self) -> float:
        return float(self.body_pos[LEFT_WRIST, 2])

    @property
    def right_hand_height(self) -> float:
        return float(self.body_pos[RIGHT_WRIST, 2])

    @property
    def left_closure(self) -> float:
        return detect_closure(self.left_hand_pos, self.left_hand_quat)

    @property
    def right_closure(self) -> float:
        return detect_closure(self.right_hand_pos, self.right_hand_quat)


def detect_closure(hand_pos: np.ndarray, hand_quat: np.ndarray) -> float:
    """Mean normalized flexion of the four non-thumb fingers, in [0, 1]."""
    pos = np.asarray(hand_pos)
    quat = np.asarray(hand_quat)
    if pos.shape != (HAND_SEGMENTS, 3) or quat.shape != (HAND_SEGMENTS, 4):
        raise TeleopError(f"hand needs exactly {HAND_SEGMENTS} segments")
    total = 0.0
    for base in GRIP_FINGERS:
        bend = 0.0
        for k in range(base, base + 3):
            dot = abs(float(np.dot(quat[k], quat[k + 1])))
            bend += 2.0 * math.acos(min(1.0, dot))
        total += min(1.0, bend / 3.0 / (math.pi / 2.0))
    return total / len(GRIP_FINGERS)


def hand_segments(closure: float) -> tuple[np.ndarray, np.ndarray]:
    """Synthetic hand pose whose detected closure equals the given value."""
    c = float(np.clip(closure, 0.0, 1.0))
    pos = np.zeros((HAND_SEGMENTS, 3))
    quat = np.zeros((HAND_SEGMENTS, 4))
    quat[:, 0] = 1.0
    half = c * (math.pi / 2.0) / 2.0
    step = np.array([math.cos(half), 0.0, math.sin(half), 0.0])
    for f, base in enumerate(FINGER_BASES):
        pos[base : base + 4, 0] = np.arange(4) * 0.03
        pos[base : base + 4, 1] = (f - 2) * 0.02
        if base in GRIP_FINGERS:
            q = quat[base]
            for k in range(base + 1, base + 4):
                q = quat_multiply(q, step)
                quat[k] = q
    return pos, quat


@dataclass
class ClosureState:
    """Hysteresis plus debounce latch for one hand."""

    closed: bool = False
    pending: bool | None = None
    pending_since: float = 0.0


def advance_closure(
    state: ClosureState,
    closure: float,
    timestamp: float,
    threshold: float = CLOSURE_THRESHOLD,
    hysteresis: float = CLOSURE_HYSTERESIS,
    debounce: float = CLOSURE_DEBOUNCE,
) -> ClosureState:
    if state.closed:
        candidate = closure >= threshold - hysteresis
    else:
        candidate = closure >= threshold
    if candidate == state.closed:
        return replace(state, pending=None)
    if state.pending is None or state.pending != candidate:
        state = replace(state, pending=candidate, pending_since=timestamp)
    if timestamp - state.pending_since >= debounce:
        return ClosureState(closed=candidate)
    return state


@dataclass
class TriggerRecord:
    active: bool = False
    activated_at: float | None = None
    operator_anchor: np.ndarray | None = None
    command_anchor: np.ndarray | None = None


@dataclass
class TriggerState:
    left: ClosureState = field(default_factory=ClosureState)
    right: ClosureState = field(default_factory=ClosureState)
    gripper: TriggerRecord = field(default_factory=TriggerRecord)
    walking: TriggerRecord = field(default_factory=TriggerRecord)
    arm: TriggerRecord = field(default_factory=TriggerRecord)
    homing: TriggerRecord = field(default_factory=TriggerRecord)

    def record(self, name: str) -> TriggerRecord:
        if name not in TRIGGER_NAMES:
            raise TeleopError(f"unknown trigger '{name}'")
        return getattr(self, name)


def operator_arm_pose(frame: SkeletonFrame) -> np.ndarray:
    """Right wrist pose [x, z, roll, pitch, yaw] relative to the right
    shoulder, in the pelvis-yaw-aligned frame."""
    yaw = frame.pelvis_yaw
    c, s = math.cos(-yaw), math.sin(-yaw)
    align = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    rel = align @ (frame.body_pos[RIGHT_WRIST] - frame.body_pos[RIGHT_SHOULDER])
    wrist = align @ quat_to_matrix(frame.body_quat[RIGHT_WRIST])
    roll, pitch, wyaw = matrix_to_rpy(wrist)
    return np.array([rel[0], rel[2], roll, pitch, wyaw])


def operator_walk_pose(frame: SkeletonFrame) -> np.ndarray:
    """Pelvis planar pose [x, y, yaw] in the world frame."""
    return np.array(
        [frame.body_pos[PELVIS, 0], frame.body_pos[PELVIS, 1], frame.pelvis_yaw]
    )


@dataclass
class ArmCommand:
    """Desired end-effector pose [x, z, roll, pitch, yaw] in the base frame."""

    pose: np.ndarray

    def __post_init__(self):
        self.pose = np.asarray(self.pose, dtype=float).copy()
        if self.pose.shape != (5,):
            raise TeleopError("arm command needs 5 components [x, z, roll, pitch, yaw]")
        self.pose[2:5] = wrap_angle(self.pose[2:5])


@dataclass
class WalkCommand:
    vx: float = 0.0
    vy: float = 0.0
    wz: float = 0.0

    @classmethod
    def zero(cls) -> "WalkCommand":
        return cls()

    def to_array(self) -> np.ndarray:
        return np.array([self.vx, self.vy, self.wz])


@dataclass
class ScaleGains:
    mu_arm: np.ndarray = field(default_factory=lambda: np.ones(5))
    mu_walk: np.ndarray = field(default_factory=lambda: np.ones(3))  # 1/s

    def __post_init__(self):
        self.mu_arm = np.asarray(self.mu_arm, dtype=float)
        self.mu_walk = np.asarray(self.mu_walk, dtype=float)
        if self.mu_arm.shape != (5,) or self.mu_walk.shape != (3,):
            raise TeleopError("gains need 5 arm and 3 walk components")
        if np.any(self.mu_arm <= 0) or np.any(self.mu_walk <= 0):
            raise TeleopError("scale gains must be positive")


def classify_triggers(
    frame: SkeletonFrame,
    previous: TriggerState,
    current_arm_pose: np.ndarray | None = None,
    threshold: float = CLOSURE_THRESHOLD,
    hysteresis: float = CLOSURE_HYSTERESIS,
    debounce: float = CLOSURE_DEBOUNCE,
) -> tuple[TriggerState, list[tuple[str, str]]]:
    """Advance the trigger automaton by one frame.

    Returns the new state plus (trigger, "activated" | "released") events.
    The waist class is latched at the closing instant; releases are emitted
    ahead of activations.
    """
    state = TriggerState(
        left=advance_closure(
            previous.left, frame.left_closure, frame.timestamp, threshold, hysteresis, debounce
        ),
        right=advance_closure(
            previous.right, frame.right_closure, frame.timestamp, threshold, hysteresis, debounce
        ),
        gripper=replace(previous.gripper),
        walking=replace(previous.walking),
        arm=replace(previous.arm),
        homing=replace(previous.homing),
    )
    events: list[tuple[str, str]] = []

    hands = (
        (previous.left, state.left, frame.left_hand_height, "gripper", "walking"),
        (previous.right, state.right, frame.right_hand_height, "arm", "homing"),
    )
    for was, now, _, above, below in hands:
        if was.closed and not now.closed:
            for name in (above, below):
                rec = state.record(name)
                if rec.active:
                    rec.active = False
                    rec.operator_anchor = None
                    rec.command_anchor = None
                    events.append((name, "released"))
    for was, now, height, above, below in hands:
        if not was.closed and now.closed:
            name = above if height >= frame.pelvis_height else below
            rec = state.record(name)
            rec.active = True
            rec.activated_at = frame.timestamp
            if name == "arm":
                if current_arm_pose is None:
                    raise TeleopError(
                        "arm trigger activation needs the current end-effector target"
                    )
                rec.operator_anchor = operator_arm_pose(frame)
                rec.command_anchor = np.asarray(current_arm_pose, dtype=float).copy()
            elif name == "walking":
                rec.operator_anchor = operator_walk_pose(frame)
                rec.command_anchor = np.zeros(3)
            events.append((name, "activated"))
    return state, events


def update_arm_command(
    state: TriggerState, frame: SkeletonFrame, mu_arm: np.ndarray
) -> ArmCommand:
    """Anchor plus scaled operator hand displacement (angles on the circle)."""
    rec = state.arm
    if not rec.active:
        raise TeleopError("arm trigger is not active")
    delta = operator_arm_pose(frame) - rec.operator_anchor
    delta[2:5] = wrap_angle(delta[2:5])
    return ArmCommand(rec.command_anchor + np.asarray(mu_arm) * delta)


def update_walk_command(
    state: TriggerState,
    frame: SkeletonFrame,
    mu_walk: np.ndarray,
    params: GaitParams | None = None,
) -> WalkCommand:
    """Operator step and pelvis rotation since activation, as base velocity."""
    rec = state.walking
    if not rec.active:
        raise TeleopError("walking trigger is not active")
    pose = operator_walk_pose(frame)
    yaw0 = rec.operator_anchor[2]
    c, s = math.cos(-yaw0), math.sin(-yaw0)
    dx, dy = pose[0:2] - rec.operator_anchor[0:2]
    step = np.array([c * dx - s * dy, s * dx + c * dy, wrap_angle(pose[2] - yaw0)])
    raw = rec.command_anchor + np.asarray(mu_walk) * step
    if params is None:
        params = GaitParams()
    return WalkCommand(*params.clamp_velocity(raw))


def gripper_command(state: TriggerState) -> bool:
    """True (closed) exactly while the gripper trigger holds."""
    return state.gripper.active


def homing_command(model: RobotModel) -> np.ndarray:
    """Joint-space homing target: the model home configuration."""
    return model.home.copy()


@dataclass
class HomingRamp:
    """Linear joint-space ramp toward home; re-activation restarts it."""

    start_time: float
    start_config: np.ndarray
    target: np.ndarray
    duration: float = 2.0

    def value(self, t: float) -> np.ndarray:
        alpha = np.clip((t - self.start_time) / self.duration, 0.0, 1.0)
        return self.start_config + alpha * (self.target - self.start_config)

    def velocity(self, t: float) -> np.ndarray:
        if self.start_time <= t < self.start_time + self.duration:
            return (self.target - self.start_config) / self.duration
        return np.zeros_like(self.target)

    def done(self, t: float) -> bool:
        return t >= self.start_time + self.duration


@dataclass
class GamepadSnapshot:
    """Raw gamepad axes in [-1, 1] plus a button bitmask."""

    timestamp: float
    left_stick: np.ndarray = field(default_factory=lambda: np.zeros(2))
    right_stick: np.ndarray = field(default_factory=lambda: np.zeros(2))
    shoulders: np.ndarray = field(default_factory=lambda: np.zeros(2))
    buttons: int = 0


BUTTON_GRIPPER = 1
BUTTON_HOMING = 2
BUTTON_LIFT = 4
BUTTON_WRIST = 8

GAMEPAD_DEADZONE = 0.05
GAMEPAD_POS_STEP = 0.002  # m per 100 Hz tick at full deflection
GAMEPAD_ANG_STEP = 0.01  # rad per tick


@dataclass
class GamepadCommands:
    walk: WalkCommand
    arm_increment: np.ndarray  # [dx, dz, droll, dpitch, dyaw]
    gripper_closed: bool
    homing: bool


def _deadzone(value: float, zone: float = GAMEPAD_DEADZONE) -> float:
    if abs(value) <= zone:
        return 0.0
    return math.copysign((abs(value) - zone) / (1.0 - zone), value)


def map_gamepad(
    pad: GamepadSnapshot, params: GaitParams | None = None
) -> GamepadCommands:
    """Translate one gamepad snapshot into the command set of the suit path.

    Left stick drives planar velocity, the shoulder axes turn, and the right
    stick nudges the end-effector (modifiers pick height or wrist axes).
    """
    if params is None:
        params = GaitParams()
    lx, ly = (_deadzone(v) for v in pad.left_stick)
    rx, ry = (_deadzone(v) for v in pad.right_stick)
    turn = _deadzone(pad.shoulders[0]) - _deadzone(pad.shoulders[1])
    walk = WalkCommand(
        *params.clamp_velocity(
            [ly * params.vx_max, -lx * params.vy_max, turn * params.wz_max]
        )
    )
    inc = np.zeros(5)
    if pad.buttons & BUTTON_WRIST:
        inc[3] = ry * GAMEPAD_ANG_STEP
        inc[2] = rx * GAMEPAD_ANG_STEP
    elif pad.buttons & BUTTON_LIFT:
        inc[1] = ry * GAMEPAD_POS_STEP
    else:
        inc[0] = ry * GAMEPAD_POS_STEP
        inc[4] = -rx * GAMEPAD_ANG_STEP
    return GamepadCommands(
        walk=walk,
        arm_increment=inc,
        gripper_closed=bool(pad.buttons & BUTTON_GRIPPER),
        homing=bool(pad.buttons & BUTTON_HOMING),
    )


@dataclass
class TeleopOutput:
    events: list[tuple[str, str]]
    arm: ArmCommand | None
    walk: WalkCommand
    walking_active: bool
    gripper_closed: bool
    homing_active: bool
    homing_started: bool


class TeleopSession:
    """Sequential consumer of an ordered skeleton stream.

    Tracks trigger state across frames and emits one command set per frame.
    Deterministic given the frame sequence; rejects non-increasing timestamps.
    """

    def __init__(
        self,
        model: RobotModel,
        gains: ScaleGains | None = None,
        gait_params: GaitParams | None = None,
        threshold: float = CLOSURE_THRESHOLD,
        hysteresis: float = CLOSURE_HYSTERESIS,
        debounce: float = CLOSURE_DEBOUNCE,
    ):
        self.model = model
        self.gains = gains if gains is not None else ScaleGains()
        self.gait_params = gait_params if gait_params is not None else GaitParams()
        self.threshold = threshold
        self.hysteresis = hysteresis
        self.debounce = debounce
        self.state = TriggerState()
        self.last_timestamp: float | None = None

    def process(
        self, frame: SkeletonFrame, current_arm_pose: np.ndarray
    ) -> TeleopOutput:
        frame.validate()
        if self.last_timestamp is not None and frame.timestamp <= self.last_timestamp:
            raise TeleopError(
                f"skeleton timestamps must increase ({frame.timestamp} after {self.last_timestamp})"
            )
        self.last_timestamp = frame.timestamp
        self.state, events = classify_triggers(
            frame,
            self.state,
            current_arm_pose,
            self.threshold,
            self.hysteresis,
            self.debounce,
        )
        arm = (
            update_arm_command(self.state, frame, self.gains.mu_arm)
            if self.state.arm.active
            else None
        )
        walk = (
            update_walk_command(self.state, frame, self.gains.mu_walk, self.gait_params)
            if self.state.walking.active
            else WalkCommand.zero()
        )
        return TeleopOutput(
            events=events,
            arm=arm,
            walk=walk,
            walking_active=self.state.walking.active,
            gripper_closed=gripper_command(self.state),
            homing_active=self.state.homing.active,
            homing_started=("homing", "activated") in events,
        )
