"""Virtual operator policies that drive scenarios without a human.

Each policy emits a 100 Hz skeleton stream for one task: walk to a target,
reach a hanging target, the combined walk-then-reach, and the box task
(open the lid, pull the wire). The operator watches the simulated robot and
steers its own pelvis and wrist so the retargeting layer produces the
commands a human would: feedback runs through the same triggers, anchors,
and scale gains as live input, and the emitted frames replay bit-identically
from a .skel log.
"""

from __future__ import annotations

import math

import numpy as np

from .kinematics import frame_pose
from .model import RobotModel
from .rotations import quat_from_axis_angle, quat_to_matrix, yaw_of_quat
from .teleop import (
    BODY_SEGMENTS,
    LEFT_WRIST,
    PELVIS,
    RIGHT_SHOULDER,
    RIGHT_WRIST,
    SkeletonFrame,
    hand_segments,
)

FRAME_DT = 0.01  # 100 Hz skeleton stream

PELVIS_Z = 1.0
LEFT_LOW_Z = 0.7  # below the waist: walking trigger
LEFT_HIGH_Z = 1.3  # above the waist: gripper trigger
RIGHT_LOW_Z = 0.8  # below the waist: homing trigger
SHOULDER_OFFSET = np.array([0.0, -0.2, 0.45])
WRIST_NEUTRAL = np.array([0.3, 0.0, -0.2])  # relative to the shoulder

WRIST_STEP = 0.004  # m per frame, caps end-effector reference speed
WALK_GAIN = 0.8  # pelvis displacement per meter of base error
TURN_GAIN = 1.0
REACH_TOL = 0.012
REACH_DWELL = 30  # frames inside tolerance before the next phase
GRASP_DELAY = 40  # frames to hold the closure before moving
STOP_SPEED_GATE = 0.05


def synth_frame(
    t: float,
    pelvis_xy: np.ndarray,
    pelvis_yaw: float,
    left_z: float,
    left_closure: float,
    right_closure: float,
    wrist_offset: np.ndarray,
) -> SkeletonFrame:
    """One synthetic capture sample with the given operator gesture."""
    body_pos = np.zeros((BODY_SEGMENTS, 3))
    body_quat = np.zeros((BODY_SEGMENTS, 4))
    body_quat[:, 0] = 1.0
    yaw_quat = quat_from_axis_angle(np.array([0.0, 0.0, 1.0]), pelvis_yaw)
    rot = quat_to_matrix(yaw_quat)

    pelvis = np.array([pelvis_xy[0], pelvis_xy[1], PELVIS_Z])
    body_pos[PELVIS] = pelvis
    body_quat[PELVIS] = yaw_quat
    shoulder = pelvis + rot @ SHOULDER_OFFSET
    body_pos[RIGHT_SHOULDER] = shoulder
    body_pos[RIGHT_WRIST] = shoulder + rot @ (WRIST_NEUTRAL + wrist_offset)
    body_quat[RIGHT_WRIST] = yaw_quat
    body_pos[LEFT_WRIST] = pelvis + rot @ np.array([0.25, 0.25, left_z - PELVIS_Z])

    left_pos, left_quat = hand_segments(left_closure)
    right_pos, right_quat = hand_segments(right_closure)
    return SkeletonFrame(
        timestamp=t,
        body_pos=body_pos,
        body_quat=body_quat,
        left_hand_pos=left_pos,
        left_hand_quat=left_quat,
        right_hand_pos=right_pos,
        right_hand_quat=right_quat,
    )


class VirtualOperator:
    """Shared gesture state and steering laws for all scripted tasks."""

    def __init__(self, scenario, model: RobotModel):
        self.scenario = scenario
        self.model = model
        self.phase = "start"
        self.dwell = 0
        self.pelvis = np.zeros(2)
        self.pelvis_yaw = 0.0
        self.walk_anchor: np.ndarray | None = None
        self.walk_anchor_yaw = 0.0
        self.left_z = LEFT_LOW_Z
        self.left_closure = 0.0
        self.right_closure = 0.0
        self.wrist_offset = np.zeros(3)
        self.grasp_ee: np.ndarray | None = None

    def frame(self, t, state, controller) -> SkeletonFrame:
        self.step(t, state, controller)
        return synth_frame(
            t,
            self.pelvis,
            self.pelvis_yaw,
            self.left_z,
            self.left_closure,
            self.right_closure,
            self.wrist_offset,
        )

    def step(self, t, state, controller) -> None:
        raise NotImplementedError

    def _ee(self, state) -> np.ndarray:
        pos, _ = frame_pose(self.model, state, self.model.end_effector)
        return pos

    def _enter(self, phase: str) -> None:
        self.phase = phase
        self.dwell = 0

    # walking: close the left hand below the waist, then displace the pelvis
    # so the retargeted velocity steers the base toward the goal pose

    def _steer_base(self, state, controller, goal_xy, goal_yaw=0.0) -> bool:
        """Walk the base toward goal; True once stopped inside tolerance.

        Lateral error is gated hard: the arm workspace has no sideways
        command axis, so only the walk can line the body up with a grasp.
        """
        yaw = yaw_of_quat(state.base_quat)
        err_world = np.asarray(goal_xy) - state.base_pos[0:2]
        c, s = math.cos(yaw), math.sin(yaw)
        err_body = np.array(
            [c * err_world[0] + s * err_world[1], -s * err_world[0] + c * err_world[1]]
        )
        yaw_err = math.atan2(math.sin(goal_yaw - yaw), math.cos(goal_yaw - yaw))
        speed = float(np.linalg.norm(state.base_vel[0:2]))
        close = (
            abs(err_body[0]) < 0.02
            and abs(err_body[1]) < 0.012
            and abs(yaw_err) < 0.04
            and speed < STOP_SPEED_GATE
        )
        parked = abs(err_body[0]) < 0.06 and abs(err_body[1]) < 0.018 and abs(yaw_err) < 0.06
        if close and controller.walking_active:
            self.left_closure = 0.0
            return False
        if not controller.walking_active:
            if parked and controller.mode == "stand":
                return True
            if self.left_closure == 0.0 and not parked and controller.mode == "stand":
                self.left_z = LEFT_LOW_Z
                self.left_closure = 1.0
                self.walk_anchor = None
            return False
        if self.walk_anchor is None:
            # trigger just latched; the teleop anchor is this pelvis pose
            self.walk_anchor = self.pelvis.copy()
            self.walk_anchor_yaw = self.pelvis_yaw
        v_des = np.clip(WALK_GAIN * err_body, -0.18, 0.18)
        w_des = float(np.clip(TURN_GAIN * yaw_err, -0.3, 0.3))
        ca, sa = math.cos(self.walk_anchor_yaw), math.sin(self.walk_anchor_yaw)
        self.pelvis = self.walk_anchor + np.array(
            [ca * v_des[0] - sa * v_des[1], sa * v_des[0] + ca * v_des[1]]
        )
        self.pelvis_yaw = self.walk_anchor_yaw + w_des
        return False

    # reaching: close the right hand above the waist, then move the wrist so
    # the commanded end-effector pose walks toward the world-frame goal

    def _servo_ee(self, state, controller, goal_world) -> bool:
        """Steer the wrist toward the goal; True after a settled dwell.

        The wrist walks the held command onto the goal expressed in the base
        frame rather than chasing the observed end effector, which trails a
        moving reference by kd/kp times its speed and would cause the
        operator to wind up and overshoot.
        """
        if self.right_closure == 0.0:
            self.right_closure = 1.0
            self.dwell = 0
            return False
        rot = quat_to_matrix(state.base_quat)
        rel = rot.T @ (np.asarray(goal_world) - state.base_pos)
        gap = np.array([rel[0] - controller.arm_pose[0], rel[2] - controller.arm_pose[1]])
        step_xz = np.clip(gap, -WRIST_STEP, WRIST_STEP)
        self.wrist_offset[0] += step_xz[0]
        self.wrist_offset[2] += step_xz[1]
        if float(np.linalg.norm(np.asarray(goal_world) - self._ee(state))) < REACH_TOL:
            self.dwell += 1
        else:
            self.dwell = 0
        return self.dwell >= REACH_DWELL

    def _retract(self, state, direction, distance) -> bool:
        """Pull the wrist along direction until the gripped point has moved."""
        if self.grasp_ee is None:
            self.grasp_ee = self._ee(state).copy()
        moved = float(np.linalg.norm(self._ee(state) - self.grasp_ee))
        if moved >= distance:
            return True
        d = np.asarray(direction, dtype=float)
        self.wrist_offset += WRIST_STEP * d / np.linalg.norm(d)
        return False

    def _grasp(self) -> bool:
        """Raise and close the left hand; True once the hold delay passed."""
        self.left_z = LEFT_HIGH_Z
        self.left_closure = 1.0
        self.dwell += 1
        return self.dwell >= GRASP_DELAY

    def _release_gripper(self) -> bool:
        self.left_closure = 0.0
        self.dwell += 1
        return self.dwell >= 15


class LocoPolicy(VirtualOperator):
    """Walk from the start to target sphere A and stop there."""

    def __init__(self, scenario, model):
        super().__init__(scenario, model)
        if "a" not in scenario.targets:
            raise ValueError("the locomotion task needs target sphere 'a'")

    def step(self, t, state, controller) -> None:
        if self.phase == "start":
            self._enter("walk")
        if self.phase == "walk":
            if self._steer_base(state, controller, self.scenario.targets["a"].position[0:2]):
                self._enter("done")


class ManipPolicy(VirtualOperator):
    """Stand in place and bring the end effector onto target sphere B."""

    def __init__(self, scenario, model):
        super().__init__(scenario, model)
        if "b" not in scenario.targets:
            raise ValueError("the manipulation task needs target sphere 'b'")

    def step(self, t, state, controller) -> None:
        if self.phase == "start":
            self.dwell += 1
            if self.dwell >= 30:
                self._enter("reach")
        elif self.phase == "reach":
            if self._servo_ee(state, controller, self.scenario.targets["b"].position):
                self._enter("hold")


class ComboPolicy(VirtualOperator):
    """Walk into reach of target B, then touch it with the end effector."""

    def __init__(self, scenario, model):
        super().__init__(scenario, model)
        if "b" not in scenario.targets:
            raise ValueError("the combined task needs target sphere 'b'")
        b = scenario.targets["b"].position
        self.approach = np.array([b[0] - 0.34, b[1]])

    def step(self, t, state, controller) -> None:
        if self.phase == "start":
            self._enter("walk")
        if self.phase == "walk":
            if self._steer_base(state, controller, self.approach):
                self._enter("settle")
        elif self.phase == "settle":
            self.dwell += 1
            if self.dwell >= 50:
                self._enter("reach")
        elif self.phase == "reach":
            if self._servo_ee(state, controller, self.scenario.targets["b"].position):
                self._enter("hold")


class EodPolicy(VirtualOperator):
    """Walk to the box, open the lid by its handle, then pull the wire."""

    def __init__(self, scenario, model):
        super().__init__(scenario, model)
        if scenario.box is None:
            raise ValueError("the box task needs a box primitive in the scenario")
        handle = scenario.box.handle
        self.approach = np.array([handle[0] - 0.35, handle[1]])

    def step(self, t, state, controller) -> None:
        box = self.scenario.box
        if self.phase == "start":
            self._enter("walk")
        if self.phase == "walk":
            if self._steer_base(state, controller, self.approach):
                self._enter("settle")
        elif self.phase == "settle":
            self.dwell += 1
            if self.dwell >= 50:
                self._enter("reach_handle")
        elif self.phase == "reach_handle":
            if self._servo_ee(state, controller, box.handle):
                self._enter("grasp_lid")
        elif self.phase == "grasp_lid":
            if self._grasp():
                self.grasp_ee = None
                self._enter("open_lid")
        elif self.phase == "open_lid":
            if self._retract(state, [-1.0, 0.0, 0.3], 0.14):
                self._enter("drop_lid")
        elif self.phase == "drop_lid":
            if self._release_gripper():
                self.left_z = LEFT_LOW_Z
                self.grasp_ee = None
                self._enter("reach_wire")
        elif self.phase == "reach_wire":
            if self._servo_ee(state, controller, box.wire):
                self._enter("grasp_wire")
        elif self.phase == "grasp_wire":
            if self._grasp():
                self.grasp_ee = None
                self._enter("pull_wire")
        elif self.phase == "pull_wire":
            if self._retract(state, [-0.7, 0.0, 0.7], 0.19):
                self._enter("hold")


_POLICIES = {
    "loco": LocoPolicy,
    "manip": ManipPolicy,
    "combo": ComboPolicy,
    "eod": EodPolicy,
}


def make_policy(scenario, model: RobotModel) -> VirtualOperator:
    try:
        cls = _POLICIES[scenario.task]
    except KeyError:
        raise ValueError(f"no scripted policy for task '{scenario.task}'") from None
    return cls(scenario, model)
