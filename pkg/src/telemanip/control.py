"""Whole-body control loop: stance/trot scheduling around the task-space QP.

The controller runs at 500 Hz. Each tick it picks the contact set one tick
ahead of the gait schedule, integrates base and swing references, folds in
the held operator commands, and solves the whole-body QP for joint torques.
Walking starts on the walking trigger. On release the velocity command slews
to zero and the trot ends at the next half-cycle boundary where the slewed
speed is negligible, so all four feet land before standing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import compute_dynamics
from .gait import GaitParams, plan_trot, swing_profile
from .kinematics import compute_kinematics, frame_jacobian, frame_pose, frame_velocity
from .model import GeneralizedState, RobotModel, neutral_state
from .rotations import (
    matrix_to_rpy,
    quat_from_axis_angle,
    quat_multiply,
    quat_to_matrix,
    matrix_to_quat,
    rpy_to_matrix,
    yaw_of_quat,
)
from .teleop import ArmCommand, GamepadCommands, HomingRamp, TeleopOutput, WalkCommand
from .wbc import (
    ArmRef,
    BaseRef,
    ContactSituation,
    FootRef,
    TaskRefs,
    assemble_constraints,
    assemble_tasks,
    solve_wbc,
)

CONTROL_DT = 0.002  # 500 Hz
SIM_DT = 0.001

GRIPPER_CLOSED_POSITION = 0.8
INFEASIBLE_FATAL_AFTER = 0.5  # s of continuous QP failure

SLEW_LINEAR = 1.0  # m/s^2, keeps velocity steps inside the friction budget
SLEW_YAW = 3.0  # rad/s^2
REF_CLAMP_XY = 0.06  # m, anti-windup radius of the base position reference
REF_CLAMP_YAW = 0.15  # rad
STOP_SPEED = 0.02  # m/s, slewed speed below which a stance stop is clean
CAPTURE_GAIN = 0.3  # foothold velocity feedback, stabilizes lateral drift
FOOTHOLD_LOCK_PHASE = 0.8  # freeze the target late in swing so feet land at rest

_Z_AXIS = np.array([0.0, 0.0, 1.0])


class ControlError(RuntimeError):
    pass


def home_arm_pose(model: RobotModel) -> np.ndarray:
    """End-effector pose [x, z, roll, pitch, yaw] in the base frame at home."""
    st = neutral_state(model)
    pos, quat = frame_pose(model, st, model.end_effector)
    rel = pos - st.base_pos
    roll, pitch, yaw = matrix_to_rpy(quat_to_matrix(quat))
    return np.array([rel[0], rel[2], roll, pitch, yaw])


@dataclass
class ControlInputs:
    """Operator command snapshot held between teleop updates."""

    walk: WalkCommand = field(default_factory=WalkCommand)
    walking_active: bool = False
    arm: ArmCommand | None = None
    gripper_closed: bool = False
    homing_started: bool = False

    @classmethod
    def from_teleop(cls, out: TeleopOutput) -> "ControlInputs":
        return cls(
            walk=out.walk,
            walking_active=out.walking_active,
            arm=out.arm,
            gripper_closed=out.gripper_closed,
            homing_started=out.homing_started,
        )

    @classmethod
    def from_gamepad(
        cls, cmds: GamepadCommands, arm_pose: np.ndarray, homing_edge: bool
    ) -> "ControlInputs":
        moving = float(np.linalg.norm(cmds.walk.to_array())) > 1e-9
        arm = None
        if np.any(cmds.arm_increment):
            arm = ArmCommand(arm_pose + cmds.arm_increment)
        return cls(
            walk=cmds.walk,
            walking_active=moving,
            arm=arm,
            gripper_closed=cmds.gripper_closed,
            homing_started=homing_edge,
        )


@dataclass
class ControlOutput:
    tau: np.ndarray
    contacts: dict[str, np.ndarray]  # sim anchors for the active stance feet
    solution: object
    mode: str
    events: list[str]


class TrotController:
    """Stateful 500 Hz loop closing gait, teleop, and the whole-body QP."""

    def __init__(
        self,
        model: RobotModel,
        params: GaitParams | None = None,
        control_dt: float = CONTROL_DT,
    ):
        self.model = model
        self.params = params if params is not None else GaitParams.for_model(model)
        self.dt = control_dt
        self.mode = "stand"
        self.gait_time = 0.0
        self.half_index = 0
        self.walk = WalkCommand()
        self.walking_active = False
        self.gripper_closed = False
        self.arm_command = ArmCommand(home_arm_pose(model))
        self.arm_y = self._home_arm_y()
        self.vel_slew = np.zeros(3)
        self.homing: HomingRamp | None = None
        self.posture_ref = model.home.copy()
        self.anchors: dict[str, np.ndarray] = {}
        self.swing_origin: dict[str, np.ndarray] = {}
        self.foothold_lock: dict[str, np.ndarray] = {}
        self.base_ref_xy: np.ndarray | None = None
        self.base_ref_yaw = 0.0
        self.last_tau = np.zeros(model.actuated_count)
        self.infeasible_since: float | None = None
        self._grip_slot = model.actuated_names().index(model.gripper_joint)
        self._foot_of_leg = {leg: info.foot for leg, info in model.legs.items()}
        names = model.actuated_names()
        self._leg_slots = {
            leg: [i for i, n in enumerate(names) if n.startswith(leg.lower() + "_")]
            for leg in model.legs
        }

    def _home_arm_y(self) -> float:
        st = neutral_state(self.model)
        pos, _ = frame_pose(self.model, st, self.model.end_effector)
        return float(pos[1] - st.base_pos[1])

    @property
    def arm_pose(self) -> np.ndarray:
        return self.arm_command.pose

    def _initialize(self, state: GeneralizedState) -> None:
        self.base_ref_xy = state.base_pos[0:2].copy()
        self.base_ref_yaw = yaw_of_quat(state.base_quat)
        kin = compute_kinematics(self.model, state)
        for foot in self._foot_of_leg.values():
            pos, _ = frame_pose(self.model, state, foot, kin=kin)
            self.anchors[foot] = np.array([pos[0], pos[1], 0.0])

    def apply_inputs(self, t: float, state: GeneralizedState, inputs: ControlInputs):
        self.walk = inputs.walk
        self.walking_active = inputs.walking_active
        self.gripper_closed = inputs.gripper_closed
        if inputs.arm is not None:
            self.arm_command = inputs.arm
            self.homing = None  # live arm control overrides a running ramp
        if inputs.homing_started:
            self.homing = HomingRamp(
                start_time=t, start_config=state.q_a.copy(), target=self.model.home.copy()
            )

    def tick(
        self,
        t: float,
        state: GeneralizedState,
        inputs: ControlInputs | None = None,
    ) -> ControlOutput:
        if self.base_ref_xy is None:
            self._initialize(state)
        if inputs is not None:
            self.apply_inputs(t, state, inputs)
        events: list[str] = []
        kin = compute_kinematics(self.model, state)

        # rate-limit the velocity command so task demands stay feasible
        target = self.walk.to_array() if self.walking_active else np.zeros(3)
        limit = np.array([SLEW_LINEAR, SLEW_LINEAR, SLEW_YAW]) * self.dt
        self.vel_slew = self.vel_slew + np.clip(target - self.vel_slew, -limit, limit)

        # mode machine; contact membership is evaluated one tick ahead
        if self.mode == "stand" and self.walking_active:
            self.mode = "trot"
            self.gait_time = 0.0
            self.half_index = 0
            self.swing_origin = {}
            self.foothold_lock = {}
            events.append("trot_started")

        half = self.params.cycle_period / 2.0
        stance_frames: list[str]
        swing_refs: list[FootRef] = []
        swing_posture: dict[int, tuple[float, float, float]] = {}
        if self.mode == "trot":
            t_eval = self.gait_time + self.dt
            k_half = int(t_eval / half)
            crossed = k_half > self.half_index
            self.half_index = k_half
            stopping = (
                crossed
                and not self.walking_active
                and float(np.linalg.norm(self.vel_slew)) < STOP_SPEED
            )
            v_plan = self._planning_velocity(state)
            if stopping:
                # the swing pair has landed; anchor it where it actually is
                for leg, foot in self._foot_of_leg.items():
                    if leg in self.swing_origin:
                        pos, _ = frame_pose(self.model, state, foot, kin=kin)
                        self.anchors[foot] = np.array([pos[0], pos[1], 0.0])
                self.mode = "stand"
                self.swing_origin = {}
                self.foothold_lock = {}
                events.append("trot_stopped")
                stance_frames = list(self._foot_of_leg.values())
            else:
                plan = plan_trot(v_plan, t_eval, self.params, self.model, state)
                stance_frames = []
                swing_duration = (1.0 - self.params.duty_factor) * self.params.cycle_period
                for leg, foot in self._foot_of_leg.items():
                    s = plan.swing_phase[leg]
                    if s is None:
                        if leg in self.swing_origin:
                            # touchdown: anchor at the actual landing point
                            pos, _ = frame_pose(self.model, state, foot, kin=kin)
                            self.anchors[foot] = np.array([pos[0], pos[1], 0.0])
                            del self.swing_origin[leg]
                            self.foothold_lock.pop(leg, None)
                        stance_frames.append(foot)
                    else:
                        if leg not in self.swing_origin:
                            pos, _ = frame_pose(self.model, state, foot, kin=kin)
                            self.swing_origin[leg] = pos.copy()
                            self.foothold_lock.pop(leg, None)
                        if s >= FOOTHOLD_LOCK_PHASE:
                            if leg not in self.foothold_lock:
                                self.foothold_lock[leg] = plan.footholds[leg].copy()
                            target = self.foothold_lock[leg]
                        else:
                            target = plan.footholds[leg]
                        pos_s, vel_s, acc_s = swing_profile(
                            self.swing_origin[leg],
                            target,
                            self.params.swing_height,
                            min(s, 1.0),
                        )
                        # horizontal: replan a cubic from the actual foot state
                        # to the target each tick, so the terminal velocity is
                        # zero even when the target shifts mid-swing
                        p_foot, _ = frame_pose(self.model, state, foot, kin=kin)
                        v_foot = frame_velocity(self.model, state, foot, kin=kin)[0:3]
                        t_rem = max((1.0 - s) * swing_duration, 2.0 * self.dt)
                        gap = target[0:2] - p_foot[0:2]
                        acc_xy = np.clip(
                            6.0 * gap / t_rem**2 - 4.0 * v_foot[0:2] / t_rem,
                            -60.0,
                            60.0,
                        )
                        foot_ref = FootRef(
                            frame=foot,
                            pos=np.array([p_foot[0], p_foot[1], pos_s[2]]),
                            vel=np.array([v_foot[0], v_foot[1], vel_s[2] / swing_duration]),
                            acc=np.array([acc_xy[0], acc_xy[1], acc_s[2] / swing_duration**2]),
                        )
                        swing_refs.append(foot_ref)
                        self._swing_joint_refs(state, kin, leg, foot_ref, swing_posture)
                self._integrate_base_ref(state)
                self.gait_time += self.dt
        else:
            stance_frames = list(self._foot_of_leg.values())

        base_ref = self._base_ref()
        arm_ref = self._arm_ref(t, state)
        posture, posture_vel, posture_acc = self._posture_ref(t, swing_posture)
        refs = TaskRefs(
            base=base_ref,
            arm=arm_ref,
            swing=swing_refs,
            posture=posture,
            posture_vel=posture_vel,
            posture_acc=posture_acc,
        )
        tasks = assemble_tasks(self.model, state, refs, len(stance_frames), kin=kin)
        dyn = compute_dynamics(self.model, state, kin=kin)
        constraints = assemble_constraints(
            self.model, state, dyn, ContactSituation(frames=tuple(stance_frames)), kin=kin
        )
        solution = solve_wbc(tasks, constraints)
        if solution.ok:
            self.last_tau = solution.tau.copy()
            self.infeasible_since = None
            tau = solution.tau
        else:
            events.append(f"qp_{solution.status}")
            if self.infeasible_since is None:
                self.infeasible_since = t
            elif t - self.infeasible_since > INFEASIBLE_FATAL_AFTER:
                raise ControlError(
                    f"controller infeasible for more than {INFEASIBLE_FATAL_AFTER} s"
                    f" ({solution.most_violated})"
                )
            tau = self.last_tau
        contacts = {f: self.anchors[f].copy() for f in stance_frames}
        return ControlOutput(
            tau=tau, contacts=contacts, solution=solution, mode=self.mode, events=events
        )

    def commanded_ee_position(self, t: float, state: GeneralizedState) -> np.ndarray:
        """World position the held arm command currently asks for."""
        return self._arm_ref(t, state).pos

    def _planning_velocity(self, state: GeneralizedState) -> np.ndarray:
        """Velocity handed to the foothold planner.

        The measured base velocity plus a feedback term toward the slewed
        command. Feet then land ahead of any unintended drift and the body
        pivots over them, which is what damps the rocking mode of a trot.
        At steady tracking this equals the commanded velocity exactly.
        """
        yaw = yaw_of_quat(state.base_quat)
        c, s = math.cos(yaw), math.sin(yaw)
        v_act = np.array(
            [
                c * state.base_vel[0] + s * state.base_vel[1],
                -s * state.base_vel[0] + c * state.base_vel[1],
                state.base_angvel[2],
            ]
        )
        return v_act + CAPTURE_GAIN * (v_act - self.vel_slew)

    def _integrate_base_ref(self, state: GeneralizedState) -> None:
        v = self.vel_slew
        c, s = math.cos(self.base_ref_yaw), math.sin(self.base_ref_yaw)
        self.base_ref_xy = self.base_ref_xy + self.dt * np.array(
            [c * v[0] - s * v[1], s * v[0] + c * v[1]]
        )
        self.base_ref_yaw += self.dt * v[2]
        # keep the open-loop reference from winding up against tracking lag
        gap = self.base_ref_xy - state.base_pos[0:2]
        dist = float(np.linalg.norm(gap))
        if dist > REF_CLAMP_XY:
            self.base_ref_xy = state.base_pos[0:2] + gap * (REF_CLAMP_XY / dist)
        yaw_gap = self.base_ref_yaw - yaw_of_quat(state.base_quat)
        yaw_gap = math.atan2(math.sin(yaw_gap), math.cos(yaw_gap))
        if abs(yaw_gap) > REF_CLAMP_YAW:
            self.base_ref_yaw -= yaw_gap - math.copysign(REF_CLAMP_YAW, yaw_gap)

    def _base_ref(self) -> BaseRef:
        quat = quat_from_axis_angle(_Z_AXIS, self.base_ref_yaw)
        if self.mode == "trot":
            v = self.vel_slew
            c, s = math.cos(self.base_ref_yaw), math.sin(self.base_ref_yaw)
            vel = np.array([c * v[0] - s * v[1], s * v[0] + c * v[1], 0.0])
            angvel = np.array([0.0, 0.0, v[2]])
        else:
            vel = np.zeros(3)
            angvel = np.zeros(3)
        pos = np.array(
            [self.base_ref_xy[0], self.base_ref_xy[1], self.params.base_height]
        )
        return BaseRef(pos=pos, quat=quat, vel=vel, angvel=angvel)

    def _arm_ref(self, t: float, state: GeneralizedState) -> ArmRef:
        """End-effector reference rigidly attached to the measured base pose.

        Anchoring to the measured pose instead of the base reference keeps the
        arm task consistent with the base task: tracking lag of the base never
        turns into an end-effector error the QP would fight over.
        """
        if self.homing is not None:
            ghost = GeneralizedState(
                base_pos=state.base_pos,
                base_quat=state.base_quat,
                q_a=self.homing.value(t),
                base_vel=np.zeros(3),
                base_angvel=np.zeros(3),
                qd_a=np.zeros(self.model.actuated_count),
                time=t,
            )
            pos, quat = frame_pose(self.model, ghost, self.model.end_effector)
            if self.homing.done(t):
                self.arm_command = ArmCommand(home_arm_pose(self.model))
                self.homing = None
            r = pos - state.base_pos
        else:
            x, z, roll, pitch, yaw = self.arm_command.pose
            R_base = quat_to_matrix(state.base_quat)
            r = R_base @ np.array([x, self.arm_y, z])
            pos = state.base_pos + r
            quat = quat_multiply(
                state.base_quat, matrix_to_quat(rpy_to_matrix(roll, pitch, yaw))
            )
        vel = np.concatenate(
            [state.base_vel + np.cross(state.base_angvel, r), state.base_angvel]
        )
        return ArmRef(pos=pos, quat=quat, vel=vel)

    def _swing_joint_refs(
        self,
        state: GeneralizedState,
        kin,
        leg: str,
        foot_ref: FootRef,
        out: dict[int, tuple[float, float, float]],
    ) -> None:
        """Joint-space mirror of a swing-foot reference via the leg Jacobian.

        Keeps the posture task consistent with the swing task instead of
        pulling the leg back toward home mid-swing. Without the feedforward
        term here the QP prefers heaving the base to accelerate a swing foot,
        which pumps the trot's rocking mode.
        """
        foot = self._foot_of_leg[leg]
        J, drift = frame_jacobian(self.model, state, foot, kin=kin)
        cols = [6 + slot for slot in self._leg_slots[leg]]
        J_leg = J[0:3][:, cols]
        if np.linalg.svd(J_leg, compute_uv=False)[-1] < 0.03:
            return  # near a stretched leg; fall back to the plain home posture
        p_foot, _ = frame_pose(self.model, state, foot, kin=kin)
        v_foot = (J @ state.u)[0:3]
        dq = np.clip(np.linalg.solve(J_leg, foot_ref.pos - p_foot), -0.2, 0.2)
        dqd = np.clip(np.linalg.solve(J_leg, foot_ref.vel - v_foot), -5.0, 5.0)
        qdd = np.clip(np.linalg.solve(J_leg, foot_ref.acc - drift[0:3]), -150.0, 150.0)
        for k, slot in enumerate(self._leg_slots[leg]):
            out[slot] = (state.q_a[slot] + dq[k], state.qd_a[slot] + dqd[k], qdd[k])

    def _posture_ref(
        self, t: float, swing_posture: dict[int, tuple[float, float, float]]
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        n = self.model.actuated_count
        if self.homing is not None:
            posture = self.homing.value(t).copy()
            vel = self.homing.velocity(t).copy()
        else:
            posture = self.posture_ref.copy()
            vel = np.zeros(n)
        acc = np.zeros(n)
        posture[self._grip_slot] = (
            GRIPPER_CLOSED_POSITION if self.gripper_closed else self.model.home[self._grip_slot]
        )
        vel[self._grip_slot] = 0.0
        for slot, (q_r, qd_r, qdd_r) in swing_posture.items():
            posture[slot] = q_r
            vel[slot] = qd_r
            acc[slot] = qdd_r
        return posture, vel, acc
