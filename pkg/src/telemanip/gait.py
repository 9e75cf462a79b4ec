"""Trot gait: diagonal-pair contact schedule, foothold targets, swing curves.

The two diagonal leg pairs act as two virtual legs half a cycle apart.
Foothold targets follow a Raibert-style heuristic: the hip position predicted
at touchdown plus a half-stance velocity lead. All functions are pure in
(time, parameters, state).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kinematics import frame_pose
from .model import DIAGONAL_PAIRS, GeneralizedState, RobotModel, neutral_state
from .rotations import yaw_of_quat


class GaitError(ValueError):
    pass


_PAIR_OF_LEG = {leg: pair for pair, legs in DIAGONAL_PAIRS.items() for leg in legs}
_PAIR_PHASE = {"A": 0.0, "B": 0.5}


@dataclass
class GaitParams:
    cycle_period: float = 0.6
    duty_factor: float = 0.5
    swing_height: float = 0.06
    vx_max: float = 0.5
    vy_max: float = 0.3
    wz_max: float = 0.6
    base_height: float = 0.4
    stance_length: float = 0.44
    stance_width: float = 0.36
    hip_offsets: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < self.duty_factor < 1.0:
            raise GaitError(f"duty factor must lie in (0, 1), got {self.duty_factor}")
        if self.cycle_period <= 0:
            raise GaitError("cycle period must be positive")
        if self.swing_height <= 0:
            raise GaitError("swing height must be positive")

    @classmethod
    def for_model(cls, model: RobotModel, **overrides) -> "GaitParams":
        """Derive hip offsets and stance footprint from the model home pose."""
        st = neutral_state(model, base_height=overrides.get("base_height", 0.4))
        offsets = {}
        for leg, info in model.legs.items():
            p, _ = frame_pose(model, st, info.hip_frame)
            offsets[leg] = p[0:2] - st.base_pos[0:2]
        xs = [o[0] for o in offsets.values()]
        ys = [o[1] for o in offsets.values()]
        merged = dict(
            stance_length=max(xs) - min(xs),
            stance_width=max(ys) - min(ys),
            hip_offsets=offsets,
        )
        merged.update(overrides)
        return cls(**merged)

    def clamp_velocity(self, cmd) -> np.ndarray:
        v = np.asarray(cmd, dtype=float)
        return np.array(
            [
                np.clip(v[0], -self.vx_max, self.vx_max),
                np.clip(v[1], -self.vy_max, self.vy_max),
                np.clip(v[2], -self.wz_max, self.wz_max),
            ]
        )


@dataclass(frozen=True)
class ContactSchedule:
    """Stance membership per leg as a function of gait phase in [0, 1)."""

    duty_factor: float
    pairs: dict[str, tuple[str, str]] = field(
        default_factory=lambda: dict(DIAGONAL_PAIRS)
    )

    def __post_init__(self):
        if self.duty_factor < 0.5:
            raise GaitError("trot schedule needs duty factor >= 0.5 (no flight phase)")

    def pair_in_stance(self, pair: str, phase: float) -> bool:
        local = (phase - _PAIR_PHASE[pair]) % 1.0
        return local < self.duty_factor

    def leg_in_stance(self, leg: str, phase: float) -> bool:
        return self.pair_in_stance(_PAIR_OF_LEG[leg], phase)

    def stance_legs(self, phase: float) -> tuple[str, ...]:
        return tuple(
            leg
            for pair, legs in self.pairs.items()
            for leg in legs
            if self.pair_in_stance(pair, phase)
        )

    def swing_phase(self, leg: str, phase: float) -> float | None:
        """Progress through the swing window, or None while in stance."""
        local = (phase - _PAIR_PHASE[_PAIR_OF_LEG[leg]]) % 1.0
        if local < self.duty_factor:
            return None
        return (local - self.duty_factor) / (1.0 - self.duty_factor)

    def time_to_touchdown(self, leg: str, phase: float, period: float) -> float:
        local = (phase - _PAIR_PHASE[_PAIR_OF_LEG[leg]]) % 1.0
        return ((1.0 - local) % 1.0) * period


@dataclass
class TrotPlan:
    schedule: ContactSchedule
    phase: float
    base_vel_ref: np.ndarray  # clamped (vx, vy, wz) in the base frame
    footholds: dict[str, np.ndarray]
    swing_phase: dict[str, float | None]


def _rot2(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def plan_trot(
    vel_cmd,
    t: float,
    params: GaitParams,
    model: RobotModel,
    state: GeneralizedState,
) -> TrotPlan:
    """Contact schedule at time t plus foothold targets for every leg."""
    v = params.clamp_velocity(vel_cmd)
    schedule = ContactSchedule(params.duty_factor)
    phase = (t / params.cycle_period) % 1.0
    yaw = yaw_of_quat(state.base_quat)
    lead_time = params.duty_factor * params.cycle_period / 2.0

    footholds: dict[str, np.ndarray] = {}
    swing: dict[str, float | None] = {}
    for leg in model.legs:
        t_td = schedule.time_to_touchdown(leg, phase, params.cycle_period)
        yaw_td = yaw + v[2] * t_td
        base_xy_td = state.base_pos[0:2] + _rot2(yaw) @ v[0:2] * t_td
        hip_xy = base_xy_td + _rot2(yaw_td) @ params.hip_offsets[leg]
        target_xy = hip_xy + _rot2(yaw_td) @ v[0:2] * lead_time
        footholds[leg] = np.array([target_xy[0], target_xy[1], 0.0])
        swing[leg] = schedule.swing_phase(leg, phase)
    return TrotPlan(
        schedule=schedule, phase=phase, base_vel_ref=v, footholds=footholds, swing_phase=swing
    )


def _chained_cubic_matrix() -> np.ndarray:
    # coefficients [c0..c3, d0..d3] for two cubics joined C2 at s = 0.5
    C = np.zeros((8, 8))
    C[0, 0] = 1.0  # z1(0)
    C[1, 1] = 1.0  # z1'(0)
    C[2, 4:] = [1.0, 1.0, 1.0, 1.0]  # z2(1)
    C[3, 4:] = [0.0, 1.0, 2.0, 3.0]  # z2'(1)
    C[4, 0:4] = [1.0, 0.5, 0.25, 0.125]  # z1(1/2)
    C[5, 4:] = [1.0, 0.5, 0.25, 0.125]  # z2(1/2)
    C[6, 0:4] = [0.0, 1.0, 1.0, 0.75]  # z1'(1/2) = z2'(1/2)
    C[6, 4:] = [0.0, -1.0, -1.0, -0.75]
    C[7, 0:4] = [0.0, 0.0, 2.0, 3.0]  # z1''(1/2) = z2''(1/2)
    C[7, 4:] = [0.0, 0.0, -2.0, -3.0]
    return np.linalg.inv(C)


_CUBIC_INV = _chained_cubic_matrix()


def swing_profile(
    p_liftoff: np.ndarray,
    p_target: np.ndarray,
    swing_height: float,
    s: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Swing-foot position/velocity/acceleration at phase s (derivatives in 1/phase)."""
    if not 0.0 <= s <= 1.0:
        raise GaitError(f"swing phase {s} outside [0, 1]")
    p0 = np.asarray(p_liftoff, dtype=float)
    p1 = np.asarray(p_target, dtype=float)

    # horizontal: quintic blend with zero end velocity and acceleration
    b = s**3 * (10.0 - 15.0 * s + 6.0 * s * s)
    bd = 30.0 * s * s * (1.0 - s) ** 2
    bdd = 60.0 * s * (1.0 - 3.0 * s + 2.0 * s * s)
    pos = np.empty(3)
    vel = np.empty(3)
    acc = np.empty(3)
    dxy = p1[0:2] - p0[0:2]
    pos[0:2] = p0[0:2] + dxy * b
    vel[0:2] = dxy * bd
    acc[0:2] = dxy * bdd

    # vertical: two chained cubics, C2 at the peak
    z_peak = max(p0[2], p1[2]) + swing_height
    rhs = np.array([p0[2], 0.0, p1[2], 0.0, z_peak, z_peak, 0.0, 0.0])
    coef = _CUBIC_INV @ rhs
    c = coef[0:4] if s <= 0.5 else coef[4:8]
    pos[2] = c[0] + c[1] * s + c[2] * s * s + c[3] * s**3
    vel[2] = c[1] + 2.0 * c[2] * s + 3.0 * c[3] * s * s
    acc[2] = 2.0 * c[2] + 6.0 * c[3] * s
    return pos, vel, acc
