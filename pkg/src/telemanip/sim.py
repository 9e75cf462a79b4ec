"""Constrained rigid-body integration with bilateral non-slip contacts.

Each substep solves the contact KKT system for accelerations and contact
forces, deactivates contacts that would need to pull (vertical force below
zero) and re-solves, then advances velocities and positions. Contact points
are held at fixed world anchors with Baumgarte stabilization.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .dynamics import GRAVITY, bias_forces, mass_matrix
from .kinematics import compute_kinematics, frame_jacobian, frame_pose
from .model import GeneralizedState, RobotModel
from .rotations import quat_integrate, quat_normalize

BAUMGARTE_ALPHA = 20.0  # 1/s, velocity error gain
BAUMGARTE_BETA = 100.0  # 1/s^2, position error gain

MAX_SUBSTEP = 0.01


class SimError(RuntimeError):
    def __init__(self, message: str, last_good: GeneralizedState | None = None):
        super().__init__(message)
        self.last_good = last_good


@dataclass
class StepResult:
    state: GeneralizedState
    forces: dict[str, np.ndarray]  # world contact force per active frame
    released: tuple[str, ...]  # contacts dropped by the lift-off re-solve


def _velocity_vector(state: GeneralizedState) -> np.ndarray:
    return np.concatenate([state.base_vel, state.base_angvel, state.qd_a])


def step(
    model: RobotModel,
    state: GeneralizedState,
    tau: np.ndarray,
    contacts: Mapping[str, np.ndarray],
    dt: float,
    gravity: np.ndarray = GRAVITY,
) -> StepResult:
    """Advance one substep under joint torques and anchored point contacts.

    ``contacts`` maps frame names to fixed world anchor points. Contacts
    whose solved vertical force is negative are released within the step.
    """
    if not 0.0 < dt <= MAX_SUBSTEP:
        raise SimError(f"substep {dt} outside (0, {MAX_SUBSTEP}]")
    nv = model.nv
    kin = compute_kinematics(model, state)
    M = mass_matrix(model, state, kin=kin)
    h = bias_forces(model, state, gravity=gravity, kin=kin)
    u = _velocity_vector(state)
    f_gen = np.concatenate([np.zeros(6), np.asarray(tau, dtype=float)])

    names = list(contacts)
    jacobians = {}
    rhs_rows = {}
    for name in names:
        J6, drift6 = frame_jacobian(model, state, name, kin=kin)
        pos, _ = frame_pose(model, state, name, kin=kin)
        J = J6[0:3]
        err = pos - np.asarray(contacts[name], dtype=float)
        rhs_rows[name] = -drift6[0:3] - BAUMGARTE_ALPHA * (J @ u) - BAUMGARTE_BETA * err
        jacobians[name] = J

    active = list(names)
    released: list[str] = []
    while True:
        m = 3 * len(active)
        K = np.zeros((nv + m, nv + m))
        K[0:nv, 0:nv] = M
        rhs = np.zeros(nv + m)
        rhs[0:nv] = f_gen - h
        for k, name in enumerate(active):
            rows = nv + 3 * k
            K[rows : rows + 3, 0:nv] = jacobians[name]
            K[0:nv, rows : rows + 3] = -jacobians[name].T
            rhs[rows : rows + 3] = rhs_rows[name]
        try:
            sol = np.linalg.solve(K, rhs)
        except np.linalg.LinAlgError as exc:
            raise SimError(
                f"singular contact system with contacts {active}", last_good=state
            ) from exc
        if not np.all(np.isfinite(sol)) or np.abs(sol).max() > 1e10:
            # redundant or inconsistent contact geometry blows up the solve
            raise SimError(
                f"singular contact system with contacts {active}", last_good=state
            )
        qdd = sol[0:nv]
        forces = {
            name: sol[nv + 3 * k : nv + 3 * k + 3] for k, name in enumerate(active)
        }
        pulling = [name for name in active if forces[name][2] < 0.0]
        if not pulling:
            break
        for name in pulling:
            active.remove(name)
            released.append(name)

    u_next = u + qdd * dt
    u_mid = u + 0.5 * qdd * dt  # exact position update under constant acceleration
    next_state = GeneralizedState(
        base_pos=state.base_pos + u_mid[0:3] * dt,
        base_quat=quat_normalize(quat_integrate(state.base_quat, u_mid[3:6], dt)),
        q_a=state.q_a + u_mid[6:] * dt,
        base_vel=u_next[0:3],
        base_angvel=u_next[3:6],
        qd_a=u_next[6:],
        time=state.time + dt,
    )
    flat = np.concatenate(
        [next_state.base_pos, next_state.base_quat, next_state.q_a, u_next]
    )
    if not np.all(np.isfinite(flat)):
        raise SimError("state became non-finite; aborting", last_good=state)
    return StepResult(state=next_state, forces=forces, released=tuple(released))


def kinetic_energy(model: RobotModel, state: GeneralizedState) -> float:
    u = _velocity_vector(state)
    M = mass_matrix(model, state)
    return 0.5 * float(u @ M @ u)


def system_momentum(model: RobotModel, state: GeneralizedState) -> np.ndarray:
    """World-frame linear and angular momentum (about the origin), stacked."""
    kin = compute_kinematics(model, state)
    lin = np.zeros(3)
    ang = np.zeros(3)
    for li, link in enumerate(model.links):
        R = kin.rot[li]
        arm = R @ link.com
        com = kin.pos[li] + arm
        w = kin.ang_vel[li]
        v_com = kin.lin_vel[li] + np.cross(w, arm)
        I_w = R @ link.inertia @ R.T
        lin += link.mass * v_com
        ang += I_w @ w + np.cross(com, link.mass * v_com)
    return np.concatenate([lin, ang])
