"""Floating-base dynamics: inertia matrix, bias forces, inverse dynamics.

Implements the composite-rigid-body recursion for M and a world-frame
Newton-Euler recursion for inverse dynamics / bias terms, in the same
generalized coordinates as kinematics (u = [v_base, w_base, qd_a]).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kinematics import (
    BodyKinematics,
    _cross,
    body_accelerations,
    compute_kinematics,
    tables,
)
from .model import GeneralizedState, RobotModel
from .rotations import skew

GRAVITY = np.array([0.0, 0.0, -9.81])


@dataclass
class DynamicsQuantities:
    """Dynamics terms evaluated at one state: M u̇ + h = generalized force."""

    M: np.ndarray
    h: np.ndarray

    @property
    def M_f(self) -> np.ndarray:
        return self.M[:6, :]

    @property
    def M_a(self) -> np.ndarray:
        return self.M[6:, :]

    @property
    def h_f(self) -> np.ndarray:
        return self.h[:6]

    @property
    def h_a(self) -> np.ndarray:
        return self.h[6:]


def inverse_dynamics(
    model: RobotModel,
    state: GeneralizedState,
    u_dot: np.ndarray,
    gravity: np.ndarray = GRAVITY,
    kin: BodyKinematics | None = None,
) -> np.ndarray:
    """Generalized forces realizing u̇ at the given state (no contacts)."""
    if kin is None:
        kin = compute_kinematics(model, state)
    t = tables(model)
    lin_acc, ang_acc = body_accelerations(model, state, kin, u_dot)

    # net inertial wrench per body (force, moment about the link origin), batched
    rot, w = kin.rot, kin.ang_vel
    r_c = np.einsum("lab,lb->la", rot, t.com)
    a_com = lin_acc + np.cross(ang_acc, r_c) + np.cross(w, np.cross(w, r_c))
    I_w = rot @ t.inertia @ rot.transpose(0, 2, 1)
    F = t.mass[:, None] * (a_com - np.asarray(gravity, dtype=float))
    Iw_w = np.einsum("lab,lb->la", I_w, w)
    N = np.einsum("lab,lb->la", I_w, ang_acc) + np.cross(w, Iw_w) + np.cross(r_c, F)

    # accumulate child wrenches onto parents (leaves first)
    f = F
    n = N
    pos = kin.pos
    for li, pi, _, _ in reversed(t.chain):
        f[pi] += f[li]
        n[pi] += n[li] + _cross(pos[li] - pos[pi], f[li])

    tau = np.empty(model.nv)
    bi = t.base_idx
    tau[0:3] = f[bi]
    tau[3:6] = n[bi]
    axes = kin.joint_axis_world
    for slot, ji in enumerate(model.actuated_joints):
        tau[6 + slot] = axes[ji] @ n[t.child_link[ji]]
    return tau


def bias_forces(
    model: RobotModel,
    state: GeneralizedState,
    gravity: np.ndarray = GRAVITY,
    kin: BodyKinematics | None = None,
) -> np.ndarray:
    """Coriolis + centrifugal + gravity vector h(q, u)."""
    return inverse_dynamics(model, state, np.zeros(model.nv), gravity, kin)


def mass_matrix(
    model: RobotModel, state: GeneralizedState, kin: BodyKinematics | None = None
) -> np.ndarray:
    """Joint-space inertia matrix via the composite-rigid-body recursion."""
    if kin is None:
        kin = compute_kinematics(model, state)
    t = tables(model)
    nv = model.nv
    bi = t.base_idx
    p_b = kin.pos[bi]
    eye3 = np.eye(3)

    # composite bodies per subtree: mass, COM, inertia about the COM (world frame)
    rot = kin.rot
    cm = t.mass.copy()
    cc = kin.pos + np.einsum("lab,lb->la", rot, t.com)
    ci = np.ascontiguousarray(rot @ t.inertia @ rot.transpose(0, 2, 1))
    for li, pi, _, _ in reversed(t.chain):
        m1, m2 = cm[pi], cm[li]
        c_new = (m1 * cc[pi] + m2 * cc[li]) / (m1 + m2)
        d1, d2 = cc[pi] - c_new, cc[li] - c_new
        ci[pi] += (
            ci[li]
            + m1 * ((d1 @ d1) * eye3 - np.outer(d1, d1))
            + m2 * ((d2 @ d2) * eye3 - np.outer(d2, d2))
        )
        cm[pi] = m1 + m2
        cc[pi] = c_new

    M = np.zeros((nv, nv))

    # base-base block from the whole-tree composite
    m_t, c_t, I_t = cm[bi], cc[bi], ci[bi]
    r_t = c_t - p_b
    M[0:3, 0:3] = m_t * eye3
    M[3:6, 0:3] = m_t * skew(r_t)
    M[0:3, 3:6] = M[3:6, 0:3].T
    M[3:6, 3:6] = I_t + m_t * ((r_t @ r_t) * eye3 - np.outer(r_t, r_t))

    # columns for each actuated joint against its ancestors and the base
    axes = kin.joint_axis_world
    for slot, ji in enumerate(model.actuated_joints):
        li = t.child_link[ji]
        a = axes[ji]
        m_s, c_s, I_s = cm[li], cc[li], ci[li]
        p_j = kin.pos[li]
        F = m_s * _cross(a, c_s - p_j)
        N_c = I_s @ a
        col = 6 + slot
        M[0:3, col] = F
        M[col, 0:3] = F
        mom = N_c + _cross(c_s - p_b, F)
        M[3:6, col] = mom
        M[col, 3:6] = mom
        for ji_a, slot_a in t.paths[li]:
            p_a = kin.pos[t.child_link[ji_a]]
            val = axes[ji_a] @ (N_c + _cross(c_s - p_a, F))
            M[6 + slot_a, col] = val
            M[col, 6 + slot_a] = val
    return M


def compute_dynamics(
    model: RobotModel,
    state: GeneralizedState,
    gravity: np.ndarray = GRAVITY,
    kin: BodyKinematics | None = None,
) -> DynamicsQuantities:
    if kin is None:
        kin = compute_kinematics(model, state)
    return DynamicsQuantities(
        M=mass_matrix(model, state, kin), h=bias_forces(model, state, gravity, kin)
    )
