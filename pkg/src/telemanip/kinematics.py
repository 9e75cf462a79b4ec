"""Forward kinematics, frame Jacobians and the velocity/acceleration recursion.

Conventions: generalized velocity u = [v_base, w_base, qd_a] with the base
linear velocity taken at the base origin and both base components expressed
in the world frame. Frame Jacobians are 6 x (6+n_a), linear rows first.

The recursions run at control rate, so per-model constants (joint offset
rotations, Rodrigues terms, ancestor paths) are precomputed once and cached.
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass

import numpy as np

from .model import FLOATING, GeneralizedState, ModelError, RobotModel
from .rotations import matrix_to_quat, quat_to_matrix, skew


def _cross(a, b):
    # np.cross carries too much overhead for single 3-vectors
    return np.array(
        (
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        )
    )


class _Tables:
    """Static structure arrays derived from a model, indexed by actuated slot."""

    def __init__(self, model: RobotModel):
        n_a = model.actuated_count
        self.nl = len(model.links)
        self.base_idx = model.link_index["base"]
        slot_of_joint = {ji: slot for slot, ji in enumerate(model.actuated_joints)}

        # (link, parent link, joint, slot) for every non-base link, parents first
        self.chain: list[tuple[int, int, int, int]] = []
        for li in model.topological:
            ji = model.parent_joint[li]
            joint = model.joints[ji]
            if joint.kind == FLOATING:
                continue
            pi = model.link_index[joint.parent]
            self.chain.append((li, pi, ji, slot_of_joint[ji]))

        self.opos = np.zeros((n_a, 3))
        self.axis_off = np.zeros((n_a, 3))
        # joint rotation R_off @ (I + sin K + (1-cos) K^2) folded into three terms
        self.A0 = np.zeros((n_a, 3, 3))
        self.A1 = np.zeros((n_a, 3, 3))
        self.A2 = np.zeros((n_a, 3, 3))
        for slot, ji in enumerate(model.actuated_joints):
            joint = model.joints[ji]
            R_off = quat_to_matrix(joint.origin_quat)
            K = skew(np.asarray(joint.axis, dtype=float))
            self.opos[slot] = joint.origin_pos
            self.axis_off[slot] = R_off @ joint.axis
            self.A0[slot] = R_off
            self.A1[slot] = R_off @ K
            self.A2[slot] = R_off @ (K @ K)

        # ancestor (joint, slot) pairs per link, walking up to the base
        self.paths: list[list[tuple[int, int]]] = []
        for li in range(self.nl):
            path = []
            node = li
            while True:
                ji = model.parent_joint[node]
                joint = model.joints[ji]
                if joint.kind == FLOATING:
                    break
                path.append((ji, slot_of_joint[ji]))
                node = model.link_index[joint.parent]
            self.paths.append(path)

        self.mass = np.array([l.mass for l in model.links])
        self.com = np.array([l.com for l in model.links])
        self.inertia = np.array([l.inertia for l in model.links])
        self.child_link = [model.link_index[j.child] for j in model.joints]


_table_cache: weakref.WeakKeyDictionary = weakref.WeakKeyDictionary()


def tables(model: RobotModel) -> _Tables:
    t = _table_cache.get(model)
    if t is None:
        t = _Tables(model)
        _table_cache[model] = t
    return t


@dataclass
class BodyKinematics:
    """Per-link world-frame quantities at one state (links in model order)."""

    pos: np.ndarray  # (n_links, 3) link origins
    rot: np.ndarray  # (n_links, 3, 3)
    lin_vel: np.ndarray  # (n_links, 3) of the link origin
    ang_vel: np.ndarray  # (n_links, 3)
    joint_axis_world: np.ndarray  # (n_joints, 3); zero rows for the floating joint


def compute_kinematics(model: RobotModel, state: GeneralizedState) -> BodyKinematics:
    t = tables(model)
    nl = t.nl
    pos = np.empty((nl, 3))
    rot = np.empty((nl, 3, 3))
    lin = np.empty((nl, 3))
    ang = np.empty((nl, 3))
    axes = np.zeros((len(model.joints), 3))

    bi = t.base_idx
    pos[bi] = state.base_pos
    rot[bi] = quat_to_matrix(state.base_quat)
    lin[bi] = state.base_vel
    ang[bi] = state.base_angvel

    q, qd = state.q_a, state.qd_a
    sin, cos = math.sin, math.cos
    for li, pi, ji, slot in t.chain:
        Rp = rot[pi]
        th = q[slot]
        local = t.A0[slot] + sin(th) * t.A1[slot] + (1.0 - cos(th)) * t.A2[slot]
        rot[li] = Rp @ local
        r = Rp @ t.opos[slot]
        pos[li] = pos[pi] + r
        aw = Rp @ t.axis_off[slot]
        axes[ji] = aw
        wp = ang[pi]
        ang[li] = wp + aw * qd[slot]
        lin[li] = lin[pi] + _cross(wp, r)
    return BodyKinematics(pos, rot, lin, ang, axes)


def body_accelerations(
    model: RobotModel,
    state: GeneralizedState,
    kin: BodyKinematics,
    u_dot: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """World-frame (linear at link origin, angular) accelerations for a given u̇."""
    t = tables(model)
    lin_acc = np.empty((t.nl, 3))
    ang_acc = np.empty((t.nl, 3))
    bi = t.base_idx
    lin_acc[bi] = u_dot[0:3]
    ang_acc[bi] = u_dot[3:6]

    pos, ang, axes = kin.pos, kin.ang_vel, kin.joint_axis_world
    qd = state.qd_a
    for li, pi, ji, slot in t.chain:
        r = pos[li] - pos[pi]
        w_p = ang[pi]
        al_p = ang_acc[pi]
        aw = axes[ji]
        ang_acc[li] = al_p + aw * u_dot[6 + slot] + _cross(w_p, aw) * qd[slot]
        lin_acc[li] = lin_acc[pi] + _cross(al_p, r) + _cross(w_p, _cross(w_p, r))
    return lin_acc, ang_acc


def _resolve_frame(model: RobotModel, frame_name: str):
    fr = model.frame_map.get(frame_name)
    if fr is None:
        raise ModelError(f"unknown frame '{frame_name}'")
    return fr, model.link_index[fr.link]


def frame_pose(
    model: RobotModel, state: GeneralizedState, frame_name: str, kin: BodyKinematics | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """World pose (position, quaternion) of a named frame."""
    fr, li = _resolve_frame(model, frame_name)
    if kin is None:
        kin = compute_kinematics(model, state)
    p = kin.pos[li] + kin.rot[li] @ fr.offset
    R = kin.rot[li] @ quat_to_matrix(fr.quat)
    return p, matrix_to_quat(R)


def forward_kinematics(model: RobotModel, state: GeneralizedState, frame_name: str):
    return frame_pose(model, state, frame_name)


def frame_jacobian(
    model: RobotModel,
    state: GeneralizedState,
    frame_name: str,
    kin: BodyKinematics | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """World-frame Jacobian J (6 x nv, linear rows first) and drift J̇u of a frame."""
    fr, li = _resolve_frame(model, frame_name)
    if kin is None:
        kin = compute_kinematics(model, state)
    t = tables(model)
    p_f = kin.pos[li] + kin.rot[li] @ fr.offset

    J = np.zeros((6, model.nv))
    J[0:3, 0:3] = np.eye(3)
    J[0:3, 3:6] = -skew(p_f - kin.pos[t.base_idx])
    J[3:6, 3:6] = np.eye(3)
    for ji, slot in t.paths[li]:
        a = kin.joint_axis_world[ji]
        p_j = kin.pos[t.child_link[ji]]
        J[0:3, 6 + slot] = _cross(a, p_f - p_j)
        J[3:6, 6 + slot] = a

    # drift term: frame acceleration under zero generalized acceleration
    lin_acc, ang_acc = body_accelerations(model, state, kin, np.zeros(model.nv))
    r = p_f - kin.pos[li]
    w = kin.ang_vel[li]
    drift = np.concatenate(
        [lin_acc[li] + _cross(ang_acc[li], r) + _cross(w, _cross(w, r)), ang_acc[li]]
    )
    return J, drift


def point_jacobian(
    model: RobotModel,
    state: GeneralizedState,
    link_name: str,
    local_offset: np.ndarray,
    kin: BodyKinematics | None = None,
) -> np.ndarray:
    """Linear Jacobian (3 x nv) of a point attached to a link at a local offset."""
    if kin is None:
        kin = compute_kinematics(model, state)
    t = tables(model)
    li = model.link_index[link_name]
    p = kin.pos[li] + kin.rot[li] @ np.asarray(local_offset, dtype=float)
    J = np.zeros((3, model.nv))
    J[:, 0:3] = np.eye(3)
    J[:, 3:6] = -skew(p - kin.pos[t.base_idx])
    for ji, slot in t.paths[li]:
        a = kin.joint_axis_world[ji]
        J[:, 6 + slot] = _cross(a, p - kin.pos[t.child_link[ji]])
    return J


def frame_velocity(
    model: RobotModel, state: GeneralizedState, frame_name: str, kin: BodyKinematics | None = None
) -> np.ndarray:
    """World-frame twist [v, w] of a named frame."""
    fr, li = _resolve_frame(model, frame_name)
    if kin is None:
        kin = compute_kinematics(model, state)
    r = kin.rot[li] @ fr.offset
    v = kin.lin_vel[li] + _cross(kin.ang_vel[li], r)
    return np.concatenate([v, kin.ang_vel[li]])
