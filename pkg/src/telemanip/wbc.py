"""Whole-body controller: weighted task QP over X = [q̈, λ].

Tasks are soft (weighted least squares), constraints are hard: floating-base
dynamics, torque limits in eliminated form, non-slip contact and a linearized
friction pyramid. One control tick assembles both, solves the QP and converts
the optimum into torque plus joint position/velocity references.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import DynamicsQuantities
from .kinematics import BodyKinematics, compute_kinematics, frame_jacobian, frame_pose
from .model import GeneralizedState, ModelError, RobotModel
from .qp import OPTIMAL, solve_qp
from .rotations import orientation_error

W_BASE = 10.0
W_SWING = 50.0
W_EE = 20.0
W_POSTURE = 0.1
KP_CART = 100.0
KD_CART = 20.0
KP_POSTURE = 50.0
KD_POSTURE = 10.0
EPS_ACC = 1e-6
EPS_FORCE = 1e-10
F_MIN = 1.0
MU_DEFAULT = 0.6


class WbcError(RuntimeError):
    pass


@dataclass
class TaskSpec:
    """One soft objective ||A x - b||^2 with weight, x = [q̈, λ]."""

    name: str
    A: np.ndarray
    b: np.ndarray
    weight: float

    def __post_init__(self):
        if self.A.shape[0] != self.b.shape[0]:
            raise WbcError(f"task '{self.name}': row mismatch {self.A.shape} vs {self.b.shape}")
        if self.weight < 0:
            raise WbcError(f"task '{self.name}': negative weight")

    def residual(self, x: np.ndarray) -> float:
        if self.A.shape[0] == 0:
            return 0.0
        return float(np.linalg.norm(self.A @ x - self.b))


@dataclass
class ContactSituation:
    """Which feet press on the ground, and the friction model that applies."""

    frames: tuple[str, ...]
    mu: float | np.ndarray = MU_DEFAULT  # scalar broadcasts to every contact
    normal: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    faces: int = 4
    f_min: float = F_MIN

    def __post_init__(self):
        self.frames = tuple(self.frames)
        self.mu = np.broadcast_to(np.asarray(self.mu, dtype=float), (len(self.frames),)).copy()
        self.normal = np.asarray(self.normal, dtype=float)
        if np.any(self.mu <= 0):
            raise WbcError("friction coefficients must be positive")
        if abs(np.linalg.norm(self.normal) - 1.0) > 1e-9:
            raise WbcError("contact normal must be a unit vector")
        if self.faces != 4:
            raise WbcError("only the 4-face pyramid is supported")

    @property
    def count(self) -> int:
        return len(self.frames)


@dataclass
class BaseRef:
    pos: np.ndarray
    quat: np.ndarray
    vel: np.ndarray = field(default_factory=lambda: np.zeros(3))
    angvel: np.ndarray = field(default_factory=lambda: np.zeros(3))
    acc: np.ndarray = field(default_factory=lambda: np.zeros(6))


@dataclass
class FootRef:
    frame: str
    pos: np.ndarray
    vel: np.ndarray = field(default_factory=lambda: np.zeros(3))
    acc: np.ndarray = field(default_factory=lambda: np.zeros(3))


@dataclass
class ArmRef:
    pos: np.ndarray
    quat: np.ndarray
    vel: np.ndarray = field(default_factory=lambda: np.zeros(6))
    acc: np.ndarray = field(default_factory=lambda: np.zeros(6))


@dataclass
class TaskRefs:
    base: BaseRef
    arm: ArmRef
    swing: list[FootRef] = field(default_factory=list)
    posture: np.ndarray | None = None  # defaults to the model home
    posture_vel: np.ndarray | None = None
    posture_acc: np.ndarray | None = None  # joint-space feedforward


@dataclass
class WbcConstraints:
    A_eq: np.ndarray
    b_eq: np.ndarray
    A_in: np.ndarray
    b_in: np.ndarray
    eq_labels: list[str]
    ineq_labels: list[str]
    # affine torque map tau = T x + t0 (constraint ii in eliminated form)
    T: np.ndarray
    t0: np.ndarray
    nv: int
    contact_frames: tuple[str, ...]
    torque_limits: tuple[np.ndarray, np.ndarray]

    @property
    def nx(self) -> int:
        return self.nv + 3 * len(self.contact_frames)


@dataclass
class WbcSolution:
    qdd: np.ndarray
    forces: np.ndarray  # (n_contacts, 3) world-frame ground reaction forces
    tau: np.ndarray
    objective: float
    iterations: int
    status: str
    most_violated: str | None = None
    torque_limits: tuple[np.ndarray, np.ndarray] | None = None

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


@dataclass
class CommandSet:
    tau: np.ndarray
    q_ref: np.ndarray
    qd_ref: np.ndarray


def _pd_cartesian(p_ref, p, v_ref, v, kp=KP_CART, kd=KD_CART):
    return kp * (p_ref - p) + kd * (v_ref - v)


def assemble_tasks(
    model: RobotModel,
    state: GeneralizedState,
    refs: TaskRefs,
    n_contacts: int,
    kin: BodyKinematics | None = None,
) -> list[TaskSpec]:
    """Build the fixed four-task set: base pose, swing feet, end effector, posture."""
    if kin is None:
        kin = compute_kinematics(model, state)
    nv = model.nv
    nx = nv + 3 * n_contacts
    u = state.u

    def widen(J):
        A = np.zeros((J.shape[0], nx))
        A[:, :nv] = J
        return A

    tasks = []

    J, drift = frame_jacobian(model, state, "base", kin=kin)
    p, q = frame_pose(model, state, "base", kin=kin)
    vel = J @ u
    b = np.empty(6)
    b[0:3] = _pd_cartesian(refs.base.pos, p, refs.base.vel, vel[0:3])
    b[3:6] = KP_CART * orientation_error(refs.base.quat, q) + KD_CART * (
        refs.base.angvel - vel[3:6]
    )
    b += refs.base.acc - drift
    tasks.append(TaskSpec("base", widen(J), b, W_BASE))

    rows_A, rows_b = [], []
    for ref in refs.swing:
        J, drift = frame_jacobian(model, state, ref.frame, kin=kin)
        p, _ = frame_pose(model, state, ref.frame, kin=kin)
        v = (J @ u)[0:3]
        rows_A.append(J[0:3])
        rows_b.append(_pd_cartesian(ref.pos, p, ref.vel, v) + ref.acc - drift[0:3])
    if rows_A:
        tasks.append(TaskSpec("swing", widen(np.vstack(rows_A)), np.concatenate(rows_b), W_SWING))
    else:
        tasks.append(TaskSpec("swing", np.zeros((0, nx)), np.zeros(0), W_SWING))

    J, drift = frame_jacobian(model, state, model.end_effector, kin=kin)
    p, q = frame_pose(model, state, model.end_effector, kin=kin)
    vel = J @ u
    b = np.empty(6)
    b[0:3] = _pd_cartesian(refs.arm.pos, p, refs.arm.vel[0:3], vel[0:3])
    b[3:6] = KP_CART * orientation_error(refs.arm.quat, q) + KD_CART * (
        refs.arm.vel[3:6] - vel[3:6]
    )
    b += refs.arm.acc - drift
    tasks.append(TaskSpec("end_effector", widen(J), b, W_EE))

    n_a = model.actuated_count
    q_des = model.home if refs.posture is None else refs.posture
    qd_des = np.zeros(n_a) if refs.posture_vel is None else refs.posture_vel
    A = np.zeros((n_a, nx))
    A[:, 6 : 6 + n_a] = np.eye(n_a)
    b = KP_POSTURE * (q_des - state.q_a) + KD_POSTURE * (qd_des - state.qd_a)
    if refs.posture_acc is not None:
        b = b + refs.posture_acc
    tasks.append(TaskSpec("posture", A, b, W_POSTURE))
    return tasks


def _contact_tangents(normal: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ref = np.array([1.0, 0.0, 0.0])
    if abs(normal @ ref) > 0.9:
        ref = np.array([0.0, 1.0, 0.0])
    t1 = ref - (ref @ normal) * normal
    t1 /= np.linalg.norm(t1)
    return t1, np.cross(normal, t1)


def assemble_constraints(
    model: RobotModel,
    state: GeneralizedState,
    dyn: DynamicsQuantities,
    contacts: ContactSituation,
    kin: BodyKinematics | None = None,
) -> WbcConstraints:
    """Hard constraint set: dynamics rows, non-slip rows, torque and friction bounds."""
    if contacts.count == 0:
        raise WbcError("unsupported contact situation: no active contacts (airborne)")
    for name in contacts.frames:
        if name not in model.frame_map:
            raise ModelError(f"unknown contact frame '{name}'")
    if kin is None:
        kin = compute_kinematics(model, state)

    nv = model.nv
    n_a = model.actuated_count
    n_c = contacts.count
    nx = nv + 3 * n_c

    J_c = np.zeros((3 * n_c, nv))
    drift_c = np.zeros(3 * n_c)
    for i, name in enumerate(contacts.frames):
        J, drift = frame_jacobian(model, state, name, kin=kin)
        J_c[3 * i : 3 * i + 3] = J[0:3]
        drift_c[3 * i : 3 * i + 3] = drift[0:3]

    # (i) floating-base dynamics: M_f q̈ - J_f' λ = -h_f
    A_dyn = np.zeros((6, nx))
    A_dyn[:, :nv] = dyn.M_f
    A_dyn[:, nv:] = -J_c[:, 0:6].T
    b_dyn = -dyn.h_f

    # (iii) non-slip: J_c q̈ = -J̇_c u
    A_slip = np.zeros((3 * n_c, nx))
    A_slip[:, :nv] = J_c
    b_slip = -drift_c

    A_eq = np.vstack([A_dyn, A_slip])
    b_eq = np.concatenate([b_dyn, b_slip])
    eq_labels = [f"dynamics[{ax}]" for ax in ("fx", "fy", "fz", "mx", "my", "mz")]
    for name in contacts.frames:
        eq_labels += [f"non_slip[{name},{ax}]" for ax in "xyz"]

    # (ii) torque limits on tau = M_a q̈ + h_a - J_a' λ
    T = np.zeros((n_a, nx))
    T[:, :nv] = dyn.M_a
    T[:, nv:] = -J_c[:, 6:].T
    t0 = dyn.h_a.copy()
    lo, hi = model.torque_limit_arrays()
    names = model.actuated_names()
    A_in_rows = [T, -T]
    b_in_rows = [hi - t0, t0 - lo]
    ineq_labels = [f"torque_max[{n}]" for n in names] + [f"torque_min[{n}]" for n in names]

    # (iv) friction pyramid per contact, inner approximation
    t1, t2 = _contact_tangents(contacts.normal)
    nrm = contacts.normal
    for i, name in enumerate(contacts.frames):
        c = contacts.mu[i] / np.sqrt(2.0)
        P = np.zeros((5, nx))
        sl = slice(nv + 3 * i, nv + 3 * i + 3)
        P[0, sl] = -nrm
        P[1, sl] = t1 - c * nrm
        P[2, sl] = -t1 - c * nrm
        P[3, sl] = t2 - c * nrm
        P[4, sl] = -t2 - c * nrm
        A_in_rows.append(P)
        b_in_rows.append(np.array([-contacts.f_min, 0.0, 0.0, 0.0, 0.0]))
        ineq_labels += [
            f"f_min[{name}]",
            f"friction[{name},+t1]",
            f"friction[{name},-t1]",
            f"friction[{name},+t2]",
            f"friction[{name},-t2]",
        ]

    return WbcConstraints(
        A_eq=A_eq,
        b_eq=b_eq,
        A_in=np.vstack(A_in_rows),
        b_in=np.concatenate(b_in_rows),
        eq_labels=eq_labels,
        ineq_labels=ineq_labels,
        T=T,
        t0=t0,
        nv=nv,
        contact_frames=contacts.frames,
        torque_limits=(lo, hi),
    )


def solve_wbc(
    tasks: list[TaskSpec], constraints: WbcConstraints, reg_scale: float = 1.0
) -> WbcSolution:
    if not tasks:
        raise WbcError("at least one task is required")
    nx = constraints.nx
    nv = constraints.nv

    reg = np.full(nx, EPS_ACC)
    reg[nv:] = EPS_FORCE
    reg *= reg_scale
    H = 2.0 * np.diag(reg)
    g = np.zeros(nx)
    for t in tasks:
        if t.A.shape[1] != nx:
            raise WbcError(f"task '{t.name}': expected {nx} columns, got {t.A.shape[1]}")
        if t.A.shape[0] == 0:
            continue
        H += 2.0 * t.weight * t.A.T @ t.A
        g -= 2.0 * t.weight * t.A.T @ t.b

    res = solve_qp(
        H,
        g,
        constraints.A_eq,
        constraints.b_eq,
        constraints.A_in,
        constraints.b_in,
        eq_labels=constraints.eq_labels,
        ineq_labels=constraints.ineq_labels,
    )
    x = res.x
    objective = sum(t.weight * t.residual(x) ** 2 for t in tasks) + float(
        reg @ (x * x)
    )
    return WbcSolution(
        qdd=x[:nv],
        forces=x[nv:].reshape(-1, 3),
        tau=constraints.T @ x + constraints.t0,
        objective=objective,
        iterations=res.iterations,
        status=res.status,
        most_violated=res.most_violated,
        torque_limits=constraints.torque_limits,
    )


def extract_commands(
    solution: WbcSolution, state: GeneralizedState, dt: float
) -> CommandSet:
    """Torque plus integrated joint references for the low-level loop."""
    if not solution.ok:
        raise WbcError(f"cannot extract commands from a '{solution.status}' solution")
    if dt < 0:
        raise WbcError("dt must be nonnegative")
    qdd_a = solution.qdd[6:]
    qd_ref = state.qd_a + qdd_a * dt
    q_ref = state.q_a + state.qd_a * dt + 0.5 * qdd_a * dt * dt
    tau = solution.tau
    if solution.torque_limits is not None:
        lo, hi = solution.torque_limits
        clipped = np.clip(tau, lo, hi)
        if np.abs(clipped - tau).max(initial=0.0) > 1e-6:
            raise WbcError("torque exceeded limits beyond solver feasibility tolerance")
        tau = clipped
    return CommandSet(tau=tau, q_ref=q_ref, qd_ref=qd_ref)
