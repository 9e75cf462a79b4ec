"""Model validation and dynamics self-checks.

Each check returns a name, a pass flag, and a one-line detail string, so
a report can be printed as text or serialized as JSON. The dynamics
checks compare analytic quantities against finite differences and short
closed-form trajectories rather than trusting the implementation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import bias_forces, compute_dynamics, inverse_dynamics, mass_matrix
from .kinematics import compute_kinematics, frame_jacobian, frame_pose
from .model import ModelError, RobotModel, load_model, neutral_state
from .rotations import quat_integrate
from .sim import step
from .wbc import (
    ArmRef,
    BaseRef,
    ContactSituation,
    TaskRefs,
    assemble_constraints,
    assemble_tasks,
    solve_wbc,
)

GRAVITY = 9.81
FD_STATES = 6
FD_EPS = 1e-6
FD_TOL = 1e-4


@dataclass
class Check:
    name: str
    passed: bool
    detail: str


@dataclass
class Report:
    model_name: str
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, passed: bool, detail: str) -> None:
        self.checks.append(Check(name, bool(passed), detail))

    def to_dict(self) -> dict:
        return {
            "model": self.model_name,
            "passed": self.passed,
            "checks": [
                {"name": c.name, "passed": c.passed, "detail": c.detail}
                for c in self.checks
            ],
        }


def _random_state(model: RobotModel, rng: np.random.Generator):
    state = neutral_state(model)
    state.base_pos = state.base_pos + rng.uniform(-0.05, 0.05, 3)
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = rng.uniform(-0.2, 0.2)
    state.base_quat = np.array(
        [np.cos(angle / 2), *(np.sin(angle / 2) * axis)]
    )
    state.q_a = state.q_a + rng.uniform(-0.2, 0.2, model.actuated_count)
    state.base_vel = rng.uniform(-0.5, 0.5, 3)
    state.base_angvel = rng.uniform(-0.5, 0.5, 3)
    state.qd_a = rng.uniform(-0.5, 0.5, model.actuated_count)
    return state


def _check_structure(model: RobotModel, report: Report) -> None:
    report.add(
        "link_masses_positive",
        all(link.mass > 0 for link in model.links),
        f"{len(model.links)} links, total {model.total_mass:.2f} kg",
    )
    bad = []
    for link in model.links:
        inertia = np.asarray(link.inertia)
        if not np.allclose(inertia, inertia.T, atol=1e-12):
            bad.append(link.name)
            continue
        if np.any(np.linalg.eigvalsh(inertia) <= 0):
            bad.append(link.name)
    report.add(
        "inertia_positive_definite",
        not bad,
        "all rotational inertias are symmetric positive definite"
        if not bad
        else f"bad inertia on: {', '.join(bad)}",
    )
    missing = [
        name
        for name in (*model.contact_names, model.end_effector)
        if name not in model.frame_map
    ]
    report.add(
        "frames_resolve",
        not missing,
        f"{len(model.frames)} frames, {len(model.contact_names)} contacts"
        if not missing
        else f"missing frames: {', '.join(missing)}",
    )
    report.add(
        "actuation_counts",
        model.nv == 6 + model.actuated_count,
        f"nv={model.nv}, actuated={model.actuated_count}",
    )


def _check_mass_matrix(model: RobotModel, report: Report, rng) -> None:
    worst_asym = 0.0
    min_eig = np.inf
    for _ in range(FD_STATES):
        state = _random_state(model, rng)
        M = mass_matrix(model, state)
        worst_asym = max(worst_asym, float(np.max(np.abs(M - M.T))))
        min_eig = min(min_eig, float(np.min(np.linalg.eigvalsh(0.5 * (M + M.T)))))
    report.add(
        "mass_matrix_spd",
        worst_asym < 1e-9 and min_eig > 0,
        f"max asymmetry {worst_asym:.2e}, min eigenvalue {min_eig:.2e}",
    )


def _check_jacobian_fd(model: RobotModel, report: Report, rng) -> None:
    """Frame linear Jacobians against position finite differences."""
    worst = 0.0
    frames = list(model.contact_names) + [model.end_effector]
    for _ in range(FD_STATES):
        state = _random_state(model, rng)
        kin = compute_kinematics(model, state)
        for frame in frames:
            J, _ = frame_jacobian(model, state, frame, kin=kin)
            for col in range(model.nv):
                du = np.zeros(model.nv)
                du[col] = 1.0
                plus = _integrate_config(model, state, du, FD_EPS)
                minus = _integrate_config(model, state, du, -FD_EPS)
                p_plus, _ = frame_pose(model, plus, frame)
                p_minus, _ = frame_pose(model, minus, frame)
                fd = (p_plus - p_minus) / (2 * FD_EPS)
                worst = max(worst, float(np.max(np.abs(J[0:3, col] - fd))))
    report.add(
        "frame_jacobian_fd",
        worst < FD_TOL,
        f"max |J - FD| = {worst:.2e} over {FD_STATES} states",
    )


def _integrate_config(model, state, du, eps):
    """Perturb the configuration along a hybrid velocity direction."""
    out = neutral_state(model)
    out.base_pos = state.base_pos + eps * du[0:3]
    out.base_quat = quat_integrate(state.base_quat, du[3:6], eps)
    out.q_a = state.q_a + eps * du[6:]
    return out


def _check_inverse_dynamics(model: RobotModel, report: Report, rng) -> None:
    """inverse_dynamics must equal M qdd + h at random states."""
    worst = 0.0
    for _ in range(FD_STATES):
        state = _random_state(model, rng)
        qdd = rng.uniform(-2.0, 2.0, model.nv)
        lhs = inverse_dynamics(model, state, qdd)
        rhs = mass_matrix(model, state) @ qdd + bias_forces(model, state)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    report.add(
        "inverse_dynamics_consistent",
        worst < 1e-8,
        f"max |ID - (M qdd + h)| = {worst:.2e}",
    )


def _check_free_fall(model: RobotModel, report: Report) -> None:
    """With no contacts and no torque the base must fall at g."""
    state = neutral_state(model)
    z0 = state.base_pos[2]
    dt = 0.001
    steps = 100
    tau = np.zeros(model.actuated_count)
    for _ in range(steps):
        state = step(model, state, tau, {}, dt).state
    expected = z0 - 0.5 * GRAVITY * (steps * dt) ** 2
    err = abs(state.base_pos[2] - expected)
    report.add(
        "free_fall_parabola",
        err < 1e-3,
        f"base z after {steps} ms: {state.base_pos[2]:.5f} vs {expected:.5f}",
    )
    qn = float(np.linalg.norm(state.base_quat))
    report.add(
        "quaternion_normalized",
        abs(qn - 1.0) < 1e-9,
        f"|quat| = {qn:.12f} after integration",
    )


def _check_standing_qp(model: RobotModel, report: Report) -> None:
    """Standing solve must balance weight with the contact forces."""
    state = neutral_state(model)
    kin = compute_kinematics(model, state)
    ee_pos, ee_quat = frame_pose(model, state, model.end_effector, kin=kin)
    refs = TaskRefs(
        base=BaseRef(
            pos=state.base_pos.copy(),
            quat=state.base_quat.copy(),
            vel=np.zeros(3),
            angvel=np.zeros(3),
        ),
        arm=ArmRef(pos=ee_pos, quat=ee_quat, vel=np.zeros(6)),
        posture=state.q_a.copy(),
        posture_vel=np.zeros(model.actuated_count),
        posture_acc=np.zeros(model.actuated_count),
    )
    stance = tuple(model.contact_names)
    tasks = assemble_tasks(model, state, refs, len(stance), kin=kin)
    dyn = compute_dynamics(model, state, kin=kin)
    constraints = assemble_constraints(
        model, state, dyn, ContactSituation(frames=stance), kin=kin
    )
    solution = solve_wbc(tasks, constraints)
    if not solution.ok:
        report.add("standing_qp", False, f"solver status {solution.status}")
        return
    weight = model.total_mass * GRAVITY
    fz = float(np.sum(solution.forces[:, 2]))
    report.add(
        "standing_qp",
        abs(fz - weight) / weight < 0.01,
        f"sum fz = {fz:.2f} N vs weight {weight:.2f} N",
    )


def run_checks(model: RobotModel, seed: int = 0) -> Report:
    """Run every self-check against the model and collect a report."""
    rng = np.random.default_rng(seed)
    report = Report(model_name=model.name)
    _check_structure(model, report)
    if not report.passed:
        return report
    _check_mass_matrix(model, report, rng)
    _check_jacobian_fd(model, report, rng)
    _check_inverse_dynamics(model, report, rng)
    _check_free_fall(model, report)
    _check_standing_qp(model, report)
    return report


def check_model_source(source, seed: int = 0) -> Report:
    """Load a model by path or name and self-check it.

    A model that fails its own load-time validation (bad inertia, broken
    tree, missing frames) becomes a failing 'model_loads' check instead
    of an exception, so the report always comes back.
    """
    try:
        model = load_model(source)
    except ModelError as exc:
        report = Report(model_name=str(source))
        report.add("model_loads", False, str(exc))
        return report
    report = run_checks(model, seed=seed)
    report.checks.insert(
        0,
        Check(
            "model_loads",
            True,
            f"{len(model.links)} links, {model.actuated_count} actuated joints",
        ),
    )
    return report
