"""Dense convex QP solver: primal-dual interior point with Mehrotra steps.

Solves   min 0.5 x'Hx + g'x   s.t.  A_eq x = b_eq,  A_in x <= b_in
for small dense instances (tens of variables). H must be positive definite;
callers get that by adding a diagonal regularizer.

On convergence an active-set polish resolves the identified face exactly, so
inactive constraints do not leak into the solution through the barrier.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

OPTIMAL = "optimal"
MAX_ITERATIONS = "max_iterations"
INFEASIBLE = "infeasible"

_STEP_SCALE = 0.995


@dataclass
class QpResult:
    x: np.ndarray
    status: str
    iterations: int
    objective: float
    kkt_residual: float
    most_violated: str | None = None

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


def _objective(H, g, x) -> float:
    return float(0.5 * x @ H @ x + g @ x)


def _solve_equality_kkt(H, g, A_eq, b_eq):
    """Direct KKT solve for the equality-constrained problem."""
    n = H.shape[0]
    m = A_eq.shape[0]
    K = np.zeros((n + m, n + m))
    K[:n, :n] = H
    K[:n, n:] = A_eq.T
    K[n:, :n] = A_eq
    rhs = np.concatenate([-g, b_eq])
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError:
        # rank-deficient equality rows: fall back to a ridged least-squares
        K[n:, n:] = -1e-12 * np.eye(m)
        sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    return sol[:n], sol[n:]


def _feasibility_probe(A_eq, b_eq, A_in, b_in, n, iters=40):
    """Gauss-Newton on the hinge-squared violation; returns (x, max violation)."""
    x = np.zeros(n)
    for _ in range(iters):
        rows = [A_eq] if A_eq.size else []
        res = [A_eq @ x - b_eq] if A_eq.size else []
        if A_in.size:
            viol = A_in @ x - b_in
            act = viol > -1e-12
            if act.any():
                rows.append(A_in[act])
                res.append(viol[act])
        if not rows:
            break
        A = np.vstack(rows)
        r = np.concatenate(res)
        dx = np.linalg.lstsq(A.T @ A + 1e-10 * np.eye(n), -A.T @ r, rcond=None)[0]
        x = x + dx
        if np.abs(dx).max() < 1e-12:
            break
    worst = 0.0
    if A_eq.size:
        worst = np.abs(A_eq @ x - b_eq).max()
    if A_in.size:
        worst = max(worst, float(np.maximum(A_in @ x - b_in, 0.0).max()))
    return x, worst


def _worst_row_label(x, A_eq, b_eq, A_in, b_in, eq_labels, ineq_labels):
    worst_val, worst_label = -1.0, None
    if A_eq.size:
        r = np.abs(A_eq @ x - b_eq)
        i = int(np.argmax(r))
        worst_val, worst_label = r[i], eq_labels[i]
    if A_in.size:
        v = A_in @ x - b_in
        j = int(np.argmax(v))
        if v[j] > worst_val:
            worst_val, worst_label = v[j], ineq_labels[j]
    return worst_label


def _polish(H, g, A_eq, b_eq, A_in, b_in, x, z, feas_tol):
    """Re-solve on the active face; keep the result only if it checks out."""
    m_i = A_in.shape[0]
    slack = b_in - A_in @ x if m_i else np.zeros(0)
    active = (slack < z) if m_i else np.zeros(0, dtype=bool)
    rows = [A_eq] if A_eq.size else []
    rhs = [b_eq] if A_eq.size else []
    if active.any():
        rows.append(A_in[active])
        rhs.append(b_in[active])
    if rows:
        A = np.vstack(rows)
        b = np.concatenate(rhs)
    else:
        A = np.zeros((0, H.shape[0]))
        b = np.zeros(0)
    try:
        x_p, mult = _solve_equality_kkt(H, g, A, b)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(x_p)):
        return None
    n_eq = A_eq.shape[0] if A_eq.size else 0
    if np.any(mult[n_eq:] < -feas_tol):
        return None
    if m_i:
        if np.max(A_in @ x_p - b_in, initial=0.0) > 1e-9:
            return None
    return x_p


def solve_qp(
    H: np.ndarray,
    g: np.ndarray,
    A_eq: np.ndarray | None = None,
    b_eq: np.ndarray | None = None,
    A_in: np.ndarray | None = None,
    b_in: np.ndarray | None = None,
    kkt_tol: float = 1e-8,
    feas_tol: float = 1e-6,
    max_iterations: int = 100,
    eq_labels: list[str] | None = None,
    ineq_labels: list[str] | None = None,
) -> QpResult:
    H = np.asarray(H, dtype=float)
    g = np.asarray(g, dtype=float)
    n = H.shape[0]
    A_eq = np.zeros((0, n)) if A_eq is None else np.asarray(A_eq, dtype=float)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float)
    A_in = np.zeros((0, n)) if A_in is None else np.asarray(A_in, dtype=float)
    b_in = np.zeros(0) if b_in is None else np.asarray(b_in, dtype=float)
    m_e, m_i = A_eq.shape[0], A_in.shape[0]
    if eq_labels is None:
        eq_labels = [f"eq[{i}]" for i in range(m_e)]
    if ineq_labels is None:
        ineq_labels = [f"ineq[{i}]" for i in range(m_i)]

    scale = 1.0 + max(
        np.abs(g).max(initial=0.0),
        np.abs(b_eq).max(initial=0.0),
        np.abs(b_in).max(initial=0.0),
    )

    if m_i == 0:
        x, _ = _solve_equality_kkt(H, g, A_eq, b_eq)
        resid = np.abs(A_eq @ x - b_eq).max(initial=0.0)
        if resid > feas_tol * scale:
            label = _worst_row_label(x, A_eq, b_eq, A_in, b_in, eq_labels, ineq_labels)
            return QpResult(x, INFEASIBLE, 1, _objective(H, g, x), resid, label)
        return QpResult(x, OPTIMAL, 1, _objective(H, g, x), resid)

    # interior start: equality-only solution, slacks pushed inside
    x, _ = _solve_equality_kkt(H, g, A_eq, b_eq)
    y = np.zeros(m_e)
    s_raw = b_in - A_in @ x
    shift = max(1.0, -2.0 * s_raw.min(initial=0.0))
    s = np.maximum(s_raw, shift)
    z = np.ones(m_i)

    best = (np.inf, x.copy())
    status = MAX_ITERATIONS
    iterations = max_iterations
    kkt = np.inf

    for it in range(1, max_iterations + 1):
        r_d = H @ x + g + A_eq.T @ y + A_in.T @ z
        r_e = A_eq @ x - b_eq
        r_i = A_in @ x + s - b_in
        mu = float(z @ s) / m_i

        kkt = max(
            np.abs(r_d).max(initial=0.0),
            np.abs(r_e).max(initial=0.0),
            np.abs(r_i).max(initial=0.0),
            mu,
        )
        if kkt < best[0]:
            best = (kkt, x.copy())
        if kkt <= kkt_tol * scale:
            status = OPTIMAL
            iterations = it
            break

        d = z / np.maximum(s, 1e-300)
        K = np.zeros((n + m_e, n + m_e))
        K[:n, :n] = H + (A_in.T * d) @ A_in
        K[:n, n:] = A_eq.T
        K[n:, :n] = A_eq
        try:
            lu = lu_factor(K)
        except ValueError:
            break

        def step(r_c):
            rhs_x = -r_d - A_in.T @ (d * r_i - r_c / np.maximum(s, 1e-300))
            sol = lu_solve(lu, np.concatenate([rhs_x, -r_e]))
            dx, dy = sol[:n], sol[n:]
            dz = d * (A_in @ dx + r_i) - r_c / np.maximum(s, 1e-300)
            ds = -(r_c + s * dz) / np.maximum(z, 1e-300)
            return dx, dy, dz, ds

        def max_step(v, dv):
            neg = dv < 0
            if not neg.any():
                return 1.0
            return min(1.0, float(np.min(-v[neg] / dv[neg])))

        # predictor
        dx_a, dy_a, dz_a, ds_a = step(z * s)
        a_p = max_step(s, ds_a)
        a_d = max_step(z, dz_a)
        mu_aff = float((z + a_d * dz_a) @ (s + a_p * ds_a)) / m_i
        sigma = (max(mu_aff, 0.0) / mu) ** 3 if mu > 0 else 0.0

        # corrector
        dx, dy, dz, ds = step(z * s + dz_a * ds_a - sigma * mu)
        a_p = _STEP_SCALE * max_step(s, ds)
        a_d = _STEP_SCALE * max_step(z, dz)
        x = x + a_p * dx
        s = s + a_p * ds
        y = y + a_d * dy
        z = z + a_d * dz

        if not np.all(np.isfinite(x)) or mu > 1e12:
            break

    if status == OPTIMAL:
        x_p = _polish(H, g, A_eq, b_eq, A_in, b_in, x, z, feas_tol)
        if x_p is not None:
            x = x_p
        return QpResult(x, OPTIMAL, iterations, _objective(H, g, x), kkt)

    # no convergence: decide between a hard instance and an empty feasible set
    x_f, worst = _feasibility_probe(A_eq, b_eq, A_in, b_in, n)
    if worst > feas_tol * scale:
        label = _worst_row_label(x_f, A_eq, b_eq, A_in, b_in, eq_labels, ineq_labels)
        return QpResult(
            best[1], INFEASIBLE, max_iterations, _objective(H, g, best[1]), best[0], label
        )
    return QpResult(best[1], MAX_ITERATIONS, max_iterations, _objective(H, g, best[1]), best[0])
