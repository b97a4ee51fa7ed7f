"""
The convex y-subproblem

    min_{y in Z2}  g(y+ - y-) + rho/2 ||y - v||^2,     v = w + lambda/rho

Without g and without A it is a projection onto a box (closed form). Otherwise
zeta still decouples (clipped to [0, 1]) and the (y+, y-) block is a strictly
convex QP, solved as a least-distance program through scipy's NNLS and polished
on the active rows it identifies.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.optimize import nnls

from .errors import InfeasiblePointError, InnerSolverError, InvalidParameterError
from .problem import Problem, SplitPoint

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class InnerSolverOptions:
    tol: float = 1e-10
    max_iter: int | None = None  # default 10 * (3n + m)

    def __post_init__(self):
        if not self.tol > 0:
            raise InvalidParameterError(f"tol must be positive, got {self.tol}")
        if self.max_iter is not None and self.max_iter < 1:
            raise InvalidParameterError(f"max_iter must be positive, got {self.max_iter}")

    def iteration_limit(self, n: int, m: int) -> int:
        return self.max_iter if self.max_iter is not None else 10 * (3 * n + m)


@dataclass(frozen=True, eq=False)
class QpSolution:
    """Minimizer of 1/2 u'Qu + r'u s.t. Cu >= d, with multipliers pi >= 0."""

    u: np.ndarray
    pi: np.ndarray
    residual: float
    iterations: int


def _kkt_residual(Q: np.ndarray, r: np.ndarray, C: np.ndarray, d: np.ndarray, u: np.ndarray, pi: np.ndarray) -> float:
    """max(stationarity, infeasibility, complementarity), each relative to the size of its terms."""
    slack = C @ u - d
    u_max = np.max(np.abs(u), initial=0.0)
    stat_scale = 1.0 + max(np.abs(Q).sum(axis=1).max(initial=0.0) * u_max, np.max(np.abs(r), initial=0.0))
    feas_scale = 1.0 + max(np.abs(C).sum(axis=1).max(initial=0.0) * u_max, np.max(np.abs(d), initial=0.0))
    stationarity = np.max(np.abs(Q @ u + r - C.T @ pi), initial=0.0) / stat_scale
    infeasibility = np.max(np.maximum(-slack, 0.0), initial=0.0) / feas_scale
    complementarity = np.max(np.abs(pi * slack), initial=0.0) / (feas_scale * (1.0 + np.max(pi, initial=0.0)))
    return float(max(stationarity, infeasibility, complementarity))


def _polish(
    Q: np.ndarray,
    r: np.ndarray,
    C: np.ndarray,
    d: np.ndarray,
    working: np.ndarray,
    tol: float,
    max_steps: int,
) -> tuple[np.ndarray, np.ndarray, float, int] | None:
    """
    Re-solve the equality KKT system on a working set of constraints until the
    point is a KKT point to `tol`, moving one constraint per step: drop the most
    negative multiplier, else add the most violated row. None when `max_steps`
    runs out first.
    """
    k, m = Q.shape[0], C.shape[0]
    working = working.copy()
    for step in range(1, max_steps + 1):
        rows = np.flatnonzero(working)
        CW = C[rows]
        kkt = np.block([[Q, -CW.T], [CW, np.zeros((rows.size, rows.size))]])
        sol = np.linalg.lstsq(kkt, np.concatenate([-r, d[rows]]), rcond=None)[0]
        u = sol[:k]
        pi = np.zeros(m)
        if rows.size:
            # u is unique even when CW is rank deficient; NNLS picks admissible multipliers.
            pi[rows] = nnls(CW.T, Q @ u + r)[0]
        residual = _kkt_residual(Q, r, C, d, u, pi)
        if residual <= tol:
            return u, pi, residual, step

        fit = np.max(np.abs(Q @ u + r - C.T @ pi), initial=0.0)
        slack = C @ u - d
        if rows.size and fit > np.max(np.maximum(-slack, 0.0), initial=0.0):
            working[rows[np.argmin(sol[k:])]] = False
        elif np.any(slack < 0.0):
            working[np.argmin(slack)] = True
        else:
            return None
    return None


def solve_strictly_convex_qp(
    Q: np.ndarray,
    r: np.ndarray,
    C: np.ndarray,
    d: np.ndarray,
    tol: float,
    max_iter: int,
) -> QpSolution:
    """
    Lawson-Hanson reduction: with Q = LL' and x = L'u + L^{-1}r the problem
    becomes min 1/2||x||^2 s.t. (C L^{-T}) x >= d + C Q^{-1} r, whose solution
    follows from one NNLS solve on [E'; f'] with f = (0, ..., 0, 1).

    NNLS identifies the active rows; when its point misses `tol` (rounding in
    the reduction), the equality KKT system on those rows is re-solved by
    `_polish`. `iterations` counts active rows plus polish steps.
    """
    k = Q.shape[0]
    try:
        L = np.linalg.cholesky(Q)
    except np.linalg.LinAlgError as e:
        raise InvalidParameterError(f"QP Hessian is not positive definite: {e}") from e

    Qinv_r = cho_solve((L, True), r)
    if C.shape[0] == 0:
        u = -Qinv_r
        return QpSolution(u=u, pi=np.zeros(0), residual=0.0, iterations=0)

    # E = C L^{-T}  (rows are constraint normals in x-space)
    E = solve_triangular(L, C.T, lower=True).T
    h = d + C @ Qinv_r
    mat = np.vstack([E.T, h[None, :]])
    rhs = np.zeros(k + 1)
    rhs[-1] = 1.0
    try:
        coef, _ = nnls(mat, rhs, maxiter=max_iter)
    except RuntimeError as e:
        raise InnerSolverError(f"NNLS did not finish: {e}", residual=float("inf"), iterations=max_iter) from e

    resid = mat @ coef - rhs
    denom = -resid[-1]  # = 1 - h'coef
    if denom <= 1e-14:
        raise InfeasiblePointError("the polyhedron {A x >= b} is empty", violation=float("inf"))
    x = resid[:-1] / denom  # = E' pi
    pi = coef / denom
    u = solve_triangular(L.T, x, lower=False) - Qinv_r
    residual = _kkt_residual(Q, r, C, d, u, pi)
    iterations = int(np.count_nonzero(coef))
    if residual <= tol:
        return QpSolution(u=u, pi=pi, residual=residual, iterations=iterations)

    polished = _polish(Q, r, C, d, coef > 0, tol, max_steps=max_iter)
    if polished is None:
        return QpSolution(u=u, pi=pi, residual=residual, iterations=iterations + max_iter)
    u, pi, residual, steps = polished
    return QpSolution(u=u, pi=pi, residual=residual, iterations=iterations + steps)


# ---- Closed form ------------------------------------------------------------


def solve_y_box(w: SplitPoint, lam: np.ndarray, rho: float, p: Problem | None = None) -> SplitPoint:
    """Projection of w + lambda/rho onto {y+ >= 0, y- >= 0, 0 <= zeta <= 1}."""
    if rho <= 0:
        raise InvalidParameterError(f"rho must be positive, got {rho}")
    if p is not None and (p.has_constraints or p.g_quad is not None):
        raise InvalidParameterError(
            "solve_y_box applies only without g and without A x >= b; use solve_y_general"
        )
    v = SplitPoint.from_vector(w.stack() + np.asarray(lam, dtype=float) / rho)
    return SplitPoint(
        np.maximum(v.x_plus, 0.0),
        np.maximum(v.x_minus, 0.0),
        np.clip(v.xi, 0.0, 1.0),
    )


# ---- General convex case ----------------------------------------------------


def solve_y_general_with_multipliers(
    p: Problem,
    w: SplitPoint,
    lam: np.ndarray,
    rho: float,
    opts: InnerSolverOptions = InnerSolverOptions(),
) -> tuple[SplitPoint, QpSolution]:
    if rho <= 0:
        raise InvalidParameterError(f"rho must be positive, got {rho}")
    n, m = p.n, p.m
    v = SplitPoint.from_vector(w.stack() + np.asarray(lam, dtype=float) / rho)
    zeta = np.clip(v.xi, 0.0, 1.0)

    # Variables u = (y+, y-):  1/2 u'(rho I + K)u + (kc - rho v12)'u
    # with K = [[P, -P], [-P, P]] and kc = (c; -c).
    Q = rho * np.eye(2 * n)
    r = -rho * np.concatenate([v.x_plus, v.x_minus])
    if p.g_quad is not None:
        P = p.g_quad.P
        Q = Q + np.block([[P, -P], [-P, P]])
        r = r + np.concatenate([p.g_quad.c, -p.g_quad.c])

    C = np.eye(2 * n)
    d = np.zeros(2 * n)
    if m:
        C = np.vstack([C, np.hstack([p.A, -p.A])])
        d = np.concatenate([d, p.b])

    limit = opts.iteration_limit(n, m)
    sol = solve_strictly_convex_qp(Q, r, C, d, opts.tol, limit)
    logger.debug("y-subproblem QP residual %.3e (%d active)", sol.residual, sol.iterations)
    if sol.residual > opts.tol:
        raise InnerSolverError(
            f"y-subproblem QP did not reach tol={opts.tol:g} within {limit} active-set steps",
            sol.residual,
            sol.iterations,
        )

    # Bounds hold up to rounding; clamp so the point is exactly in Z2's box part.
    y = SplitPoint(np.maximum(sol.u[:n], 0.0), np.maximum(sol.u[n:], 0.0), zeta)
    return y, sol


def solve_y_general(
    p: Problem,
    w: SplitPoint,
    lam: np.ndarray,
    rho: float,
    opts: InnerSolverOptions = InnerSolverOptions(),
) -> SplitPoint:
    """argmin_{y in Z2} g(y+ - y-) + rho/2 ||w - y + lambda/rho||^2."""
    return solve_y_general_with_multipliers(p, w, lam, rho, opts)[0]


def solve_y(p: Problem, w: SplitPoint, lam: np.ndarray, rho: float, opts: InnerSolverOptions = InnerSolverOptions()) -> SplitPoint:
    """Dispatch to the closed form when Z2 is a box and g is absent."""
    if p.has_constraints or p.g_quad is not None:
        return solve_y_general(p, w, lam, rho, opts)
    return solve_y_box(w, lam, rho)


def perturbed_dual(lam: np.ndarray, rho: float, alpha: float) -> np.ndarray:
    return (1.0 - rho * alpha) * np.asarray(lam, dtype=float)


def solve_y_perturbed(
    p: Problem,
    w: SplitPoint,
    lam: np.ndarray,
    rho: float,
    alpha: float,
    opts: InnerSolverOptions = InnerSolverOptions(),
) -> SplitPoint:
    """
    argmin_{y in Z2} p(y) + (1 - rho alpha) lambda'(w - y - alpha lambda) + rho/2 ||w - y||^2,
    which equals the unperturbed update with dual (1 - rho alpha) lambda.
    """
    if not 0 <= rho * alpha < 1:
        raise InvalidParameterError(f"rho * alpha must lie in [0, 1), got {rho * alpha}")
    return solve_y(p, w, perturbed_dual(lam, rho, alpha), rho, opts)
