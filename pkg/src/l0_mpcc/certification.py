"""
KKT certification of candidate points of the complementarity program.

A point (x+; x-; xi) is first-order stationary when multipliers
(mu, beta1..beta4, pi) make

    (grad f; -grad f; -gamma e) + mu (xi; xi; x+ + x-)
        + (-beta1 - A'pi; -beta2 + A'pi; beta4 - beta3) = 0

with the usual sign and complementarity conditions. For an ADMM limit the
smooth gradient is split across the pair: grad f_Q at w, grad g and every
bound/polyhedron pair at y.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import nnls

from .admm import SolveTrace
from .errors import CertificationError, DimensionError
from .problem import Problem, SplitPoint, is_nondegenerate, z1_residual, z2_residual

logger = logging.getLogger(__name__)

# Bound or row counts as active within this distance.
ACT_TOL = 1e-6
NONDEGENERACY_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class Multipliers:
    mu: float
    beta1: np.ndarray
    beta2: np.ndarray
    beta3: np.ndarray
    beta4: np.ndarray
    pi: np.ndarray
    # 2-norm of the stationarity vector left after recovery.
    recovery_residual: float = 0.0

    @classmethod
    def zeros(cls, n: int, m: int = 0) -> Multipliers:
        z = np.zeros(n)
        return cls(0.0, z, z, z, z, np.zeros(m))

    def is_sign_feasible(self, tol: float) -> bool:
        return all(np.all(v >= -tol) for v in (self.beta1, self.beta2, self.beta3, self.beta4, self.pi))


@dataclass(frozen=True)
class KktReport:
    stationarity_res: float
    complementarity_res: float
    feasibility_res: float
    nondegenerate: bool
    second_order_min_eig: float | None = None
    feasibility_gap: float | None = None
    convex_theory_applies: bool | None = None

    @property
    def max_residual(self) -> float:
        return max(self.stationarity_res, self.complementarity_res, self.feasibility_res)

    def to_dict(self) -> dict:
        return {
            "stationarity_res": self.stationarity_res,
            "complementarity_res": self.complementarity_res,
            "feasibility_res": self.feasibility_res,
            "nondegenerate": self.nondegenerate,
            "second_order_min_eig": self.second_order_min_eig,
            "feasibility_gap": self.feasibility_gap,
            "convex_theory_applies": self.convex_theory_applies,
        }


# ---- Building blocks ---------------------------------------------------------


def _smooth_gradient(p: Problem, w: SplitPoint, y: SplitPoint) -> np.ndarray:
    """(grad f; -grad f; -gamma e) with grad f_Q taken at w and grad g at y."""
    g = p.grad_f_quadratic(w.x) + p.grad_g(y.x)
    return np.concatenate([g, -g, np.full(p.n, -p.gamma)])


def _complementarity_gradient(w: SplitPoint) -> np.ndarray:
    return np.concatenate([w.xi, w.xi, w.x_plus + w.x_minus])


def _dual_columns(p: Problem, y: SplitPoint, act_tol: float) -> tuple[np.ndarray, list[tuple[str, int]]]:
    """Columns of the bound/row multipliers active at y, labelled (multiplier name, index)."""
    n = p.n
    cols: list[np.ndarray] = []
    labels: list[tuple[str, int]] = []

    def unit(block: int, i: int, sign: float) -> np.ndarray:
        v = np.zeros(3 * n)
        v[block * n + i] = sign
        return v

    for i in range(n):
        if y.x_plus[i] <= act_tol:
            cols.append(unit(0, i, -1.0))
            labels.append(("beta1", i))
        if y.x_minus[i] <= act_tol:
            cols.append(unit(1, i, -1.0))
            labels.append(("beta2", i))
        if y.xi[i] <= act_tol:
            cols.append(unit(2, i, -1.0))
            labels.append(("beta3", i))
        if y.xi[i] >= 1.0 - act_tol:
            cols.append(unit(2, i, 1.0))
            labels.append(("beta4", i))
    if p.has_constraints:
        slack = p.A @ y.x - p.b
        for j in np.flatnonzero(slack <= act_tol):
            cols.append(np.concatenate([-p.A[j], p.A[j], np.zeros(n)]))
            labels.append(("pi", int(j)))
    B = np.column_stack(cols) if cols else np.zeros((3 * n, 0))
    return B, labels


def _fit_mu(p: Problem, w: SplitPoint, r: np.ndarray) -> float:
    """Least-squares mu with r + mu a ~ 0, a = (xi; xi; x+ + x-); 0 when a vanishes."""
    a = _complementarity_gradient(w)
    aa = float(a @ a)
    if aa == 0.0:
        return 0.0
    return -float(a @ r) / aa


def _fit_duals(p: Problem, w: SplitPoint, y: SplitPoint, mu: float, act_tol: float) -> Multipliers:
    n, m = p.n, p.m
    target = -(_smooth_gradient(p, w, y) + mu * _complementarity_gradient(w))
    B, labels = _dual_columns(p, y, act_tol)
    beta = {name: np.zeros(n) for name in ("beta1", "beta2", "beta3", "beta4")}
    pi = np.zeros(m)
    if B.shape[1]:
        theta, resid = nnls(B, target, maxiter=max(50, 10 * B.shape[1]))
    else:
        theta, resid = np.zeros(0), float(np.linalg.norm(target))
    for (name, i), value in zip(labels, theta):
        if name == "pi":
            pi[i] = value
        else:
            beta[name][i] = value
    return Multipliers(mu=mu, pi=pi, recovery_residual=float(resid), **beta)


def stationarity_vector(p: Problem, w: SplitPoint, mult: Multipliers, y: SplitPoint | None = None) -> np.ndarray:
    y = w if y is None else y
    if w.n != p.n or y.n != p.n:
        raise DimensionError(f"points of dimension {w.n}/{y.n} for a problem of dimension {p.n}")
    dual = np.concatenate([-mult.beta1, -mult.beta2, mult.beta4 - mult.beta3])
    if p.has_constraints:
        at_pi = p.A.T @ mult.pi
        dual[: p.n] -= at_pi
        dual[p.n : 2 * p.n] += at_pi
    return _smooth_gradient(p, w, y) + mult.mu * _complementarity_gradient(w) + dual


def _complementarity(p: Problem, y: SplitPoint, mult: Multipliers) -> float:
    pairs = [
        (mult.beta1, y.x_plus),
        (mult.beta2, y.x_minus),
        (mult.beta3, y.xi),
        (mult.beta4, 1.0 - y.xi),
    ]
    if p.has_constraints:
        pairs.append((mult.pi, p.A @ y.x - p.b))
    worst = 0.0
    for mult_part, slack in pairs:
        if mult_part.size:
            worst = max(worst, float(np.max(np.abs(mult_part * slack))))
            # A negative multiplier breaks the sign condition.
            worst = max(worst, float(np.max(-mult_part)))
    return worst


def _is_convex(p: Problem) -> bool:
    H = p.hessian_f()
    return bool(np.linalg.eigvalsh(H)[0] >= -1e-10 * (1.0 + np.linalg.norm(H)))


# ---- Public API -------------------------------------------------------------


def kkt_residual_admm(trace: SolveTrace) -> float:
    """max(||w_K - y_K||, ||rho_{K-1} dy + mu dw||) from the last iteration record."""
    if len(trace.records) < 2:
        raise CertificationError(f"the residual needs at least 2 iterations, the trace holds {len(trace.records)}")
    last = trace.records[-1]
    return max(last.primal_res, last.kkt_dual)


def recover_multipliers(
    p: Problem,
    w: SplitPoint,
    y: SplitPoint,
    lam: np.ndarray,
    rho: float,
    y_prev: SplitPoint | None = None,
    act_tol: float = ACT_TOL,
) -> Multipliers:
    """
    mu from the w-subproblem stationarity, written with the multiplier after
    the dual step:

        grad h(w) + lambda + rho (y - y_prev) + mu a = 0,

    the rho term dropped when y_prev is not given. Then (beta, pi) >= 0 on the
    constraints active at y by NNLS on the full stationarity system with mu fixed.
    """
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (3 * p.n,):
        raise DimensionError(f"lambda has shape {lam.shape}, expected ({3 * p.n},)")
    g = p.grad_f_quadratic(w.x)
    r = np.concatenate([g, -g, np.full(p.n, -p.gamma)]) + lam
    if y_prev is not None:
        r = r + rho * (y.stack() - y_prev.stack())
    mult = _fit_duals(p, w, y, _fit_mu(p, w, r), act_tol)
    logger.debug("multiplier recovery: mu=%.6g residual=%.3e", mult.mu, mult.recovery_residual)
    return mult


def first_order_kkt_residual(
    p: Problem,
    w: SplitPoint,
    mult: Multipliers,
    y: SplitPoint | None = None,
) -> KktReport:
    """Residuals of the first-order system; y defaults to w (a single candidate point)."""
    y = w if y is None else y
    stat = stationarity_vector(p, w, mult, y)
    gap = float(np.max(np.abs(w.stack() - y.stack()), initial=0.0))
    return KktReport(
        stationarity_res=float(np.max(np.abs(stat))),
        complementarity_res=_complementarity(p, y, mult),
        feasibility_res=max(z1_residual(w), z2_residual(y, p), gap),
        nondegenerate=is_nondegenerate(y, NONDEGENERACY_TOL),
        convex_theory_applies=_is_convex(p),
    )


def is_kkt_nondegenerate(w: SplitPoint, tol: float = NONDEGENERACY_TOL) -> bool:
    return is_nondegenerate(w, tol)


def second_order_check(
    p: Problem,
    w: SplitPoint,
    mult: Multipliers,
    tol: float,
    report: KktReport | None = None,
    act_tol: float = ACT_TOL,
) -> float:
    """
    Smallest eigenvalue of the Lagrangian Hessian on the subspace cut out by
    the active constraints and the complementarity gradient; +inf when that
    subspace is {0}. Only meaningful at a nondegenerate first-order point.
    """
    report = report if report is not None else first_order_kkt_residual(p, w, mult)
    if report.max_residual > tol or not report.nondegenerate:
        raise CertificationError(
            f"second-order check needs a nondegenerate first-order point within {tol:g} "
            f"(max residual {report.max_residual:.3e}, nondegenerate={report.nondegenerate})"
        )

    n = p.n
    rows = [_complementarity_gradient(w)]
    for i in range(n):
        for block, active in (
            (0, w.x_plus[i] <= act_tol),
            (1, w.x_minus[i] <= act_tol),
            (2, w.xi[i] <= act_tol or w.xi[i] >= 1.0 - act_tol),
        ):
            if active:
                e = np.zeros(3 * n)
                e[block * n + i] = 1.0
                rows.append(e)
    if p.has_constraints:
        slack = p.A @ w.x - p.b
        for j in np.flatnonzero(np.abs(slack) <= act_tol):
            rows.append(np.concatenate([-p.A[j], p.A[j], np.zeros(n)]))

    basis = null_space(np.vstack(rows), rcond=1e-10)
    if basis.shape[1] == 0:
        return math.inf

    Hf = p.hessian_f()
    eye = np.eye(n)
    zero = np.zeros((n, n))
    H = np.block([[Hf, -Hf, zero], [-Hf, Hf, zero], [zero, zero, zero]])
    H = H + mult.mu * np.block([[zero, zero, eye], [zero, zero, eye], [eye, eye, zero]])
    reduced = basis.T @ H @ basis
    return float(np.linalg.eigvalsh(0.5 * (reduced + reduced.T))[0])


def perturbed_kkt_residual(
    p: Problem,
    w: SplitPoint,
    y: SplitPoint,
    lam: np.ndarray,
    alpha: float,
    act_tol: float = ACT_TOL,
) -> tuple[KktReport, Multipliers]:
    """
    Residuals of the perturbed system: mu fitted on the w-row
    grad h(w) + lambda + mu a = 0, (beta, pi) on the y-rows, Z1 at w, Z2 at y,
    plus feasibility_gap = ||w - y - alpha lambda||.
    """
    lam = np.asarray(lam, dtype=float)
    g = p.grad_f_quadratic(w.x)
    r = np.concatenate([g, -g, np.full(p.n, -p.gamma)]) + lam
    mult = _fit_duals(p, w, y, _fit_mu(p, w, r), act_tol)
    stat = stationarity_vector(p, w, mult, y)
    report = KktReport(
        stationarity_res=float(np.max(np.abs(stat))),
        complementarity_res=_complementarity(p, y, mult),
        feasibility_res=max(z1_residual(w), z2_residual(y, p)),
        nondegenerate=is_nondegenerate(y, NONDEGENERACY_TOL),
        feasibility_gap=float(np.linalg.norm(w.stack() - y.stack() - alpha * lam)),
        convex_theory_applies=_is_convex(p),
    )
    return report, mult


@dataclass(frozen=True)
class Certificate:
    report: KktReport
    multipliers: Multipliers
    kkt_res_admm: float


def certify(p: Problem, trace: SolveTrace, second_order: bool = False, tol: float = 1e-3) -> Certificate:
    """Multiplier recovery plus first-order (and optionally second-order) checks on a trace's final pair."""
    s = trace.final
    if trace.algorithm == "perturbed":
        alpha = trace.records[-1].alpha if trace.records else 0.0
        report, mult = perturbed_kkt_residual(p, s.w, s.y, s.lam, alpha)
    else:
        mult = recover_multipliers(p, s.w, s.y, s.lam, trace.previous.rho, y_prev=trace.previous.y)
        report = first_order_kkt_residual(p, s.w, mult, s.y)

    if second_order:
        try:
            eig = second_order_check(p, s.y, mult, tol, report=report)
        except CertificationError as e:
            logger.warning("second-order check skipped: %s", e)
            eig = None
        report = replace(report, second_order_min_eig=eig)

    logger.info(
        "certification: stationarity=%.3e complementarity=%.3e feasibility=%.3e nondegenerate=%s",
        report.stationarity_res,
        report.complementarity_res,
        report.feasibility_res,
        report.nondegenerate,
    )
    return Certificate(report=report, multipliers=mult, kkt_res_admm=kkt_residual_admm(trace))
