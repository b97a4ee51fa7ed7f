"""
Hard-thresholding baselines for the unconstrained problem.

IHT is proximal gradient with the exact prox of gamma ||.||_0:

    x <- H_t(x - step * grad f(x)),   t = sqrt(2 gamma step),

where H_t zeroes entries with |v| <= t. The warm-started variant seeds IHT
with an orthogonal matching pursuit whose stopping level is the same t.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InvalidParameterError, NumericalError
from .instances import Stream, box_muller, stream
from .problem import Problem, eval_objective

logger = logging.getLogger(__name__)

STEP_FRACTION = 0.99


@dataclass(frozen=True, eq=False)
class IhtResult:
    x: np.ndarray
    objective: float
    iterations: int
    converged: bool


def lipschitz_constant(p: Problem) -> float:
    """Largest |eigenvalue| of 2M + P."""
    return float(np.max(np.abs(np.linalg.eigvalsh(p.hessian_f()))))


def default_step(p: Problem) -> float:
    L = lipschitz_constant(p)
    return STEP_FRACTION / L if L > 0 else 1.0


def hard_threshold(v: np.ndarray, t: float) -> np.ndarray:
    return np.where(np.abs(v) > t, v, 0.0)


def _require_unconstrained(p: Problem) -> None:
    if p.has_constraints:
        raise InvalidParameterError("hard-thresholding baselines do not handle A x >= b")


def iht(
    p: Problem,
    x0=None,
    step: float | None = None,
    max_iter: int = 10_000,
    tol: float = 1e-6,
) -> IhtResult:
    _require_unconstrained(p)
    step = default_step(p) if step is None else step
    if not step > 0:
        raise InvalidParameterError(f"step must be positive, got {step}")
    t = np.sqrt(2.0 * p.gamma * step)

    x = np.zeros(p.n) if x0 is None else p.check_dim(x0, "x0").copy()
    F = eval_objective(p, x)
    for k in range(1, max_iter + 1):
        x_new = hard_threshold(x - step * p.grad_f(x), t)
        F_new = eval_objective(p, x_new)
        if F_new > F + 1e-10 * (1.0 + abs(F)):
            raise NumericalError(
                f"IHT objective rose from {F:.10g} to {F_new:.10g} at iteration {k}; "
                f"step={step:g} exceeds 1/L={1.0 / max(lipschitz_constant(p), 1e-300):g}?"
            )
        moved = float(np.linalg.norm(x_new - x))
        x, F = x_new, F_new
        if moved < tol:
            return IhtResult(x=x, objective=F, iterations=k, converged=True)
    logger.debug("IHT hit max_iter=%d", max_iter)
    return IhtResult(x=x, objective=F, iterations=max_iter, converged=False)


def iht_multistart(
    p: Problem,
    n_starts: int = 50,
    seed: int = 0,
    step: float | None = None,
    max_iter: int = 10_000,
    tol: float = 1e-6,
) -> IhtResult:
    """Best of IHT from the origin and n_starts - 1 standard normal points."""
    if n_starts < 1:
        raise InvalidParameterError(f"n_starts must be positive, got {n_starts}")
    draws = box_muller(stream(seed, Stream.IHT_STARTS), (n_starts - 1) * p.n).reshape(n_starts - 1, p.n)
    starts = [np.zeros(p.n), *draws]
    best: IhtResult | None = None
    total = 0
    for x0 in starts:
        res = iht(p, x0, step=step, max_iter=max_iter, tol=tol)
        total += res.iterations
        if best is None or res.objective < best.objective:
            best = res
    return IhtResult(x=best.x, objective=best.objective, iterations=total, converged=best.converged)


def omp(p: Problem, step: float | None = None) -> np.ndarray:
    """
    Greedy support growth: add the coordinate with the largest step * |grad_j|
    while it exceeds sqrt(2 gamma step), refitting f on the support each time.
    """
    _require_unconstrained(p)
    step = default_step(p) if step is None else step
    t = np.sqrt(2.0 * p.gamma * step)
    H = p.hessian_f()
    r = p.lin if p.g_quad is None else p.lin + p.g_quad.c

    x = np.zeros(p.n)
    support: list[int] = []
    while len(support) < p.n:
        score = step * np.abs(p.grad_f(x))
        score[support] = -np.inf
        j = int(np.argmax(score))
        if score[j] <= t:
            break
        support.append(j)
        S = np.array(support)
        x = np.zeros(p.n)
        x[S] = scipy.linalg.lstsq(H[np.ix_(S, S)], -r[S])[0]
    return x


def iht_warm_start(
    p: Problem,
    max_iter: int = 10_000,
    tol: float = 1e-6,
    step: float | None = None,
) -> IhtResult:
    x0 = omp(p, step)
    return iht(p, x0, step=step, max_iter=max_iter, tol=tol)
