"""
Exhaustive global oracle for  min f(x) + gamma ||x||_0 (s.t. A x >= b).

Every support S is visited; on S the smooth part is a convex quadratic in x_S
with Hessian H_SS, H = 2M + P, and linear term r_S, r = lin + c. Two
independent enumerations are provided so they can check each other.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InfeasiblePointError, InvalidParameterError, UnboundedProblemError
from .problem import Problem, eval_objective
from .y_update import solve_strictly_convex_qp

logger = logging.getLogger(__name__)

DEFAULT_MAX_N = 16
# Supports solved per batched call.
BATCH = 20_000


@dataclass(frozen=True, eq=False)
class OracleResult:
    x: np.ndarray
    fstar: float
    supports_visited: int
    supports_skipped: int = 0


def _linear_term(p: Problem) -> np.ndarray:
    return p.lin if p.g_quad is None else p.lin + p.g_quad.c


def _check(p: Problem, max_n: int) -> tuple[np.ndarray, np.ndarray]:
    if p.n > max_n:
        raise InvalidParameterError(f"exhaustive search over 2^{p.n} supports exceeds max_n={max_n}")
    H = p.hessian_f()
    lowest = np.linalg.eigvalsh(H)[0]
    scale = 1e-10 * (1.0 + np.linalg.norm(H))
    if lowest < -scale:
        raise UnboundedProblemError(
            f"the smooth part has negative curvature ({lowest:.3e}); the objective is unbounded below"
        )
    if p.has_constraints and lowest <= scale:
        raise InvalidParameterError("supports under A x >= b need 2M + P positive definite")
    return H, _linear_term(p)


def _constrained_on_support(p: Problem, H: np.ndarray, r: np.ndarray, S: np.ndarray) -> np.ndarray | None:
    """Minimizer on support S under A x >= b, or None when that face is empty."""
    x = np.zeros(p.n)
    if S.size == 0:
        return x if np.all(p.b <= 1e-12) else None
    try:
        sol = solve_strictly_convex_qp(
            H[np.ix_(S, S)], r[S], p.A[:, S], p.b, tol=1e-9, max_iter=10 * (S.size + p.m)
        )
    except InfeasiblePointError:
        return None
    x[S] = sol.u
    return x


def _singular_on_support(H: np.ndarray, r: np.ndarray, S: np.ndarray, lstsq) -> np.ndarray:
    HS = H[np.ix_(S, S)]
    xs = lstsq(HS, -r[S])[0]
    if np.linalg.norm(HS @ xs + r[S]) > 1e-8 * (1.0 + np.linalg.norm(r[S])):
        raise UnboundedProblemError(f"the objective decreases without bound on support {S.tolist()}")
    return xs


# ---- Enumeration by support size (batched) ------------------------------------


def brute_force_global(p: Problem, max_n: int = DEFAULT_MAX_N) -> OracleResult:
    """Global minimizer by visiting supports in order of size."""
    H, r = _check(p, max_n)
    n = p.n
    positive_definite = np.linalg.eigvalsh(H)[0] > 1e-12 * (1.0 + np.linalg.norm(H))

    best_val = p.f_smooth(np.zeros(n))
    best_x = np.zeros(n)
    visited, skipped = 1, 0
    if p.has_constraints and not np.all(p.b <= 1e-12):
        best_val, best_x = np.inf, None
        skipped = 1

    for size in range(1, n + 1):
        combos = itertools.combinations(range(n), size)
        while True:
            chunk = np.array(list(itertools.islice(combos, BATCH)), dtype=int)
            if chunk.size == 0:
                break
            visited += len(chunk)
            penalty = p.gamma * size
            if p.has_constraints:
                for S in chunk:
                    x = _constrained_on_support(p, H, r, S)
                    if x is None:
                        skipped += 1
                        continue
                    val = p.f_smooth(x) + penalty
                    if val < best_val:
                        best_val, best_x = val, x
                continue

            if positive_definite:
                HS = H[chunk[:, :, None], chunk[:, None, :]]
                rS = r[chunk]
                xs = np.linalg.solve(HS, -rS[..., None])[..., 0]
                vals = 0.5 * np.einsum("ij,ij->i", rS, xs) + penalty
                i = int(np.argmin(vals))
                if vals[i] < best_val:
                    best_val = float(vals[i])
                    best_x = np.zeros(n)
                    best_x[chunk[i]] = xs[i]
            else:
                for S in chunk:
                    x = np.zeros(n)
                    x[S] = _singular_on_support(H, r, S, lambda a, b: np.linalg.lstsq(a, b, rcond=None))
                    val = p.f_smooth(x) + penalty
                    if val < best_val:
                        best_val, best_x = val, x

    if best_x is None:
        raise InfeasiblePointError("no support admits a point with A x >= b", violation=float("inf"))
    logger.debug("oracle visited %d supports (%d infeasible)", visited, skipped)
    return OracleResult(x=best_x, fstar=eval_objective(p, best_x), supports_visited=visited, supports_skipped=skipped)


# ---- Recursive include/exclude enumeration -------------------------------------


def brute_force_recursive(p: Problem, max_n: int = DEFAULT_MAX_N) -> OracleResult:
    """Same search as `brute_force_global`, by depth-first include/exclude on each coordinate."""
    H, r = _check(p, max_n)
    n = p.n
    best: dict = {"val": np.inf, "x": None, "visited": 0, "skipped": 0}

    def leaf(S: list[int]) -> None:
        best["visited"] += 1
        idx = np.array(S, dtype=int)
        if p.has_constraints:
            x = _constrained_on_support(p, H, r, idx)
            if x is None:
                best["skipped"] += 1
                return
        else:
            x = np.zeros(n)
            if idx.size:
                x[idx] = _singular_on_support(H, r, idx, lambda a, b: scipy.linalg.lstsq(a, b))
        val = p.f_smooth(x) + p.gamma * len(S)
        if val < best["val"]:
            best["val"], best["x"] = val, x

    def descend(i: int, S: list[int]) -> None:
        if i == n:
            leaf(S)
            return
        descend(i + 1, S)
        S.append(i)
        descend(i + 1, S)
        S.pop()

    descend(0, [])
    if best["x"] is None:
        raise InfeasiblePointError("no support admits a point with A x >= b", violation=float("inf"))
    return OracleResult(
        x=best["x"],
        fstar=eval_objective(p, best["x"]),
        supports_visited=best["visited"],
        supports_skipped=best["skipped"],
    )
