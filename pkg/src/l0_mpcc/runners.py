"""
One entry point per solver, keyed by the method names the CLI and the
benchmark config use. Every runner maps (Problem, MethodSettings) to a
`SolverResult` whose objective includes the problem offset.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, fields, replace
from typing import Callable, Literal

import numpy as np

from .admm import (
    AdmmOptions,
    SolveTrace,
    decaying_schedule,
    epsilon_schedule,
    reported_objective,
    run_admm_cf,
    run_perturbed_admm,
)
from .baselines import iht_multistart, iht_warm_start
from .certification import kkt_residual_admm
from .errors import InvalidParameterError
from .oracle import DEFAULT_MAX_N, brute_force_global
from .problem import Problem, eval_objective, l0_norm
from .spectral import factorize
from .w_update import CANONICAL, TieBreakPolicy

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MethodSettings:
    """Budgets and parameters shared by every method; each runner reads what it needs."""

    eps: float = 1e-4
    rho0: float | None = None
    delta_rho: float = 1.01
    rho_max: float = 2000.0
    max_iter: int = 10_000
    max_time: float | None = None
    seed: int = 0
    schedule: Literal["corollary", "decaying"] = "corollary"
    perturb_eps: float = 0.05
    n_starts: int = 50
    iht_tol: float = 1e-6
    oracle_max_n: int = DEFAULT_MAX_N
    tie_break: Literal["canonical_e1", "copy_partner", "seeded_random"] = "canonical_e1"

    @classmethod
    def from_dict(cls, d: dict) -> MethodSettings:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidParameterError(f"unknown method settings: {', '.join(sorted(unknown))}")
        return cls(**d)

    def tie_break_policy(self) -> TieBreakPolicy:
        if self.tie_break == "seeded_random":
            return TieBreakPolicy.seeded_random(self.seed)
        if self.tie_break == "copy_partner":
            return TieBreakPolicy(mode="copy_partner")
        return CANONICAL


@dataclass(eq=False)
class SolverResult:
    method: str
    x: np.ndarray
    objective: float
    card: int
    iterations: int
    termination: str
    wall_time: float
    relaxed_form: bool = False
    kkt_res: float = math.nan
    trace: SolveTrace | None = None
    label: str | None = None

    @property
    def converged(self) -> bool:
        return self.termination == "converged"


# ---- Runners ----------------------------------------------------------------


def _from_trace(method: str, p: Problem, trace: SolveTrace, label: str | None = None) -> SolverResult:
    rep = reported_objective(p, trace)
    return SolverResult(
        method=method,
        x=rep.x,
        objective=rep.objective,
        card=rep.card,
        iterations=trace.iterations,
        termination=trace.termination,
        wall_time=trace.wall_time,
        relaxed_form=rep.relaxed_form,
        kkt_res=kkt_residual_admm(trace) if trace.iterations >= 2 else math.nan,
        trace=trace,
        label=label,
    )


def run_admm_cf_method(p: Problem, s: MethodSettings) -> SolverResult:
    f = factorize(p.M)
    overrides = dict(
        eps=s.eps,
        delta_rho=s.delta_rho,
        rho_max=s.rho_max,
        max_iter=s.max_iter,
        max_time=s.max_time,
        tie_break=s.tie_break_policy(),
    )
    if s.rho0 is not None:
        overrides["rho0"] = s.rho0
    opts = AdmmOptions.for_problem(p, f, **overrides)
    return _from_trace("admm-cf", p, run_admm_cf(p, opts, f))


def run_perturbed_method(p: Problem, s: MethodSettings) -> SolverResult:
    f = factorize(p.M)
    common = dict(max_iter=s.max_iter, max_time=s.max_time, tie_break=s.tie_break_policy())
    if s.schedule == "decaying":
        opts = decaying_schedule(eps=s.eps, **common)
        label = "perturbed (decaying, heuristic)"
    else:
        # perturb_eps fixes (alpha, rho, mu); s.eps stays the stop tolerance.
        opts = replace(epsilon_schedule(s.perturb_eps, **common), eps=s.eps)
        label = None
    return _from_trace("perturbed", p, run_perturbed_admm(p, opts, f), label)


def _timed(method: str, p: Problem, solve: Callable[[], tuple[np.ndarray, int, bool]], label=None) -> SolverResult:
    t0 = time.perf_counter()
    x, iters, converged = solve()
    return SolverResult(
        method=method,
        x=x,
        objective=eval_objective(p, x) + p.offset,
        card=l0_norm(x),
        iterations=iters,
        termination="converged" if converged else "max_iter",
        wall_time=time.perf_counter() - t0,
        label=label,
    )


def run_iht_method(p: Problem, s: MethodSettings) -> SolverResult:
    def solve():
        r = iht_multistart(p, n_starts=s.n_starts, seed=s.seed, max_iter=s.max_iter, tol=s.iht_tol)
        return r.x, r.iterations, r.converged

    return _timed("iht", p, solve)


def run_ihtws_method(p: Problem, s: MethodSettings) -> SolverResult:
    def solve():
        r = iht_warm_start(p, max_iter=s.max_iter, tol=s.iht_tol)
        return r.x, r.iterations, r.converged

    return _timed("ihtws", p, solve, label="IHTWS (reconstructed)")


def run_oracle_method(p: Problem, s: MethodSettings) -> SolverResult:
    def solve():
        r = brute_force_global(p, max_n=s.oracle_max_n)
        return r.x, r.supports_visited, True

    return _timed("oracle", p, solve)


METHODS: dict[str, Callable[[Problem, MethodSettings], SolverResult]] = {
    "admm-cf": run_admm_cf_method,
    "perturbed": run_perturbed_method,
    "iht": run_iht_method,
    "ihtws": run_ihtws_method,
    "oracle": run_oracle_method,
}


def run_method(name: str, p: Problem, s: MethodSettings) -> SolverResult:
    try:
        runner = METHODS[name]
    except KeyError:
        raise InvalidParameterError(f"unknown method '{name}' (choose from {', '.join(METHODS)})") from None
    logger.debug("running %s on n=%d gamma=%g", name, p.n, p.gamma)
    return runner(p, s)
