"""
Outer ADMM loops on the complementarity form.

`run_admm_cf` alternates the closed-form w-update, the convex y-update and a
dual ascent step, raising rho by `delta_rho` while the multiplier moves faster
than y. `run_perturbed_admm` uses constant (alpha, rho, mu), a damped dual
step and a proximal w-term; its Lyapunov function P_tau is tracked per
iteration.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterator, Literal

import numpy as np

from .errors import InvalidParameterError, L0MpccError
from .problem import Problem, SplitPoint, eval_objective, l0_norm
from .storage import write_text_atomic
from .spectral import SpectralFactorization, factorize, min_valid_rho, transform_q
from .w_update import CANONICAL, TieBreakPolicy, solve_w_from_q, solve_w_subproblem
from .y_update import InnerSolverOptions, perturbed_dual, solve_y

logger = logging.getLogger(__name__)

Termination = Literal["converged", "max_iter", "max_time"]


# ==================== Options ====================


@dataclass(frozen=True)
class AdmmOptions:
    rho0: float
    delta: float
    delta_rho: float = 1.01
    rho_max: float = 2000.0
    eps: float = 1e-4
    max_iter: int = 10_000
    max_time: float | None = None
    tie_break: TieBreakPolicy = CANONICAL
    monitor_descent: bool = True
    inner: InnerSolverOptions = field(default_factory=InnerSolverOptions)
    log_every: int = 100

    def __post_init__(self):
        if not 0 < self.delta < self.rho0:
            raise InvalidParameterError(f"need 0 < delta < rho0, got delta={self.delta}, rho0={self.rho0}")
        if not self.delta_rho > 1:
            raise InvalidParameterError(f"delta_rho must exceed 1, got {self.delta_rho}")
        if not self.rho_max > self.rho0:
            raise InvalidParameterError(f"rho_max={self.rho_max} must exceed rho0={self.rho0}")
        if not self.eps > 0:
            raise InvalidParameterError(f"eps must be positive, got {self.eps}")
        if self.max_iter < 1:
            raise InvalidParameterError(f"max_iter must be positive, got {self.max_iter}")
        if self.max_time is not None and not self.max_time > 0:
            raise InvalidParameterError(f"max_time must be positive, got {self.max_time}")

    @classmethod
    def for_problem(cls, p: Problem, f: SpectralFactorization | None = None, **overrides) -> AdmmOptions:
        """
        rho0 = gamma, delta = rho0/2, rho_max = 2000. When gamma does not clear
        the validity floor 4 max(-s_i, 0), rho0 is lifted to twice the floor.
        Explicit overrides win; delta and rho_max follow an overridden rho0.
        """
        floor = min_valid_rho(f if f is not None else factorize(p.M))
        rho0 = overrides.pop("rho0", None)
        if rho0 is None:
            rho0 = p.gamma if p.gamma > floor else 2.0 * floor
        delta = overrides.pop("delta", rho0 / 2.0)
        rho_max = overrides.pop("rho_max", max(2000.0, 2.0 * rho0))
        return cls(rho0=rho0, delta=delta, rho_max=rho_max, **overrides)

    def validate_for(self, f: SpectralFactorization) -> None:
        floor = min_valid_rho(f)
        if self.rho0 <= floor:
            raise InvalidParameterError(
                f"rho0={self.rho0} must exceed {floor} so that rho0 I + 4M is positive definite"
            )


@dataclass(frozen=True)
class PerturbedOptions:
    alpha: float
    rho: float
    prox_weight: float
    max_iter: int = 10_000
    max_time: float | None = None
    eps: float = 1e-4
    tau: float = 2.0
    # (alpha, rho, mu) multipliers applied after every iteration until alpha <= alpha_floor.
    decay: tuple[float, float, float] | None = None
    alpha_floor: float = 1e-3
    tie_break: TieBreakPolicy = CANONICAL
    inner: InnerSolverOptions = field(default_factory=InnerSolverOptions)
    log_every: int = 100

    def __post_init__(self):
        if not self.rho > 0:
            raise InvalidParameterError(f"rho must be positive, got {self.rho}")
        if self.alpha < 0 or not self.rho * self.alpha < 1:
            raise InvalidParameterError(
                f"need alpha >= 0 and rho * alpha < 1, got alpha={self.alpha}, rho={self.rho}"
            )
        if self.prox_weight < 0:
            raise InvalidParameterError(f"prox_weight must be nonnegative, got {self.prox_weight}")
        if not self.eps > 0:
            raise InvalidParameterError(f"eps must be positive, got {self.eps}")
        if self.max_iter < 1:
            raise InvalidParameterError(f"max_iter must be positive, got {self.max_iter}")
        if self.max_time is not None and not self.max_time > 0:
            raise InvalidParameterError(f"max_time must be positive, got {self.max_time}")
        if self.decay is not None and len(self.decay) != 3:
            raise InvalidParameterError("decay must be an (alpha, rho, mu) factor triple")

    @property
    def is_heuristic(self) -> bool:
        """A decaying schedule leaves the constant-parameter theory."""
        return self.decay is not None

    def validate_for(self, f: SpectralFactorization) -> None:
        floor = min_valid_rho(f)
        if self.rho <= floor:
            raise InvalidParameterError(
                f"rho={self.rho} must exceed {floor} so that rho I + 4M is positive definite"
            )


def epsilon_schedule(eps: float, w0: SplitPoint | None = None, y0: SplitPoint | None = None, lambda0=None, **overrides) -> PerturbedOptions:
    """alpha = eps, rho = 1/(2 eps), mu = 2/eps + 1. Requires w0 = y0 when given."""
    if not eps > 0:
        raise InvalidParameterError(f"eps must be positive, got {eps}")
    if w0 is not None and y0 is not None and not np.array_equal(w0.stack(), y0.stack()):
        raise InvalidParameterError("the epsilon schedule starts from w0 = y0")
    overrides.setdefault("eps", eps)
    return PerturbedOptions(alpha=eps, rho=1.0 / (2.0 * eps), prox_weight=2.0 / eps + 1.0, **overrides)


def decaying_schedule(**overrides) -> PerturbedOptions:
    """(alpha, rho, mu) from (1, 1/2, 3), scaled by (1/1.001, 1.001, 1.001) each step."""
    return PerturbedOptions(
        alpha=1.0, rho=0.5, prox_weight=3.0, decay=(1.0 / 1.001, 1.001, 1.001), **overrides
    )


@dataclass(frozen=True)
class ConstantsCheck:
    c1: float
    c2: float
    c3: float
    c4: float
    c5: float

    @property
    def valid(self) -> bool:
        return self.c1 > 0 and self.c2 > 0 and self.c3 > 0 and self.c4 > 0 and self.c5 >= 0


def check_constants(alpha: float, rho: float, prox_weight: float, tau: float, nu: float, R: float) -> ConstantsCheck:
    for name, v in (("alpha", alpha), ("rho", rho), ("prox_weight", prox_weight), ("tau", tau), ("nu", nu), ("R", R)):
        if not v > 0:
            raise InvalidParameterError(f"{name} must be positive, got {v}")
    ra = rho * alpha
    return ConstantsCheck(
        c1=prox_weight / 2.0 - tau / (2.0 * nu),
        c2=rho / 2.0,
        c3=tau * (alpha - nu / 2.0) - (1.0 - ra) * (2.0 - ra) / (2.0 * rho),
        c4=(1.0 - ra) * ((R + 1.0) * ra - 1.0) / (2.0 * rho * R),
        c5=(1.0 - ra) / (2.0 * rho) * (tau - (1.0 - ra) * R),
    )


# ==================== State and trace ====================


@dataclass(frozen=True, eq=False)
class AdmmState:
    w: SplitPoint
    y: SplitPoint
    lam: np.ndarray
    rho: float
    k: int = 0

    @classmethod
    def initial(cls, n: int, rho: float) -> AdmmState:
        """w0 = y0 = (e; 0; 0), lambda0 = 0."""
        start = SplitPoint(np.ones(n), np.zeros(n), np.zeros(n))
        return cls(w=start, y=start, lam=np.zeros(3 * n), rho=float(rho), k=0)


@dataclass(frozen=True)
class IterationRecord:
    k: int
    rho: float
    rho_next: float
    primal_res: float
    dual_res: float
    dlambda: float
    dy: float
    dw: float
    L: float
    L_next: float
    P_tau: float | None
    triggered: bool | None
    lambda_norm: float
    kkt_dual: float
    t_wall: float
    alpha: float = 0.0
    prox_weight: float = 0.0

    @property
    def stop_value(self) -> float:
        return max(self.primal_res, self.kkt_dual)

    def to_dict(self, include_time: bool = True) -> dict:
        d = asdict(self)
        if not include_time:
            d.pop("t_wall")
        return d


@dataclass(eq=False)
class SolveTrace:
    algorithm: Literal["admm_cf", "perturbed"]
    records: list[IterationRecord]
    initial: AdmmState
    final: AdmmState
    previous: AdmmState
    termination: Termination
    eps: float
    L_initial: float
    delta: float | None = None
    tau: float | None = None
    hit_rho_max: bool = False
    min_lambda_norm: float = math.inf
    best_objective: float | None = None
    best_x: np.ndarray | None = None
    heuristic: bool = False
    wall_time: float = 0.0

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def converged(self) -> bool:
        return self.termination == "converged"

    def iter_jsonl(self, include_time: bool = True) -> Iterator[str]:
        for r in self.records:
            yield json.dumps(r.to_dict(include_time), allow_nan=True)

    def to_jsonl(self, path: str | Path, include_time: bool = True) -> Path:
        body = "".join(line + "\n" for line in self.iter_jsonl(include_time))
        return write_text_atomic(body, path)


# ==================== Lyapunov functions ====================


def _h(p: Problem, w: SplitPoint) -> float:
    return p.f_quadratic(w.x) + p.gamma * float(np.sum(1.0 - w.xi))


def _p(p: Problem, y: SplitPoint) -> float:
    return p.g_value(y.x)


def lyapunov_l(p: Problem, state: AdmmState) -> float:
    """Augmented Lagrangian h(w) + p(y) + lambda'(w - y) + rho/2 ||w - y||^2."""
    r = state.w.stack() - state.y.stack()
    return _h(p, state.w) + _p(p, state.y) + float(state.lam @ r) + 0.5 * state.rho * float(r @ r)


def perturbed_lagrangian(p: Problem, state: AdmmState, alpha: float) -> float:
    r = state.w.stack() - state.y.stack()
    damp = 1.0 - state.rho * alpha
    return (
        _h(p, state.w)
        + _p(p, state.y)
        + damp * float(state.lam @ (r - alpha * state.lam))
        + 0.5 * state.rho * float(r @ r)
    )


def lyapunov_p(p: Problem, state: AdmmState, prev_lambda: np.ndarray, tau: float, alpha: float) -> float:
    if state.k < 1:
        raise InvalidParameterError("P_tau is defined from k = 1 on")
    damp = 1.0 - state.rho * alpha
    dl = state.lam - np.asarray(prev_lambda, dtype=float)
    return (
        perturbed_lagrangian(p, state, alpha)
        + 0.5 * damp * alpha * float(state.lam @ state.lam)
        + tau * damp / (2.0 * state.rho) * float(dl @ dl)
    )


def lower_bound_lbar(p: Problem, rho: float) -> float:
    """
    Lower bound of h(w) + p(y) + rho/2 ||w - y||^2 over Z1 x Z2:
    min f_Q + min g - n gamma^2 / (2 rho). Needs M positive definite.
    """
    if not rho > 0:
        raise InvalidParameterError(f"rho must be positive, got {rho}")
    try:
        L = np.linalg.cholesky(p.M)
    except np.linalg.LinAlgError as e:
        raise InvalidParameterError("lower_bound_lbar needs a positive definite M") from e
    u = np.linalg.solve(L, p.lin)
    bound = -0.25 * float(u @ u) - p.n * p.gamma**2 / (2.0 * rho)
    if p.g_quad is not None:
        P, c = p.g_quad.P, p.g_quad.c
        x, *_ = np.linalg.lstsq(P, -c, rcond=None)
        if np.linalg.norm(P @ x + c) > 1e-9 * (1.0 + np.linalg.norm(c)):
            raise InvalidParameterError("g is unbounded below; no finite lower bound")
        bound += p.g_quad.value(x)
    return bound


def corollary_gap_bound(p: Problem, trace: SolveTrace, eps: float) -> float:
    """8 (h(w0) + p(y0) + 3 eps/16 ||lambda0||^2 - Lbar) eps."""
    s = trace.initial
    lbar = lower_bound_lbar(p, s.rho)
    return 8.0 * (_h(p, s.w) + _p(p, s.y) + 3.0 * eps / 16.0 * float(s.lam @ s.lam) - lbar) * eps


# ==================== ADMM_cf ====================


def penalty_trigger(rho_k: float, dy_norm: float, dl_norm: float, delta: float) -> bool:
    """True while the multiplier moves too fast for the sufficient-descent bound."""
    return (rho_k - delta) * dy_norm < math.sqrt(2.0) * dl_norm


def penalty_update(rho_k: float, dy_norm: float, dl_norm: float, opts: AdmmOptions) -> float:
    if penalty_trigger(rho_k, dy_norm, dl_norm, opts.delta) and rho_k <= opts.rho_max:
        return opts.delta_rho * rho_k
    return rho_k


def _out_of_time(t0: float, max_time: float | None) -> bool:
    return max_time is not None and time.perf_counter() - t0 >= max_time


def run_admm_cf(
    p: Problem,
    opts: AdmmOptions,
    f: SpectralFactorization | None = None,
    init: AdmmState | None = None,
) -> SolveTrace:
    f = f if f is not None else factorize(p.M)
    opts.validate_for(f)
    state = init if init is not None else AdmmState.initial(p.n, opts.rho0)
    if state.rho != opts.rho0:
        state = replace(state, rho=opts.rho0)

    logger.info("ADMM_cf start: n=%d m=%d gamma=%g rho0=%g eps=%g", p.n, p.m, p.gamma, opts.rho0, opts.eps)
    t0 = time.perf_counter()
    initial = state
    L_prev = lyapunov_l(p, state)
    L_initial = L_prev
    records: list[IterationRecord] = []
    previous = state
    termination: Termination = "max_iter"
    hit_rho_max = False
    min_lam = float(np.linalg.norm(state.lam))

    for k in range(opts.max_iter):
        if _out_of_time(t0, opts.max_time):
            termination = "max_time"
            break
        rho = state.rho
        try:
            w = solve_w_subproblem(f, p, state.y, state.lam, rho, opts.tie_break)
            y = solve_y(p, w, state.lam, rho, opts.inner)
        except L0MpccError as e:
            e.add_note(f"ADMM_cf iteration {k + 1}, rho={rho:g}")
            raise
        r = w.stack() - y.stack()
        lam = state.lam + rho * r
        dy = float(np.linalg.norm(y.stack() - state.y.stack()))
        dw = float(np.linalg.norm(w.stack() - state.w.stack()))
        dl = float(np.linalg.norm(lam - state.lam))
        rho_next = penalty_update(rho, dy, dl, opts)
        triggered = penalty_trigger(rho, dy, dl, opts.delta)
        # rho may end one step past rho_max; a trigger firing there means the cap binds.
        hit_rho_max = hit_rho_max or (triggered and rho > opts.rho_max)

        new_state = AdmmState(w=w, y=y, lam=lam, rho=rho_next, k=k + 1)
        L_next = lyapunov_l(p, new_state)
        primal = float(np.linalg.norm(r))
        lam_norm = float(np.linalg.norm(lam))
        min_lam = min(min_lam, lam_norm)
        rec = IterationRecord(
            k=k + 1,
            rho=rho,
            rho_next=rho_next,
            primal_res=primal,
            dual_res=rho * dy,
            dlambda=dl,
            dy=dy,
            dw=dw,
            L=L_prev,
            L_next=L_next,
            P_tau=None,
            triggered=triggered,
            lambda_norm=lam_norm,
            kkt_dual=rho * dy,
            t_wall=time.perf_counter() - t0,
        )
        records.append(rec)
        if opts.log_every and (k + 1) % opts.log_every == 0:
            logger.debug(
                "k=%d rho=%.4g primal=%.3e dual=%.3e L=%.6g", k + 1, rho, primal, rho * dy, L_next
            )
        previous, state, L_prev = state, new_state, L_next
        if rec.stop_value < opts.eps:
            termination = "converged"
            break

    trace = SolveTrace(
        algorithm="admm_cf",
        records=records,
        initial=initial,
        final=state,
        previous=previous,
        termination=termination,
        eps=opts.eps,
        L_initial=L_initial,
        delta=opts.delta,
        hit_rho_max=hit_rho_max,
        min_lambda_norm=min_lam,
        wall_time=time.perf_counter() - t0,
    )
    logger.info(
        "ADMM_cf %s after %d iterations (rho=%g, stop=%.3e)",
        termination,
        trace.iterations,
        state.rho,
        records[-1].stop_value if records else math.nan,
    )
    if hit_rho_max:
        logger.warning(
            "rho is capped at %g but the penalty trigger still fires; the bounded-penalty assumption is violated",
            state.rho,
        )
    if opts.monitor_descent:
        for v in check_lagrangian_descent(trace, opts.delta):
            logger.warning("descent monitor: %s", v)
    return trace


# ==================== Perturbed ADMM ====================


def _prox_w_update(
    f: SpectralFactorization,
    p: Problem,
    state: AdmmState,
    alpha: float,
    mu: float,
    tb: TieBreakPolicy,
) -> SplitPoint:
    """argmin_{w in Z1} Ltilde(w, y_k, lambda_k) + mu/2 ||w - w_k||^2."""
    base = np.concatenate([p.lin, -p.lin, np.full(p.n, -p.gamma)])
    h = base + perturbed_dual(state.lam, state.rho, alpha) - state.rho * state.y.stack() - mu * state.w.stack()
    return solve_w_from_q(f, transform_q(f, h), state.rho + mu, tb)


def _y_objective(p: Problem, y: SplitPoint) -> float:
    return p.f_smooth(y.x) + p.gamma * l0_norm(y.x)


def run_perturbed_admm(
    p: Problem,
    opts: PerturbedOptions,
    f: SpectralFactorization | None = None,
    init: AdmmState | None = None,
) -> SolveTrace:
    f = f if f is not None else factorize(p.M)
    opts.validate_for(f)
    state = init if init is not None else AdmmState.initial(p.n, opts.rho)
    if state.rho != opts.rho:
        state = replace(state, rho=opts.rho)

    alpha, rho, mu = opts.alpha, opts.rho, opts.prox_weight
    logger.info(
        "perturbed ADMM start: n=%d alpha=%g rho=%g mu=%g%s",
        p.n, alpha, rho, mu, " (decaying, heuristic)" if opts.is_heuristic else "",
    )
    t0 = time.perf_counter()
    initial = state
    L_initial = perturbed_lagrangian(p, state, alpha)
    L_prev = L_initial
    records: list[IterationRecord] = []
    previous = state
    termination: Termination = "max_iter"
    min_lam = float(np.linalg.norm(state.lam))
    best_obj = _y_objective(p, state.y)
    best_x = state.y.x.copy()

    for k in range(opts.max_iter):
        if _out_of_time(t0, opts.max_time):
            termination = "max_time"
            break
        try:
            w = _prox_w_update(f, p, state, alpha, mu, opts.tie_break)
            y = solve_y(p, w, perturbed_dual(state.lam, rho, alpha), rho, opts.inner)
        except L0MpccError as e:
            e.add_note(f"perturbed ADMM iteration {k + 1}")
            raise
        r = w.stack() - y.stack()
        lam = perturbed_dual(state.lam, rho, alpha) + rho * r

        delta_y = y.stack() - state.y.stack()
        delta_w = w.stack() - state.w.stack()
        dy = float(np.linalg.norm(delta_y))
        dw = float(np.linalg.norm(delta_w))
        dl = float(np.linalg.norm(lam - state.lam))
        kkt_dual = float(np.linalg.norm(rho * delta_y + mu * delta_w))

        new_state = AdmmState(w=w, y=y, lam=lam, rho=rho, k=k + 1)
        L_next = perturbed_lagrangian(p, new_state, alpha)
        P_tau = lyapunov_p(p, new_state, state.lam, opts.tau, alpha)
        lam_norm = float(np.linalg.norm(lam))
        min_lam = min(min_lam, lam_norm)
        obj = _y_objective(p, y)
        if obj < best_obj:
            best_obj, best_x = obj, y.x.copy()

        rec = IterationRecord(
            k=k + 1,
            rho=rho,
            rho_next=rho,
            primal_res=float(np.linalg.norm(r)),
            dual_res=rho * dy,
            dlambda=dl,
            dy=dy,
            dw=dw,
            L=L_prev,
            L_next=L_next,
            P_tau=P_tau,
            triggered=None,
            lambda_norm=lam_norm,
            kkt_dual=kkt_dual,
            t_wall=time.perf_counter() - t0,
            alpha=alpha,
            prox_weight=mu,
        )
        records.append(rec)
        if opts.log_every and (k + 1) % opts.log_every == 0:
            logger.debug("k=%d dlambda/rho=%.3e kkt_dual=%.3e P=%.6g", k + 1, dl / rho, kkt_dual, P_tau)
        previous, state, L_prev = state, new_state, L_next
        if max(dl / rho, kkt_dual) < opts.eps:
            termination = "converged"
            break

        if opts.decay is not None and alpha > opts.alpha_floor:
            fa, fr, fm = opts.decay
            alpha, rho, mu = alpha * fa, rho * fr, mu * fm
            state = replace(state, rho=rho)
            L_prev = perturbed_lagrangian(p, state, alpha)

    trace = SolveTrace(
        algorithm="perturbed",
        records=records,
        initial=initial,
        final=state,
        previous=previous,
        termination=termination,
        eps=opts.eps,
        L_initial=L_initial,
        tau=opts.tau,
        min_lambda_norm=min_lam,
        best_objective=best_obj,
        best_x=best_x,
        heuristic=opts.is_heuristic,
        wall_time=time.perf_counter() - t0,
    )
    logger.info("perturbed ADMM %s after %d iterations", termination, trace.iterations)
    if not opts.is_heuristic:
        for v in check_lyapunov_descent(trace):
            logger.warning("Lyapunov monitor: %s", v)
    return trace


# ==================== Monitors ====================


def frozen_from(trace: SolveTrace) -> int:
    """Index of the first record after which rho never changes again."""
    recs = trace.records
    start = len(recs)
    for i in range(len(recs) - 1, -1, -1):
        if recs[i].rho_next != recs[i].rho:
            break
        start = i
    return start


def check_lagrangian_descent(trace: SolveTrace, delta: float | None = None) -> list[str]:
    """
    Violations of the one-step augmented Lagrangian bound (every iteration)
    and of the -(delta/2)||dy||^2 bound on the frozen-rho suffix where the
    penalty trigger is off.
    """
    delta = trace.delta if delta is None else delta
    violations: list[str] = []
    start = frozen_from(trace)
    for i, r in enumerate(trace.records):
        change = r.L_next - r.L
        slack = 1e-8 * (1.0 + abs(r.L))
        bound = (1.0 / r.rho + (r.rho_next - r.rho) / (2.0 * r.rho**2)) * r.dlambda**2 - 0.5 * r.rho * r.dy**2
        if change > bound + slack:
            violations.append(f"k={r.k}: one-step bound {change:.6e} > {bound:.6e}")
        if delta is not None and i >= start and not r.triggered:
            tight = -0.5 * delta * r.dy**2
            if change > tight + slack:
                violations.append(f"k={r.k}: frozen-rho descent {change:.6e} > {tight:.6e}")
    return violations


def check_lyapunov_descent(trace: SolveTrace) -> list[str]:
    """Steps where P_tau increased beyond 1e-8 (1 + |P_tau|)."""
    violations = []
    vals = [r.P_tau for r in trace.records if r.P_tau is not None]
    for k, (a, b) in enumerate(zip(vals, vals[1:]), start=1):
        if b - a > 1e-8 * (1.0 + abs(a)):
            violations.append(f"k={k + 1}: P_tau rose from {a:.10g} to {b:.10g}")
    return violations


# ==================== Reporting ====================


@dataclass(frozen=True)
class ReportedObjective:
    objective: float
    card: int
    x: np.ndarray
    relaxed_form: bool


def reported_objective(p: Problem, trace: SolveTrace) -> ReportedObjective:
    """
    ADMM_cf: with (x+, x-, xi) = y at termination, f(x) + gamma (n - sum xi)
    when the stop rule was met, else f(x) + gamma ||x||_0. Perturbed: the
    best f(x) + gamma ||x||_0 over all y iterates. The problem offset is added.
    """
    if trace.algorithm == "perturbed":
        x = trace.best_x
        return ReportedObjective(trace.best_objective + p.offset, l0_norm(x), x, relaxed_form=False)

    y = trace.final.y
    x = y.x
    if trace.converged:
        slots = float(p.n - np.sum(y.xi))
        value = p.f_smooth(x) + p.gamma * slots
        return ReportedObjective(value + p.offset, int(round(slots)), x, relaxed_form=True)
    return ReportedObjective(eval_objective(p, x) + p.offset, l0_norm(x), x, relaxed_form=False)
