"""Tests for the ADMM loops, parameter schedules and descent monitors."""

import json
import logging
from dataclasses import replace

import numpy as np
import pytest

from l0_mpcc.admm import (
    AdmmOptions,
    AdmmState,
    IterationRecord,
    PerturbedOptions,
    SolveTrace,
    check_constants,
    check_lagrangian_descent,
    check_lyapunov_descent,
    corollary_gap_bound,
    decaying_schedule,
    epsilon_schedule,
    frozen_from,
    lower_bound_lbar,
    lyapunov_l,
    lyapunov_p,
    penalty_trigger,
    penalty_update,
    perturbed_lagrangian,
    reported_objective,
    run_admm_cf,
    run_perturbed_admm,
)
from l0_mpcc.errors import InvalidParameterError
from l0_mpcc.instances import generate_lsr_instance
from l0_mpcc.oracle import brute_force_global
from l0_mpcc.problem import Problem, SplitPoint, check_feasibility_z2, eval_objective, l0_norm, split
from l0_mpcc.spectral import factorize
from l0_mpcc.w_update import solve_w_subproblem
from l0_mpcc.y_update import solve_y

from .conftest import random_problem


def make_record(k=1, rho=1.0, rho_next=1.0, dlambda=0.0, dy=0.0, L=0.0, L_next=0.0, P_tau=None, triggered=False):
    return IterationRecord(
        k=k, rho=rho, rho_next=rho_next, primal_res=0.0, dual_res=rho * dy, dlambda=dlambda, dy=dy, dw=0.0,
        L=L, L_next=L_next, P_tau=P_tau, triggered=triggered, lambda_norm=0.0, kkt_dual=rho * dy, t_wall=0.0,
    )


def make_trace(records, algorithm="admm_cf", delta=0.5, state=None):
    state = state if state is not None else AdmmState.initial(1, 1.0)
    return SolveTrace(
        algorithm=algorithm, records=records, initial=state, final=state, previous=state,
        termination="max_iter", eps=1e-4, L_initial=0.0, delta=delta,
    )


class TestOptions:
    """Option validation and defaults."""

    def test_delta_below_rho0(self):
        with pytest.raises(InvalidParameterError):
            AdmmOptions(rho0=1.0, delta=1.0)

    def test_delta_rho_above_one(self):
        with pytest.raises(InvalidParameterError):
            AdmmOptions(rho0=1.0, delta=0.5, delta_rho=1.0)

    def test_defaults_follow_gamma(self, tiny_problem):
        opts = AdmmOptions.for_problem(tiny_problem)
        assert opts.rho0 == 0.5
        assert opts.delta == 0.25
        assert opts.rho_max == 2000.0

    def test_rho0_lifted_above_floor(self):
        p = Problem(M=np.diag([-1.0, 1.0]), lin=np.zeros(2), gamma=1.0)
        assert AdmmOptions.for_problem(p).rho0 == 8.0

    def test_explicit_rho0_below_floor_is_rejected(self):
        p = Problem(M=np.diag([-1.0, 1.0]), lin=np.zeros(2), gamma=1.0)
        opts = AdmmOptions.for_problem(p, rho0=3.0)
        with pytest.raises(InvalidParameterError, match="must exceed"):
            run_admm_cf(p, opts)

    def test_perturbed_needs_rho_alpha_below_one(self):
        with pytest.raises(InvalidParameterError):
            PerturbedOptions(alpha=1.0, rho=1.0, prox_weight=0.0)
        PerturbedOptions(alpha=0.0, rho=1.0, prox_weight=0.0)


class TestPenaltyRule:
    """The rho increase rule."""

    def test_increase(self):
        opts = AdmmOptions(rho0=1.0, delta=0.5)
        assert penalty_trigger(1.0, 1.0, 1.0, 0.5)
        assert penalty_update(1.0, 1.0, 1.0, opts) == pytest.approx(1.01)

    def test_no_dual_motion(self):
        opts = AdmmOptions(rho0=1.0, delta=0.5)
        assert penalty_update(1.0, 1.0, 0.0, opts) == 1.0

    def test_capped_by_rho_max(self):
        opts = AdmmOptions(rho0=1.0, delta=0.5, rho_max=10.0)
        assert penalty_trigger(11.0, 0.0, 1.0, 0.5)
        assert penalty_update(11.0, 0.0, 1.0, opts) == 11.0


class TestSchedules:
    """Perturbed parameter schedules and the constant check."""

    @pytest.mark.parametrize("eps, expected", [(0.1, (0.1, 5.0, 21.0)), (0.01, (0.01, 50.0, 201.0))])
    def test_epsilon_schedule(self, eps, expected):
        opts = epsilon_schedule(eps)
        np.testing.assert_allclose((opts.alpha, opts.rho, opts.prox_weight), expected)
        assert opts.eps == eps

    @pytest.mark.parametrize("eps", [0.5, 0.1, 1e-3, 1e-6])
    def test_epsilon_schedule_passes_constant_check(self, eps):
        opts = epsilon_schedule(eps)
        check = check_constants(opts.alpha, opts.rho, opts.prox_weight, tau=2.0, nu=eps, R=2.0)
        assert check.valid

    def test_epsilon_schedule_needs_w0_equal_y0(self):
        with pytest.raises(InvalidParameterError):
            epsilon_schedule(0.1, w0=SplitPoint.zeros(1), y0=split([1.0]))

    def test_decaying_schedule_is_heuristic(self):
        opts = decaying_schedule(max_iter=5)
        assert opts.is_heuristic
        assert (opts.alpha, opts.rho, opts.prox_weight) == (1.0, 0.5, 3.0)

    def test_constant_check_rejects_nonpositive(self):
        with pytest.raises(InvalidParameterError, match="nu"):
            check_constants(0.1, 5.0, 21.0, tau=2.0, nu=0.0, R=2.0)

    def test_constant_check_flags_small_prox_weight(self):
        assert not check_constants(0.1, 5.0, 1.0, tau=2.0, nu=0.1, R=2.0).valid


class TestLyapunovFunctions:
    """Augmented Lagrangian and P_tau values."""

    def test_lagrangian_at_consensus(self, rng):
        p = random_problem(rng, 3)
        w = SplitPoint.from_vector(rng.random(9))
        state = AdmmState(w=w, y=w, lam=rng.standard_normal(9), rho=2.0)
        expected = p.f_quadratic(w.x) + p.gamma * float(np.sum(1.0 - w.xi))
        assert lyapunov_l(p, state) == pytest.approx(expected)

    def test_lagrangian_term_by_term(self, rng):
        p = random_problem(rng, 3)
        w = SplitPoint.from_vector(rng.standard_normal(9))
        y = SplitPoint.from_vector(rng.standard_normal(9))
        lam = rng.standard_normal(9)
        rho = 3.0
        r = w.stack() - y.stack()
        expected = p.f_quadratic(w.x) + p.gamma * np.sum(1 - w.xi) + lam @ r + rho / 2 * r @ r
        assert lyapunov_l(p, AdmmState(w=w, y=y, lam=lam, rho=rho)) == pytest.approx(expected)

    def test_p_tau_term_by_term(self, rng):
        p = random_problem(rng, 2)
        w = SplitPoint.from_vector(rng.standard_normal(6))
        y = SplitPoint.from_vector(rng.standard_normal(6))
        lam, prev = rng.standard_normal(6), rng.standard_normal(6)
        rho, alpha, tau = 2.0, 0.1, 2.0
        state = AdmmState(w=w, y=y, lam=lam, rho=rho, k=3)
        d = 1 - rho * alpha
        expected = (
            perturbed_lagrangian(p, state, alpha)
            + 0.5 * d * alpha * lam @ lam
            + tau * d / (2 * rho) * (lam - prev) @ (lam - prev)
        )
        assert lyapunov_p(p, state, prev, tau, alpha) == pytest.approx(expected)

    def test_p_tau_equal_duals(self, rng):
        p = random_problem(rng, 2)
        w = SplitPoint.from_vector(rng.standard_normal(6))
        state = AdmmState(w=w, y=w, lam=np.zeros(6), rho=2.0, k=1)
        assert lyapunov_p(p, state, np.zeros(6), 2.0, 0.1) == pytest.approx(perturbed_lagrangian(p, state, 0.1))

    def test_p_tau_undefined_at_zero(self):
        p = Problem(M=np.eye(1), lin=[0.0], gamma=1.0)
        with pytest.raises(InvalidParameterError):
            lyapunov_p(p, AdmmState.initial(1, 1.0), np.zeros(3), 2.0, 0.1)

    def test_lower_bound(self):
        p = Problem(M=np.eye(2), lin=np.array([-2.0, 4.0]), gamma=0.5)
        assert lower_bound_lbar(p, rho=2.0) == pytest.approx(-5.0 - 2 * 0.25 / 4.0)

    def test_lower_bound_needs_definite_M(self):
        p = Problem(M=np.diag([1.0, 0.0]), lin=np.zeros(2), gamma=0.5)
        with pytest.raises(InvalidParameterError):
            lower_bound_lbar(p, rho=2.0)


class TestMonitors:
    """Descent monitors on fabricated traces."""

    def test_flags_increase(self):
        trace = make_trace([make_record(dy=1.0, L=0.0, L_next=1.0)])
        violations = check_lagrangian_descent(trace)
        assert len(violations) == 2
        assert "one-step" in violations[0]

    def test_accepts_descent(self):
        trace = make_trace([make_record(dy=1.0, L=0.0, L_next=-1.0)])
        assert check_lagrangian_descent(trace) == []

    def test_frozen_suffix(self):
        recs = [make_record(k=1, rho=1.0, rho_next=1.01), make_record(k=2, rho=1.01, rho_next=1.01)]
        assert frozen_from(make_trace(recs)) == 1

    def test_lyapunov_rise(self):
        recs = [make_record(k=1, P_tau=1.0), make_record(k=2, P_tau=2.0), make_record(k=3, P_tau=1.5)]
        assert check_lyapunov_descent(make_trace(recs, algorithm="perturbed")) == [
            "k=2: P_tau rose from 1 to 2"
        ]


class TestAdmmCf:
    """run_admm_cf on small problems."""

    def test_lagrangian_descent_on_least_squares(self, lsr_problem):
        trace = run_admm_cf(lsr_problem, AdmmOptions.for_problem(lsr_problem, max_iter=500))
        assert check_lagrangian_descent(trace) == []

    def test_lagrangian_descent_on_random_problem(self, rng):
        p = random_problem(rng, 6, gamma=0.3)
        trace = run_admm_cf(p, AdmmOptions.for_problem(p, max_iter=500))
        assert check_lagrangian_descent(trace) == []

    def test_iteration_budget(self, tiny_problem):
        trace = run_admm_cf(tiny_problem, AdmmOptions.for_problem(tiny_problem, max_iter=3, eps=1e-300))
        assert trace.termination == "max_iter"
        assert trace.iterations == 3
        assert [r.k for r in trace.records] == [1, 2, 3]

    def test_time_budget(self, lsr_problem):
        trace = run_admm_cf(lsr_problem, AdmmOptions.for_problem(lsr_problem, max_time=1e-12))
        assert trace.termination == "max_time"

    def test_records_match_state(self, tiny_problem):
        trace = run_admm_cf(tiny_problem, AdmmOptions.for_problem(tiny_problem, max_iter=20, eps=1e-300))
        last = trace.records[-1]
        assert last.primal_res == pytest.approx(np.linalg.norm(trace.final.w.stack() - trace.final.y.stack()))
        assert last.rho_next == trace.final.rho
        assert last.L_next == pytest.approx(lyapunov_l(tiny_problem, trace.final))

    def test_trace_jsonl(self, tiny_problem, tmp_path):
        trace = run_admm_cf(tiny_problem, AdmmOptions.for_problem(tiny_problem, max_iter=5, eps=1e-300))
        path = trace.to_jsonl(tmp_path / "trace.jsonl", include_time=False)
        lines = path.read_text().splitlines()
        assert len(lines) == 5
        first = json.loads(lines[0])
        assert first["k"] == 1
        assert "t_wall" not in first

    def test_reported_objective(self, tiny_problem):
        trace = run_admm_cf(tiny_problem, AdmmOptions.for_problem(tiny_problem, max_iter=5, eps=1e-300))
        rep = reported_objective(tiny_problem, trace)
        assert not rep.relaxed_form
        assert rep.objective == pytest.approx(eval_objective(tiny_problem, trace.final.y.x))
        assert rep.card == l0_norm(trace.final.y.x)

    @pytest.mark.parametrize("seed", range(20))
    def test_lagrangian_descent_across_seeds(self, seed):
        p = generate_lsr_instance(50, 10, 4, seed=seed).to_problem(gamma=1.0)
        trace = run_admm_cf(p, AdmmOptions.for_problem(p, max_iter=1000))
        assert check_lagrangian_descent(trace) == []

    @pytest.mark.parametrize("seed", range(5))
    def test_binding_polyhedral_rows(self, seed):
        """sum x <= 5, x0 >= 1, x1 >= 1 on a least-squares instance."""
        n = 8
        A = np.vstack([-np.ones(n), np.eye(n)[:2]])
        b = np.array([-5.0, 1.0, 1.0])
        p = generate_lsr_instance(50, n, 4, seed=seed).to_problem(gamma=1.0, A=A, b=b)
        trace = run_admm_cf(p, AdmmOptions.for_problem(p, max_iter=2000))
        assert check_feasibility_z2(trace.final.y, p, 1e-7).feasible
        assert check_lagrangian_descent(trace) == []
        fstar = brute_force_global(p).fstar
        assert eval_objective(p, trace.final.y.x) >= fstar - 1e-4 * (1.0 + abs(fstar))

    def test_rho_max_flag_needs_trigger_past_cap(self, lsr_problem, caplog):
        opts = AdmmOptions.for_problem(lsr_problem, rho_max=1.05, max_iter=300)
        with caplog.at_level(logging.WARNING, logger="l0_mpcc.admm"):
            trace = run_admm_cf(lsr_problem, opts)
        assert trace.hit_rho_max == any(r.triggered and r.rho > opts.rho_max for r in trace.records)
        assert all(r.rho_next <= opts.delta_rho * opts.rho_max for r in trace.records)
        assert ("capped" in caplog.text) == trace.hit_rho_max

    def test_rho_max_flag_off_far_below_cap(self, tiny_problem):
        trace = run_admm_cf(tiny_problem, AdmmOptions.for_problem(tiny_problem, max_iter=500))
        assert max(r.rho_next for r in trace.records) < 2000.0
        assert not trace.hit_rho_max


class TestPerturbed:
    """run_perturbed_admm."""

    def test_reduces_to_plain_admm(self, rng):
        """alpha = mu = 0 repeats the unperturbed iteration with constant rho."""
        p = random_problem(rng, 4, gamma=0.4)
        rho = 1.5
        trace = run_perturbed_admm(p, PerturbedOptions(alpha=0.0, rho=rho, prox_weight=0.0, max_iter=40))

        f = factorize(p.M)
        state = AdmmState.initial(p.n, rho)
        y, lam = state.y, state.lam
        for _ in range(trace.iterations):
            w = solve_w_subproblem(f, p, y, lam, rho)
            y = solve_y(p, w, lam, rho)
            lam = lam + rho * (w.stack() - y.stack())
        np.testing.assert_array_equal(trace.final.w.stack(), w.stack())
        np.testing.assert_array_equal(trace.final.y.stack(), y.stack())
        np.testing.assert_array_equal(trace.final.lam, lam)

    def test_lyapunov_descent_with_epsilon_schedule(self, tiny_problem):
        trace = run_perturbed_admm(tiny_problem, epsilon_schedule(0.1, max_iter=300))
        assert trace.records[0].P_tau is not None
        assert check_lyapunov_descent(trace) == []

    def test_reports_best_iterate(self, tiny_problem):
        trace = run_perturbed_admm(tiny_problem, epsilon_schedule(0.1, max_iter=100))
        rep = reported_objective(tiny_problem, trace)
        assert not rep.relaxed_form
        assert rep.objective == pytest.approx(eval_objective(tiny_problem, rep.x))
        # the start y0 = (e; 0; 0) is among the candidates
        assert rep.objective <= eval_objective(tiny_problem, np.ones(3)) + 1e-12

    def test_decaying_schedule_runs(self, tiny_problem):
        trace = run_perturbed_admm(tiny_problem, decaying_schedule(max_iter=50))
        assert trace.heuristic
        assert trace.records[-1].alpha < 1.0

    def test_corollary_bound_is_finite(self, tiny_problem):
        trace = run_perturbed_admm(tiny_problem, epsilon_schedule(0.1, max_iter=10))
        bound = corollary_gap_bound(tiny_problem, trace, 0.1)
        assert np.isfinite(bound) and bound > 0

    @pytest.mark.parametrize("iterations", [1, 5, 20])
    def test_damped_dual_update(self, tiny_problem, iterations):
        opts = replace(epsilon_schedule(0.1, max_iter=iterations), eps=1e-300)
        trace = run_perturbed_admm(tiny_problem, opts)
        assert trace.iterations == iterations
        prev, last = trace.previous, trace.final
        expected = (1.0 - opts.rho * opts.alpha) * prev.lam + opts.rho * (last.w.stack() - last.y.stack())
        np.testing.assert_allclose(last.lam, expected, rtol=1e-12, atol=1e-12)
        assert trace.records[-1].lambda_norm == pytest.approx(np.linalg.norm(expected))
        assert trace.records[-1].primal_res == pytest.approx(np.linalg.norm(last.w.stack() - last.y.stack()))

    @pytest.mark.parametrize("seed", range(10))
    def test_lyapunov_descent_across_seeds(self, seed):
        p = generate_lsr_instance(50, 10, 4, seed=seed).to_problem(gamma=1.0)
        trace = run_perturbed_admm(p, epsilon_schedule(0.05, max_iter=500))
        assert check_lyapunov_descent(trace) == []

    @pytest.mark.parametrize("problem", ["tiny_problem", "lsr_problem"])
    def test_corollary_bound_holds(self, problem, request):
        p = request.getfixturevalue(problem)
        opts = replace(epsilon_schedule(0.05, max_iter=3000), eps=1e-9)
        trace = run_perturbed_admm(p, opts)
        bound = corollary_gap_bound(p, trace, 0.05)
        # alpha^2 ||lambda_k||^2 stays under the bound at every k >= 1
        assert all((opts.alpha * r.lambda_norm) ** 2 <= bound for r in trace.records)
        assert trace.records[-1].primal_res ** 2 <= bound
