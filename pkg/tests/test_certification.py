"""Tests for multiplier recovery and the KKT checks."""

import math
from dataclasses import replace

import numpy as np
import pytest

from l0_mpcc.admm import AdmmOptions, AdmmState, IterationRecord, SolveTrace, run_admm_cf
from l0_mpcc.certification import (
    Multipliers,
    certify,
    first_order_kkt_residual,
    is_kkt_nondegenerate,
    kkt_residual_admm,
    perturbed_kkt_residual,
    recover_multipliers,
    second_order_check,
    stationarity_vector,
)
from l0_mpcc.errors import CertificationError
from l0_mpcc.instances import generate_lsr_instance
from l0_mpcc.problem import Problem, SplitPoint, split


@pytest.fixture
def one_dim():
    """f(x) = x^2 - 2x, gamma = 0.1: x = 1 (xi = 0) and x = 0 (xi = 1) are both KKT points."""
    return Problem(M=[[1.0]], lin=[-2.0], gamma=0.1)


def scalar_mult(mu, b1, b2, b3, b4) -> Multipliers:
    return Multipliers(mu, np.array([b1]), np.array([b2]), np.array([b3]), np.array([b4]), np.zeros(0))


def settled_trace(w: SplitPoint, lam: np.ndarray, rho: float = 1.0) -> SolveTrace:
    state = AdmmState(w=w, y=w, lam=lam, rho=rho, k=1)
    rec = IterationRecord(
        k=1, rho=rho, rho_next=rho, primal_res=0.0, dual_res=0.0, dlambda=0.0, dy=0.0, dw=0.0,
        L=0.0, L_next=0.0, P_tau=None, triggered=False, lambda_norm=0.0, kkt_dual=0.0, t_wall=0.0,
    )
    return SolveTrace(
        algorithm="admm_cf", records=[replace(rec, k=0), rec], initial=state, final=state, previous=state,
        termination="converged", eps=1e-4, L_initial=0.0, delta=0.5,
    )


class TestFirstOrder:
    """Stationarity, complementarity and feasibility residuals."""

    def test_exact_kkt_point(self, one_dim):
        mult = scalar_mult(0.1, 0.0, 0.0, 0.0, 0.0)
        report = first_order_kkt_residual(one_dim, split([1.0]), mult)
        assert report.max_residual == pytest.approx(0.0, abs=1e-14)
        assert report.nondegenerate
        assert report.convex_theory_applies

    def test_recovery_at_selected_coordinate(self, one_dim):
        w = split([1.0])
        mult = recover_multipliers(one_dim, w, w, np.zeros(3), rho=1.0)
        assert mult.mu == pytest.approx(0.1)
        assert mult.recovery_residual == pytest.approx(0.0, abs=1e-14)
        assert first_order_kkt_residual(one_dim, w, mult).max_residual == pytest.approx(0.0, abs=1e-14)

    def test_free_mu_at_degenerate_point(self, one_dim):
        w = SplitPoint.zeros(1)
        assert recover_multipliers(one_dim, w, w, np.zeros(3), rho=1.0).mu == 0.0
        assert not is_kkt_nondegenerate(w)

    def test_non_kkt_point_matches_formula(self, rng):
        n, m = 3, 2
        A = rng.standard_normal((m, n))
        p = Problem(M=np.eye(n), lin=rng.standard_normal(n), gamma=0.4, A=A, b=rng.standard_normal(m))
        w = SplitPoint.from_vector(rng.random(3 * n))
        mult = Multipliers(
            mu=0.7, beta1=rng.random(n), beta2=rng.random(n), beta3=rng.random(n), beta4=rng.random(n), pi=rng.random(m)
        )
        g = 2 * w.x + p.lin
        expected = np.concatenate(
            [
                g + mult.mu * w.xi - mult.beta1 - A.T @ mult.pi,
                -g + mult.mu * w.xi - mult.beta2 + A.T @ mult.pi,
                -p.gamma * np.ones(n) + mult.mu * (w.x_plus + w.x_minus) + mult.beta4 - mult.beta3,
            ]
        )
        np.testing.assert_allclose(stationarity_vector(p, w, mult), expected)
        report = first_order_kkt_residual(p, w, mult)
        assert report.stationarity_res == pytest.approx(np.max(np.abs(expected)))
        assert report.max_residual > 0

    def test_negative_multiplier_counts(self, one_dim):
        mult = scalar_mult(0.1, 0.0, -0.5, 0.0, 0.0)
        assert first_order_kkt_residual(one_dim, split([1.0]), mult).complementarity_res >= 0.5


class TestSecondOrder:
    """Reduced Hessian on the critical subspace."""

    def test_convex_point(self, one_dim):
        mult = scalar_mult(0.1, 0.0, 0.0, 0.0, 0.0)
        assert second_order_check(one_dim, split([1.0]), mult, tol=1e-8) == pytest.approx(2.0)

    def test_empty_subspace(self, one_dim):
        w = SplitPoint([0.0], [0.0], [1.0])
        mult = scalar_mult(2.0, 0.0, 4.0, 0.0, 0.1)
        assert first_order_kkt_residual(one_dim, w, mult).max_residual == pytest.approx(0.0, abs=1e-14)
        assert second_order_check(one_dim, w, mult, tol=1e-8) == math.inf

    def test_saddle(self):
        p = Problem(M=[[-1.0]], lin=[2.0], gamma=0.1)
        mult = scalar_mult(0.1, 0.0, 0.0, 0.0, 0.0)
        assert second_order_check(p, split([1.0]), mult, tol=1e-8) == pytest.approx(-2.0)

    def test_needs_first_order_point(self, one_dim):
        mult = Multipliers.zeros(1)
        with pytest.raises(CertificationError):
            second_order_check(one_dim, split([1.0]), mult, tol=1e-8)

    def test_psd_problem_never_negative(self, rng):
        n = 3
        B = rng.standard_normal((n, n))
        M = B @ B.T + np.eye(n)
        x = np.array([1.0, -2.0, 0.0])
        lin = -2 * M @ x
        lin[2] = 0.0  # f is stationary on the support {0, 1}
        gamma = 0.3
        p = Problem(M=M, lin=lin, gamma=gamma)
        g2 = p.grad_f(x)[2]
        mu = max(abs(g2), gamma) + 1.0
        mult = Multipliers(
            mu=mu,
            beta1=np.array([0.0, 0.0, g2 + mu]),
            beta2=np.array([0.0, 0.0, mu - g2]),
            beta3=np.array([mu * 1.0 - gamma, mu * 2.0 - gamma, 0.0]),
            beta4=np.array([0.0, 0.0, gamma]),
            pi=np.zeros(0),
        )
        w = split(x)
        assert first_order_kkt_residual(p, w, mult).max_residual < 1e-10
        assert second_order_check(p, w, mult, tol=1e-8) >= -1e-8


class TestCertify:
    """certify and the ADMM stopping residual on traces."""

    def test_empty_trace(self, one_dim):
        trace = settled_trace(split([1.0]), np.zeros(3))
        trace.records = []
        with pytest.raises(CertificationError):
            kkt_residual_admm(trace)

    def test_single_iteration_trace(self):
        trace = settled_trace(split([1.0]), np.zeros(3))
        trace.records = trace.records[-1:]
        with pytest.raises(CertificationError, match="at least 2"):
            kkt_residual_admm(trace)

    def test_stationary_trace(self, one_dim):
        trace = settled_trace(split([1.0]), np.zeros(3))
        assert kkt_residual_admm(trace) == 0.0
        cert = certify(one_dim, trace, second_order=True)
        assert cert.report.max_residual == pytest.approx(0.0, abs=1e-14)
        assert cert.report.second_order_min_eig == pytest.approx(2.0)
        assert cert.kkt_res_admm == 0.0

    def test_second_order_skipped_off_kkt(self, one_dim):
        trace = settled_trace(split([3.0]), np.zeros(3))
        cert = certify(one_dim, trace, second_order=True)
        assert cert.report.max_residual > 1e-3
        assert cert.report.second_order_min_eig is None

    def test_perturbed_system_without_perturbation(self, one_dim):
        w = split([1.0])
        report, mult = perturbed_kkt_residual(one_dim, w, w, np.zeros(3), alpha=0.0)
        assert report.max_residual <= 1e-10
        assert report.feasibility_gap == 0.0
        assert mult.mu == pytest.approx(0.1)

    def test_perturbed_gap_counts_alpha_lambda(self, one_dim):
        w = split([1.0])
        lam = np.array([0.0, 0.0, 2.0])
        report, _ = perturbed_kkt_residual(one_dim, w, w, lam, alpha=0.5)
        assert report.feasibility_gap == pytest.approx(1.0)

    @pytest.mark.slow
    def test_admm_limit_is_certified(self, one_dim):
        trace = run_admm_cf(one_dim, AdmmOptions.for_problem(one_dim, eps=1e-4))
        assert trace.converged
        cert = certify(one_dim, trace)
        assert cert.report.max_residual <= 1e-3
        assert cert.kkt_res_admm < 1e-4

    @pytest.mark.parametrize("seed", range(6))
    def test_converged_least_squares_runs(self, seed):
        p = generate_lsr_instance(50, 10, 4, seed=seed).to_problem(gamma=1.0)
        trace = run_admm_cf(p, AdmmOptions.for_problem(p, eps=1e-4))
        assert trace.converged
        cert = certify(p, trace, second_order=True)
        assert cert.report.max_residual < 1e-3
        assert cert.report.nondegenerate
        assert cert.report.second_order_min_eig is not None
        assert cert.report.second_order_min_eig >= -1e-8
