"""Tests for the eigendecomposition and the diagonalizing congruence G."""

import numpy as np
import pytest

from l0_mpcc.errors import DimensionError, InvalidParameterError
from l0_mpcc.spectral import factorize, min_valid_rho, transform_q, verify_diagonalization

from .conftest import random_symmetric


class TestFactorize:
    """factorize and the orthogonality of G."""

    def test_identity(self):
        f = factorize(np.eye(2))
        np.testing.assert_allclose(f.s, [1.0, 1.0])
        np.testing.assert_allclose(f.G.T @ f.G, np.eye(6), atol=1e-14)

    def test_diagonal_input(self):
        f = factorize(np.diag([3.0, -1.0]))
        np.testing.assert_allclose(f.s, [-1.0, 3.0])

    def test_reconstructs_M(self, rng):
        M = random_symmetric(rng, 5)
        f = factorize(M)
        np.testing.assert_allclose(f.V @ np.diag(f.s) @ f.V.T, M, atol=1e-12)
        assert np.all(np.diff(f.s) >= 0)

    def test_rejects_non_square(self):
        with pytest.raises(DimensionError):
            factorize(np.zeros((2, 3)))

    def test_outputs_are_read_only(self):
        f = factorize(np.eye(2))
        with pytest.raises(ValueError):
            f.s[0] = 2.0


class TestDiagonalization:
    """G'HG and G'QG against their diagonal targets."""

    def test_zero_matrix(self):
        r_H, r_Q = verify_diagonalization(factorize(np.zeros((3, 3))), rho=2.0)
        assert r_H <= 1e-10 and r_Q <= 1e-10

    def test_random_matrix(self, rng):
        M = random_symmetric(rng, 3)
        r_H, r_Q = verify_diagonalization(factorize(M), rho=5.0)
        tol = 1e-9 * (1.0 + np.linalg.norm(M))
        assert r_H <= tol and r_Q <= tol

    def test_rho_must_be_positive(self):
        with pytest.raises(InvalidParameterError):
            verify_diagonalization(factorize(np.eye(1)), rho=0.0)


class TestTransforms:
    """transform_q, apply_g and min_valid_rho."""

    def test_transform_matches_dense_G(self, rng):
        f = factorize(random_symmetric(rng, 4))
        h = rng.standard_normal(12)
        np.testing.assert_allclose(transform_q(f, h), f.G.T @ h, atol=1e-12)
        assert np.linalg.norm(transform_q(f, h)) == pytest.approx(np.linalg.norm(h))

    def test_apply_g_matches_dense_G(self, rng):
        f = factorize(random_symmetric(rng, 4))
        z = rng.standard_normal(12)
        np.testing.assert_allclose(f.apply_g(z), f.G @ z, atol=1e-12)

    def test_column_maps_to_unit_vector(self, rng):
        f = factorize(random_symmetric(rng, 3))
        for j in range(9):
            np.testing.assert_allclose(transform_q(f, f.G[:, j]), np.eye(9)[j], atol=1e-12)

    def test_zero_h(self):
        np.testing.assert_array_equal(transform_q(factorize(np.eye(2)), np.zeros(6)), np.zeros(6))

    def test_min_valid_rho(self):
        assert min_valid_rho(factorize(np.diag([1.0, 2.0]))) == 0.0
        assert min_valid_rho(factorize(np.diag([-3.0, 1.0]))) == 12.0

    def test_min_valid_rho_keeps_middle_block_positive(self, rng):
        f = factorize(random_symmetric(rng, 6))
        rho = min_valid_rho(f) + 1e-6
        assert np.all(rho / 2 + 2 * f.s > 0)
