"""
Eigendecomposition of M and the orthogonal congruence G that diagonalizes both
the quadratic form H and the complementarity form Q of the w-subproblem:

    G = [[ I/2,  c I,  I/2],
         [ I/2, -c I,  I/2],
         [-c I,   0,   c I]] @ blockdiag(I, V, I),     c = sqrt(2)/2

G is never needed explicitly inside the solver; `transform_q` and `apply_g`
use the block structure. `G` is materialised on demand for verification.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DimensionError, InvalidParameterError, NumericalError

SQRT_HALF = np.sqrt(2.0) / 2.0


@dataclass(frozen=True, eq=False)
class SpectralFactorization:
    V: np.ndarray
    s: np.ndarray  # ascending
    M: np.ndarray

    @property
    def n(self) -> int:
        return self.s.shape[0]

    @cached_property
    def G(self) -> np.ndarray:
        n = self.n
        eye = np.eye(n)
        zero = np.zeros((n, n))
        B = np.block(
            [
                [0.5 * eye, SQRT_HALF * eye, 0.5 * eye],
                [0.5 * eye, -SQRT_HALF * eye, 0.5 * eye],
                [-SQRT_HALF * eye, zero, SQRT_HALF * eye],
            ]
        )
        D = np.block([[eye, zero, zero], [zero, self.V, zero], [zero, zero, eye]])
        return B @ D

    def apply_g(self, z: np.ndarray) -> np.ndarray:
        """w = G z, computed blockwise."""
        n = self.n
        z1, z2, z3 = z[:n], z[n : 2 * n], z[2 * n :]
        v2 = SQRT_HALF * (self.V @ z2)
        mid = 0.5 * (z1 + z3)
        return np.concatenate([mid + v2, mid - v2, SQRT_HALF * (z3 - z1)])


def factorize(M: np.ndarray) -> SpectralFactorization:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"M must be square, got shape {M.shape}")
    try:
        s, V = np.linalg.eigh(M)
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"symmetric eigensolver did not converge: {e}") from e

    # Sort by (value, original index) so ties are ordered reproducibly.
    order = np.lexsort((np.arange(s.shape[0]), s))
    s = np.ascontiguousarray(s[order])
    V = np.ascontiguousarray(V[:, order])
    M = M.copy()
    for arr in (s, V, M):
        arr.setflags(write=False)
    return SpectralFactorization(V=V, s=s, M=M)


def verify_diagonalization(f: SpectralFactorization, rho: float) -> tuple[float, float]:
    """
    Residuals (r_H, r_Q) of G'HG and G'QG against their diagonal targets

        G'HG = blockdiag(rho/2 I, 2S + rho/2 I, rho/2 I)
        G'QG = blockdiag(-sqrt(2) I, 0, sqrt(2) I)
    """
    if rho <= 0:
        raise InvalidParameterError(f"rho must be positive, got {rho}")
    n = f.n
    M = f.M
    eye = np.eye(n)
    zero = np.zeros((n, n))
    H = np.block(
        [
            [M + 0.5 * rho * eye, -M, zero],
            [-M, M + 0.5 * rho * eye, zero],
            [zero, zero, 0.5 * rho * eye],
        ]
    )
    Q = np.block([[zero, zero, eye], [zero, zero, eye], [eye, eye, zero]])
    H_target = np.diag(
        np.concatenate([np.full(n, 0.5 * rho), 2.0 * f.s + 0.5 * rho, np.full(n, 0.5 * rho)])
    )
    Q_target = np.diag(
        np.concatenate([np.full(n, -np.sqrt(2.0)), np.zeros(n), np.full(n, np.sqrt(2.0))])
    )
    G = f.G
    r_H = float(np.linalg.norm(G.T @ H @ G - H_target))
    r_Q = float(np.linalg.norm(G.T @ Q @ G - Q_target))
    return r_H, r_Q


def min_valid_rho(f: SpectralFactorization) -> float:
    """4 * max_i max(-s_i, 0); any rho above this keeps rho/2 + 2 s_i > 0."""
    return 4.0 * float(np.max(np.maximum(-f.s, 0.0), initial=0.0))


def transform_q(f: SpectralFactorization, h: np.ndarray) -> np.ndarray:
    """q = G'h, computed blockwise."""
    n = f.n
    h = np.asarray(h, dtype=float)
    if h.shape != (3 * n,):
        raise DimensionError(f"h has shape {h.shape}, expected ({3 * n},)")
    h1, h2, h3 = h[:n], h[n : 2 * n], h[2 * n :]
    mid = 0.5 * (h1 + h2)
    return np.concatenate(
        [
            mid - SQRT_HALF * h3,
            f.V.T @ (SQRT_HALF * (h1 - h2)),
            mid + SQRT_HALF * h3,
        ]
    )
