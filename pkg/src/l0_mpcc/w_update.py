"""
Closed-form global minimizer of the nonconvex w-subproblem

    min  w'Hw + h'w   s.t.  (x+ + x-)'xi = 0

After z = G'w the problem reads

    min  rho/2 ||z1||^2 + sum_i (rho/2 + 2 s_i) z2_i^2 + rho/2 ||z3||^2 + q'z
    s.t. ||z1|| = ||z3||

whose minimizers are z2 = -q2 / (rho + 4 s) and z1, z3 of common radius
r = (||q1|| + ||q3||) / (2 rho) pointing against q1 and q3.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import DimensionError, InvalidParameterError
from .problem import Problem, SplitPoint
from .spectral import SpectralFactorization, min_valid_rho, transform_q

# ||q_j|| at or below this fraction of (1 + ||q||) counts as zero.
DEGENERATE_NORM = 1e-14

TieBreakMode = Literal["canonical_e1", "copy_partner", "seeded_random"]


@dataclass(frozen=True)
class TieBreakPolicy:
    """
    Direction used for z1 (resp. z3) when q1 (resp. q3) vanishes and the
    minimizer set is a sphere.
    """

    mode: TieBreakMode = "canonical_e1"
    seed: int | None = None

    def __post_init__(self):
        if self.mode not in ("canonical_e1", "copy_partner", "seeded_random"):
            raise InvalidParameterError(f"unknown tie-break mode '{self.mode}'")
        if (self.mode == "seeded_random") != (self.seed is not None):
            raise InvalidParameterError("a seed is required by, and only by, seeded_random")

    @classmethod
    def seeded_random(cls, seed: int) -> TieBreakPolicy:
        return cls(mode="seeded_random", seed=seed)

    def direction(self, n: int, partner: np.ndarray) -> np.ndarray:
        """Unit vector for the free block; `partner` is the other block's unit direction."""
        if self.mode == "copy_partner" and np.linalg.norm(partner) > 0:
            return partner.copy()
        if self.mode == "seeded_random":
            u = np.random.default_rng(self.seed).standard_normal(n)
            return u / np.linalg.norm(u)
        u = np.zeros(n)
        u[0] = 1.0
        return u


CANONICAL = TieBreakPolicy()


def build_h(p: Problem, y: SplitPoint, lam: np.ndarray, rho: float) -> np.ndarray:
    """h = (lin; -lin; -gamma e) + lambda - rho y."""
    if rho <= 0:
        raise InvalidParameterError(f"rho must be positive, got {rho}")
    lam = np.asarray(lam, dtype=float)
    if y.n != p.n or lam.shape != (3 * p.n,):
        raise DimensionError(
            f"y (n={y.n}) and lambda {lam.shape} do not match problem dimension {p.n}"
        )
    base = np.concatenate([p.lin, -p.lin, np.full(p.n, -p.gamma)])
    return base + lam - rho * y.stack()


def _ball_block(q_own: np.ndarray, radius: float, partner_dir: np.ndarray, zero_cut: float, tb: TieBreakPolicy) -> np.ndarray:
    norm = np.linalg.norm(q_own)
    if norm > zero_cut:
        return -radius * q_own / norm
    return radius * tb.direction(q_own.shape[0], partner_dir)


def solve_w_from_q(f: SpectralFactorization, q: np.ndarray, rho: float, tb: TieBreakPolicy = CANONICAL) -> SplitPoint:
    """w = G z* for the diagonalized subproblem with linear term q = G'h.

    `rho` is the coefficient of ||w||^2 / 2; the proximal variant passes rho + mu.
    """
    n = f.n
    q1, q2, q3 = q[:n], q[n : 2 * n], q[2 * n :]
    zero_cut = DEGENERATE_NORM * (1.0 + np.linalg.norm(q))
    n1, n3 = np.linalg.norm(q1), np.linalg.norm(q3)
    n1 = n1 if n1 > zero_cut else 0.0
    n3 = n3 if n3 > zero_cut else 0.0
    radius = (n1 + n3) / (2.0 * rho)

    dir1 = -q1 / n1 if n1 > 0 else np.zeros(n)
    dir3 = -q3 / n3 if n3 > 0 else np.zeros(n)
    z1 = _ball_block(q1, radius, dir3, zero_cut, tb)
    z3 = _ball_block(q3, radius, dir1, zero_cut, tb)
    z2 = -q2 / (rho + 4.0 * f.s)

    return SplitPoint.from_vector(f.apply_g(np.concatenate([z1, z2, z3])))


def solve_w_subproblem(
    f: SpectralFactorization,
    p: Problem,
    y: SplitPoint,
    lam: np.ndarray,
    rho: float,
    tb: TieBreakPolicy = CANONICAL,
) -> SplitPoint:
    """Global minimizer of the augmented Lagrangian in w over Z1."""
    floor = min_valid_rho(f)
    if rho <= floor:
        raise InvalidParameterError(
            f"rho={rho} must exceed {floor} (4 * most negative eigenvalue of M); "
            "the w-subproblem is unbounded below otherwise"
        )
    q = transform_q(f, build_h(p, y, lam, rho))
    return solve_w_from_q(f, q, rho, tb)
