"""
Problem representation for  min f(x) + gamma * ||x||_0  s.t.  A x >= b,
with f(x) = x'Mx + lin'x + g(x) and g(x) = 1/2 x'Px + c'x convex.

The solvers work on the complementarity form over w = (x+; x-; xi):

    min  f(x+ - x-) + gamma * sum(1 - xi)
    s.t. (x+ + x-)'xi = 0                      (set Z1)
         x+, x- >= 0, 0 <= xi <= 1, A(x+ - x-) >= b   (set Z2)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, InfeasiblePointError, InvalidParameterError

# Entries with |x_i| <= ZERO_TOL do not count towards ||x||_0.
ZERO_TOL = 1e-9


def _frozen(a, ndim: int, name: str) -> np.ndarray:
    arr = np.array(a, dtype=float, copy=True)
    if arr.ndim != ndim:
        raise DimensionError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidParameterError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


# ---- Types ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class QuadraticTerm:
    """g(x) = 1/2 x'Px + c'x with P symmetric positive semidefinite."""

    P: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "P", _frozen(self.P, 2, "g_quad.P"))
        object.__setattr__(self, "c", _frozen(self.c, 1, "g_quad.c"))
        n = self.c.shape[0]
        if self.P.shape != (n, n):
            raise DimensionError(f"g_quad.P must be {n}x{n}, got {self.P.shape}")
        scale = 1.0 + np.linalg.norm(self.P)
        if np.linalg.norm(self.P - self.P.T) > 1e-12 * scale:
            raise InvalidParameterError("g_quad.P is not symmetric")
        if n and np.linalg.eigvalsh(self.P)[0] < -1e-10 * scale:
            raise InvalidParameterError("g_quad.P is not positive semidefinite")

    def value(self, x: np.ndarray) -> float:
        return float(0.5 * x @ self.P @ x + self.c @ x)

    def grad(self, x: np.ndarray) -> np.ndarray:
        return self.P @ x + self.c


@dataclass(frozen=True, eq=False)
class Problem:
    M: np.ndarray
    lin: np.ndarray
    gamma: float
    g_quad: QuadraticTerm | None = None
    A: np.ndarray | None = None
    b: np.ndarray | None = None
    # Constant added to reported objectives only (e.g. obs'obs for least squares).
    offset: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "M", _frozen(self.M, 2, "M"))
        object.__setattr__(self, "lin", _frozen(self.lin, 1, "lin"))
        n = self.lin.shape[0]
        if n < 1:
            raise DimensionError("dimension n must be positive")
        if self.M.shape != (n, n):
            raise DimensionError(f"M must be {n}x{n}, got {self.M.shape}")
        if np.linalg.norm(self.M - self.M.T) > 1e-12 * (1.0 + np.linalg.norm(self.M)):
            raise InvalidParameterError("M is not symmetric")
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise InvalidParameterError(f"gamma must be positive, got {self.gamma}")
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "offset", float(self.offset))

        if self.g_quad is not None and self.g_quad.c.shape[0] != n:
            raise DimensionError(f"g_quad has dimension {self.g_quad.c.shape[0]}, expected {n}")

        if (self.A is None) != (self.b is None):
            raise InvalidParameterError("A and b must be given together")
        if self.A is not None:
            object.__setattr__(self, "A", _frozen(self.A, 2, "A"))
            object.__setattr__(self, "b", _frozen(self.b, 1, "b"))
            if self.A.shape != (self.b.shape[0], n):
                raise DimensionError(
                    f"A must be {self.b.shape[0]}x{n}, got {self.A.shape}"
                )

    @classmethod
    def from_least_squares(
        cls,
        C,
        obs,
        gamma: float,
        g_quad: QuadraticTerm | None = None,
        A=None,
        b=None,
    ) -> Problem:
        """||Cx - obs||^2 = x'(C'C)x - 2(C'obs)'x + obs'obs."""
        C = np.asarray(C, dtype=float)
        obs = np.asarray(obs, dtype=float)
        if C.ndim != 2 or obs.shape != (C.shape[0],):
            raise DimensionError(f"C {C.shape} and obs {obs.shape} are inconsistent")
        return cls(
            M=C.T @ C,
            lin=-2.0 * (C.T @ obs),
            gamma=gamma,
            g_quad=g_quad,
            A=A,
            b=b,
            offset=float(obs @ obs),
        )

    @property
    def n(self) -> int:
        return self.lin.shape[0]

    @property
    def m(self) -> int:
        return 0 if self.A is None else self.A.shape[0]

    @property
    def has_constraints(self) -> bool:
        return self.A is not None

    def f_quadratic(self, x: np.ndarray) -> float:
        """f_Q(x) = x'Mx + lin'x (no 1/2 factor)."""
        return float(x @ self.M @ x + self.lin @ x)

    def g_value(self, x: np.ndarray) -> float:
        return 0.0 if self.g_quad is None else self.g_quad.value(x)

    def f_smooth(self, x: np.ndarray) -> float:
        return self.f_quadratic(x) + self.g_value(x)

    def grad_f_quadratic(self, x: np.ndarray) -> np.ndarray:
        return 2.0 * (self.M @ x) + self.lin

    def grad_g(self, x: np.ndarray) -> np.ndarray:
        return np.zeros(self.n) if self.g_quad is None else self.g_quad.grad(x)

    def grad_f(self, x: np.ndarray) -> np.ndarray:
        return self.grad_f_quadratic(x) + self.grad_g(x)

    def hessian_f(self) -> np.ndarray:
        H = 2.0 * self.M
        return H if self.g_quad is None else H + self.g_quad.P

    def check_dim(self, x: np.ndarray, name: str = "x") -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise DimensionError(f"{name} has shape {x.shape}, expected ({self.n},)")
        return x


@dataclass(frozen=True, eq=False)
class SplitPoint:
    """The triple (x+; x-; xi). Also used for y = (y+; y-; zeta)."""

    x_plus: np.ndarray
    x_minus: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        for name in ("x_plus", "x_minus", "xi"):
            arr = np.array(getattr(self, name), dtype=float, copy=True)
            if arr.ndim != 1:
                raise DimensionError(f"{name} must be a vector, got shape {arr.shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (self.x_plus.shape == self.x_minus.shape == self.xi.shape):
            raise DimensionError(
                "x_plus, x_minus and xi must share a shape, got "
                f"{self.x_plus.shape}, {self.x_minus.shape}, {self.xi.shape}"
            )

    @classmethod
    def from_vector(cls, v: np.ndarray) -> SplitPoint:
        v = np.asarray(v, dtype=float)
        if v.ndim != 1 or v.shape[0] % 3:
            raise DimensionError(f"stacked vector must have length 3n, got shape {v.shape}")
        n = v.shape[0] // 3
        return cls(v[:n], v[n : 2 * n], v[2 * n :])

    @classmethod
    def zeros(cls, n: int) -> SplitPoint:
        return cls(np.zeros(n), np.zeros(n), np.zeros(n))

    @property
    def n(self) -> int:
        return self.xi.shape[0]

    @property
    def x(self) -> np.ndarray:
        return self.x_plus - self.x_minus

    def stack(self) -> np.ndarray:
        return np.concatenate([self.x_plus, self.x_minus, self.xi])


@dataclass(frozen=True)
class FeasibilityReport:
    max_violation: float
    violated_constraints: list[tuple[str, float]] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return not self.violated_constraints


def _report(magnitudes: list[tuple[str, float]], tol: float) -> FeasibilityReport:
    if tol < 0:
        raise InvalidParameterError(f"tol must be nonnegative, got {tol}")
    violated = [(cid, float(v)) for cid, v in magnitudes if v > tol]
    return FeasibilityReport(
        max_violation=max((v for _, v in violated), default=0.0),
        violated_constraints=violated,
    )


# ---- Objectives -------------------------------------------------------------


def l0_norm(x: np.ndarray, zero_tol: float = ZERO_TOL) -> int:
    return int(np.count_nonzero(np.abs(x) > zero_tol))


def eval_objective(p: Problem, x) -> float:
    """f(x) + gamma * ||x||_0 (the offset is not included)."""
    x = p.check_dim(x)
    return p.f_smooth(x) + p.gamma * l0_norm(x)


def eval_relaxed_objective(p: Problem, w: SplitPoint) -> float:
    """f(x+ - x-) + gamma * sum(1 - xi)."""
    if w.n != p.n:
        raise DimensionError(f"point has dimension {w.n}, problem has {p.n}")
    return p.f_smooth(w.x) + p.gamma * float(np.sum(1.0 - w.xi))


# ---- Split / recover maps ---------------------------------------------------


def split(x) -> SplitPoint:
    x = np.asarray(x, dtype=float)
    return SplitPoint(
        x_plus=np.maximum(x, 0.0),
        x_minus=np.maximum(-x, 0.0),
        xi=(x == 0.0).astype(float),
    )


def recover_tight(w: SplitPoint, tol: float = 1e-9, p: Problem | None = None) -> SplitPoint:
    """
    Map a relaxed-feasible point to one with (x+)'x- = 0 and the same x+ - x-.

    Feasibility is checked against Z1 (scaled by 1 + ||w||^2) and the bound part
    of Z2; the polyhedron rows are checked too when `p` is given.
    """
    z1 = check_feasibility_z1(w, tol * (1.0 + float(w.stack() @ w.stack())))
    z2 = check_feasibility_z2(w, p, tol) if p is not None else _bounds_report(w, tol)
    if not (z1.feasible and z2.feasible):
        raise InfeasiblePointError(
            "recover_tight needs a point feasible for the relaxed program",
            max(z1.max_violation, z2.max_violation),
        )

    keep_plus = w.x_plus >= w.x_minus
    x_plus = np.where(keep_plus, w.x_plus - w.x_minus, 0.0)
    x_minus = np.where(keep_plus, 0.0, w.x_minus - w.x_plus)
    return SplitPoint(x_plus, x_minus, w.xi)


# ---- Feasibility ------------------------------------------------------------


def check_feasibility_z1(w: SplitPoint, tol: float) -> FeasibilityReport:
    gap = abs(float((w.x_plus + w.x_minus) @ w.xi))
    return _report([("Z1", gap)], tol)


def _bound_magnitudes(y: SplitPoint) -> list[tuple[str, float]]:
    mags = []
    for i in range(y.n):
        mags.append((f"x_plus[{i}]", -y.x_plus[i]))
        mags.append((f"x_minus[{i}]", -y.x_minus[i]))
        mags.append((f"xi_lower[{i}]", -y.xi[i]))
        mags.append((f"xi_upper[{i}]", y.xi[i] - 1.0))
    return mags


def _bounds_report(y: SplitPoint, tol: float) -> FeasibilityReport:
    return _report(_bound_magnitudes(y), tol)


def check_feasibility_z2(y: SplitPoint, p: Problem | None, tol: float) -> FeasibilityReport:
    mags = _bound_magnitudes(y)
    if p is not None and p.has_constraints:
        if y.n != p.n:
            raise DimensionError(f"point has dimension {y.n}, problem has {p.n}")
        slack = p.b - p.A @ y.x
        mags.extend((f"row[{j}]", slack[j]) for j in range(p.m))
    return _report(mags, tol)


def z1_residual(w: SplitPoint) -> float:
    return check_feasibility_z1(w, 0.0).max_violation


def z2_residual(y: SplitPoint, p: Problem | None) -> float:
    return check_feasibility_z2(y, p, 0.0).max_violation


def is_nondegenerate(w: SplitPoint, tol: float) -> bool:
    """Every coordinate with x+_i + x-_i = 0 (within tol) has xi_i = 1 (within tol)."""
    zero_rows = (w.x_plus + w.x_minus) <= tol
    return bool(np.all(w.xi[zero_rows] >= 1.0 - tol))
