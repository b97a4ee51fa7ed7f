"""
Synthetic least-squares instances:

    rows of C ~ N(0, I_n),  x_true_i ~ U(-K, K) zeroed where |x_true_i| >= kK/n,
    obs = C x_true + noise,  noise_i ~ N(0, sigma^2)

with sigma^2 = ||x_true||^2 / 10 (`ratio10`) or ||x_true||^2 / SNR (`snr:<v>`).

Every draw comes from its own PCG64 stream keyed by (seed, purpose); normals
are built with Box-Muller from uniform doubles so instances do not depend on
numpy's normal sampler.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .errors import InvalidParameterError
from .problem import Problem, QuadraticTerm


class Stream(IntEnum):
    DICTIONARY = 1
    SIGNAL = 2
    NOISE = 3
    IHT_STARTS = 4
    TIE_BREAK = 5


def stream(seed: int, purpose: Stream) -> np.random.Generator:
    if seed < 0:
        raise InvalidParameterError(f"seed must be nonnegative, got {seed}")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(purpose)])))


def box_muller(rng: np.random.Generator, size: int) -> np.ndarray:
    """`size` standard normals from 2 * ceil(size/2) uniforms."""
    pairs = (size + 1) // 2
    u = rng.random(2 * pairs)
    u1 = 1.0 - u[0::2]  # (0, 1]
    u2 = u[1::2]
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    z = np.empty(2 * pairs)
    z[0::2] = radius * np.cos(angle)
    z[1::2] = radius * np.sin(angle)
    return z[:size]


# ---- Noise specification ----------------------------------------------------


@dataclass(frozen=True)
class NoiseSpec:
    snr: float = 10.0
    label: str = "ratio10"

    @classmethod
    def parse(cls, text: str) -> NoiseSpec:
        text = text.strip()
        if text == "ratio10":
            return cls()
        if text.startswith("snr:"):
            try:
                value = float(text[4:])
            except ValueError as e:
                raise InvalidParameterError(f"bad SNR in noise spec '{text}'") from e
            if not value > 0:
                raise InvalidParameterError(f"SNR must be positive, got {value}")
            return cls(snr=value, label=text)
        raise InvalidParameterError(f"noise spec must be 'ratio10' or 'snr:<v>', got '{text}'")

    def variance(self, x_true: np.ndarray) -> float:
        return float(x_true @ x_true) / self.snr


# ---- Instances --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LsrInstance:
    C: np.ndarray
    obs: np.ndarray
    x_true: np.ndarray
    sigma2: float
    seed: int
    p: int
    n: int
    k: int
    K: float
    noise: str

    def to_problem(self, gamma: float, g_quad: QuadraticTerm | None = None, A=None, b=None) -> Problem:
        """M = C'C, lin = -2 C'obs, offset = obs'obs."""
        return Problem.from_least_squares(self.C, self.obs, gamma, g_quad=g_quad, A=A, b=b)

    def truth(self) -> dict:
        return {
            "x_true": self.x_true.tolist(),
            "sigma2": self.sigma2,
            "seed": self.seed,
            "p": self.p,
            "n": self.n,
            "k": self.k,
            "K": self.K,
            "noise": self.noise,
        }


def generate_lsr_instance(
    p: int,
    n: int,
    k: int,
    K: float = 60.0,
    noise_spec: NoiseSpec | str = "ratio10",
    seed: int = 0,
) -> LsrInstance:
    if p < 1 or n < 1:
        raise InvalidParameterError(f"p and n must be positive, got p={p}, n={n}")
    if not 0 < k <= n:
        raise InvalidParameterError(f"need 0 < k <= n, got k={k}, n={n}")
    if not K > 0:
        raise InvalidParameterError(f"K must be positive, got {K}")
    noise = NoiseSpec.parse(noise_spec) if isinstance(noise_spec, str) else noise_spec

    C = box_muller(stream(seed, Stream.DICTIONARY), p * n).reshape(p, n)

    u = stream(seed, Stream.SIGNAL).random(n)
    x_true = K * (2.0 * u - 1.0)
    if k < n:
        # k = n puts the threshold at K: nothing is zeroed.
        x_true[np.abs(x_true) >= k * K / n] = 0.0

    sigma2 = noise.variance(x_true)
    eps = np.sqrt(sigma2) * box_muller(stream(seed, Stream.NOISE), p)
    obs = C @ x_true + eps
    return LsrInstance(
        C=C, obs=obs, x_true=x_true, sigma2=sigma2, seed=seed, p=p, n=n, k=k, K=float(K), noise=noise.label
    )
