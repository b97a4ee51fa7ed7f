import numpy as np
import pytest

from l0_mpcc.instances import generate_lsr_instance
from l0_mpcc.problem import Problem


def random_symmetric(rng: np.random.Generator, n: int, psd: bool = False) -> np.ndarray:
    B = rng.standard_normal((n, n))
    return B @ B.T if psd else 0.5 * (B + B.T)


def random_problem(rng: np.random.Generator, n: int, gamma: float = 1.0, psd: bool = True) -> Problem:
    return Problem(M=random_symmetric(rng, n, psd=psd) + (0.1 * np.eye(n) if psd else 0.0), lin=rng.standard_normal(n), gamma=gamma)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def lsr_problem():
    """p=50, n=10 least-squares instance with card(x_true) around 4."""
    return generate_lsr_instance(50, 10, 4, seed=3).to_problem(gamma=1.0)


@pytest.fixture
def tiny_problem():
    """n=3, M=I, lin=(-2, -0.2, 0), gamma=0.5; global optimum x=(1, 0, 0), f*=-0.5."""
    return Problem(M=np.eye(3), lin=np.array([-2.0, -0.2, 0.0]), gamma=0.5)
