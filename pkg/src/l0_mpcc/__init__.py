"""ADMM solvers and KKT certification for l0-penalized quadratic programs."""

__version__ = "0.1.0"

from .admm import (  # noqa: E402
    AdmmOptions,
    AdmmState,
    PerturbedOptions,
    SolveTrace,
    check_lagrangian_descent,
    check_lyapunov_descent,
    decaying_schedule,
    epsilon_schedule,
    lyapunov_l,
    lyapunov_p,
    reported_objective,
    run_admm_cf,
    run_perturbed_admm,
)
from .certification import (  # noqa: E402
    KktReport,
    Multipliers,
    certify,
    first_order_kkt_residual,
    is_kkt_nondegenerate,
    kkt_residual_admm,
    recover_multipliers,
    second_order_check,
)
from .errors import L0MpccError  # noqa: E402
from .problem import (  # noqa: E402
    Problem,
    QuadraticTerm,
    SplitPoint,
    eval_objective,
    eval_relaxed_objective,
    recover_tight,
    split,
)
from .spectral import factorize  # noqa: E402

__all__ = [
    "__version__",
    "AdmmOptions",
    "AdmmState",
    "KktReport",
    "L0MpccError",
    "Multipliers",
    "PerturbedOptions",
    "Problem",
    "QuadraticTerm",
    "SolveTrace",
    "SplitPoint",
    "certify",
    "check_lagrangian_descent",
    "check_lyapunov_descent",
    "decaying_schedule",
    "epsilon_schedule",
    "eval_objective",
    "eval_relaxed_objective",
    "factorize",
    "first_order_kkt_residual",
    "is_kkt_nondegenerate",
    "kkt_residual_admm",
    "lyapunov_l",
    "lyapunov_p",
    "recover_multipliers",
    "recover_tight",
    "reported_objective",
    "run_admm_cf",
    "run_perturbed_admm",
    "second_order_check",
    "split",
]
