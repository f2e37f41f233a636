"""Risk-constrained LQR: exact solvers and model-free primal-dual learning."""

from .analytic import (
    PolicyEvaluation,
    RiskLagrangian,
    advantage,
    advantage_lower_bound,
    average_advantage,
    dual_value,
    evaluate,
    gradient,
    gradient_dominance_certificate,
    lagrangian_stationary_form,
    stationary_point,
    value_function,
)
from .errors import (
    ConfigError,
    DefinitenessError,
    DimensionError,
    DivergenceError,
    InstabilityError,
    NonConvergenceError,
    NumericalError,
    RiskLqrError,
    SearchFailure,
)
from .linalg import solve_dare, solve_discrete_lyapunov, spectral_radius
from .model import (
    Deterministic,
    Gaussian,
    GaussianMixture,
    LinearSystem,
    NoiseModel,
    NoiseStats,
    RiskSpec,
    estimate_noise_stats,
    uav_benchmark,
)
from .optimize import (
    IterateLog,
    PrimalDualConfig,
    RandomSearchConfig,
    dual_subgradient,
    primal_dual,
    random_search,
    zeroth_order_gradient,
)
from .oracle import OracleSample, RolloutConfig, rollout_cost
from .policy import Policy, closed_loop, is_stabilizing

__version__ = "0.1.0"

__all__ = [
    "PolicyEvaluation",
    "RiskLagrangian",
    "advantage",
    "advantage_lower_bound",
    "average_advantage",
    "dual_value",
    "evaluate",
    "gradient",
    "gradient_dominance_certificate",
    "lagrangian_stationary_form",
    "stationary_point",
    "value_function",
    "ConfigError",
    "DefinitenessError",
    "DimensionError",
    "DivergenceError",
    "InstabilityError",
    "NonConvergenceError",
    "NumericalError",
    "RiskLqrError",
    "SearchFailure",
    "solve_dare",
    "solve_discrete_lyapunov",
    "spectral_radius",
    "Deterministic",
    "Gaussian",
    "GaussianMixture",
    "LinearSystem",
    "NoiseModel",
    "NoiseStats",
    "RiskSpec",
    "estimate_noise_stats",
    "uav_benchmark",
    "IterateLog",
    "PrimalDualConfig",
    "RandomSearchConfig",
    "dual_subgradient",
    "primal_dual",
    "random_search",
    "zeroth_order_gradient",
    "OracleSample",
    "RolloutConfig",
    "rollout_cost",
    "Policy",
    "closed_loop",
    "is_stabilizing",
    "__version__",
]
