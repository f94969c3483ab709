"""Quasi-stationary distribution of the Shiryaev diffusion dX = dt + X dB killed at A."""
from ._backend import BACKEND
from .qsd import (
    Eigenfunction,
    QsdModel,
    eigenfunction,
    family_pdf,
    general_model,
    master_equation_residual,
    normalizer,
    normalizer_unsimplified,
    principal_model,
    qsd_cdf,
    qsd_pdf,
    qsd_quantile,
    speed_measure,
)
from .sde import (
    KilledPathEnsemble,
    SimConfig,
    estimate_kill_rate,
    ks_distance,
    simulate,
)
from .spectrum import (
    Regime,
    SpectralPoint,
    critical_threshold,
    eigenvalue_curve,
    lambda_of_xi,
    principal_eigenvalue,
    xi_of_lambda,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Eigenfunction",
    "KilledPathEnsemble",
    "QsdModel",
    "Regime",
    "SimConfig",
    "SpectralPoint",
    "critical_threshold",
    "eigenfunction",
    "eigenvalue_curve",
    "estimate_kill_rate",
    "family_pdf",
    "general_model",
    "ks_distance",
    "lambda_of_xi",
    "master_equation_residual",
    "normalizer",
    "normalizer_unsimplified",
    "principal_eigenvalue",
    "principal_model",
    "qsd_cdf",
    "qsd_pdf",
    "qsd_quantile",
    "simulate",
    "speed_measure",
    "xi_of_lambda",
]
