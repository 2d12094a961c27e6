"""Joint Bayesian regression with incomplete covariates.

Fits a user's analysis model together with covariate models for every
incompletely observed predictor in a single Metropolis-within-Gibbs run,
so imputation and analysis happen simultaneously instead of in separate
passes.
"""

from .errors import ConfigError, DataError, FormulaError, JointGibbsError, SamplerError

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DataError",
    "FormulaError",
    "JointGibbsError",
    "SamplerError",
    "__version__",
]
