"""Exception taxonomy shared across the package.

Each class maps to a process exit code so the command line interface can
translate failures uniformly: configuration problems exit 2, data problems
exit 3, sampling problems exit 4.
"""

from __future__ import annotations


class JointGibbsError(Exception):
    """Base class for all package-raised errors."""

    exit_code = 1


class ConfigError(JointGibbsError):
    """Invalid user configuration: formulas, options, hyperparameters, inits."""

    exit_code = 2


class FormulaError(ConfigError):
    """Malformed model formula; carries the byte offset of the problem."""

    def __init__(self, message: str, position: int | None = None):
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class DataError(JointGibbsError):
    """Problems with the input data: parsing, typing, missingness structure."""

    exit_code = 3


class SamplerError(JointGibbsError):
    """Numerical failures inside the MCMC engine."""

    exit_code = 4
