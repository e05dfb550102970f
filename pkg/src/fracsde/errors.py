"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Malformed or inconsistent problem / run configuration."""


class IllPosedNeutralTermError(ValueError):
    """The neutral coefficient is not in the domain required by the mild form."""


class UnsupportedRegimeError(ValueError):
    """An oracle was asked to handle a case it is not built for."""


class InapplicableCriterionError(ValueError):
    """A bound is used outside the parameter range where it is meaningful."""


class SingularExponentError(ValueError):
    """The stability display is singular (p = 2) and no limit convention was chosen."""


class NoRootError(ValueError):
    """The decay-root equation has no root in the admissible interval."""


class DegenerateDenominatorError(ZeroDivisionError):
    """A denominator in the N_epsilon formula vanishes."""


class FitDomainError(ValueError):
    """Log-linear fit requested on nonpositive data."""


class DivergenceError(RuntimeError):
    """Successive approximations failed to converge.

    Attributes
    ----------
    residual_history : list of float
    theta_exist : float or None
        Existence-criterion value for the problem, as a diagnostic.
    """

    def __init__(self, message, residual_history, theta_exist=None):
        super().__init__(message)
        self.residual_history = list(residual_history)
        self.theta_exist = theta_exist
