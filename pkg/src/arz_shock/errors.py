"""Exception hierarchy shared by every module of the toolkit."""


class ARZError(Exception):
    """Base class for all errors raised by arz_shock."""


class DomainError(ARZError, ValueError):
    """An argument lies outside the domain where a quantity is defined."""


class RegimeError(ARZError):
    """Characteristic speeds do not have the sign pattern of the requested regime."""

    def __init__(self, message, speeds=None):
        super().__init__(message)
        self.speeds = speeds


class DegenerateJumpError(ARZError):
    """Left and right densities coincide, so a jump speed is undefined."""


class DegenerateShockError(ARZError):
    """The shock strength collapsed below the admissible threshold."""


class InfeasibleEquilibriumError(ARZError):
    """No steady shock with the requested densities satisfies the speed signs."""


class SingularConfigurationError(ARZError):
    """A matrix needed by the construction is singular."""


class ClosureError(ARZError):
    """The interface root-finder failed to converge."""

    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = list(history)


class DegenerateCoefficientError(ARZError):
    """A shock coupling coefficient vanishes, so no gain interval is defined."""


class SynthesisError(ARZError):
    """Diagonal gain synthesis met a case that should be impossible."""


class RealizationError(ARZError):
    """The requested (K, b) pair cannot be realized by a boundary gain matrix."""


class ConstantsInfeasibleError(ARZError):
    """No Lyapunov constants satisfy the selection constraints."""


class StateBlowupError(ARZError):
    """A physical density became nonpositive during time stepping."""

    def __init__(self, message, last_state=None):
        super().__init__(message)
        self.last_state = last_state


class RegimeViolationError(ARZError):
    """A boundary characteristic reversed sign during time stepping."""

    def __init__(self, message, last_state=None):
        super().__init__(message)
        self.last_state = last_state


class ConfigError(ARZError):
    """A configuration file is missing keys or has invalid values."""
