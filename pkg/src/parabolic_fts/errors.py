"""Exception hierarchy shared by the numerical modules and the CLI."""


class FtsError(Exception):
    """Base class for every error raised by this package."""


class DomainError(FtsError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class UnsupportedRegimeError(FtsError, ValueError):
    """The requested parameters are valid but not supported (e.g. lambda + c <= 0)."""


class DivergenceError(FtsError, ValueError):
    """A series or schedule diverges for the given exponent (p <= 1)."""


class HorizonError(FtsError, ValueError):
    """A time at or beyond the schedule horizon T0 was requested."""


class ShapeError(FtsError, ValueError):
    """Fields and grids (or kernels) have incompatible shapes."""


class ConfigError(FtsError, ValueError):
    """Invalid experiment configuration (unknown key, bad range, missing key)."""


class NumericalError(FtsError, ArithmeticError):
    """A solver failed or the state became non-finite."""
