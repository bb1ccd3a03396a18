"""Exception hierarchy shared across the package."""


class SyndatumError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(SyndatumError):
    pass


class InvalidLabel(SyndatumError):
    pass


class NonFiniteValue(SyndatumError):
    pass


class InvalidVariance(SyndatumError):
    pass


class SupportMismatch(SyndatumError):
    pass


class RejectionBudgetExceeded(SyndatumError):
    pass


class InvalidGrid(SyndatumError):
    pass


class InfiniteDivergence(SyndatumError):
    pass


class InvalidD(SyndatumError):
    pass


class SingularDesign(SyndatumError):
    pass


class NonConvergence(SyndatumError):
    pass


class TaskMismatch(SyndatumError):
    pass


class EmptyOriginal(SyndatumError):
    pass


class UnsupportedQuadrature(SyndatumError):
    pass


class Indeterminate(SyndatumError):
    """Model comparison verdict falls inside the statistical dead band."""


class UnknownBuiltin(SyndatumError):
    pass


class ConfigError(SyndatumError):
    pass
