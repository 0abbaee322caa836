"""Exception hierarchy shared by all mlab modules."""


class MlabError(Exception):
    """Base class for every error raised by mlab."""


class DomainError(MlabError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigurationError(MlabError, ValueError):
    """A numerical configuration cannot deliver the requested accuracy."""


class ConstructionError(MlabError):
    """A domain or profile could not be constructed from the given data."""


class NumericalError(MlabError, ArithmeticError):
    """An iterative method failed or a matrix lost definiteness."""


class PreconditionError(MlabError, ValueError):
    """A hypothesis required by an estimate is violated."""


class FitError(MlabError):
    """A regression problem is degenerate."""
