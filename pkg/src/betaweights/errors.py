"""Exception types shared across the package."""


class BetaWeightsError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(BetaWeightsError, ValueError):
    """Structurally invalid argument: wrong shape, empty input, bad range."""


class SupportError(BetaWeightsError, ValueError):
    """Parameters outside the model support (a beta shape would be non-positive)."""


class InitializationError(BetaWeightsError, RuntimeError):
    """The sampler could not construct a valid starting state."""


class InfeasibleTruthError(BetaWeightsError, RuntimeError):
    """Synthetic generation rejected almost every draw for the given truth."""


class ParseError(BetaWeightsError, ValueError):
    """A cell or value in an input file could not be parsed."""


class SchemaError(BetaWeightsError, ValueError):
    """An input file is missing required columns or has an inconsistent layout."""
