"""Exception types shared across the toolkit."""


class LpskitError(Exception):
    """Base class for all lpskit errors."""


class ParseError(LpskitError):
    """A file or line could not be parsed."""


class ValidationError(LpskitError):
    """Parsed data violates an invariant (duplicate id, non-finite value, ...)."""


class UnknownPoint(LpskitError):
    """A message id or point id does not map to a known collection point."""


class UnknownGateway(LpskitError):
    """A gateway id is not present in the site plan."""


class EmptyTrain(LpskitError):
    """A train/test split left the training set empty."""


class EmptyDataset(LpskitError):
    """An operation that requires records received an empty dataset."""


class DomainError(LpskitError):
    """An argument is outside the mathematical domain of the operation."""


class NoConvergence(LpskitError):
    """An iterative search failed to bracket or reach a solution."""


class NonFiniteError(LpskitError):
    """An input or intermediate value is NaN or infinite."""


class NotPositiveDefinite(LpskitError):
    """A banded system is not positive definite within its band."""


class TooFewPoints(LpskitError):
    """Training data has fewer points than the model kind requires."""


class SolverFailure(LpskitError):
    """A fit could not produce a usable model."""


class VersionMismatch(LpskitError):
    """A model file carries an unsupported format version."""


class DimensionMismatch(LpskitError):
    """Gateway and distance counts disagree."""


class DegenerateGeometry(LpskitError):
    """Fewer than three distinct gateway positions were supplied."""


class InsufficientGateways(LpskitError):
    """Fewer than three usable gateway readings for a position fix."""


class MissingGateway(LpskitError):
    """No trained model is available for a gateway present in the data."""
