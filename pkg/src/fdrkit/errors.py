"""Exception hierarchy shared across the package."""


class FdrkitError(Exception):
    """Base class for all package-specific errors."""


class SchemaError(FdrkitError):
    """A required column is missing or the column layout is inconsistent."""


class TableParseError(FdrkitError):
    """A cell could not be parsed; message carries row/column location."""


class TableValidationError(FdrkitError):
    """A parsed table violates a structural invariant (ids, labels, finiteness)."""


class InsufficientDataError(FdrkitError):
    """Too few rows for the requested operation."""


class DomainError(FdrkitError, ValueError):
    """An argument lies outside its mathematical domain."""


class ShapeError(FdrkitError, ValueError):
    """Array dimensions are inconsistent with the model or each other."""


class NumericError(FdrkitError):
    """A computation produced a non-finite value."""


class DegenerateInputError(FdrkitError):
    """Inputs make the requested quantity undefined (e.g. 0/0 likelihood)."""


class TrainingError(FdrkitError):
    """Optimization diverged; message carries epoch/batch context."""
