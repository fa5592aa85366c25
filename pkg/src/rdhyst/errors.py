"""Exception types shared across the package."""


class RdhystError(Exception):
    """Base class for all package-specific errors."""


class ParseError(RdhystError, ValueError):
    """Syntax or identifier error in an expression or config file.

    ``offset`` is the byte offset of the offending token in the source
    string (or None for file-level errors carrying ``filename``/``line``).
    """

    def __init__(self, message, offset=None, filename=None, line=None):
        super().__init__(message)
        self.offset = offset
        self.filename = filename
        self.line = line

    def __str__(self):
        msg = super().__str__()
        if self.filename is not None and self.line is not None:
            return f"{self.filename}:{self.line}: {msg}"
        if self.offset is not None:
            return f"{msg} (at offset {self.offset})"
        return msg


class EvaluationError(RdhystError, ValueError):
    """Numeric evaluation failed (division by zero, log of non-positive, ...)."""


class ModelError(RdhystError, ValueError):
    """Inconsistent model definition (threshold disjointness violated,
    bad dimensions, parameter-ordering violation, ...)."""


class DomainError(RdhystError, ValueError):
    """A value left the admissible domain (branch evaluated outside its
    domain, interpolation point outside [0, 1], ...)."""


class InitializationError(ModelError):
    """Initial data violates the requirements for the hysteresis to be
    defined at t = 0 (two-plateau configuration consistency)."""


class TransversalityError(RdhystError, RuntimeError):
    """Root structure of the switching function broke down (more than one
    root where a unique one is required)."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class PicardConvergenceError(RdhystError, RuntimeError):
    """Fixed-point iteration did not reach the tolerance."""

    def __init__(self, message, residuals=()):
        super().__init__(message)
        self.residuals = list(residuals)


class ScenarioError(RdhystError, ValueError):
    """Bad scenario/model file (missing key, malformed value, missing file)."""
