"""Exception hierarchy for krylovfb."""


class KrylovFBError(Exception):
    """Base class for all package errors."""


class ShapeError(KrylovFBError, ValueError):
    """Operand dimensions are inconsistent."""


class DomainError(KrylovFBError, ValueError):
    """Operand values lie outside the admissible domain (NaN/Inf, degree 0, ...)."""


class DependentPrefixError(KrylovFBError, ArithmeticError):
    """The initial vector does not generate a full Krylov sequence.

    Callers are expected to resample the initial vector.
    """


class ConditioningError(KrylovFBError, ArithmeticError):
    """A Krylov basis is too ill-conditioned to invert reliably."""


class VerificationError(KrylovFBError, AssertionError):
    """An independently recomputed annihilating polynomial disagrees with a claim."""


class GenerationError(KrylovFBError, RuntimeError):
    """Instance generation exhausted its retry budget."""


class ParseError(KrylovFBError, ValueError):
    """A serialized object could not be read.

    Attributes
    ----------
    line, column : int or None
        Location reported by the decoder, when known.
    field : str or None
        Dotted path of the offending field, when known.
    """

    def __init__(self, message, *, line=None, column=None, field=None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if column is not None:
            loc.append(f"column {column}")
        if field is not None:
            loc.append(f"field '{field}'")
        super().__init__(message + (f" ({', '.join(loc)})" if loc else ""))
        self.line = line
        self.column = column
        self.field = field
