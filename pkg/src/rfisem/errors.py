"""Exception hierarchy shared by every module."""


class RfiError(Exception):
    """Base class for all package errors."""


class ValidationError(RfiError, ValueError):
    """Malformed input: bad files, bad ids, inconsistent settings."""


class StructuralError(ValidationError):
    """Pedigree cannot be ordered (cycle) or model structure is not recursive."""


class DegenerateInputError(ValidationError):
    """Input has no information for the requested quantity (zero variance etc.)."""


class NumericalError(RfiError, ArithmeticError):
    """A linear system or covariance matrix failed a numerical check."""

    def __init__(self, message, iteration=None, block=None):
        context = []
        if iteration is not None:
            context.append(f"iteration {iteration}")
        if block is not None:
            context.append(f"block {block}")
        if context:
            message = f"{message} ({', '.join(context)})"
        super().__init__(message)
        self.iteration = iteration
        self.block = block


class RankDeficiencyError(NumericalError):
    """Cross-product matrix is singular within tolerance."""
