"""Exceptions raised by minwave."""


class MinwaveError(Exception):
    """Base class for all minwave errors."""


class ValidationError(MinwaveError):
    """Malformed input: shapes, symmetry, layouts or configuration."""


class PassivityError(MinwaveError):
    """A modulus fails the sign condition required for dissipation."""

    def __init__(self, tensor, region=None, min_eigenvalue=None):
        """Initialize with the offending tensor name and region."""
        self.tensor = tensor
        self.region = region
        self.min_eigenvalue = min_eigenvalue
        where = '' if region is None else " in region '{}'".format(region)
        super().__init__(
            "passivity violated by {}{} (min eigenvalue {})".format(
                tensor, where, min_eigenvalue))


class ConvergenceError(MinwaveError):
    """Iterative solve stopped before reaching its tolerance."""

    def __init__(self, message, best=None, report=None):
        """Keep the best iterate and its report for the caller."""
        super().__init__(message)
        self.best = best
        self.report = report


class SingularityError(MinwaveError):
    """A singular operator or evaluation point was met."""


class DefectiveBranchError(MinwaveError):
    """The per-direction eigenproblem has a Jordan block."""

    def __init__(self, direction):
        """Initialize with the offending direction."""
        self.direction = direction
        super().__init__("defective eigenproblem at direction {}".format(
            list(direction)))
