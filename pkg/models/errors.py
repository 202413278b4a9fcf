"""Exception hierarchy shared by the model modules and the CLI."""
from typing import Any, Optional, Tuple


class CoarseMedianError(Exception):
    """Base class for every error raised by the toolkit"""
    pass


class InputError(CoarseMedianError):
    """Exception raised when an input violates an operation's precondition"""
    pass


class CapExceededError(InputError):
    """Exception raised when a carrier is larger than the configured cap"""
    pass


class ConsistencyError(CoarseMedianError):
    """
    Exception raised when an internal consistency check fails.

    This usually means a non-median input slipped through, or a structural
    hypothesis did not hold on the given instance. The offending tuple is kept
    in ``witness`` so callers can print it.
    """
    def __init__(self, message: str, witness: Optional[Tuple[Any, ...]] = None):
        super().__init__(message)
        self.witness = witness


class APrioriBoundError(ConsistencyError):
    """Exception raised when measured edge images break the a-priori parallel-edge bound"""
    pass


class ApproximationError(CoarseMedianError):
    """Exception raised when the approximation pipeline cannot produce a covering report"""
    pass
