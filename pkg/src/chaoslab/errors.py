"""Exception types shared across the package."""


class ChaoslabError(Exception):
    """Base class for package errors."""


class CapacityError(ChaoslabError):
    """A computation would exceed the supported problem size."""


class NonConvergenceError(ChaoslabError):
    """A numerical routine failed its internal convergence check."""


class HypothesisFailedError(ChaoslabError):
    """A theorem precondition (e.g. positive spin correlation) failed numerically."""
