class OpfidError(Exception):
    """Base class for errors raised by the opfid services."""


class DimensionError(OpfidError, ValueError):
    """Matrix too large for the dense guard, or shapes that do not match."""


class ParityViolationError(OpfidError):
    def __init__(self, max_entry: float, index_pair: tuple, tolerance: float):
        self.max_entry = max_entry
        self.index_pair = index_pair
        self.tolerance = tolerance
        super().__init__(
            f"Cross-parity entry {max_entry:.3e} at {index_pair} exceeds tolerance {tolerance:.3e}"
        )


class EigensolverError(OpfidError, RuntimeError):
    def __init__(self, message: str, fingerprint: str):
        self.fingerprint = fingerprint
        super().__init__(f"{message} (matrix fingerprint {fingerprint})")


class UnfoldingError(OpfidError, ValueError):
    """Too few levels to unfold, or an ill-conditioned staircase fit."""


class NormalizationError(OpfidError, ValueError):
    """State vector that is not normalized."""


class EnsembleError(OpfidError, ValueError):
    """Monte Carlo request that cannot produce a standard error."""
