"""Exception types raised across the package."""


class LeanRegError(Exception):
    """Base class for all package errors."""


class InvalidSample(LeanRegError, ValueError):
    pass


class SingularGram(LeanRegError, ValueError):
    pass


class DegenerateLeaveOneOut(LeanRegError, ValueError):
    def __init__(self, index: int, denominator: float):
        self.index = index
        self.denominator = denominator
        super().__init__(
            f"leave-one-out Gram is singular at row {index} "
            f"(1 - h_i = {denominator:.3e})"
        )


class ZeroContrast(LeanRegError, ValueError):
    pass


class DomainError(LeanRegError, ValueError):
    pass


class UnknownPopulation(LeanRegError, ValueError):
    pass


class BatchTooSmall(LeanRegError, ValueError):
    def __init__(self, n_batches: int, n: int, d: int):
        self.n_batches = n_batches
        self.n = n
        self.d = d
        super().__init__(
            f"floor(n / B) = {n // n_batches} must exceed d = {d} "
            f"(B = {n_batches}, n = {n})"
        )


class BootstrapDegenerate(LeanRegError, RuntimeError):
    pass


class BootstrapDegenerateWarning(UserWarning):
    """All bootstrap replicates coincide; the interval collapses to a point."""


class EmptyInput(LeanRegError, ValueError):
    pass


class NotSymmetric(LeanRegError, ValueError):
    pass


class ConfigError(LeanRegError, ValueError):
    pass


class DataError(LeanRegError, ValueError):
    """Malformed input file; the message names the offending row."""
