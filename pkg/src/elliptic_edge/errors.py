"""Exception hierarchy shared by every module."""


class EllipticEdgeError(Exception):
    """Base class for all package errors."""


class DomainError(EllipticEdgeError, ValueError):
    """Input lies outside the set where a formula or transform is defined."""


class RangeError(EllipticEdgeError, ValueError):
    """Input lies outside the range where an evaluator guarantees accuracy."""


class ConfigError(EllipticEdgeError, ValueError):
    """Invalid ensemble or experiment configuration."""


class PairingError(EllipticEdgeError):
    """Non-real eigenvalues of a real matrix failed to pair with their conjugates."""


class DegenerateSpectrumError(EllipticEdgeError):
    """Two eigenvalues are closer than the separation floor."""


class DecompositionError(EllipticEdgeError):
    """An eigendecomposition failed or produced non-finite output."""


class InsufficientSamplesError(EllipticEdgeError):
    """An experiment retained too few eigenvalues to form statistics."""

    def __init__(self, message, retained=0, total=0):
        super().__init__(message)
        self.retained = retained
        self.total = total

    def __reduce__(self):
        return (type(self), (str(self), self.retained, self.total))


class WorkerError(EllipticEdgeError):
    """A sampling worker failed; carries the stream index for replay."""

    def __init__(self, message, stream_index):
        super().__init__(message)
        self.stream_index = stream_index

    def __reduce__(self):
        return (type(self), (str(self), self.stream_index))
