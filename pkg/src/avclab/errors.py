"""Exception types shared across the package."""


class AvcError(Exception):
    """Base class for all package errors."""


class DimensionError(AvcError, ValueError):
    """Tensor or image shapes are inconsistent with the operation."""


class FormatError(AvcError, ValueError):
    """A file or signal is not in a supported format."""


class InputTooShortError(AvcError, ValueError):
    """An audio clip or spectrogram is too short to process."""


class AnnotationError(AvcError, ValueError):
    """A head annotation lies outside the image bounds."""


class SpecError(AvcError, ValueError):
    """A corruption or scene specification is invalid."""


class ContractError(AvcError, RuntimeError):
    """An API precondition was violated (e.g. backward on a non-scalar)."""


class TrainingDiverged(AvcError, RuntimeError):
    """Training hit a NaN loss; carries epoch/batch diagnostics."""

    def __init__(self, message, epoch=None, batch=None, grad_norms=None):
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch
        self.grad_norms = grad_norms or {}
