"""Exception types shared across the pipeline."""


class ButtonSimError(Exception):
    """Base class for all pipeline errors."""


class ParseError(ButtonSimError):
    """A file or payload could not be decoded into the expected structure."""


class ValidationError(ButtonSimError):
    """Structurally sound input that violates a documented invariant."""


class SyncError(ValidationError):
    """Sensor streams cannot be aligned (keyframe outside overlap, etc.)."""


class FitError(ButtonSimError):
    """Least-squares fit failed (rank deficiency, infeasible order range)."""


class DomainError(ButtonSimError):
    """Evaluation requested outside a curve's displacement domain."""


class FeatureError(ButtonSimError):
    """Vibration feature extraction failed (window too short, no crossings)."""


class DivergenceError(ButtonSimError):
    """Compensation loop stopped making progress.

    Carries the error trace accumulated so far in ``error_trace``.
    """

    def __init__(self, message, error_trace=None):
        super().__init__(message)
        self.error_trace = list(error_trace) if error_trace is not None else []
