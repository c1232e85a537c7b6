"""Error taxonomy for the trainer.

Mirrors the consumer toolkit's split: ValidationError for inputs that violate
documented invariants, FormatError for files that are not what they claim,
TrainingError for runs that cannot continue (non-finite loss).
"""


class TrainerError(Exception):
    """Base class for all trainer errors."""


class ValidationError(TrainerError):
    """Input violates a documented precondition or invariant."""


class FormatError(TrainerError):
    """File exists but is not a valid instance of its format."""


class TrainingError(TrainerError):
    """Training cannot continue (diverged loss, corrupt state)."""
