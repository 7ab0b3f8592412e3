"""Exception hierarchy.

Every error carries an ``exit_code`` so the command line can map failures onto
its stable contract (1 usage, 2 data, 3 numeric).
"""


class FlowSegError(Exception):
    exit_code = 2


class UsageError(FlowSegError):
    exit_code = 1


class DataError(FlowSegError):
    exit_code = 2


class MagicMismatch(DataError):
    pass


class TruncatedFile(DataError):
    pass


class IoFailure(DataError):
    pass


class SpecInvalid(DataError):
    pass


class LayoutError(DataError):
    pass


class CountMismatch(DataError):
    pass


class CropTooLarge(DataError):
    pass


class MissingGroundTruth(DataError):
    pass


class LabelAccessError(DataError):
    """Raised when a target-domain label is read during unsupervised training."""


class ShapeError(FlowSegError, ValueError):
    exit_code = 2


class NumericError(FlowSegError):
    exit_code = 3


class NonFiniteGradient(NumericError):
    def __init__(self, name, step=None):
        where = f" at step {step}" if step is not None else ""
        super().__init__(f"non-finite gradient in parameter {name!r}{where}")
        self.name = name
        self.step = step


class NonFiniteValue(NumericError):
    pass


class EmptyInput(FlowSegError, ValueError):
    exit_code = 2


class CheckpointError(FlowSegError):
    exit_code = 2


class FingerprintMismatch(CheckpointError):
    pass


class CorruptCheckpoint(CheckpointError):
    pass


class MissingCheckpoint(CheckpointError):
    pass
