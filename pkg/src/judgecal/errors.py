"""Exception types shared across the estimation, simulation, and IO layers."""


class EstimationError(Exception):
    """Base class for recoverable estimation failures.

    The Monte Carlo engine records these per replicate instead of aborting,
    so every subclass should carry enough context to be useful in a log line.
    """


class EmptyTestSet(EstimationError):
    """An estimator that averages over the test set received zero test rows."""


class EmptyCalibrationSet(EstimationError):
    """An estimator that needs paired labels received zero calibration rows."""


class DegenerateCalibrationClass(EstimationError):
    """A human-label class required for a plug-in rate has no observations."""

    def __init__(self, label_class: int, message: str | None = None):
        self.label_class = label_class
        super().__init__(message or f"calibration set has no observations with y={label_class}")


class NearSingularCorrection(EstimationError):
    """q0 + q1 - 1 is too close to zero for the misclassification inversion."""


class ConstantSurrogate(EstimationError):
    """The surrogate labels are constant on the calibration set."""


class DegenerateSurrogateCell(EstimationError):
    """A surrogate-label cell needed for the conditional means is empty."""

    def __init__(self, cell: int, message: str | None = None):
        self.cell = cell
        super().__init__(message or f"calibration set has no observations with y_hat={cell}")


class DegenerateSurrogateDistribution(EstimationError):
    """The surrogate marginal is degenerate (all labels identical)."""


class SingularInformation(EstimationError):
    """The Fisher information matrix could not be inverted."""


class UnseenLevel(EstimationError):
    """A categorical calibration model was asked to predict an unseen level."""

    def __init__(self, level, message: str | None = None):
        self.level = level
        super().__init__(message or f"level {level!r} was never observed in the calibration set")


class RankDeficient(EstimationError):
    """The regression design is too degenerate for the requested model family."""


class DegenerateSplit(EstimationError):
    """A random calibration/test split left one side empty twice in a row."""


class DataFormatError(Exception):
    """Base class for file ingestion failures."""


class MalformedRow(DataFormatError):
    """A row could not be parsed; carries the 1-based line number."""

    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class DomainError(MalformedRow):
    """A parsed value falls outside the declared domain."""
