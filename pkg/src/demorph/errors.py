"""Exception types shared across the toolkit."""


class DemorphError(Exception):
    """Base class for all toolkit errors."""


class IncompatibleLandmarksError(DemorphError):
    """Landmark sets cannot be combined (count mismatch, wrong layout)."""


class ParameterError(DemorphError):
    """A numeric parameter is outside its documented range."""


class DegenerateGeometryError(DemorphError):
    """Geometric input admits no valid construction (collinear, too few points)."""


class ShapeError(DemorphError):
    """Array dimensions do not match the operation's contract."""


class ConfigurationError(DemorphError):
    """Invalid run configuration (empty dataset, bad split, malformed config file)."""


class InsufficientDataError(DemorphError):
    """Not enough samples to carry out the requested computation."""


class TrainingDivergedError(DemorphError):
    """A loss became non-finite during training. Carries the last metrics."""

    def __init__(self, message, metrics=None):
        super().__init__(message)
        self.metrics = metrics
