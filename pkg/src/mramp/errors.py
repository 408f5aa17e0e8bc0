class ParameterError(ValueError):
    """An argument is outside its admissible range."""


class DimensionError(ValueError):
    """Array sizes do not agree with the operator or container."""


class UnsupportedError(ValueError):
    """The requested operation is not defined for this object kind."""


class UndefinedMetricError(ValueError):
    """A quality metric has no meaningful value for the given inputs."""


class BoundDivergesError(ValueError):
    """A noise-sensitivity bound is requested at or above the phase transition."""


class DivergenceError(RuntimeError):
    """An AMP run produced non-finite or exploding state."""

    def __init__(self, message, iteration):
        super().__init__(f"{message} (iteration {iteration})")
        self.iteration = iteration
