"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes, so every failure a user can trigger
should surface as one of them.
"""


class PlateRecError(Exception):
    category = "error"


class ShapeError(PlateRecError, ValueError):
    category = "shape"


class GenerationError(PlateRecError):
    category = "generation"


class RenderError(PlateRecError):
    category = "render"


class SplitError(PlateRecError, ValueError):
    category = "split"


class MetricError(PlateRecError, ValueError):
    category = "metric"


class NumericError(PlateRecError, ArithmeticError):
    category = "numeric"


class ConfigError(PlateRecError, ValueError):
    category = "usage"
