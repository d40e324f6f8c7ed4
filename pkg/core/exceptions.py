"""
Exception hierarchy shared by the services, the CLI and the HTTP routers
"""

from typing import Optional


class RetinexError(Exception):
    """Base class for every error raised by this package"""


class DimensionMismatchError(RetinexError, ValueError):
    """Two operands that must share a shape do not"""


class KernelExtentError(RetinexError, ValueError):
    """Difference kernel applied along an axis shorter than 3 pixels"""


class InvalidParameterError(RetinexError, ValueError):
    pass


class SolverDivergenceError(RetinexError):
    def __init__(self, stage: int, message: str):
        self.stage = stage
        super().__init__(f"stage {stage}: {message}")


class FinetuneDivergenceError(RetinexError):
    def __init__(self, iteration: int, message: str):
        self.iteration = iteration
        super().__init__(f"iteration {iteration}: {message}")


class ImageNotFoundError(RetinexError, FileNotFoundError):
    pass


class UnsupportedImageFormatError(RetinexError):
    pass


class CorruptImageError(RetinexError):
    pass


class ManifestError(RetinexError, ValueError):
    pass


class ConfigFileError(RetinexError, ValueError):
    """Run configuration file missing or not a JSON object"""


class PipelineError(RetinexError):
    """Failure inside enhance/benchmark, tagged with the phase that failed"""

    def __init__(self, phase: str, message: str, cause: Optional[BaseException] = None):
        self.phase = phase
        self.cause = cause
        super().__init__(f"{phase}: {message}")
