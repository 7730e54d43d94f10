class HybridBFError(Exception):
    pass


class ConfigurationError(HybridBFError, ValueError):
    """Inconsistent shapes, counts or references between simulation inputs."""


class ParameterError(HybridBFError, ValueError):
    pass


class FramingError(HybridBFError, ValueError):
    """Payload does not fit the resource grid."""


class DesignError(HybridBFError):
    """A filter specification could not be met within the tap budget."""

    def __init__(self, message, margins=None):
        super().__init__(message)
        self.margins = margins or {}


class SyncFailure(HybridBFError):
    """PSS correlation peak is not distinct enough to trust the timing."""

    def __init__(self, message, peak_ratio=float("nan"), offset=None):
        super().__init__(message)
        self.peak_ratio = peak_ratio
        self.offset = offset
