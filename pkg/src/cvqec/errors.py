"""Exception types raised across the package."""


class CvqecError(Exception):
    pass


class InvalidDimensionError(CvqecError, ValueError):
    pass


class InvalidParameterError(CvqecError, ValueError):
    pass


class ValidationError(CvqecError, ValueError):
    pass


class TruncationLeakageError(CvqecError, ValueError):
    """Raised when a truncated operator would lose too much norm at the cutoff."""

    def __init__(self, message, leakage):
        super().__init__(message)
        self.leakage = leakage


class UnphysicalOutputError(CvqecError, ValueError):
    pass


class DegenerateHeraldError(CvqecError, RuntimeError):
    pass


class ResourceError(CvqecError, MemoryError):
    pass


class GridTooCoarseError(CvqecError, ValueError):
    def __init__(self, message, defect):
        super().__init__(message)
        self.defect = defect


class OutOfModelError(CvqecError, ValueError):
    pass


class DomainError(CvqecError, ValueError):
    def __init__(self, message, interval):
        super().__init__(message)
        self.interval = interval
