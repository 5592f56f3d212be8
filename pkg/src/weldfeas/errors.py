"""Exception types shared across the package."""


class WeldFeasError(Exception):
    """Base class for all package errors."""


class InvalidArgument(WeldFeasError, ValueError):
    pass


class GeometryError(WeldFeasError, ValueError):
    """Seam or scene geometry that cannot be used (gaps, zero-length segments...)."""


class NoSolution(WeldFeasError):
    pass


class NotApplicable(WeldFeasError):
    """Criterion requested on a trajectory that fails for an unrelated reason."""


class UndefinedRatio(WeldFeasError, ZeroDivisionError):
    pass


class ConfigError(WeldFeasError):
    pass


class DataError(WeldFeasError):
    pass
