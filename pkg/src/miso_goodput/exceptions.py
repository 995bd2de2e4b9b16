"""Exception types raised across the package."""


class GoodputError(Exception):
    """Base class for all package errors."""


class InvalidInputError(GoodputError, ValueError):
    pass


class DegenerateDistributionError(GoodputError, ValueError):
    """The quadratic form has (numerically) zero variance."""


class SingularCovarianceError(GoodputError, ValueError):
    pass


class IllConditionedChannelError(GoodputError, ValueError):
    pass


class InfeasibleTargetError(GoodputError, ValueError):
    """The SINR target cannot be met with positive power loads."""


class ConfigError(GoodputError, ValueError):
    pass
