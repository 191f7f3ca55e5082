class EcnnError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(EcnnError, ValueError):
    pass


class DataError(EcnnError, ValueError):
    pass


class NumericalError(EcnnError, ArithmeticError):
    pass
