"""Exception types shared across the package."""


class FragKernelError(Exception):
    """Base class for all package errors."""


class ArithmeticOverflowError(FragKernelError, OverflowError):
    """An exact count does not fit the 128-bit integer range."""


class BudgetExceededError(FragKernelError, RuntimeError):
    """An enumeration would visit more configurations than the cap allows."""


class NumericalError(FragKernelError, ArithmeticError):
    """Non-finite values, instability, or an undefined quantity."""


class ConfigError(FragKernelError, ValueError):
    """Invalid run configuration or invalid arguments."""
