"""Fragmentation kernels for multinary, one- and two-component breakage."""

from .combinatorics import (
    DEFAULT_ENUMERATION_CAP,
    BicomponentConfiguration,
    binomial,
    component_multiplicity,
    count_configs_1c,
    count_configs_2c,
    distribution_of,
    enumerate_configs_1c,
    enumerate_configs_2c,
)
from .ensemble import (
    MeanFragmentTable,
    breakage_rate_1c,
    breakage_rate_2c,
    config_probability_1c,
    config_probability_2c,
    mean_fragments_1c,
    mean_fragments_2c,
    partition_function,
)
from .errors import ArithmeticOverflowError, BudgetExceededError, ConfigError, FragKernelError, NumericalError
from .kernels import Family, KernelSpec, PowerLaw, Tabulated, evaluate_1c, evaluate_2c

__version__ = "0.1.0"
