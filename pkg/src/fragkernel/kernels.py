"""Fragmentation kernel families and their evaluation on configurations.

The kernel ``F`` is the rate at which a parent produces one particular
ordered configuration of fragments. All rates, probabilities and mean
fragment counts in :mod:`fragkernel.ensemble` are derived from it.

:func:`raw_1c` and :func:`raw_2c` return exact values (``int`` or
``Fraction``; float parameters are converted exactly), while
:func:`evaluate_1c` and :func:`evaluate_2c` round them to float once.
"""

from __future__ import annotations

import enum
import math
import numbers
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence, Union

from .combinatorics import BicomponentConfiguration, component_multiplicity
from .errors import NumericalError

Number = Union[int, Fraction, float]


class Family(str, enum.Enum):
    RANDOM = "random"
    PARTIALLY_RANDOM = "partially_random"
    WEIGHTED_FUNCTIONAL = "weighted_functional"
    BICOMPONENT_RANDOM = "bicomponent_random"
    BICOMPONENT_PARTIALLY_RANDOM = "bicomponent_partially_random"
    BICOMPONENT_INDEPENDENT = "bicomponent_independent"

    @property
    def bicomponent(self) -> bool:
        return self.value.startswith("bicomponent")


@dataclass(frozen=True)
class PowerLaw:
    """``prefactor * x**exponent``; integer exponents give exact values."""

    exponent: Number = 0
    prefactor: Number = 1

    def __call__(self, x: int) -> Number:
        if x < 1:
            raise ValueError(f"power law is defined for x >= 1, got {x}")
        e = self.exponent
        if isinstance(e, numbers.Integral):
            val = Fraction(x) ** int(e)
            val = val.numerator if val.denominator == 1 else val
        else:
            val = float(x) ** float(e)
        return _simplify(self.prefactor * val)


@dataclass(frozen=True)
class Tabulated:
    """Explicit lookup table ``x -> value``; missing keys are an error."""

    items: tuple[tuple[int, Number], ...]

    @classmethod
    def from_mapping(cls, table: Mapping[int, Number]) -> "Tabulated":
        return cls(tuple(sorted((int(k), v) for k, v in table.items())))

    def __call__(self, x: int) -> Number:
        for k, val in self.items:
            if k == x:
                return val
        raise KeyError(f"no table entry for {x}")


Modulation = Union[PowerLaw, Tabulated]


def _simplify(x: Number) -> Number:
    if isinstance(x, Fraction) and x.denominator == 1:
        return x.numerator
    return x


def _rational(x: Number) -> int | Fraction:
    # floats convert exactly, so products stay exact
    return Fraction(x) if isinstance(x, float) else x


def _check_positive(x: Number, what: str) -> Number:
    if isinstance(x, float) and not math.isfinite(x):
        raise NumericalError(f"{what} evaluated to a non-finite value {x}")
    if x <= 0:
        raise NumericalError(f"{what} must be positive, got {x}")
    return x


@dataclass(frozen=True)
class KernelSpec:
    """Immutable description of one kernel family with its parameters.

    ``kappa`` modulates the rate by total parent mass (defaults to 1) and
    ``weights`` are the per-size factors of the weighted functional family.
    """

    family: Family
    n: int = 2
    kappa: Modulation | None = None
    weights: Modulation | None = field(default=None)

    def __post_init__(self) -> None:
        object.__setattr__(self, "family", Family(self.family))
        if self.n < 2:
            raise ValueError(f"fragment count n must be >= 2, got {self.n}")
        if self.family is Family.WEIGHTED_FUNCTIONAL and self.weights is None:
            raise ValueError("weighted_functional kernel requires weights")

    @property
    def bicomponent(self) -> bool:
        return self.family.bicomponent

    def kappa_of(self, v: int) -> Number:
        if self.kappa is None:
            return 1
        return _check_positive(self.kappa(v), f"kappa({v})")

    def weight_of(self, i: int) -> Number:
        if self.weights is None:
            return 1
        return _check_positive(self.weights(i), f"w({i})")


def random_kernel(n: int = 2) -> KernelSpec:
    return KernelSpec(Family.RANDOM, n)


def partially_random_kernel(n: int, exponent: Number) -> KernelSpec:
    return KernelSpec(Family.PARTIALLY_RANDOM, n, kappa=PowerLaw(exponent))


def weighted_kernel(n: int, gamma: Number, kappa_exponent: Number | None = None) -> KernelSpec:
    kappa = None if kappa_exponent is None else PowerLaw(kappa_exponent)
    return KernelSpec(Family.WEIGHTED_FUNCTIONAL, n, kappa=kappa, weights=PowerLaw(gamma))


def product_weight(spec: KernelSpec, config: Sequence[int]) -> Number:
    """``W(b) = prod_i w_i**b_i``, multiplied in sorted size order."""
    w: Number = 1
    for size, count in sorted(Counter(config).items()):
        w = w * _rational(spec.weight_of(size)) ** count
    return _simplify(w)


def raw_1c(spec: KernelSpec, config: Sequence[int]) -> Number:
    """Exact kernel value on a one-component configuration."""
    if spec.bicomponent:
        raise ValueError(f"{spec.family.value} is a bicomponent kernel")
    if len(config) != spec.n:
        raise ValueError(f"configuration has {len(config)} fragments, kernel expects {spec.n}")
    if any(m < 1 for m in config):
        raise ValueError(f"fragment masses must be positive: {tuple(config)}")
    v = sum(config)
    if spec.family is Family.RANDOM:
        return 1
    if spec.family is Family.PARTIALLY_RANDOM:
        return spec.kappa_of(v)
    return _simplify(_rational(spec.kappa_of(v)) * product_weight(spec, config))


def raw_2c(spec: KernelSpec, config: BicomponentConfiguration | Sequence[Sequence[int]]) -> Number:
    """Exact kernel value on one manifestation of a bicomponent configuration."""
    if not spec.bicomponent:
        raise ValueError(f"{spec.family.value} is a one-component kernel")
    if not isinstance(config, BicomponentConfiguration):
        config = BicomponentConfiguration.from_fragments(config)
    if len(config) != spec.n:
        raise ValueError(f"configuration has {len(config)} fragments, kernel expects {spec.n}")
    if spec.family is Family.BICOMPONENT_RANDOM:
        return 1
    if spec.family is Family.BICOMPONENT_PARTIALLY_RANDOM:
        vA, vB = config.parent
        return spec.kappa_of(vA + vB)
    # Independent components: both split into n positive parts, so every
    # bucket of a reachable configuration holds both components.
    if any(a < 1 or b < 1 for a, b in config.fragments):
        return 0
    return Fraction(1, component_multiplicity(config))


def evaluate_1c(spec: KernelSpec, config: Sequence[int]) -> float:
    """Rate of producing the ordered configuration ``config`` (one component)."""
    return float(raw_1c(spec, config))


def evaluate_2c(spec: KernelSpec, config: BicomponentConfiguration | Sequence[Sequence[int]]) -> float:
    """Rate of producing one component-ordered manifestation of ``config``."""
    return float(raw_2c(spec, config))
