"""Ensemble quantities derived from a fragmentation kernel.

Every quantity has two routes: an exhaustive sum over the enumerated
configuration domain, and a closed form where the kernel family admits
one. ``method="auto"`` picks the closed form; ``"enumerate"`` forces the
exhaustive sum. Sums are carried out in exact arithmetic (``int`` /
``Fraction``, with float weights converted exactly) and rounded once.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Hashable, Sequence, Union

from .combinatorics import (
    BicomponentConfiguration,
    _count_1c,
    binomial,
    count_configs_2c,
    distribution_of,
    iter_configs_1c,
    iter_configs_2c,
)
from .errors import NumericalError
from .kernels import Family, KernelSpec, Number, raw_1c, raw_2c

Size = Union[int, tuple[int, int]]

_ONE_COMPONENT = {"one-component", "1c", "one_component"}
_BICOMPONENT = {"bicomponent", "2c"}


def _exact(x: Number) -> int | Fraction:
    return Fraction(x) if isinstance(x, float) else x


def _public(x: int | Fraction) -> int | float:
    """Exact integers stay integers; everything else becomes a float."""
    if isinstance(x, Fraction):
        return x.numerator if x.denominator == 1 else float(x)
    return x


def _with_n(spec: KernelSpec, n: int | None) -> KernelSpec:
    if n is None or n == spec.n:
        return spec
    return dataclasses.replace(spec, n=n)


def _check_method(method: str) -> None:
    if method not in ("auto", "closed", "enumerate"):
        raise ValueError(f"unknown method {method!r}")


@dataclass
class MeanFragmentTable:
    """Mean number of fragments of each size per breakup of ``parent``."""

    parent: Size
    n: int
    entries: dict

    def total(self) -> float:
        return sum(self.entries.values())

    def mass(self) -> float | tuple[float, float]:
        if isinstance(self.parent, tuple):
            return (
                sum(u[0] * b for u, b in self.entries.items()),
                sum(u[1] * b for u, b in self.entries.items()),
            )
        return sum(i * b for i, b in self.entries.items())

    def __getitem__(self, size: Size) -> float:
        return self.entries.get(size, 0.0)

    def __len__(self) -> int:
        return len(self.entries)


# -- one component -----------------------------------------------------------


def _rate_1c(spec: KernelSpec, v: int, method: str, cap: int | None) -> int | Fraction:
    n = spec.n
    if v < n:
        return 0
    fam = spec.family
    if method != "enumerate":
        if fam is Family.RANDOM:
            return _count_1c(v, n)
        if fam is Family.PARTIALLY_RANDOM:
            return _exact(spec.kappa_of(v)) * _count_1c(v, n)
        return _exact(spec.kappa_of(v)) * _omega_1c(spec.weights, v, n)
    return sum((_exact(raw_1c(spec, c)) for c in iter_configs_1c(v, n, cap)), 0)


def breakage_rate_1c(
    spec: KernelSpec, v: int, n: int | None = None, method: str = "auto", cap: int | None = None
) -> int | float:
    """Total fragmentation rate of mass ``v``: the kernel summed over all configurations.

    Returns an exact ``int`` when the rate is integral (random kernels).
    """
    _check_method(method)
    if v < 1:
        raise ValueError(f"parent mass must be >= 1, got {v}")
    spec = _with_n(spec, n)
    if spec.bicomponent:
        raise ValueError("use breakage_rate_2c for bicomponent kernels")
    return _public(_rate_1c(spec, v, method, cap))


def config_probability_1c(
    spec: KernelSpec, config: Sequence[int], exact: bool = False, method: str = "auto"
) -> float | Fraction:
    """Probability that a breakup of ``sum(config)`` yields exactly ``config``.

    With ``exact=True`` the result is a ``Fraction`` (float parameters are
    converted exactly).
    """
    config = tuple(config)
    spec = _with_n(spec, len(config))
    total = _rate_1c(spec, sum(config), method, None)
    if total == 0:
        raise NumericalError(f"zero total rate for parent {sum(config)}; probability undefined")
    p = Fraction(_exact(raw_1c(spec, config))) / Fraction(total)
    return p if exact else float(p)


WeightFn = Callable[[Size], Number]


@lru_cache(maxsize=None)
def _omega_1c(weights: Hashable | None, v: int, n: int) -> int | Fraction:
    """Product-weight partition function by first-fragment recursion."""
    w = (lambda i: 1) if weights is None else weights
    if n == 0:
        return 1 if v == 0 else 0
    if v < n:
        return 0
    if n == 1:
        return _exact(w(v))
    return sum((_exact(w(i)) * _omega_1c(weights, v - i, n - 1) for i in range(1, v - n + 2)), 0)


def _weight_product(w: WeightFn, sizes) -> int | Fraction:
    out: int | Fraction = 1
    for size, count in distribution_of(sizes).items():
        out *= _exact(w(size)) ** count
    return out


def partition_function(
    weights: WeightFn | None,
    v: int | tuple[int, int],
    n: int,
    kind: str = "one-component",
    method: str = "enumerate",
    cap: int | None = None,
) -> int | float:
    """Sum of ``W(b) = prod w**b`` over the configuration domain.

    For ``kind="bicomponent"``, ``v`` is ``(vA, vB)``, ``weights`` is called
    with ``(alpha, beta)`` and the sum runs over every component-ordered
    manifestation. ``method="recursive"`` (one component only) uses the
    first-fragment recursion instead of enumeration. ``weights=None`` means
    ``w == 1``.
    """
    w = (lambda size: 1) if weights is None else weights
    if kind in _ONE_COMPONENT:
        if method == "recursive":
            if weights is not None and not isinstance(weights, Hashable):
                raise TypeError("recursive method needs hashable weights")
            total = _omega_1c(weights, v, n) if v >= 1 else 0
        elif method == "enumerate":
            total = sum((_weight_product(w, c) for c in iter_configs_1c(v, n, cap)), 0)
        else:
            raise ValueError(f"unknown method {method!r}")
    elif kind in _BICOMPONENT:
        if method != "enumerate":
            raise ValueError("bicomponent partition functions are computed by enumeration only")
        vA, vB = v
        total = sum(
            (c.multiplicity * _weight_product(w, c.fragments) for c in iter_configs_2c(vA, vB, n, cap)), 0
        )
    else:
        raise ValueError(f"unknown kind {kind!r}")
    if total <= 0:
        raise ValueError(f"empty configuration domain for v={v}, n={n}")
    return _public(total)


def mean_fragments_1c(
    spec: KernelSpec, v: int, n: int | None = None, method: str = "auto", cap: int | None = None
) -> MeanFragmentTable:
    """Mean fragment counts over sizes ``1 .. v-n+1`` per breakup of mass ``v``.

    Returns an empty table when ``v < n`` (the parent cannot break).
    """
    _check_method(method)
    spec = _with_n(spec, n)
    n = spec.n
    if spec.bicomponent:
        raise ValueError("use mean_fragments_2c for bicomponent kernels")
    if v < n:
        return MeanFragmentTable(v, n, {})
    sizes = range(1, v - n + 2)
    if method != "enumerate":
        if spec.family in (Family.RANDOM, Family.PARTIALLY_RANDOM):
            denom = _count_1c(v, n)
            # int / int is correctly rounded, same as float(Fraction(...))
            entries = {i: n * _count_1c(v - i, n - 1) / denom for i in sizes}
        else:
            weights = spec.weights
            denom = Fraction(_omega_1c(weights, v, n))
            entries = {
                i: float(n * _exact(spec.weight_of(i)) * _omega_1c(weights, v - i, n - 1) / denom)
                for i in sizes
            }
        return MeanFragmentTable(v, n, entries)

    acc: dict[int, int | Fraction] = {i: 0 for i in sizes}
    total: int | Fraction = 0
    for config in iter_configs_1c(v, n, cap):
        f = _exact(raw_1c(spec, config))
        total += f
        for size, count in distribution_of(config).items():
            acc[size] += count * f
    if total == 0:
        raise NumericalError(f"zero total rate for parent {v}")
    return MeanFragmentTable(v, n, {i: float(Fraction(acc[i]) / total) for i in sizes})


# -- two components ----------------------------------------------------------


def _rate_2c(spec: KernelSpec, vA: int, vB: int, method: str, cap: int | None) -> int | Fraction:
    n = spec.n
    if vA + vB < n:
        return 0
    fam = spec.family
    if method != "enumerate":
        if fam is Family.BICOMPONENT_RANDOM:
            return count_configs_2c(vA, vB, n)
        if fam is Family.BICOMPONENT_PARTIALLY_RANDOM:
            return _exact(spec.kappa_of(vA + vB)) * count_configs_2c(vA, vB, n)
        return _count_1c(vA, n) * _count_1c(vB, n)
    return sum((c.multiplicity * _exact(raw_2c(spec, c)) for c in iter_configs_2c(vA, vB, n, cap)), 0)


def _check_2c(spec: KernelSpec, vA: int, vB: int) -> None:
    if not spec.bicomponent:
        raise ValueError(f"{spec.family.value} is a one-component kernel")
    if vA < 0 or vB < 0 or vA + vB < 1:
        raise ValueError(f"invalid bicomponent parent ({vA}, {vB})")


def breakage_rate_2c(
    spec: KernelSpec, vA: int, vB: int, n: int | None = None, method: str = "auto", cap: int | None = None
) -> int | float:
    """Total fragmentation rate of the bicomponent parent ``(vA, vB)``.

    The kernel is summed over every component-ordered manifestation, i.e.
    each composition-level configuration is weighted by its multiplicity.
    """
    _check_method(method)
    spec = _with_n(spec, n)
    _check_2c(spec, vA, vB)
    return _public(_rate_2c(spec, vA, vB, method, cap))


def config_probability_2c(
    spec: KernelSpec, config: BicomponentConfiguration | Sequence[Sequence[int]], exact: bool = False
) -> float | Fraction:
    """Probability of one component-ordered manifestation of ``config``.

    The probability of the composition-level configuration is this value
    times ``config.multiplicity``.
    """
    if not isinstance(config, BicomponentConfiguration):
        config = BicomponentConfiguration.from_fragments(config)
    spec = _with_n(spec, len(config))
    vA, vB = config.parent
    _check_2c(spec, vA, vB)
    total = _rate_2c(spec, vA, vB, "auto", None)
    if total == 0:
        raise NumericalError(f"zero total rate for parent {(vA, vB)}; probability undefined")
    p = Fraction(_exact(raw_2c(spec, config))) / Fraction(total)
    return p if exact else float(p)


def _sizes_2c(vA: int, vB: int, n: int) -> list[tuple[int, int]]:
    umax = vA + vB - n + 1
    return [(a, b) for a in range(vA + 1) for b in range(vB + 1) if 1 <= a + b <= umax]


def mean_fragments_2c(
    spec: KernelSpec, vA: int, vB: int, n: int | None = None, method: str = "auto", cap: int | None = None
) -> MeanFragmentTable:
    """Mean fragment counts ``b[(uA, uB)]`` per breakup of ``(vA, vB)``.

    Keys cover every feasible ``(uA, uB)`` with ``1 <= uA+uB <= vA+vB-n+1``;
    the table is empty when the parent lies outside the kernel's support.
    """
    _check_method(method)
    spec = _with_n(spec, n)
    n = spec.n
    _check_2c(spec, vA, vB)
    parent = (vA, vB)
    if _rate_2c(spec, vA, vB, "auto", None) == 0:
        return MeanFragmentTable(parent, n, {})
    sizes = _sizes_2c(vA, vB, n)
    v = vA + vB

    if method != "enumerate":
        entries = {}
        if spec.family is Family.BICOMPONENT_INDEPENDENT:
            denom = _count_1c(vA, n) * _count_1c(vB, n)
            ca = [_count_1c(vA - a, n - 1) for a in range(vA + 1)]
            cb = [_count_1c(vB - b, n - 1) for b in range(vB + 1)]
            for a, b in sizes:
                entries[(a, b)] = (n * ca[a] * cb[b] if a and b else 0) / denom
        else:
            # hypergeometric split of the one-component mean over compositions
            denom = _count_1c(v, n)
            ca = [binomial(vA, a) for a in range(vA + 1)]
            cb = [binomial(vB, b) for b in range(vB + 1)]
            cu = [n * _count_1c(v - u, n - 1) for u in range(v + 1)]
            du = [denom * binomial(v, u) for u in range(v + 1)]
            for a, b in sizes:
                entries[(a, b)] = cu[a + b] * ca[a] * cb[b] / du[a + b]
        return MeanFragmentTable(parent, n, entries)

    acc: dict[tuple[int, int], int | Fraction] = {s: 0 for s in sizes}
    total: int | Fraction = 0
    for config in iter_configs_2c(vA, vB, n, cap):
        f = config.multiplicity * _exact(raw_2c(spec, config))
        if f == 0:
            continue
        total += f
        for size, count in distribution_of(config).items():
            acc[size] += count * f
    return MeanFragmentTable(parent, n, {s: float(Fraction(acc[s]) / total) for s in sizes})
