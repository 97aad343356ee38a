"""Exact counting and enumeration of ordered fragment configurations.

One-component configurations are ordered compositions of the parent mass
``v`` into ``n`` positive parts. Bicomponent configurations are ordered
sequences of ``(alpha, beta)`` buckets; each carries the number of
component-order permutations that realise it, so the permutation-level
domain never has to be materialised.

Counts are exact Python integers, checked against a signed 128-bit range.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterator, Sequence, Union

from .errors import ArithmeticOverflowError, BudgetExceededError

INT128_MAX = 2**127 - 1

#: Default cap on the number of configurations any single enumeration may visit.
DEFAULT_ENUMERATION_CAP = 10**7

Pair = tuple[int, int]


def _checked(value: int) -> int:
    if value > INT128_MAX:
        raise ArithmeticOverflowError(f"exact count {value} exceeds the 128-bit range")
    return value


def binomial(n: int, k: int) -> int:
    """Binomial coefficient C(n, k); zero when ``k > n``.

    Raises ArithmeticOverflowError if the result does not fit in 128 bits.
    """
    if n < 0 or k < 0:
        raise ValueError(f"binomial arguments must be non-negative, got ({n}, {k})")
    if k > n:
        return 0
    return _checked(math.comb(n, k))


def count_configs_1c(v: int, n: int) -> int:
    """Number of ordered splittings of mass ``v`` into ``n`` non-empty fragments."""
    if v < 1 or n < 1:
        raise ValueError(f"need v >= 1 and n >= 1, got v={v}, n={n}")
    return _count_1c(v, n)


def _count_1c(v: int, n: int) -> int:
    # Tolerates v == 0 (empty domain for n >= 1); used by closed forms.
    if n == 0:
        return 1 if v == 0 else 0
    if v < n:
        return 0
    return binomial(v - 1, n - 1)


def count_configs_2c(vA: int, vB: int, n: int) -> int:
    """Number of bicomponent configurations, counting component orderings."""
    if vA < 0 or vB < 0 or vA + vB < 1 or n < 1:
        raise ValueError(f"invalid bicomponent parent ({vA}, {vB}) or n={n}")
    return _checked(binomial(vA + vB, vA) * _count_1c(vA + vB, n))


@dataclass(frozen=True)
class BicomponentConfiguration:
    """Ordered buckets of ``(alpha, beta)`` units plus their ordering multiplicity."""

    fragments: tuple[Pair, ...]
    multiplicity: int

    @classmethod
    def from_fragments(cls, fragments: Sequence[Sequence[int]]) -> "BicomponentConfiguration":
        frags = tuple((int(a), int(b)) for a, b in fragments)
        for a, b in frags:
            if a < 0 or b < 0 or a + b < 1:
                raise ValueError(f"invalid bucket {(a, b)}")
        return cls(frags, _multiplicity(frags))

    @property
    def n(self) -> int:
        return len(self.fragments)

    @property
    def parent(self) -> Pair:
        return (sum(a for a, _ in self.fragments), sum(b for _, b in self.fragments))

    def __len__(self) -> int:
        return len(self.fragments)

    def __iter__(self) -> Iterator[Pair]:
        return iter(self.fragments)


FragmentConfiguration = tuple[int, ...]
Configuration = Union[FragmentConfiguration, BicomponentConfiguration]


def _multiplicity(fragments: Sequence[Pair]) -> int:
    m = 1
    for a, b in fragments:
        m *= math.comb(a + b, a)
    return _checked(m)


def component_multiplicity(config: BicomponentConfiguration | Sequence[Pair]) -> int:
    """Number of component-order permutations realising a bicomponent configuration."""
    frags = config.fragments if isinstance(config, BicomponentConfiguration) else config
    dist = Counter((int(a), int(b)) for a, b in frags)
    m = 1
    for (a, b), count in sorted(dist.items()):
        m *= binomial(a + b, a) ** count
    return _checked(m)


def distribution_of(config: Configuration | Sequence) -> dict:
    """Tally of fragment sizes (ints, or ``(alpha, beta)`` pairs), keys sorted."""
    frags = config.fragments if isinstance(config, BicomponentConfiguration) else config
    tally = Counter(tuple(f) if isinstance(f, (tuple, list)) else f for f in frags)
    return dict(sorted(tally.items()))


def _budget(count: int, cap: int | None) -> None:
    cap = DEFAULT_ENUMERATION_CAP if cap is None else cap
    if count > cap:
        raise BudgetExceededError(f"enumeration of {count} configurations exceeds the cap of {cap}")


def iter_configs_1c(v: int, n: int, cap: int | None = None) -> Iterator[FragmentConfiguration]:
    """Lazily yield the compositions of ``v`` into ``n`` positive parts, lexicographically."""
    if v < 1 or n < 1:
        raise ValueError(f"need v >= 1 and n >= 1, got v={v}, n={n}")
    _budget(_count_1c(v, n), cap)
    return _compositions(v, n)


def _compositions(v: int, n: int) -> Iterator[FragmentConfiguration]:
    if v < n:
        return
    # Sorted cut points map monotonically onto lexicographic compositions.
    for cuts in itertools.combinations(range(1, v), n - 1):
        prev = 0
        parts = []
        for c in cuts:
            parts.append(c - prev)
            prev = c
        parts.append(v - prev)
        yield tuple(parts)


def enumerate_configs_1c(v: int, n: int, cap: int | None = None) -> list[FragmentConfiguration]:
    """All ordered compositions of ``v`` into ``n`` positive parts, lexicographic."""
    return list(iter_configs_1c(v, n, cap))


def iter_configs_2c(vA: int, vB: int, n: int, cap: int | None = None) -> Iterator[BicomponentConfiguration]:
    """Lazily yield composition-level bicomponent configurations, lexicographically."""
    if vA < 0 or vB < 0 or vA + vB < 1 or n < 1:
        raise ValueError(f"invalid bicomponent parent ({vA}, {vB}) or n={n}")
    _budget(count_configs_2c(vA, vB, n), cap)
    return _bicompositions(vA, vB, n)


def _bicompositions(vA: int, vB: int, n: int) -> Iterator[BicomponentConfiguration]:
    if vA + vB < n:
        return

    def rec(ra: int, rb: int, k: int) -> Iterator[tuple[Pair, ...]]:
        if k == 1:
            yield ((ra, rb),)
            return
        for a in range(ra + 1):
            for b in range(rb + 1):
                # every remaining bucket needs at least one unit
                if a + b < 1 or (ra - a) + (rb - b) < k - 1:
                    continue
                for rest in rec(ra - a, rb - b, k - 1):
                    yield ((a, b),) + rest

    for frags in rec(vA, vB, n):
        yield BicomponentConfiguration(frags, _multiplicity(frags))


def enumerate_configs_2c(vA: int, vB: int, n: int, cap: int | None = None) -> list[BicomponentConfiguration]:
    """All composition-level bicomponent configurations of ``(vA, vB)`` into ``n`` buckets."""
    return list(iter_configs_2c(vA, vB, n, cap))
