"""Event-driven (direct-method) simulation of fragmentation.

Each replica is a multiset of cluster states with integer counts. Events
fire at total rate ``R = sum a(s) * count(s)``; the parent state is picked
with probability ``a(s) * count(s) / R`` and replaced by a configuration
drawn exactly from the kernel's configuration probabilities.

Random numbers come from numpy's Philox counter-based generator. Replica
``r`` of a run with seed ``seed`` uses
``Philox(SeedSequence(seed, spawn_key=(r,)))``, so replicas are independent
of each other and of the order in which they are executed.
"""

from __future__ import annotations

import bisect
import csv
import io
import json
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence, TextIO, Union

import numpy as np

from .combinatorics import BicomponentConfiguration, iter_configs_1c, iter_configs_2c
from .ensemble import breakage_rate_1c, breakage_rate_2c
from .errors import NumericalError
from .kernels import Family, KernelSpec, raw_1c, raw_2c

State = Union[int, tuple[int, int]]
Configuration = Union[tuple[int, ...], BicomponentConfiguration]

RNG_ALGORITHM = "numpy Philox4x64-10; replica r seeded by SeedSequence(seed, spawn_key=(r,))"


def replica_rng(seed: int, replica: int) -> np.random.Generator:
    """Independent generator for one replica of a seeded run."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(replica,))))


def _positive_composition(rng: np.random.Generator, v: int, n: int) -> list[int]:
    # stars and bars: n-1 distinct cut points among the v-1 gaps
    cuts = np.sort(rng.choice(v - 1, size=n - 1, replace=False)) + 1
    edges = [0, *cuts.tolist(), v]
    return [hi - lo for lo, hi in zip(edges[:-1], edges[1:])]


class ConfigurationSampler:
    """Exact sampler of fragment configurations for one kernel.

    Random-type kernels use direct uniform draws; other kernels fall back to
    inverse-CDF sampling over the enumerated domain, cached per parent.
    """

    def __init__(self, spec: KernelSpec, cap: int | None = None):
        self.spec = spec
        self.cap = cap
        self._cdf: dict = {}
        self._lock = threading.Lock()

    def _table(self, parent: State):
        with self._lock:
            hit = self._cdf.get(parent)
        if hit is not None:
            return hit
        spec = self.spec
        if spec.bicomponent:
            configs = list(iter_configs_2c(parent[0], parent[1], spec.n, self.cap))
            weights = [float(c.multiplicity * raw_2c(spec, c)) for c in configs]
        else:
            configs = list(iter_configs_1c(parent, spec.n, self.cap))
            weights = [float(raw_1c(spec, c)) for c in configs]
        cum = np.cumsum(weights).tolist()
        if not cum or cum[-1] <= 0:
            raise NumericalError(f"parent {parent} has no configurations in the kernel's support")
        with self._lock:
            self._cdf.setdefault(parent, (configs, cum))
            return self._cdf[parent]

    def sample(self, parent: State, rng: np.random.Generator) -> Configuration:
        spec, n = self.spec, self.spec.n
        fam = spec.family
        if fam in (Family.RANDOM, Family.PARTIALLY_RANDOM):
            if parent < n:
                raise NumericalError(f"parent {parent} cannot split into {n} fragments")
            return tuple(_positive_composition(rng, parent, n))
        if fam in (Family.BICOMPONENT_RANDOM, Family.BICOMPONENT_PARTIALLY_RANDOM):
            vA, vB = parent
            v = vA + vB
            if v < n:
                raise NumericalError(f"parent {parent} cannot split into {n} fragments")
            # uniform A/B labelling of the v units, then uniform cuts
            is_a = np.zeros(v, dtype=np.int64)
            is_a[rng.choice(v, size=vA, replace=False)] = 1
            sizes = _positive_composition(rng, v, n)
            frags, lo = [], 0
            for s in sizes:
                na = int(is_a[lo:lo + s].sum())
                frags.append((na, s - na))
                lo += s
            return BicomponentConfiguration.from_fragments(frags)
        if fam is Family.BICOMPONENT_INDEPENDENT:
            vA, vB = parent
            if vA < n or vB < n:
                raise NumericalError(f"parent {parent} is outside the independent kernel's support")
            parts_a = _positive_composition(rng, vA, n)
            parts_b = _positive_composition(rng, vB, n)
            return BicomponentConfiguration.from_fragments(list(zip(parts_a, parts_b)))
        configs, cum = self._table(parent)
        k = bisect.bisect_right(cum, rng.random() * cum[-1])
        return configs[min(k, len(configs) - 1)]


def sample_configuration(
    spec: KernelSpec,
    parent: State,
    n: int | None,
    rng: np.random.Generator,
    sampler: ConfigurationSampler | None = None,
) -> Configuration:
    """Draw one configuration of ``parent`` with the kernel's exact probabilities.

    Bicomponent draws are returned at composition level; their probability is
    the per-manifestation probability times the multiplicity.
    """
    if n is not None and n != spec.n:
        raise ValueError(f"n={n} does not match kernel n={spec.n}")
    sampler = sampler or ConfigurationSampler(spec)
    return sampler.sample(parent, rng)


@dataclass
class SimulationConfig:
    seed: int | None = None
    replicas: int = 1
    t_end: float = 1.0
    record_events: bool = False
    checkpoints: int = 10
    threads: int = 1
    volume: float = 1.0

    def __post_init__(self) -> None:
        if self.replicas < 1:
            raise ValueError("replicas must be >= 1")
        if not (self.t_end >= 0 and math.isfinite(self.t_end)):
            raise ValueError(f"t_end must be finite and >= 0, got {self.t_end}")
        if self.checkpoints < 1:
            raise ValueError("checkpoints must be >= 1")
        if self.volume <= 0:
            raise ValueError("volume must be positive")
        if self.seed is None:
            self.seed = int(np.random.SeedSequence().entropy)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_end, self.checkpoints + 1)


@dataclass(frozen=True)
class EventRecord:
    replica: int
    time: float
    parent: State
    fragments: tuple


@dataclass
class SimulationResult:
    """Per-replica particle counts at checkpoint times plus optional event log."""

    config: SimulationConfig
    spec: KernelSpec
    times: np.ndarray
    states: list
    counts: np.ndarray  # (replicas, checkpoints, states)
    events: list[EventRecord] = field(default_factory=list)
    n_events: np.ndarray | None = None

    @property
    def bicomponent(self) -> bool:
        return self.spec.bicomponent

    def concentrations(self) -> np.ndarray:
        return self.counts / self.config.volume

    def _mean_se(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        r = x.shape[0]
        mean = x.mean(axis=0)
        se = x.std(axis=0, ddof=1) / math.sqrt(r) if r > 1 else np.full_like(mean, np.nan)
        return mean, se

    def mean_concentrations(self) -> tuple[np.ndarray, np.ndarray]:
        """Ensemble mean and standard error, shape ``(checkpoints, states)``."""
        return self._mean_se(self.concentrations())

    def moment_samples(self) -> dict[str, np.ndarray]:
        c = self.concentrations()
        if self.bicomponent:
            va = np.array([s[0] for s in self.states], dtype=float)
            vb = np.array([s[1] for s in self.states], dtype=float)
            return {"M0": c.sum(axis=2), "M1A": c @ va, "M1B": c @ vb}
        v = np.array(self.states, dtype=float)
        return {"M0": c.sum(axis=2), "M1": c @ v, "M2": c @ (v * v)}

    def summary(self) -> dict:
        def clean(a):
            return [None if not math.isfinite(x) else float(x) for x in a]

        out_m = {}
        for name, samples in self.moment_samples().items():
            mean, se = self._mean_se(samples)
            out_m[name] = {"mean": clean(mean), "stderr": clean(se)}
        mean_c, se_c = self.mean_concentrations()
        out_c = {
            _state_str(s): {"mean": clean(mean_c[:, k]), "stderr": clean(se_c[:, k])}
            for k, s in enumerate(self.states)
        }
        return {
            "metadata": {
                "rng": RNG_ALGORITHM,
                "seed": self.config.seed,
                "replicas": self.config.replicas,
                "t_end": self.config.t_end,
                "volume": self.config.volume,
                "kernel": self.spec.family.value,
                "n": self.spec.n,
                "total_events": int(self.n_events.sum()) if self.n_events is not None else None,
            },
            "times": [float(t) for t in self.times],
            "moments": out_m,
            "concentrations": out_c,
        }


def _state_str(s: State) -> str:
    return f"{s[0]}.{s[1]}" if isinstance(s, tuple) else str(s)


def _fragments_str(frags) -> str:
    return "|".join(_state_str(f) for f in frags)


def _run_replica(
    r: int,
    initial: Mapping[State, int],
    spec: KernelSpec,
    sim: SimulationConfig,
    rate_of,
    sampler: ConfigurationSampler,
) -> tuple[list[dict], list[EventRecord], int]:
    rng = replica_rng(sim.seed, r)
    counts = {s: c for s, c in initial.items() if c > 0}
    checkpoints = sim.times
    snaps: list[dict] = []
    events: list[EventRecord] = []
    t = 0.0
    n_events = 0
    while True:
        active = [(s, rate_of(s) * c) for s, c in sorted(counts.items()) if rate_of(s) > 0]
        total = math.fsum(w for _, w in active)
        if not math.isfinite(total):
            raise NumericalError(f"non-finite total rate at t={t}")
        t_next = t + rng.exponential(1.0 / total) if total > 0 else math.inf
        while len(snaps) < len(checkpoints) and checkpoints[len(snaps)] < t_next:
            snaps.append(dict(counts))
        if t_next > sim.t_end:
            break
        u = rng.random() * total
        acc = 0.0
        parent = active[-1][0]
        for s, w in active:
            acc += w
            if u < acc:
                parent = s
                break
        config = sampler.sample(parent, rng)
        frags = config.fragments if isinstance(config, BicomponentConfiguration) else config
        if isinstance(parent, tuple):
            conserved = (sum(f[0] for f in frags), sum(f[1] for f in frags)) == parent
        else:
            conserved = sum(frags) == parent
        if not conserved:
            raise NumericalError(f"event does not conserve mass: {parent} -> {frags}")
        counts[parent] -= 1
        if counts[parent] == 0:
            del counts[parent]
        for f in frags:
            counts[f] = counts.get(f, 0) + 1
        t = t_next
        n_events += 1
        if sim.record_events:
            events.append(EventRecord(r, t, parent, tuple(frags)))
    while len(snaps) < len(checkpoints):
        snaps.append(dict(counts))
    return snaps, events, n_events


def simulate_population(
    initial: Mapping[State, int],
    spec: KernelSpec,
    sim: SimulationConfig,
    cap: int | None = None,
) -> SimulationResult:
    """Run ``sim.replicas`` independent direct-method trajectories.

    ``initial`` maps cluster states to non-negative integer particle counts.
    Results do not depend on ``sim.threads``.
    """
    init: dict[State, int] = {}
    for s, c in initial.items():
        s = tuple(int(x) for x in s) if isinstance(s, (tuple, list)) else int(s)
        if int(c) != c or c < 0:
            raise ValueError(f"particle count for {s} must be a non-negative integer, got {c}")
        if isinstance(s, tuple) != spec.bicomponent:
            raise ValueError(f"state {s} does not match the kernel's component mode")
        init[s] = int(c)

    rates: dict[State, float] = {}
    lock = threading.Lock()

    def rate_of(s: State) -> float:
        val = rates.get(s)
        if val is None:
            val = float(breakage_rate_2c(spec, *s) if spec.bicomponent else breakage_rate_1c(spec, s))
            with lock:
                rates[s] = val
        return val

    sampler = ConfigurationSampler(spec, cap)

    def run(r: int):
        return _run_replica(r, init, spec, sim, rate_of, sampler)

    if sim.threads > 1:
        with ThreadPoolExecutor(max_workers=sim.threads) as pool:
            results = list(pool.map(run, range(sim.replicas)))
    else:
        results = [run(r) for r in range(sim.replicas)]

    states = sorted({s for snaps, _, _ in results for snap in snaps for s in snap})
    index = {s: k for k, s in enumerate(states)}
    counts = np.zeros((sim.replicas, len(sim.times), len(states)))
    events: list[EventRecord] = []
    n_events = np.zeros(sim.replicas, dtype=np.int64)
    for r, (snaps, evs, ne) in enumerate(results):
        for k, snap in enumerate(snaps):
            for s, c in snap.items():
                counts[r, k, index[s]] = c
        events.extend(evs)
        n_events[r] = ne
    return SimulationResult(sim, spec, sim.times, states, counts, events, n_events)


def write_event_log(events: Sequence[EventRecord], fh: TextIO) -> None:
    """CSV ``replica,t,parent,fragments``; fragments joined by ``|``."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["replica", "t", "parent", "fragments"])
    for e in events:
        w.writerow([e.replica, repr(float(e.time)), _state_str(e.parent), _fragments_str(e.fragments)])


def event_log_to_csv(events: Sequence[EventRecord]) -> str:
    buf = io.StringIO()
    write_event_log(events, buf)
    return buf.getvalue()


def write_summary(result: SimulationResult, fh: TextIO) -> None:
    json.dump(result.summary(), fh, indent=2)
    fh.write("\n")
