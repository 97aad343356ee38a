"""Deterministic integration of the discrete fragmentation population balance.

    dc(v)/dt = -a(v) c(v) + sum_{v' > v} bbar(v | v') a(v') c(v')

The equation is linear, so it is assembled once into a sparse operator
``M`` with ``dc/dt = M @ c``. Fragmentation only moves mass downward, hence
truncating the grid at ``vmax`` is exact for any initial condition whose
mass lies inside the grid.

Bicomponent grids use a dense triangular layout over ``vA + vB <= vmax``,
``vA``-major: (0,1), (0,2), ..., (0,vmax), (1,0), (1,1), ..., (vmax,0).
"""

from __future__ import annotations

import contextlib
import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Sequence, TextIO, Union

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp

from .ensemble import MeanFragmentTable, breakage_rate_1c, breakage_rate_2c, mean_fragments_1c, mean_fragments_2c
from .errors import ConfigError, NumericalError
from .kernels import KernelSpec

State = Union[int, tuple[int, int]]

#: Stability bound for the fixed-step scheme, ``dt * max(a) <= STABILITY_LIMIT``.
STABILITY_LIMIT = 0.1
#: Negatives above ``-NEGATIVE_TOL * peak`` are roundoff and get clamped.
NEGATIVE_TOL = 1e-12


@dataclass(frozen=True)
class Grid:
    vmax: int
    bicomponent: bool = False
    states: tuple = field(init=False, repr=False, compare=False)
    index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.vmax < 1:
            raise ConfigError(f"vmax must be >= 1, got {self.vmax}")
        if self.bicomponent:
            states = tuple(
                (a, b) for a in range(self.vmax + 1) for b in range(self.vmax + 1 - a) if a + b >= 1
            )
        else:
            states = tuple(range(1, self.vmax + 1))
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "index", {s: k for k, s in enumerate(states)})

    def __len__(self) -> int:
        return len(self.states)

    def total_mass(self) -> np.ndarray:
        if self.bicomponent:
            return np.array([a + b for a, b in self.states], dtype=float)
        return np.array(self.states, dtype=float)


@dataclass
class PopulationState:
    """Concentrations on a grid at time ``time``."""

    grid: Grid
    c: np.ndarray
    time: float = 0.0

    def __post_init__(self) -> None:
        self.c = np.asarray(self.c, dtype=float)
        if self.c.shape != (len(self.grid),):
            raise ValueError(f"concentration vector has shape {self.c.shape}, grid has {len(self.grid)} states")
        if not np.all(np.isfinite(self.c)):
            raise NumericalError("non-finite concentration")
        if np.any(self.c < 0):
            raise ValueError("concentrations must be non-negative")

    @classmethod
    def from_mapping(cls, grid: Grid, concentrations: dict, time: float = 0.0) -> "PopulationState":
        c = np.zeros(len(grid))
        for s, val in concentrations.items():
            s = tuple(s) if isinstance(s, (list, tuple)) else int(s)
            if s not in grid.index:
                raise ConfigError(f"state {s} lies outside the grid (vmax={grid.vmax})")
            c[grid.index[s]] = val
        return cls(grid, c, time)

    @property
    def concentrations(self) -> dict:
        return {s: float(x) for s, x in zip(self.grid.states, self.c) if x != 0.0}


def monodisperse(parent: State, c0: float, vmax: int) -> PopulationState:
    """All material in a single cluster state; mass above ``vmax`` is rejected."""
    bicomponent = isinstance(parent, tuple)
    mass = sum(parent) if bicomponent else parent
    if mass > vmax:
        raise ConfigError(f"initial mass {mass} exceeds grid bound vmax={vmax}")
    grid = Grid(vmax, bicomponent)
    return PopulationState.from_mapping(grid, {parent: c0})


@dataclass
class RateTables:
    """Breakage rates, mean fragment tables and the assembled linear operator."""

    grid: Grid
    n: int
    a: np.ndarray
    bbar: dict
    operator: sp.csr_matrix

    @property
    def vmax(self) -> int:
        return self.grid.vmax


def assemble_rates(spec: KernelSpec, vmax: int, n: int | None = None, bicomponent: bool | None = None) -> RateTables:
    """Precompute ``a`` and ``bbar`` for every grid state and build the operator."""
    n = spec.n if n is None else n
    if bicomponent is None:
        bicomponent = spec.bicomponent
    if bicomponent != spec.bicomponent:
        raise ConfigError(f"kernel {spec.family.value} does not match the grid component mode")
    grid = Grid(vmax, bicomponent)
    a = np.zeros(len(grid))
    bbar: dict[State, MeanFragmentTable] = {}
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    for j, s in enumerate(grid.states):
        if bicomponent:
            rate = breakage_rate_2c(spec, s[0], s[1], n)
            table = mean_fragments_2c(spec, s[0], s[1], n)
        else:
            rate = breakage_rate_1c(spec, s, n)
            table = mean_fragments_1c(spec, s, n)
        a[j] = float(rate)
        bbar[s] = table
        if a[j] == 0.0:
            continue
        rows.append(j)
        cols.append(j)
        vals.append(-a[j])
        for child, mean in table.entries.items():
            if mean != 0.0:
                rows.append(grid.index[child])
                cols.append(j)
                vals.append(mean * a[j])
    if not np.all(np.isfinite(a)):
        raise NumericalError("non-finite breakage rate")
    op = sp.csr_matrix((vals, (rows, cols)), shape=(len(grid), len(grid)))
    op.sum_duplicates()
    op.sort_indices()
    return RateTables(grid, n, a, bbar, op)


def derivative(state: PopulationState, tables: RateTables, threads: int = 1) -> np.ndarray:
    """Right-hand side ``dc/dt`` for every grid state.

    Rows are split across ``threads`` workers; each row is summed in the same
    order regardless of the split, so the result is bitwise independent of it.
    """
    if state.grid != tables.grid:
        raise ValueError("state and rate tables are defined on different grids")
    return _apply(tables.operator, state.c, threads)


def _apply(op: sp.csr_matrix, c: np.ndarray, threads: int, pool: ThreadPoolExecutor | None = None) -> np.ndarray:
    if threads <= 1 or op.shape[0] < 2 * threads:
        return op @ c
    bounds = np.linspace(0, op.shape[0], threads + 1).astype(int)
    blocks = [op[lo:hi] for lo, hi in zip(bounds[:-1], bounds[1:])]
    if pool is None:
        with ThreadPoolExecutor(max_workers=threads) as own:
            return np.concatenate(list(own.map(lambda blk: blk @ c, blocks)))
    return np.concatenate(list(pool.map(lambda blk: blk @ c, blocks)))


@dataclass
class SolverConfig:
    """Time integration settings.

    ``dt`` is an upper bound on the fixed step; it is reduced to satisfy the
    stability bound and to land exactly on ``t_end``. In adaptive mode the
    same step grid sets the snapshot times and ``rtol`` controls accuracy.
    """

    t_end: float
    dt: float | None = None
    method: str = "rk4"
    rtol: float = 1e-8
    output_stride: int = 1
    threads: int = 1

    def __post_init__(self) -> None:
        if not (self.t_end >= 0 and math.isfinite(self.t_end)):
            raise ConfigError(f"t_end must be finite and >= 0, got {self.t_end}")
        if self.dt is not None and not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.method not in ("rk4", "adaptive"):
            raise ConfigError(f"unknown method {self.method!r}")
        if self.output_stride < 1:
            raise ConfigError("output_stride must be >= 1")


@dataclass
class Trajectory:
    snapshots: list[PopulationState]
    dt: float
    clamped: int = 0

    def __iter__(self) -> Iterator[PopulationState]:
        return iter(self.snapshots)

    def __getitem__(self, k: int) -> PopulationState:
        return self.snapshots[k]

    def __len__(self) -> int:
        return len(self.snapshots)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.snapshots])


def _step_size(solver: SolverConfig, amax: float) -> tuple[float, int]:
    h = solver.dt if solver.dt is not None else math.inf
    if amax > 0:
        h = min(h, STABILITY_LIMIT / amax)
    if not math.isfinite(h):
        h = solver.t_end
    nsteps = max(1, math.ceil(solver.t_end / h - 1e-9))
    return solver.t_end / nsteps, nsteps


def _sanitize(c: np.ndarray, t: float) -> int:
    if not np.all(np.isfinite(c)):
        raise NumericalError(f"non-finite concentration at t={t}")
    neg = c < 0
    if not neg.any():
        return 0
    peak = float(c.max()) if c.size else 0.0
    if float(c.min()) < -NEGATIVE_TOL * peak:
        raise NumericalError(f"negative concentration {c.min():.3e} at t={t} (peak {peak:.3e}); step too large?")
    c[neg] = 0.0
    return int(neg.sum())


def integrate(
    initial: PopulationState,
    spec: KernelSpec,
    solver: SolverConfig,
    tables: RateTables | None = None,
) -> Trajectory:
    """Integrate the population balance from ``initial`` to ``solver.t_end``.

    Snapshots are taken every ``solver.output_stride`` steps, always
    including the initial and final states.
    """
    if tables is None:
        tables = assemble_rates(spec, initial.grid.vmax, bicomponent=initial.grid.bicomponent)
    if tables.grid != initial.grid:
        raise ValueError("initial state and rate tables are defined on different grids")
    t0 = initial.time
    first = PopulationState(initial.grid, initial.c.copy(), t0)
    if solver.t_end == 0:
        return Trajectory([first], 0.0)

    h, nsteps = _step_size(solver, float(tables.a.max(initial=0.0)))
    out_steps = list(range(solver.output_stride, nsteps, solver.output_stride)) + [nsteps]
    if solver.method == "adaptive":
        return _integrate_adaptive(first, tables, solver, h, out_steps)

    threads = solver.threads
    with ThreadPoolExecutor(max_workers=threads) if threads > 1 else contextlib.nullcontext() as pool:
        return _integrate_rk4(first, tables.operator, h, nsteps, out_steps, solver.t_end, threads, pool)


def _integrate_rk4(first, op, h, nsteps, out_steps, t_end, threads, pool) -> Trajectory:
    t0 = first.time
    c = first.c.copy()
    snaps = [first]
    clamped = 0
    targets = iter(out_steps)
    nxt = next(targets)
    for k in range(1, nsteps + 1):
        k1 = _apply(op, c, threads, pool)
        k2 = _apply(op, c + 0.5 * h * k1, threads, pool)
        k3 = _apply(op, c + 0.5 * h * k2, threads, pool)
        k4 = _apply(op, c + h * k3, threads, pool)
        c = c + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = t0 + k * h if k < nsteps else t0 + t_end
        clamped += _sanitize(c, t)
        if k == nxt:
            snaps.append(PopulationState(first.grid, c.copy(), t))
            nxt = next(targets, None)
    return Trajectory(snaps, h, clamped)


def _integrate_adaptive(
    first: PopulationState, tables: RateTables, solver: SolverConfig, h: float, out_steps: Sequence[int]
) -> Trajectory:
    op = tables.operator
    t0 = first.time
    t_eval = [t0 + k * h for k in out_steps]
    t_eval[-1] = t0 + solver.t_end
    peak = float(first.c.max(initial=0.0))
    sol = solve_ivp(
        lambda t, y: op @ y,
        (t0, t0 + solver.t_end),
        first.c,
        method="DOP853",
        t_eval=t_eval,
        rtol=solver.rtol,
        atol=max(peak, 1e-300) * solver.rtol * 1e-4,
    )
    if sol.status != 0:
        raise NumericalError(f"adaptive integration failed: {sol.message}")
    snaps = [first]
    clamped = 0
    for t, y in zip(sol.t, sol.y.T):
        y = y.copy()
        clamped += _sanitize(y, t)
        snaps.append(PopulationState(first.grid, y, float(t)))
    return Trajectory(snaps, h, clamped)


def moments(state: PopulationState, k: int) -> float | tuple[float, float]:
    """``sum v**k c(v)``; for bicomponent grids ``k=1`` gives ``(sum vA c, sum vB c)``.

    Other orders on bicomponent grids use the total mass ``vA + vB``.
    """
    if k < 0:
        raise ValueError("moment order must be non-negative")
    grid = state.grid
    if grid.bicomponent and k == 1:
        va = np.array([s[0] for s in grid.states], dtype=float)
        vb = np.array([s[1] for s in grid.states], dtype=float)
        return float(va @ state.c), float(vb @ state.c)
    return float((grid.total_mass() ** k) @ state.c)


def _fmt(x: float) -> str:
    return repr(float(x))


def write_snapshots_csv(trajectory: Trajectory | Sequence[PopulationState], fh: TextIO) -> None:
    """Write ``t,v,c`` (or ``t,vA,vB,c``) rows, omitting zero concentrations."""
    snaps = list(trajectory)
    bic = snaps[0].grid.bicomponent if snaps else False
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["t", "vA", "vB", "c"] if bic else ["t", "v", "c"])
    for snap in snaps:
        t = _fmt(snap.time)
        for s, x in zip(snap.grid.states, snap.c):
            if x == 0.0:
                continue
            w.writerow([t, s[0], s[1], _fmt(x)] if bic else [t, s, _fmt(x)])


def write_moments_csv(trajectory: Trajectory | Sequence[PopulationState], fh: TextIO) -> None:
    """Write ``t,M0,M1`` (or ``t,M0,M1A,M1B``) rows, one per snapshot."""
    snaps = list(trajectory)
    bic = snaps[0].grid.bicomponent if snaps else False
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["t", "M0", "M1A", "M1B"] if bic else ["t", "M0", "M1"])
    for snap in snaps:
        m1 = moments(snap, 1)
        row = [_fmt(snap.time), _fmt(moments(snap, 0))]
        row += [_fmt(m1[0]), _fmt(m1[1])] if bic else [_fmt(m1)]
        w.writerow(row)


def snapshots_to_csv(trajectory: Trajectory | Sequence[PopulationState]) -> str:
    buf = io.StringIO()
    write_snapshots_csv(trajectory, buf)
    return buf.getvalue()
