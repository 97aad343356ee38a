"""Command line interface: ``fragkernel <subcommand> ...``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 enumeration budget exceeded.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import logging
import sys
from pathlib import Path
from typing import Iterator, TextIO

from . import __version__
from .combinatorics import count_configs_1c, count_configs_2c, iter_configs_1c, iter_configs_2c
from .config import RunConfig, build_kernel, initial_mapping, load_config
from .ensemble import breakage_rate_1c, breakage_rate_2c, mean_fragments_1c, mean_fragments_2c
from .errors import BudgetExceededError, ConfigError
from .kernels import Family, KernelSpec, PowerLaw
from .pbe_solver import Grid, PopulationState, SolverConfig, integrate, write_moments_csv, write_snapshots_csv
from .stochastic import SimulationConfig, simulate_population, write_event_log, write_summary

log = logging.getLogger("fragkernel")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_BUDGET = 0, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        kwargs.setdefault("allow_abbrev", False)  # "--v" must not expand to "--verbose"
        super().__init__(*args, **kwargs)

    def error(self, message: str):  # argparse exits with 2 already; keep message format
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _add_parent(p: argparse.ArgumentParser) -> None:
    p.add_argument("--v", type=int, help="parent mass (one component)")
    p.add_argument("--vA", type=int, help="parent A-mass (two components)")
    p.add_argument("--vB", type=int, help="parent B-mass (two components)")
    p.add_argument("--n", type=int, help="fragments per event")


def _add_kernel(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kernel", default=None, choices=[f.value for f in Family], help="kernel family")
    p.add_argument("--kappa-exponent", type=float, help="kappa(v) = v**lambda")
    p.add_argument("--gamma", type=float, help="weights w_i = i**gamma (weighted_functional)")
    p.add_argument("--config", type=Path, help="take the kernel from this run config")
    p.add_argument("--cap", type=int, help="enumeration cap")


def _exp(x: float | None):
    if x is None:
        return None
    return PowerLaw(int(x) if float(x).is_integer() else x)


def _parent(args) -> tuple[int, ...] | int:
    if args.v is not None:
        if args.vA is not None or args.vB is not None:
            raise ConfigError("give either --v or --vA/--vB, not both")
        return args.v
    if args.vA is None or args.vB is None:
        raise ConfigError("need --v, or both --vA and --vB")
    return (args.vA, args.vB)


def _kernel(args) -> KernelSpec:
    if args.config is not None:
        spec = build_kernel(load_config(args.config))
        if args.n is not None and args.n != spec.n:
            spec = KernelSpec(spec.family, args.n, spec.kappa, spec.weights)
        return spec
    if args.n is None:
        raise ConfigError("--n is required")
    bicomponent = args.vA is not None or args.vB is not None
    family = args.kernel or ("bicomponent_random" if bicomponent else "random")
    return KernelSpec(Family(family), args.n, kappa=_exp(args.kappa_exponent), weights=_exp(args.gamma))


def _check_mode(spec: KernelSpec, parent) -> None:
    if isinstance(parent, tuple) != spec.bicomponent:
        raise ConfigError(f"kernel {spec.family.value} does not match the parent {parent}")


def _fmt_state(s) -> str:
    return f"{s[0]}.{s[1]}" if isinstance(s, tuple) else str(s)


@contextlib.contextmanager
def _output(path: str | Path | None, default: TextIO | None = None) -> Iterator[TextIO | None]:
    if path is None:
        yield default
        return
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        yield fh


def cmd_count(args) -> int:
    if args.n is None:
        raise ConfigError("--n is required")
    parent = _parent(args)
    if isinstance(parent, tuple):
        print(count_configs_2c(parent[0], parent[1], args.n))
    else:
        print(count_configs_1c(parent, args.n))
    return EXIT_OK


def cmd_enumerate(args) -> int:
    if args.n is None:
        raise ConfigError("--n is required")
    parent = _parent(args)
    w = csv.writer(sys.stdout, lineterminator="\n")
    if isinstance(parent, tuple):
        configs = iter_configs_2c(parent[0], parent[1], args.n, args.cap)
        w.writerow(["config", "multiplicity"])
        for c in configs:
            w.writerow(["|".join(_fmt_state(f) for f in c.fragments), c.multiplicity])
    else:
        configs = iter_configs_1c(parent, args.n, args.cap)
        w.writerow(["config"])
        for c in configs:
            w.writerow(["|".join(map(str, c))])
    return EXIT_OK


def cmd_rate(args) -> int:
    parent = _parent(args)
    spec = _kernel(args)
    _check_mode(spec, parent)
    if isinstance(parent, tuple):
        rate = breakage_rate_2c(spec, parent[0], parent[1], cap=args.cap)
    else:
        rate = breakage_rate_1c(spec, parent, cap=args.cap)
    print(rate if isinstance(rate, int) else repr(float(rate)))
    return EXIT_OK


def cmd_fragments(args) -> int:
    parent = _parent(args)
    spec = _kernel(args)
    _check_mode(spec, parent)
    method = "enumerate" if args.enumerate else "auto"
    w = csv.writer(sys.stdout, lineterminator="\n")
    if isinstance(parent, tuple):
        table = mean_fragments_2c(spec, parent[0], parent[1], method=method, cap=args.cap)
        w.writerow(["uA", "uB", "bbar"])
        rows = [[u[0], u[1], repr(b)] for u, b in table.entries.items()]
    else:
        table = mean_fragments_1c(spec, parent, method=method, cap=args.cap)
        w.writerow(["i", "bbar"])
        rows = [[i, repr(b)] for i, b in table.entries.items()]
    if not rows:
        log.warning("parent %s cannot break into %d fragments under %s; table is empty",
                    parent, spec.n, spec.family.value)
    w.writerows(rows)
    return EXIT_OK


def _vmax(cfg: RunConfig, init: dict) -> int:
    if "grid" in cfg:
        return cfg["grid"]["vmax"]
    return max(sum(s) if isinstance(s, tuple) else s for s in init)


def _abs(path: str | None) -> str | None:
    return None if path is None else str(Path(path).resolve())


def cmd_solve(args) -> int:
    flags = {"solver.t_end": args.t_end, "solver.dt": args.dt, "solver.threads": args.threads,
             "output.snapshots": _abs(args.snapshots), "output.moments": _abs(args.moments)}
    cfg = load_config(args.config, args.set, **flags)
    if "solver" not in cfg:
        raise ConfigError("config has no solver section")
    spec = build_kernel(cfg)
    init = initial_mapping(cfg)
    grid = Grid(_vmax(cfg, init), spec.bicomponent)
    state = PopulationState.from_mapping(grid, init)
    s = cfg["solver"]
    solver = SolverConfig(
        t_end=s["t_end"], dt=s.get("dt"), method=s.get("method", "rk4"), rtol=s.get("rtol", 1e-8),
        output_stride=s.get("output_stride", 1), threads=s.get("threads", 1),
    )
    traj = integrate(state, spec, solver)
    if traj.clamped:
        log.info("clamped %d roundoff-level negative concentrations", traj.clamped)
    out = cfg.get("output", {})
    with _output(out.get("snapshots") and cfg.path(out["snapshots"]), sys.stdout) as fh:
        write_snapshots_csv(traj, fh)
    if "moments" in out:
        with _output(cfg.path(out["moments"])) as fh:
            write_moments_csv(traj, fh)
    return EXIT_OK


def cmd_simulate(args) -> int:
    flags = {"simulation.seed": args.seed, "simulation.replicas": args.replicas,
             "simulation.threads": args.threads, "simulation.t_end": args.t_end,
             "output.summary": _abs(args.summary), "output.events": _abs(args.events)}
    cfg = load_config(args.config, args.set, **flags)
    if "simulation" not in cfg:
        raise ConfigError("config has no simulation section")
    spec = build_kernel(cfg)
    init = initial_mapping(cfg, integer_counts=True)
    s = cfg["simulation"]
    out = cfg.get("output", {})
    sim = SimulationConfig(
        seed=s.get("seed"), replicas=s.get("replicas", 1), t_end=s["t_end"],
        record_events=s.get("record_events", False) or "events" in out,
        checkpoints=s.get("checkpoints", 10), threads=s.get("threads", 1), volume=s.get("volume", 1.0),
    )
    if s.get("seed") is None:
        log.info("no seed given; using entropy %d", sim.seed)
    result = simulate_population(init, spec, sim)
    with _output(out.get("summary") and cfg.path(out["summary"]), sys.stdout) as fh:
        write_summary(result, fh)
    if "events" in out:
        with _output(cfg.path(out["events"])) as fh:
            write_event_log(result.events, fh)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fragkernel", description="Multinary fragmentation kernels and kinetics.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("count", help="number of ordered fragment configurations")
    _add_parent(p)
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("enumerate", help="list configurations in lexicographic order")
    _add_parent(p)
    p.add_argument("--cap", type=int, help="enumeration cap")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("rate", help="breakage rate a(v)")
    _add_parent(p)
    _add_kernel(p)
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("fragments", help="mean fragment distribution as CSV")
    _add_parent(p)
    _add_kernel(p)
    p.add_argument("--enumerate", action="store_true", help="use exhaustive summation")
    p.set_defaults(func=cmd_fragments)

    p = sub.add_parser("solve", help="integrate the population balance")
    p.add_argument("config", type=Path)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    p.add_argument("--t-end", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--threads", type=int)
    p.add_argument("--snapshots", help="snapshot CSV path (default: stdout)")
    p.add_argument("--moments", help="moments CSV path")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="stochastic direct-method simulation")
    p.add_argument("config", type=Path)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    p.add_argument("--seed", type=int)
    p.add_argument("--replicas", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--t-end", type=float)
    p.add_argument("--summary", help="summary JSON path (default: stdout)")
    p.add_argument("--events", help="event log CSV path")
    p.set_defaults(func=cmd_simulate)
    return parser


def _fail(exc: Exception, code: int) -> int:
    msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
    print(f"fragkernel: error: {msg}", file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(levelname)s: %(message)s")
    try:
        return args.func(args)
    except BudgetExceededError as exc:
        return _fail(exc, EXIT_BUDGET)
    except (ConfigError, ValueError, KeyError) as exc:
        return _fail(exc, EXIT_CONFIG)
    except ArithmeticError as exc:
        return _fail(exc, EXIT_NUMERIC)

if __name__ == "__main__":
    sys.exit(main())
