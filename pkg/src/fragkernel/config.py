"""Run configuration: YAML file, schema validation, and object builders.

The schema is documented in README.md. Unknown keys are rejected
and relative table paths resolve against the config file's directory.
"""

from __future__ import annotations

import copy
import csv
from pathlib import Path
from typing import Any

import jsonschema
import yaml

from .errors import ConfigError
from .kernels import Family, KernelSpec, PowerLaw, Tabulated

_MODULATION = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "power_law": {"type": "number"},
        "prefactor": {"type": "number", "exclusiveMinimum": 0},
        "table": {"type": "string"},
    },
    "oneOf": [{"required": ["power_law"]}, {"required": ["table"]}],
}

_STATE = {
    "oneOf": [
        {"type": "integer", "minimum": 1},
        {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 2, "maxItems": 2},
    ]
}

SCHEMA: dict[str, Any] = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kernel"],
    "properties": {
        "kernel": {
            "type": "object",
            "additionalProperties": False,
            "required": ["family", "n"],
            "properties": {
                "family": {"enum": [f.value for f in Family]},
                "n": {"type": "integer", "minimum": 2},
                "kappa": _MODULATION,
                "weights": _MODULATION,
            },
        },
        "components": {"enum": [1, 2]},
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "required": ["vmax"],
            "properties": {"vmax": {"type": "integer", "minimum": 1}},
        },
        "initial": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "state": _STATE,
                "concentration": {"type": "number", "minimum": 0},
                "particles": {"type": "integer", "minimum": 0},
                "table": {"type": "string"},
            },
            "oneOf": [{"required": ["state"]}, {"required": ["table"]}],
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "required": ["t_end"],
            "properties": {
                "t_end": {"type": "number", "minimum": 0},
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "method": {"enum": ["rk4", "adaptive"]},
                "rtol": {"type": "number", "exclusiveMinimum": 0},
                "output_stride": {"type": "integer", "minimum": 1},
                "threads": {"type": "integer", "minimum": 1},
            },
        },
        "simulation": {
            "type": "object",
            "additionalProperties": False,
            "required": ["t_end"],
            "properties": {
                "t_end": {"type": "number", "minimum": 0},
                "seed": {"type": "integer", "minimum": 0},
                "replicas": {"type": "integer", "minimum": 1},
                "record_events": {"type": "boolean"},
                "checkpoints": {"type": "integer", "minimum": 1},
                "threads": {"type": "integer", "minimum": 1},
                "volume": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "snapshots": {"type": "string"},
                "moments": {"type": "string"},
                "summary": {"type": "string"},
                "events": {"type": "string"},
            },
        },
    },
}


class RunConfig(dict):
    """Validated configuration mapping plus the directory it was loaded from."""

    def __init__(self, data: dict, base_dir: Path | str = "."):
        super().__init__(data)
        self.base_dir = Path(base_dir)

    def path(self, rel: str) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else self.base_dir / p

    @property
    def bicomponent(self) -> bool:
        return Family(self["kernel"]["family"]).bicomponent


def _set_dotted(data: dict, dotted: str, value: Any) -> None:
    keys = dotted.split(".")
    node = data
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot set {dotted}: {k} is not a section")
    node[keys[-1]] = value


def validate(data: dict, base_dir: Path | str = ".") -> RunConfig:
    try:
        jsonschema.validate(data, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = ".".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from None
    cfg = RunConfig(data, base_dir)
    fam = Family(data["kernel"]["family"])
    comps = data.get("components")
    if comps is not None and (comps == 2) != fam.bicomponent:
        raise ConfigError(f"components={comps} does not match kernel family {fam.value}")
    if fam is Family.WEIGHTED_FUNCTIONAL and "weights" not in data["kernel"]:
        raise ConfigError("weighted_functional kernel needs kernel.weights")
    init = data.get("initial", {})
    if "state" in init:
        if isinstance(init["state"], list) != fam.bicomponent:
            raise ConfigError("initial.state must be an integer (1C) or an [vA, vB] pair (2C)")
        if isinstance(init["state"], list) and sum(init["state"]) < 1:
            raise ConfigError("initial.state must contain at least one unit")
    for section, key in (("kernel", "kappa"), ("kernel", "weights"), ("initial", None)):
        node = data.get(section, {}).get(key, {}) if key else data.get(section, {})
        if "table" in node and not cfg.path(node["table"]).is_file():
            raise ConfigError(f"referenced file not found: {node['table']}")
    if "grid" in data and "state" in init:
        st = init["state"]
        mass = sum(st) if isinstance(st, list) else st
        if mass > data["grid"]["vmax"]:
            raise ConfigError(f"initial mass {mass} exceeds grid.vmax={data['grid']['vmax']}")
    return cfg


def load_config(path: str | Path, overrides: list[str] | None = None, **flags: Any) -> RunConfig:
    """Load and validate a YAML run config.

    ``overrides`` are ``section.key=value`` strings (value parsed as YAML);
    keyword ``flags`` map dotted keys to values and win over the file.
    """
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path} does not contain a mapping")
    data = copy.deepcopy(data)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        _set_dotted(data, key.strip(), yaml.safe_load(raw))
    for key, value in flags.items():
        if value is not None:
            _set_dotted(data, key, value)
    return validate(data, path.parent)


def read_table(path: Path) -> dict:
    """Two-column CSV ``key,value`` (header row optional) to a dict."""
    out = {}
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                key = int(row[0])
            except ValueError:
                continue  # header
            out[key] = float(row[1])
    if not out:
        raise ConfigError(f"table {path} has no entries")
    return out


def read_initial_table(path: Path, bicomponent: bool) -> dict:
    """CSV ``v,c`` or ``vA,vB,c`` to a state -> value dict."""
    out = {}
    width = 3 if bicomponent else 2
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            if len(row) != width:
                raise ConfigError(f"{path}: expected {width} columns, got {row}")
            try:
                state = (int(row[0]), int(row[1])) if bicomponent else int(row[0])
            except ValueError:
                continue
            out[state] = float(row[-1])
    return out


def _modulation(cfg: RunConfig, node: dict | None):
    if node is None:
        return None
    if "table" in node:
        table = read_table(cfg.path(node["table"]))
        if any(v <= 0 for v in table.values()):
            raise ConfigError(f"table {node['table']} has non-positive entries")
        return Tabulated.from_mapping(table)
    exp = node["power_law"]
    if float(exp).is_integer():
        exp = int(exp)
    return PowerLaw(exp, node.get("prefactor", 1))


def build_kernel(cfg: RunConfig) -> KernelSpec:
    k = cfg["kernel"]
    return KernelSpec(
        Family(k["family"]),
        k["n"],
        kappa=_modulation(cfg, k.get("kappa")),
        weights=_modulation(cfg, k.get("weights")),
    )


def initial_mapping(cfg: RunConfig, integer_counts: bool = False) -> dict:
    """Initial condition as ``state -> value`` (concentrations or particle counts)."""
    init = cfg.get("initial")
    if init is None:
        raise ConfigError("config has no initial section")
    if "table" in init:
        table = read_initial_table(cfg.path(init["table"]), cfg.bicomponent)
        if integer_counts and any(float(v) != int(v) for v in table.values()):
            raise ConfigError("simulation needs integer particle counts in the initial table")
        return {s: (int(v) if integer_counts else v) for s, v in table.items()}
    st = init["state"]
    state = tuple(st) if isinstance(st, list) else st
    if integer_counts:
        return {state: init.get("particles", 1)}
    return {state: init.get("concentration", 1.0)}
