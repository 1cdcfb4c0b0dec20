"""Experiment configuration: TOML schema, validation, serialization.

The file format is one flat table of experiment-level keys plus one
``[agents.<name>]`` sub-table per agent.  An empty file is a valid
configuration (all defaults).  ``load_config(serialize_config(cfg))``
round-trips exactly.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .envs import ENV_KINDS
from .errors import ValidationError
from .simulate import AGENT_KINDS

DIAG_CHECK_NAMES = (
    "sherman_morrison",
    "fixed_point",
    "psd_floor",
    "contraction",
    "stein",
    "geodesic",
)

_AGENT_KEYS = {
    "kind", "h_override", "K_override", "k_scale", "h_scale", "h_lmc", "K_lmc",
    "mean_init_mode", "resample_contexts",
}
_TOP_KEYS = {
    "env_kind", "d", "K", "T", "lambda", "R", "noise_std", "eta_override",
    "seeds", "diagnostics", "out_dir", "record_timing", "diag_checks", "agents",
}


@dataclass(frozen=True)
class AgentSpec:
    name: str
    kind: str
    h_override: float | None = None
    K_override: int | None = None
    k_scale: float = 1.0
    h_scale: float = 1.0
    h_lmc: float | None = None
    K_lmc: int = 50
    mean_init_mode: str = "zero"
    resample_contexts: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    env_kind: str = "linear_gaussian"
    d: int = 10
    K: int = 10
    T: int = 2000
    lam: float = 1.0
    R: float = 1.0
    noise_std: float = 1.0
    eta_override: float | None = None
    seeds: tuple[int, ...] = tuple(range(20))
    diagnostics: bool = False
    out_dir: str = "results"
    record_timing: bool = False
    diag_checks: tuple[str, ...] = DIAG_CHECK_NAMES
    agents: tuple[AgentSpec, ...] = field(
        default_factory=lambda: tuple(AgentSpec(name=k, kind=k) for k in AGENT_KINDS)
    )


def _fail(name, message):
    raise ValidationError(f"config field {name!r}: {message}")


def _expect(value, name, types, message):
    # bool is an int subclass; keep the two apart.
    if isinstance(value, bool) and bool not in types:
        _fail(name, message)
    if not isinstance(value, types):
        _fail(name, message)
    return value


def _positive(value, name, kind=float):
    _expect(value, name, (int, float) if kind is float else (int,), f"expected a positive {kind.__name__}")
    if value <= 0:
        _fail(name, "must be positive")
    return kind(value)


def _agent_from_table(name: str, table: dict) -> AgentSpec:
    for key in table:
        if key not in _AGENT_KEYS:
            raise ValidationError(f"unknown key 'agents.{name}.{key}'")
    kind = table.get("kind", name)
    if kind not in AGENT_KINDS:
        _fail(f"agents.{name}.kind", f"expected one of {AGENT_KINDS}, got {kind!r}")
    spec = {"name": name, "kind": kind}
    if "h_override" in table:
        spec["h_override"] = _positive(table["h_override"], f"agents.{name}.h_override")
    if "K_override" in table:
        spec["K_override"] = _positive(table["K_override"], f"agents.{name}.K_override", int)
    if "k_scale" in table:
        spec["k_scale"] = _positive(table["k_scale"], f"agents.{name}.k_scale")
    if "h_scale" in table:
        spec["h_scale"] = _positive(table["h_scale"], f"agents.{name}.h_scale")
    if "h_lmc" in table:
        spec["h_lmc"] = _positive(table["h_lmc"], f"agents.{name}.h_lmc")
    if "K_lmc" in table:
        spec["K_lmc"] = _positive(table["K_lmc"], f"agents.{name}.K_lmc", int)
    if "mean_init_mode" in table:
        mode = table["mean_init_mode"]
        if mode not in ("zero", "gaussian"):
            _fail(f"agents.{name}.mean_init_mode", f"expected 'zero' or 'gaussian', got {mode!r}")
        spec["mean_init_mode"] = mode
    if "resample_contexts" in table:
        spec["resample_contexts"] = _expect(
            table["resample_contexts"], f"agents.{name}.resample_contexts", (bool,), "expected a boolean"
        )
    return AgentSpec(**spec)


def parse_config(text: str) -> ExperimentConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"config is not well-formed TOML: {exc}") from exc
    for key in raw:
        if key not in _TOP_KEYS:
            raise ValidationError(f"unknown key {key!r}")

    kwargs = {}
    if "env_kind" in raw:
        if raw["env_kind"] not in ENV_KINDS:
            _fail("env_kind", f"expected one of {ENV_KINDS}, got {raw['env_kind']!r}")
        kwargs["env_kind"] = raw["env_kind"]
    if "d" in raw:
        kwargs["d"] = _positive(raw["d"], "d", int)
    if "K" in raw:
        K = _positive(raw["K"], "K", int)
        if K < 2:
            _fail("K", "needs at least 2 arms")
        kwargs["K"] = K
    if "T" in raw:
        kwargs["T"] = _positive(raw["T"], "T", int)
    if "lambda" in raw:
        lam = _positive(raw["lambda"], "lambda")
        if lam > 1.0:
            _fail("lambda", "must lie in (0, 1]")
        kwargs["lam"] = lam
    if "R" in raw:
        R = _positive(raw["R"], "R")
        if R < 1.0:
            _fail("R", "must be >= 1")
        kwargs["R"] = R
    if "noise_std" in raw:
        _expect(raw["noise_std"], "noise_std", (int, float), "expected a number")
        if raw["noise_std"] < 0:
            _fail("noise_std", "must be nonnegative")
        kwargs["noise_std"] = float(raw["noise_std"])
    if "eta_override" in raw:
        eta = _positive(raw["eta_override"], "eta_override")
        if eta > 1.0:
            _fail("eta_override", "must lie in (0, 1]")
        kwargs["eta_override"] = eta
    if "seeds" in raw:
        seeds = raw["seeds"]
        _expect(seeds, "seeds", (list,), "expected a list of integers")
        if not seeds:
            _fail("seeds", "must be nonempty")
        for s in seeds:
            _expect(s, "seeds", (int,), "expected a list of integers")
        if len(set(seeds)) != len(seeds):
            _fail("seeds", "must be distinct")
        kwargs["seeds"] = tuple(seeds)
    if "diagnostics" in raw:
        kwargs["diagnostics"] = _expect(raw["diagnostics"], "diagnostics", (bool,), "expected a boolean")
    if "record_timing" in raw:
        kwargs["record_timing"] = _expect(
            raw["record_timing"], "record_timing", (bool,), "expected a boolean"
        )
    if "out_dir" in raw:
        kwargs["out_dir"] = _expect(raw["out_dir"], "out_dir", (str,), "expected a path string")
    if "diag_checks" in raw:
        checks = raw["diag_checks"]
        _expect(checks, "diag_checks", (list,), "expected a list of check names")
        for c in checks:
            if c not in DIAG_CHECK_NAMES:
                _fail("diag_checks", f"unknown check {c!r}; expected from {DIAG_CHECK_NAMES}")
        kwargs["diag_checks"] = tuple(checks)
    if "agents" in raw:
        tables = raw["agents"]
        _expect(tables, "agents", (dict,), "expected per-agent sub-tables")
        if not tables:
            _fail("agents", "must be nonempty")
        kwargs["agents"] = tuple(
            _agent_from_table(name, table) for name, table in tables.items()
        )
    return ExperimentConfig(**kwargs)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"config file {path} does not exist")
    return parse_config(path.read_text())


def _toml_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    raise TypeError(f"cannot serialize {type(value)}")


def serialize_config(config: ExperimentConfig) -> str:
    """Canonical TOML for a configuration; inverse of :func:`parse_config`."""
    lines = [
        f"env_kind = {_toml_value(config.env_kind)}",
        f"d = {config.d}",
        f"K = {config.K}",
        f"T = {config.T}",
        f"lambda = {_toml_value(config.lam)}",
        f"R = {_toml_value(config.R)}",
        f"noise_std = {_toml_value(config.noise_std)}",
    ]
    if config.eta_override is not None:
        lines.append(f"eta_override = {_toml_value(config.eta_override)}")
    lines.append(f"seeds = {_toml_value(list(config.seeds))}")
    lines.append(f"diagnostics = {_toml_value(config.diagnostics)}")
    lines.append(f"record_timing = {_toml_value(config.record_timing)}")
    lines.append(f"out_dir = {_toml_value(config.out_dir)}")
    lines.append(f"diag_checks = {_toml_value(list(config.diag_checks))}")
    for spec in config.agents:
        lines.append("")
        lines.append(f"[agents.{spec.name}]")
        lines.append(f"kind = {_toml_value(spec.kind)}")
        if spec.h_override is not None:
            lines.append(f"h_override = {_toml_value(spec.h_override)}")
        if spec.K_override is not None:
            lines.append(f"K_override = {spec.K_override}")
        lines.append(f"k_scale = {_toml_value(spec.k_scale)}")
        lines.append(f"h_scale = {_toml_value(spec.h_scale)}")
        if spec.h_lmc is not None:
            lines.append(f"h_lmc = {_toml_value(spec.h_lmc)}")
        lines.append(f"K_lmc = {spec.K_lmc}")
        lines.append(f"mean_init_mode = {_toml_value(spec.mean_init_mode)}")
        lines.append(f"resample_contexts = {_toml_value(spec.resample_contexts)}")
    return "\n".join(lines) + "\n"
