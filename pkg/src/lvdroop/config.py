"""Scenario files, trajectory CSVs and run bundles.

Scenario files are YAML documents (the bundled ones use a ``.cfg`` suffix).
Schema violations and semantic errors are reported with the dotted field
path and, when it can be recovered, the source line.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np
import yaml

from .network import NetworkError, PowerNetwork, build_network, network_to_dict
from .signals import parse_signal
from .sim import IntegratorSettings, Trajectory

CERTIFICATE_CHECKS = ("metzler", "gershgorin", "hurwitz", "negative_definite", "cooperativity",
                      "dissipativity", "equilibrium")
PROPERTY_CHECKS = ("positivity", "monotone_order", "lyapunov_descent", "l1_descent_frozen",
                   "ultimate_bound", "homogeneity", "assumption1")
BUNDLED = ("fig2", "fig3", "fig4")

_number = {"type": "number"}
_signal = {
    "oneOf": [
        _number,
        {"type": "object", "properties": {"constant": _number}, "required": ["constant"],
         "additionalProperties": False},
        {"type": "object", "required": ["sinusoid"], "additionalProperties": False,
         "properties": {"sinusoid": {
             "type": "object", "additionalProperties": False,
             "properties": {k: _number for k in ("offset", "amplitude", "angular_frequency", "phase")},
         }}},
    ]
}
_node_id = {"type": ["integer", "string"]}
SCHEMA = {
    "type": "object",
    "required": ["network", "initial_conditions"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "mode": {"enum": ["coupled", "decoupled"]},
        "seed": {"type": "integer"},
        "network": {
            "type": "object",
            "required": ["nodes"],
            "additionalProperties": False,
            "properties": {
                "nodes": {"type": "array", "minItems": 1, "items": {
                    "type": "object", "required": ["id"], "additionalProperties": False,
                    "properties": {
                        "id": _node_id, "tau": _number, "shunt_susceptance": _number, "theta0": _number,
                        "droop_gain": _signal, "reference": _signal, "theta_perturbation": _signal,
                    }}},
                "lines": {"type": "array", "items": {
                    "type": "object", "required": ["from", "to", "susceptance"], "additionalProperties": False,
                    "properties": {"from": _node_id, "to": _node_id, "susceptance": _number,
                                   "conductance": _number}}},
            },
        },
        "edge_angle_overrides": {"type": "array", "items": {
            "type": "object", "required": ["from", "to", "signal"], "additionalProperties": False,
            "properties": {"from": _node_id, "to": _node_id, "signal": _signal}}},
        "initial_conditions": {"type": "array", "minItems": 1,
                               "items": {"type": "array", "items": _number, "minItems": 1}},
        "sim": {"type": "object", "additionalProperties": False,
                "properties": {k: _number for k in ("t0", "t_end", "dt_init", "dt_min", "dt_max", "rel_tol",
                                                    "abs_tol", "record_stride")}},
        "checks": {"type": "array", "items": {"enum": list(CERTIFICATE_CHECKS + PROPERTY_CHECKS)}},
        "check_options": {"type": "object", "additionalProperties": False, "properties": {
            "beta": _number, "transient_fraction": _number, "homogeneity_samples": {"type": "integer"},
            "frozen_sigma": _number, "frozen_t_end": _number,
        }},
    },
}


class ConfigError(ValueError):
    """Unreadable or invalid scenario file."""


@dataclass
class ScenarioConfig:
    name: str
    network: PowerNetwork
    mode: str = "coupled"
    initial_conditions: list[np.ndarray] = field(default_factory=list)
    t0: float = 0.0
    t_end: float = 10.0
    settings: IntegratorSettings = field(default_factory=IntegratorSettings)
    checks: list[str] = field(default_factory=list)
    check_options: dict[str, Any] = field(default_factory=dict)
    seed: int = 0
    source: str = ""

    @property
    def decoupled(self) -> bool:
        return self.mode == "decoupled"

    def to_dict(self) -> dict:
        net = network_to_dict(self.network)
        out = {
            "name": self.name,
            "mode": self.mode,
            "seed": self.seed,
            "network": {"nodes": net["nodes"], "lines": net["lines"]},
            "initial_conditions": [[float(x) for x in v] for v in self.initial_conditions],
            "sim": {"t0": self.t0, "t_end": self.t_end,
                    **{f.name: getattr(self.settings, f.name) for f in fields(self.settings)
                       if f.name != "adaptive"}},
            "checks": list(self.checks),
        }
        if "edge_angle_overrides" in net:
            out["edge_angle_overrides"] = net["edge_angle_overrides"]
        if self.check_options:
            out["check_options"] = dict(self.check_options)
        return out


def dump_config(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


def _line_index(text: str):
    """Map a field path to its 1-based source line using the YAML node tree."""
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError:
        root = None

    def lookup(path) -> int | None:
        node = root
        for part in path:
            if node is None:
                return None
            if isinstance(node, yaml.MappingNode):
                node = next((v for k, v in node.value if k.value == part), None)
            elif isinstance(node, yaml.SequenceNode) and isinstance(part, int) and part < len(node.value):
                node = node.value[part]
            else:
                return None
        return None if node is None else node.start_mark.line + 1

    return lookup


def _fmt_path(path) -> str:
    out = ""
    for p in path:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<root>"


def _fail(source: str, lookup, path, message: str):
    line = lookup(path)
    where = f"{source}:{line}" if line else source
    raise ConfigError(f"{where}: {_fmt_path(path)}: {message}")


def load_config_text(text: str, source: str = "<string>") -> ScenarioConfig:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{source}:{mark.line + 1}:{mark.column + 1}" if mark else source
        raise ConfigError(f"{where}: parse error: {getattr(exc, 'problem', exc)}") from None
    lookup = _line_index(text)
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be a mapping")

    validator = jsonschema.Draft202012Validator(SCHEMA)
    err = jsonschema.exceptions.best_match(validator.iter_errors(raw))
    if err is not None:
        _fail(source, lookup, list(err.absolute_path), err.message)

    mode = raw.get("mode", "coupled")
    nodes = raw["network"]["nodes"]
    for i, nd in enumerate(nodes):
        for key, label in (("droop_gain", "droop gain"), ("reference", "reference")):
            if key in nd and not parse_signal(nd[key]).lower > 0:
                _fail(source, lookup, ["network", "nodes", i, key],
                      f"node {nd['id']!r}: {label} must be positive-valued")
        if "tau" in nd and not nd["tau"] > 0:
            _fail(source, lookup, ["network", "nodes", i, "tau"], f"node {nd['id']!r}: tau must be > 0")
        if nd.get("shunt_susceptance", 0.0) < 0:
            _fail(source, lookup, ["network", "nodes", i, "shunt_susceptance"],
                  f"node {nd['id']!r}: shunt susceptance must be >= 0")
    for i, ln in enumerate(raw["network"].get("lines", [])):
        if ln["susceptance"] >= 0:
            _fail(source, lookup, ["network", "lines", i, "susceptance"],
                  f"line ({ln['from']!r}, {ln['to']!r}): susceptance must be < 0")
        if ln.get("conductance", 0.0) < 0:
            _fail(source, lookup, ["network", "lines", i, "conductance"],
                  f"line ({ln['from']!r}, {ln['to']!r}): conductance must be >= 0")

    if mode == "decoupled":
        if raw.get("edge_angle_overrides"):
            _fail(source, lookup, ["edge_angle_overrides"], "not allowed in decoupled mode")
        for i, nd in enumerate(nodes):
            if nd.get("theta0", 0.0) != nodes[0].get("theta0", 0.0):
                _fail(source, lookup, ["network", "nodes", i, "theta0"], "decoupled mode needs equal angles")
            pert = parse_signal(nd.get("theta_perturbation", 0.0))
            if pert.amplitude != 0.0 or pert.offset != 0.0:
                _fail(source, lookup, ["network", "nodes", i, "theta_perturbation"],
                      "decoupled mode forbids angle perturbations")

    try:
        net = build_network({**raw["network"], "edge_angle_overrides": raw.get("edge_angle_overrides", [])})
    except NetworkError as exc:
        _fail(source, lookup, ["network"], str(exc))

    ics = [np.asarray(v, dtype=float) for v in raw["initial_conditions"]]
    for i, v in enumerate(ics):
        if v.size != net.n:
            _fail(source, lookup, ["initial_conditions", i], f"has {v.size} entries, network has {net.n} nodes")
        if np.any(v < 0):
            _fail(source, lookup, ["initial_conditions", i], "must be in the nonnegative orthant")

    sim = dict(raw.get("sim", {}))
    t0 = float(sim.pop("t0", 0.0))
    t_end = float(sim.pop("t_end", 10.0))
    if not t_end > t0:
        _fail(source, lookup, ["sim", "t_end"], "must exceed t0")
    try:
        settings = IntegratorSettings(**{k: float(v) for k, v in sim.items()})
    except ValueError as exc:
        _fail(source, lookup, ["sim"], str(exc))

    opts = dict(raw.get("check_options", {}))
    if "beta" in opts and not 0 <= opts["beta"] < math.pi / 2:
        _fail(source, lookup, ["check_options", "beta"], "must lie in [0, pi/2)")
    if "transient_fraction" in opts and not 0 < opts["transient_fraction"] < 1:
        _fail(source, lookup, ["check_options", "transient_fraction"], "must lie in (0, 1)")

    return ScenarioConfig(
        name=raw.get("name", Path(source).stem),
        network=net,
        mode=mode,
        initial_conditions=ics,
        t0=t0,
        t_end=t_end,
        settings=settings,
        checks=list(raw.get("checks", [])),
        check_options=opts,
        seed=int(raw.get("seed", 0)),
        source=source,
    )


def bundled_config_path(name: str) -> Path:
    stem = Path(name).name.removesuffix(".cfg")
    if stem not in BUNDLED:
        raise ConfigError(f"no bundled scenario named {name!r}; choose from {', '.join(BUNDLED)}")
    return Path(str(resources.files("lvdroop").joinpath("configs", f"{stem}.cfg")))


def resolve_config_path(path: str | Path) -> Path:
    """The given path if it exists, else a bundled scenario of the same name."""
    p = Path(path)
    if p.exists():
        return p
    if p.parent == Path(".") and p.name.removesuffix(".cfg") in BUNDLED:
        return bundled_config_path(p.name)
    raise ConfigError(f"{path}: no such file")


def parse_config(path: str | Path) -> ScenarioConfig:
    p = resolve_config_path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    return load_config_text(text, str(path))


def config_hash(path: str | Path) -> str:
    return hashlib.sha256(resolve_config_path(path).read_bytes()).hexdigest()


def format_float(x: float) -> str:
    """Shortest round-trip decimal; integral values drop the trailing '.0'."""
    s = repr(float(x))
    return s[:-2] if s.endswith(".0") else s


def write_trajectory_csv(traj: Trajectory, path: str | Path, n: int | None = None) -> None:
    n = traj.states.shape[1] if traj.states.ndim == 2 else (n or 0)
    buf = io.StringIO()
    buf.write(",".join(["t"] + [f"V_{i + 1}" for i in range(n)]) + "\n")
    for t, row in zip(traj.times, traj.states):
        buf.write(",".join([format_float(t)] + [format_float(v) for v in row]) + "\n")
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def read_trajectory_csv(path: str | Path) -> Trajectory:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0] != "t":
        raise ConfigError(f"{path}: missing 't,V_1,...' header")
    n = len(rows[0]) - 1
    data = np.array([[float(x) for x in r] for r in rows[1:]], dtype=float).reshape(-1, n + 1)
    return Trajectory(data[:, 0].copy(), data[:, 1:].copy(), {"source": str(path)})


@dataclass
class RunBundle:
    scenario: str
    trajectories: list[dict] = field(default_factory=list)
    certificates: list[dict] = field(default_factory=list)
    properties: list[dict] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    @property
    def all_hold(self) -> bool:
        return all(r["holds"] for r in self.certificates + self.properties)

    def write(self, path: str | Path) -> None:
        doc = asdict(self)
        doc["all_hold"] = self.all_hold
        Path(path).write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n")
