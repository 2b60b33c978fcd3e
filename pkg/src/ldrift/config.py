"""Experiment configuration: a versioned YAML document with strict keys.

A configuration file holds either one experiment::

    version: 1
    kind: exit_tail
    seed: 7
    sim: {dt: 0.001, n_paths: 20000, start_point: [0, 0]}
    analysis: {radius: 1.0}

or a suite ``{version, output_dir, experiments: [...]}`` whose entries use the
same keys minus ``version``.  Unknown keys anywhere are errors, reported
with the offending field path and line number.
"""

import math
from dataclasses import dataclass, field, fields, replace
from typing import Optional

import yaml

from .fields import make_diffusion_field, make_example_field
from .simulate import SimConfig

__all__ = [
    "ConfigError",
    "FieldSpec",
    "SimBlock",
    "ExperimentConfig",
    "parse_config",
    "parse_document",
    "serialize_config",
    "serialize_document",
    "CONFIG_VERSION",
]

CONFIG_VERSION = 1


class ConfigError(ValueError):
    """Invalid configuration; ``field`` is the dotted path of the offending entry."""

    def __init__(self, message, field=None, line=None):
        where = ""
        if field:
            where += f"field '{field}'"
        if line is not None:
            where += f" (line {line})"
        super().__init__(f"{where}: {message}" if where else message)
        self.field = field
        self.line = line


def _plain(v):
    """Lists for tuples, recursively, so configs compare equal after a round trip."""
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    return v


@dataclass(frozen=True)
class FieldSpec:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "params", _plain(dict(self.params)))


@dataclass(frozen=True)
class SimBlock:
    dt: float = 1e-3
    horizon: float = 5.0
    n_paths: int = 10000
    start_point: tuple = (0.0, 0.0)
    truncation_level: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "start_point", tuple(float(v) for v in self.start_point))

    @property
    def dim(self):
        return len(self.start_point)


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: kind, fields, simulation block, analysis parameters, output options."""

    kind: str
    seed: int = 0
    drift: FieldSpec = field(default_factory=lambda: FieldSpec("zero"))
    diffusion: FieldSpec = field(default_factory=lambda: FieldSpec("identity"))
    sim: SimBlock = field(default_factory=SimBlock)
    analysis: dict = field(default_factory=dict)
    output_dir: str = "results"
    negative_control: bool = False
    save_green: bool = False
    version: int = CONFIG_VERSION

    def __post_init__(self):
        object.__setattr__(self, "analysis", _plain(dict(self.analysis)))

    @property
    def dim(self):
        return self.sim.dim

    def build_fields(self):
        """Construct the drift and diffusion fields in the dimension of the start point."""
        d = self.dim
        drift = make_example_field(self.drift.kind, d, **self.drift.params)
        prm = dict(self.diffusion.params)
        delta = prm.pop("delta", 0.5)
        diffusion = make_diffusion_field(self.diffusion.kind, d, delta, **prm)
        return drift, diffusion

    def sim_config(self, **overrides):
        base = dict(
            dt=self.sim.dt,
            horizon=self.sim.horizon,
            n_paths=self.sim.n_paths,
            master_seed=self.seed,
            start_point=self.sim.start_point,
            truncation_level=self.sim.truncation_level,
        )
        base.update(overrides)
        return SimConfig(**base)

    def with_analysis(self, **kw):
        a = dict(self.analysis)
        a.update(kw)
        return replace(self, analysis=a)


# ---------------------------------------------------------------------------
# parsing

_TOP = {f.name for f in fields(ExperimentConfig)}
_SIM = {f.name for f in fields(SimBlock)}
_FIELD = {"kind", "params"}


class _Lines:
    """Map dotted key paths to 1-based line numbers of a YAML document."""

    def __init__(self, text):
        self.map = {}
        try:
            node = yaml.compose(text)
        except yaml.YAMLError:
            node = None
        if node is not None:
            self._walk(node, "")

    def _walk(self, node, prefix):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                path = f"{prefix}.{k.value}" if prefix else str(k.value)
                self.map[path] = k.start_mark.line + 1
                self._walk(v, path)
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                path = f"{prefix}[{i}]"
                self.map[path] = v.start_mark.line + 1
                self._walk(v, path)

    def get(self, path):
        return self.map.get(path)


def _err(msg, path, lines):
    return ConfigError(msg, path, lines.get(path) if lines else None)


def _check_keys(obj, allowed, prefix, lines):
    if not isinstance(obj, dict):
        raise _err("expected a mapping", prefix or None, lines)
    for k in obj:
        if k not in allowed:
            path = f"{prefix}.{k}" if prefix else str(k)
            raise _err(f"unknown key '{k}'", path, lines)


def _number(v, path, lines, positive=False, integer=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise _err(f"expected a number, got {v!r}", path, lines)
    if integer and (not float(v).is_integer()):
        raise _err(f"expected an integer, got {v!r}", path, lines)
    if not math.isfinite(float(v)) or (positive and not v > 0):
        raise _err(f"expected a positive finite number, got {v!r}", path, lines)
    return int(v) if integer else float(v)


def _field_spec(obj, path, lines):
    if isinstance(obj, str):
        return FieldSpec(obj)
    _check_keys(obj, _FIELD, path, lines)
    if "kind" not in obj:
        raise _err("missing 'kind'", path, lines)
    params = obj.get("params") or {}
    if not isinstance(params, dict):
        raise _err("params must be a mapping", f"{path}.params", lines)
    return FieldSpec(str(obj["kind"]), params)


def _experiment(obj, prefix, lines, defaults):
    from .verify import experiments as ex

    _check_keys(obj, _TOP, prefix, lines)

    def p(k):
        return f"{prefix}.{k}" if prefix else k

    data = dict(defaults)
    data.update(obj)
    if "kind" not in data:
        raise _err("missing 'kind'", prefix or None, lines)
    kind = data["kind"]
    if kind not in ex.REGISTRY:
        raise _err(f"unknown experiment kind {kind!r}", p("kind"), lines)
    version = data.get("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise _err(f"unsupported config version {version!r}", p("version"), lines)
    sim_raw = data.get("sim") or {}
    _check_keys(sim_raw, _SIM, p("sim"), lines)
    sim_kw = {}
    for k, v in sim_raw.items():
        sp = f"{p('sim')}.{k}"
        if k == "start_point":
            if not isinstance(v, (list, tuple)) or not 2 <= len(v) <= 3:
                raise _err("start_point must be a list of 2 or 3 numbers", sp, lines)
            sim_kw[k] = tuple(_number(x, sp, lines) for x in v)
        elif k == "truncation_level":
            sim_kw[k] = None if v is None else _number(v, sp, lines, positive=True)
        elif k == "n_paths":
            sim_kw[k] = _number(v, sp, lines, positive=True, integer=True)
        else:
            sim_kw[k] = _number(v, sp, lines, positive=True)
    sim = SimBlock(**sim_kw)
    seed = data.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise _err("seed must be an integer in [0, 2^64)", p("seed"), lines)
    analysis = data.get("analysis") or {}
    if not isinstance(analysis, dict):
        raise _err("analysis must be a mapping", p("analysis"), lines)
    allowed = set(ex.REGISTRY[kind].defaults)
    for k in analysis:
        if k not in allowed:
            raise _err(f"unknown analysis key '{k}' for kind {kind}", f"{p('analysis')}.{k}", lines)
    for k in ("negative_control", "save_green"):
        if not isinstance(data.get(k, False), bool):
            raise _err("expected true or false", p(k), lines)
    cfg = ExperimentConfig(
        kind=kind,
        seed=seed,
        drift=_field_spec(data.get("drift", "zero"), p("drift"), lines),
        diffusion=_field_spec(data.get("diffusion", "identity"), p("diffusion"), lines),
        sim=sim,
        analysis=analysis,
        output_dir=str(data.get("output_dir", "results")),
        negative_control=bool(data.get("negative_control", False)),
        save_green=bool(data.get("save_green", False)),
        version=version,
    )
    try:
        cfg.build_fields()
    except (ValueError, KeyError, TypeError) as err:
        raise _err(f"invalid field specification: {err}", p("drift"), lines) from err
    return cfg


def parse_document(text):
    """Parse a configuration document into a list of :class:`ExperimentConfig`."""
    lines = _Lines(text)
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as err:
        mark = getattr(err, "problem_mark", None)
        raise ConfigError(f"YAML syntax error: {getattr(err, 'problem', err)}", None, mark.line + 1 if mark else None) from err
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a mapping")
    if "version" not in raw:
        raise _err("missing 'version'", None, lines)
    if raw["version"] != CONFIG_VERSION:
        raise _err(f"unsupported config version {raw['version']!r}", "version", lines)
    if "experiments" in raw:
        _check_keys(raw, {"version", "output_dir", "experiments"}, "", lines)
        items = raw["experiments"]
        if not isinstance(items, list) or not items:
            raise _err("experiments must be a non-empty list", "experiments", lines)
        shared = {"output_dir": raw.get("output_dir", "results")}
        return [_experiment(e, f"experiments[{i}]", lines, shared) for i, e in enumerate(items)]
    return [_experiment(raw, "", lines, {})]


def parse_config(text):
    """Parse a single-experiment document."""
    cfgs = parse_document(text)
    if len(cfgs) != 1:
        raise ConfigError("expected a single experiment, found a suite")
    return cfgs[0]


def _as_mapping(cfg, with_version=True):
    out = {}
    if with_version:
        out["version"] = cfg.version
    out["kind"] = cfg.kind
    out["seed"] = cfg.seed
    out["drift"] = {"kind": cfg.drift.kind, "params": dict(cfg.drift.params)}
    out["diffusion"] = {"kind": cfg.diffusion.kind, "params": dict(cfg.diffusion.params)}
    sim = {"dt": cfg.sim.dt, "horizon": cfg.sim.horizon, "n_paths": cfg.sim.n_paths, "start_point": list(cfg.sim.start_point)}
    sim["truncation_level"] = cfg.sim.truncation_level
    out["sim"] = sim
    out["analysis"] = dict(cfg.analysis)
    out["output_dir"] = cfg.output_dir
    out["negative_control"] = cfg.negative_control
    out["save_green"] = cfg.save_green
    return out


def serialize_config(cfg):
    """YAML text that :func:`parse_config` maps back to an equal configuration."""
    return yaml.safe_dump(_as_mapping(cfg), sort_keys=False, default_flow_style=None)


def serialize_document(cfgs, output_dir="results"):
    if len(cfgs) == 1:
        return serialize_config(cfgs[0])
    doc = {"version": CONFIG_VERSION, "output_dir": output_dir, "experiments": [_as_mapping(c, False) for c in cfgs]}
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None)
