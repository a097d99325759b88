"""Scenario configuration files.

Flat INI files, one scenario per file, with units in the key names where a
quantity has units (energies in units of the coupling, times in units of
inverse coupling). Example::

    [scenario]
    schema_version = 1
    id = lmg_haar
    kind = dynamics

    [model]
    name = lmg
    particles = 15
    field_per_coupling = 0.4

    [ensemble]
    kind = haar
    count = 10

    [perturbation]
    kind = goe
    strength = 0.01
    instances = 50

    [observables]
    Sx = spin-power axis=x power=1
    proj = sx-projector m=0.5

    [time]
    tmax_inv_coupling = 1000
    steps = 10000
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from ..exceptions import ConfigError

SCHEMA_VERSION = 1
KINDS = ("dynamics", "static", "purity")
MODELS = ("lmg", "tim")
STATE_KINDS = ("haar", "spin-coherent", "dicke", "product")
PERTURBATIONS = ("goe", "local-fields", "diagonal")
OBSERVABLE_KINDS = ("spin-power", "sx-projector", "partition-projector", "pauli-weight", "pauli-string")

_KNOWN = {
    "scenario": {"schema_version", "id", "kind", "description"},
    "model": {"name", "particles", "field_per_coupling", "coupling", "representation"},
    "ensemble": {"kind", "count", "axis", "sign"},
    "perturbation": {"kind", "strength", "instances", "distribution", "scale"},
    "observables": None,
    "time": {"tmax_inv_coupling", "steps", "output_stride"},
    "static": {"gamma", "samples", "mixed_kind"},
    "run": {"seed", "threads", "per_state_series"},
    "output": {"directory"},
    "sweep": {"parameter", "values", "budget"},
}


@dataclass(frozen=True)
class ObservableSpec:
    label: str
    kind: str
    params: dict = field(default_factory=dict)

    def describe(self):
        args = " ".join(f"{k}={_format_param(v)}" for k, v in sorted(self.params.items()))
        return f"{self.kind} {args}".strip()


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: tuple
    budget: int = 100


@dataclass(frozen=True)
class ScenarioConfig:
    scenario_id: str
    kind: str
    model: str
    particles: int
    field: float
    coupling: float = 1.0
    representation: str = "symmetric"
    state_kind: str = "product"
    state_count: int = 1
    state_axis: str = "x"
    state_sign: int = -1
    perturbation: str = "goe"
    strength: float = 0.01
    instances: int = 50
    distribution: str = "normal"
    scale: float = 1.0
    observables: tuple = ()
    t_max: float = 100.0
    n_steps: int = 1000
    output_stride: int = 1
    gamma: float = 0.2
    samples: int = 2000
    mixed_kind: str = ""
    seed: int = 1234
    threads: int | None = None
    per_state_series: bool = False
    output_dir: str = ""
    sweep: SweepSpec | None = None
    description: str = ""
    schema_version: int = SCHEMA_VERSION
    source: str = ""

    def override(self, dotted, value):
        """Copy with one ``section.key`` replaced, as used by sweeps."""
        target = _SWEEP_TARGETS.get(dotted)
        if target is None:
            raise ConfigError(f"parameter {dotted!r} cannot be swept", field="sweep.parameter")
        name, cast = target
        cfg = replace(self, **{name: cast(value)})
        validate_config(cfg)
        return cfg


_SWEEP_TARGETS = {
    "model.particles": ("particles", int),
    "model.field_per_coupling": ("field", float),
    "perturbation.strength": ("strength", float),
    "perturbation.instances": ("instances", int),
    "static.gamma": ("gamma", float),
    "ensemble.count": ("state_count", int),
    "time.tmax_inv_coupling": ("t_max", float),
}


def _format_param(v):
    if isinstance(v, (list, tuple)):
        return ",".join(_format_param(x) for x in v)
    return str(v)


def _scalar(text):
    text = text.strip()
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def _param_value(key, text):
    if key == "factors":
        pairs = []
        for item in text.split(","):
            site, _, axis = item.partition(":")
            pairs.append((int(site), axis.strip()))
        return tuple(pairs)
    if key == "sites":
        return tuple(int(s) for s in text.split(","))
    return _scalar(text)


def parse_observable(label, text):
    """``kind key=value ...``, e.g. ``pauli-string factors=3:y,4:y``."""
    tokens = text.split()
    if not tokens:
        raise ValueError("empty observable descriptor")
    kind, rest = tokens[0], tokens[1:]
    if kind not in OBSERVABLE_KINDS:
        raise ValueError(f"unknown observable family {kind!r}")
    params = {}
    for tok in rest:
        key, sep, value = tok.partition("=")
        if not sep:
            raise ValueError(f"expected key=value, got {tok!r}")
        params[key] = _param_value(key, value)
    return ObservableSpec(label, kind, params)


def _line_of(text, section, key=None):
    current = None
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        m = re.match(r"\[(.+)\]", stripped)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return number
            continue
        if current == section and key is not None:
            name = re.split(r"[=:]", stripped, maxsplit=1)[0].strip()
            if name.lower() == key.lower():
                return number
    return None


class _Reader:
    def __init__(self, parser, text, source):
        self.parser = parser
        self.text = text
        self.source = source

    def error(self, message, section, key=None):
        line = _line_of(self.text, section, key)
        where = f"{section}.{key}" if key else section
        loc = f"{self.source}:{line}: " if line else f"{self.source}: "
        return ConfigError(loc + message, field=where)

    def get(self, section, key, cast=str, default=None, required=False):
        if not self.parser.has_option(section, key):
            if required:
                raise self.error("missing required key", section, key)
            return default
        raw = self.parser.get(section, key)
        try:
            return cast(raw)
        except (TypeError, ValueError) as exc:
            raise self.error(f"cannot read {raw!r}: {exc}", section, key) from None


def _bool(text):
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def parse_config(text, source="<string>"):
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # observable labels keep their case
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    r = _Reader(parser, text, source)

    for section in parser.sections():
        if section not in _KNOWN:
            raise r.error(f"unknown section [{section}]", section)
        allowed = _KNOWN[section]
        if allowed is not None:
            for key in parser.options(section):
                if key not in allowed:
                    raise r.error(f"unknown key {key!r}", section, key)
    if not parser.has_section("scenario"):
        raise ConfigError(f"{source}: missing [scenario] section", field="scenario")

    version = r.get("scenario", "schema_version", int, required=True)
    if version != SCHEMA_VERSION:
        raise r.error(f"unsupported schema_version {version} (expected {SCHEMA_VERSION})", "scenario",
                      "schema_version")

    observables = []
    if parser.has_section("observables"):
        for label in parser.options("observables"):
            try:
                observables.append(parse_observable(label, parser.get("observables", label)))
            except ValueError as exc:
                raise r.error(str(exc), "observables", label) from None

    sweep = None
    if parser.has_section("sweep"):
        values = r.get("sweep", "values", lambda s: tuple(_scalar(v) for v in s.split(",") if v.strip()),
                       default=())
        sweep = SweepSpec(r.get("sweep", "parameter", required=True), values, r.get("sweep", "budget", int, 100))

    cfg = ScenarioConfig(
        scenario_id=r.get("scenario", "id", required=True),
        kind=r.get("scenario", "kind", default="dynamics"),
        description=r.get("scenario", "description", default=""),
        model=r.get("model", "name", default="lmg"),
        particles=r.get("model", "particles", int, required=True),
        field=r.get("model", "field_per_coupling", float, required=True),
        coupling=r.get("model", "coupling", float, 1.0),
        representation=r.get("model", "representation", default=None) or "",
        state_kind=r.get("ensemble", "kind", default="product"),
        state_count=r.get("ensemble", "count", int, 1),
        state_axis=r.get("ensemble", "axis", default="x"),
        state_sign=r.get("ensemble", "sign", int, -1),
        perturbation=r.get("perturbation", "kind", default="goe"),
        strength=r.get("perturbation", "strength", float, 0.01),
        instances=r.get("perturbation", "instances", int, 50),
        distribution=r.get("perturbation", "distribution", default="normal"),
        scale=r.get("perturbation", "scale", float, 1.0),
        observables=tuple(observables),
        t_max=r.get("time", "tmax_inv_coupling", float, 100.0),
        n_steps=r.get("time", "steps", int, 1000),
        output_stride=r.get("time", "output_stride", int, 1),
        gamma=r.get("static", "gamma", float, 0.2),
        samples=r.get("static", "samples", int, 2000),
        mixed_kind=r.get("static", "mixed_kind", default=""),
        seed=r.get("run", "seed", int, 1234),
        threads=r.get("run", "threads", int, None),
        per_state_series=r.get("run", "per_state_series", _bool, False),
        output_dir=r.get("output", "directory", default=""),
        sweep=sweep,
        source=source,
    )
    if not cfg.representation:
        cfg = replace(cfg, representation="symmetric" if cfg.model == "lmg" else "full")
    try:
        validate_config(cfg)
    except ConfigError as exc:
        section, _, key = (exc.field or "scenario").partition(".")
        raise r.error(exc.args[0].split("] ", 1)[-1], section, key or None) from None
    return cfg


def validate_config(cfg):
    def fail(message, where):
        raise ConfigError(message, field=where)

    if cfg.kind not in KINDS:
        fail(f"kind must be one of {KINDS}", "scenario.kind")
    if cfg.model not in MODELS:
        fail(f"model must be one of {MODELS}", "model.name")
    if cfg.representation not in ("symmetric", "full"):
        fail("representation must be symmetric or full", "model.representation")
    if cfg.model == "tim" and cfg.representation != "full":
        fail("the Ising chain lives in the full space", "model.representation")
    if cfg.particles < 2:
        fail("particles must be >= 2", "model.particles")
    if cfg.state_kind not in STATE_KINDS:
        fail(f"ensemble kind must be one of {STATE_KINDS}", "ensemble.kind")
    if cfg.state_kind in ("spin-coherent", "dicke") and cfg.representation != "symmetric":
        fail(f"{cfg.state_kind} states need the symmetric representation", "ensemble.kind")
    if cfg.state_count < 1:
        fail("count must be >= 1", "ensemble.count")
    if cfg.state_axis not in ("x", "y", "z") or cfg.state_sign not in (-1, 1):
        fail("product state needs axis in x,y,z and sign +1 or -1", "ensemble.axis")
    if cfg.perturbation not in PERTURBATIONS:
        fail(f"perturbation kind must be one of {PERTURBATIONS}", "perturbation.kind")
    if cfg.perturbation == "local-fields" and cfg.representation != "full":
        fail("local-field perturbations need the full representation", "perturbation.kind")
    if cfg.strength < 0:
        fail("strength must be >= 0", "perturbation.strength")
    if cfg.instances < 1:
        fail("instances must be >= 1", "perturbation.instances")
    if cfg.n_steps < 2:
        fail("steps must be >= 2", "time.steps")
    if cfg.t_max <= 0:
        fail("tmax_inv_coupling must be positive", "time.tmax_inv_coupling")
    if cfg.output_stride < 1 or cfg.n_steps % cfg.output_stride:
        fail("output_stride must be a positive divisor of steps", "time.output_stride")
    if cfg.kind == "static" and not 0 <= cfg.gamma:
        fail("gamma must be >= 0", "static.gamma")
    if cfg.mixed_kind not in ("", "depolarizing", "orthogonal-mixture"):
        fail("mixed_kind must be depolarizing or orthogonal-mixture", "static.mixed_kind")
    if cfg.kind in ("dynamics", "static") and not cfg.observables:
        fail("at least one observable is required", "observables")
    labels = [o.label for o in cfg.observables]
    if len(set(labels)) != len(labels):
        fail("observable labels must be unique", "observables")
    for o in cfg.observables:
        if o.kind in ("partition-projector", "pauli-weight", "pauli-string") and cfg.representation != "full":
            fail(f"{o.kind} needs the full representation", f"observables.{o.label}")
        if o.kind == "sx-projector" and cfg.representation != "symmetric":
            fail("sx-projector needs the symmetric representation", f"observables.{o.label}")
    if not 0 <= cfg.seed < 2**64:
        fail("seed must be a 64-bit unsigned integer", "run.seed")
    if cfg.sweep is not None and cfg.sweep.parameter not in _SWEEP_TARGETS:
        fail(f"sweep parameter must be one of {sorted(_SWEEP_TARGETS)}", "sweep.parameter")
    return cfg


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, source=str(path))


def bundled_config_dir():
    return Path(__file__).resolve().parent.parent / "configs"


def resolve_config(name_or_path):
    """A path, or the name of a bundled config (with or without ``.cfg``)."""
    path = Path(name_or_path)
    if path.exists():
        return path
    bundled = bundled_config_dir() / (path.name if path.suffix == ".cfg" else f"{path.name}.cfg")
    if bundled.exists():
        return bundled
    raise ConfigError(f"no config file or bundled scenario named {name_or_path!r}")
