"""Scenario configuration and its flat ``section.key = value`` text format.

Each non-blank, non-comment line holds one ``dotted.key = JSON value``.  Keys
that are absent keep their defaults; unknown keys are errors.  Serialisation
writes every key in a fixed order, so ``serialize(parse(text))`` is the
normalised form of ``text``.
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field

from .dgp import TruthConfig
from .pilot import PilotSpec
from .sampler import DPConfig, SamplerConfig

__all__ = [
    "ConfigError",
    "PriorConfig",
    "PilotConfig",
    "DensityConfig",
    "ScenarioConfig",
    "parse_flat",
    "parse_config",
    "serialize_config",
    "load_config",
    "apply_overrides",
    "to_flat",
]

PRIOR_KINDS = ("series", "rl", "propensity")
CENTER_KINDS = ("oracle", "aipw")
POSTERIOR_MODES = ("mcmc", "plugin", "exact-normal")


class ConfigError(ValueError):
    """A configuration problem, with one message per offending field."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class PriorConfig:
    """Prior on the log-odds of ``b``.

    ``kind = "propensity"`` adds ``sigma_lambda * lambda * a_hat`` to the
    ``inner`` process (``"series"`` or ``"rl"``).
    """

    kind: str = "series"
    inner: str = "series"
    betabar: float = 2.0
    r: float = 0.0
    sigma_lambda: float = 1.0
    grid_level: int = 10


@dataclass(frozen=True)
class PilotConfig:
    spec: PilotSpec = field(default_factory=PilotSpec)
    reuse: bool = False
    always_split: bool = False


@dataclass(frozen=True)
class DensityConfig:
    """Exponentiated Gaussian series prior for the covariate density."""

    gammabar: float = 4.0
    level: int = 8


@dataclass(frozen=True)
class ScenarioConfig:
    n: int = 1000
    d: int = 1
    reps: int = 200
    master_seed: int = 0
    truth: TruthConfig = field(default_factory=TruthConfig)
    prior: PriorConfig = field(default_factory=PriorConfig)
    pilot: PilotConfig = field(default_factory=PilotConfig)
    dp: DPConfig = field(default_factory=DPConfig)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    density: DensityConfig = field(default_factory=DensityConfig)
    center_kind: str = "oracle"
    posterior_mode: str = "mcmc"
    ci_level: float = 0.95
    out_path: str = ""

    def __post_init__(self):
        problems = _problems(self)
        if problems:
            raise ConfigError(problems)

    @property
    def truth_config(self) -> TruthConfig:
        return dataclasses.replace(self.truth, dim=self.d)

    @property
    def needs_pilot(self) -> bool:
        return self.prior.kind == "propensity" or self.center_kind == "aipw"


def _problems(cfg: ScenarioConfig) -> list[str]:
    out = []

    def check(ok, key, msg):
        if not ok:
            out.append(f"{key}: {msg}")

    check(cfg.n >= 4, "n", "must be at least 4")
    check(cfg.d in (1, 2), "d", "must be 1 or 2")
    check(cfg.reps >= 1, "reps", "must be at least 1")
    check(0 <= cfg.master_seed < 2**64, "master_seed", "must be an unsigned 64-bit integer")
    t = cfg.truth
    for name in ("alpha", "beta"):
        v = getattr(t, name)
        check(math.isfinite(v) and v > 0, f"truth.{name}", "must be positive")
    check(t.gamma is None or t.gamma > 0, "truth.gamma", "must be positive or null")
    check(0 < t.margin < 0.5, "truth.margin", "must lie in (0, 0.5)")
    check(t.family in ("haar", "daub4"), "truth.family", "must be 'haar' or 'daub4'")
    p = cfg.prior
    check(p.kind in PRIOR_KINDS, "prior.kind", f"must be one of {PRIOR_KINDS}")
    check(p.inner in ("series", "rl"), "prior.inner", "must be 'series' or 'rl'")
    check(p.betabar > 0, "prior.betabar", "must be positive")
    check(p.r >= 0, "prior.r", "must be nonnegative")
    check(p.sigma_lambda >= 0, "prior.sigma_lambda", "must be nonnegative")
    check(1 <= p.grid_level <= 16, "prior.grid_level", "must lie in [1, 16]")
    check(cfg.density.gammabar > 0, "density.gammabar", "must be positive")
    check(1 <= cfg.density.level <= 14, "density.level", "must lie in [1, 14]")
    check(cfg.center_kind in CENTER_KINDS, "center_kind", f"must be one of {CENTER_KINDS}")
    check(cfg.posterior_mode in POSTERIOR_MODES, "posterior_mode", f"must be one of {POSTERIOR_MODES}")
    check(not (cfg.posterior_mode == "exact-normal" and cfg.center_kind != "oracle"),
          "posterior_mode", "exact-normal needs oracle centering")
    check(0 < cfg.ci_level < 1, "ci_level", "must lie in (0, 1)")
    return out


# dotted-key prefix -> section dataclass
_SECTIONS = {
    "truth": TruthConfig,
    "prior": PriorConfig,
    "pilot": PilotSpec,
    "dp": DPConfig,
    "sampler": SamplerConfig,
    "density": DensityConfig,
}
_TRUTH_SKIP = ("dim",)
_SAMPLER_SKIP = ("seed",)
_TOP = ("n", "d", "reps", "master_seed", "center_kind", "posterior_mode", "ci_level", "out_path")


def _section_fields(name):
    skip = {"truth": _TRUTH_SKIP, "sampler": _SAMPLER_SKIP}.get(name, ())
    return [f for f in dataclasses.fields(_SECTIONS[name]) if f.name not in skip]


def _key_types() -> dict:
    types = {f.name: f.type for f in dataclasses.fields(ScenarioConfig) if f.name in _TOP}
    for sec in _SECTIONS:
        for f in _section_fields(sec):
            types[f"{sec}.{f.name}"] = f.type
    types["pilot.reuse"] = "bool"
    types["pilot.always_split"] = "bool"
    return types


KEYS = tuple(_key_types())


def to_flat(cfg: ScenarioConfig) -> dict:
    """Every key in canonical order mapped to its value."""
    flat = {k: getattr(cfg, k) for k in _TOP}
    sections = {
        "truth": cfg.truth, "prior": cfg.prior, "pilot": cfg.pilot.spec,
        "dp": cfg.dp, "sampler": cfg.sampler, "density": cfg.density,
    }
    for sec, obj in sections.items():
        for f in _section_fields(sec):
            flat[f"{sec}.{f.name}"] = getattr(obj, f.name)
    flat["pilot.reuse"] = cfg.pilot.reuse
    flat["pilot.always_split"] = cfg.pilot.always_split
    return {k: flat[k] for k in KEYS}


def _coerce(key, value, typ):
    typ = str(typ)
    if value is None:
        if "None" in typ:
            return None
        raise ValueError("may not be null")
    if typ.startswith("bool"):
        if not isinstance(value, bool):
            raise ValueError("must be true or false")
        return value
    if typ.startswith("int"):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValueError("must be an integer")
        return value
    if typ.startswith("float"):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValueError("must be a number")
        return float(value)
    if typ.startswith("str"):
        if not isinstance(value, str):
            raise ValueError("must be a string")
        return value
    return value


def from_flat(flat: dict, base: ScenarioConfig | None = None) -> ScenarioConfig:
    """Build a config from ``{dotted key: value}``, validating every field."""
    types = _key_types()
    merged = to_flat(base or ScenarioConfig())
    problems = []
    for key, value in flat.items():
        if key not in types:
            problems.append(f"{key}: unknown key")
            continue
        try:
            merged[key] = _coerce(key, value, types[key])
        except ValueError as exc:
            problems.append(f"{key}: {exc}")
    if problems:
        raise ConfigError(problems)

    def section(sec):
        kwargs = {f.name: merged[f"{sec}.{f.name}"] for f in _section_fields(sec)}
        try:
            return _SECTIONS[sec](**kwargs)
        except ValueError as exc:
            problems.append(f"{sec}: {exc}")
            return None

    parts = {sec: section(sec) for sec in _SECTIONS}
    if problems:
        raise ConfigError(problems)
    return ScenarioConfig(
        **{k: merged[k] for k in _TOP},
        truth=parts["truth"],
        prior=parts["prior"],
        pilot=PilotConfig(parts["pilot"], merged["pilot.reuse"], merged["pilot.always_split"]),
        dp=parts["dp"],
        sampler=parts["sampler"],
        density=parts["density"],
    )


def parse_flat(text: str) -> dict:
    flat, problems = {}, []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            problems.append(f"line {lineno}: expected 'key = value'")
            continue
        if key in flat:
            problems.append(f"{key}: given twice")
            continue
        try:
            flat[key] = json.loads(value.strip())
        except json.JSONDecodeError:
            problems.append(f"{key}: value {value.strip()!r} is not valid JSON")
    if problems:
        raise ConfigError(problems)
    return flat


def parse_config(text: str, base: ScenarioConfig | None = None) -> ScenarioConfig:
    return from_flat(parse_flat(text), base)


def serialize_config(cfg: ScenarioConfig) -> str:
    return "".join(f"{k} = {json.dumps(v)}\n" for k, v in to_flat(cfg).items())


def load_config(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def apply_overrides(cfg: ScenarioConfig, assignments) -> ScenarioConfig:
    """Apply ``["key=value", ...]``; bare strings need not be JSON-quoted."""
    flat = {}
    for item in assignments:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError([f"{item}: expected key=value"])
        try:
            flat[key.strip()] = json.loads(value)
        except json.JSONDecodeError:
            flat[key.strip()] = value
    return from_flat(flat, cfg)
