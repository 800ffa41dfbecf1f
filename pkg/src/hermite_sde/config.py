"""Experiment configuration: one JSON document, unknown keys rejected.

Schema (all sections optional except ``model``)::

    {
      "model":     {"name": "gbm", "params": {"mu": 0.0, "sigma": 0.5, "x0": 1.0}},
      "solver":    {"N": 5, "M": 100, "T": 1.0, "Q": 40, "startup_epsilon": 1e-6,
                    "rk2_variant": "heun", "startup_proxy": "euler"},
      "baselines": {"enabled": true, "schemes": ["em", "milstein"], "paths": 100,
                    "seed": 0, "predictor_corrector": false},
      "outputs":   {"directory": "out", "formats": ["csv", "json"]},
      "compare":   {"time_stride": 1},
      "check":     {"nx": 9, "nt": 7, "x_range": null, "t_range": null, "tol": 1e-4}
    }
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigurationError
from .solver import RK2_VARIANTS, STARTUP_PROXIES

SCHEMES = ("em", "milstein")
FORMATS = ("csv", "json")


@dataclass
class ModelConfig:
    name: str = "gbm"
    params: dict = field(default_factory=dict)


@dataclass
class SolverSection:
    N: int = 8
    M: int = 100
    T: float = 1.0
    Q: int = 40
    startup_epsilon: float = 1e-6
    rk2_variant: str = "heun"
    startup_proxy: str = "euler"


@dataclass
class BaselineConfig:
    enabled: bool = True
    schemes: list = field(default_factory=lambda: list(SCHEMES))
    paths: int = 100
    seed: int = 0
    predictor_corrector: bool = False


@dataclass
class OutputConfig:
    directory: str = "out"
    formats: list = field(default_factory=lambda: list(FORMATS))


@dataclass
class CompareConfig:
    time_stride: int = 1


@dataclass
class CheckConfig:
    nx: int = 9
    nt: int = 7
    x_range: list | None = None
    t_range: list | None = None
    tol: float = 1e-4


@dataclass
class ExperimentConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    solver: SolverSection = field(default_factory=SolverSection)
    baselines: BaselineConfig = field(default_factory=BaselineConfig)
    outputs: OutputConfig = field(default_factory=OutputConfig)
    compare: CompareConfig = field(default_factory=CompareConfig)
    check: CheckConfig = field(default_factory=CheckConfig)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _is_real(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _section(cls, data, prefix):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigurationError(f"section {prefix!r} must be an object", prefix)
    names = {f.name: f for f in dataclasses.fields(cls)}
    for key in data:
        if key not in names:
            raise ConfigurationError(f"unknown key {prefix}.{key}", f"{prefix}.{key}")
    return cls(**data)


def _require(cond, field_name, message):
    if not cond:
        raise ConfigurationError(f"{field_name}: {message}", field_name)


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    from .models import MODELS

    _require(isinstance(cfg.model.name, str) and cfg.model.name in MODELS, "model.name",
             f"must be one of {sorted(MODELS)}")
    _require(isinstance(cfg.model.params, dict), "model.params", "must be an object")
    s = cfg.solver
    _require(_is_int(s.N) and s.N >= 1, "N", f"must be an integer >= 1, got {s.N!r}")
    _require(_is_int(s.M) and s.M >= 2, "M", f"must be an integer >= 2, got {s.M!r}")
    _require(_is_real(s.T) and s.T > 0, "T", f"must be positive, got {s.T!r}")
    _require(_is_int(s.Q) and s.Q >= s.N + 2, "Q", f"must be an integer >= N + 2, got {s.Q!r}")
    _require(_is_real(s.startup_epsilon) and s.startup_epsilon > 0, "startup_epsilon", "must be positive")
    _require(s.rk2_variant in RK2_VARIANTS, "rk2_variant", f"must be one of {RK2_VARIANTS}")
    _require(s.startup_proxy in STARTUP_PROXIES, "startup_proxy", f"must be one of {STARTUP_PROXIES}")
    b = cfg.baselines
    _require(isinstance(b.enabled, bool), "baselines.enabled", "must be a boolean")
    _require(isinstance(b.schemes, list) and all(x in SCHEMES for x in b.schemes), "baselines.schemes",
             f"entries must be in {SCHEMES}")
    _require(_is_int(b.paths) and b.paths >= 2, "baselines.paths", "must be an integer >= 2")
    _require(_is_int(b.seed) and 0 <= b.seed < 2**64, "baselines.seed", "must be a 64-bit unsigned integer")
    _require(isinstance(b.predictor_corrector, bool), "baselines.predictor_corrector", "must be a boolean")
    _require(isinstance(cfg.outputs.formats, list) and all(f in FORMATS for f in cfg.outputs.formats),
             "outputs.formats", f"entries must be in {FORMATS}")
    _require(_is_int(cfg.compare.time_stride) and cfg.compare.time_stride >= 1, "compare.time_stride",
             "must be an integer >= 1")
    c = cfg.check
    _require(_is_int(c.nx) and c.nx >= 1 and _is_int(c.nt) and c.nt >= 1, "check.nx", "grid sizes must be >= 1")
    for name in ("x_range", "t_range"):
        r = getattr(c, name)
        _require(r is None or (isinstance(r, list) and len(r) == 2 and all(map(_is_real, r))),
                 f"check.{name}", "must be null or [lo, hi]")
    _require(_is_real(c.tol) and c.tol > 0, "check.tol", "must be positive")
    return cfg


def from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigurationError("configuration must be a JSON object")
    sections = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}
    for key in data:
        if key not in sections:
            raise ConfigurationError(f"unknown top-level key {key!r}", key)
    if "model" not in data:
        raise ConfigurationError("missing required section 'model'", "model")
    try:
        cfg = ExperimentConfig(
            model=_section(ModelConfig, data.get("model"), "model"),
            solver=_section(SolverSection, data.get("solver"), "solver"),
            baselines=_section(BaselineConfig, data.get("baselines"), "baselines"),
            outputs=_section(OutputConfig, data.get("outputs"), "outputs"),
            compare=_section(CompareConfig, data.get("compare"), "compare"),
            check=_section(CheckConfig, data.get("check"), "check"),
        )
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from exc
    return validate(cfg)


def load(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}", "config") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config {path} is not valid JSON: {exc}", "config") from exc
    return from_dict(data)
