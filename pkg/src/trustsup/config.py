"""Experiment configuration: one JSON document drives gen, train, eval, bench.

Sections (all optional, defaults below): ``synth`` for the activation
generator, ``train`` for supervisor training, ``trust`` for the memory and
threshold, ``loop`` for evaluation, ``features`` for the toy-ensemble feature
world used by the active mode and the bench, ``paths`` for artifact locations,
plus a top-level ``seed``. Unknown keys anywhere are rejected by name.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

__all__ = ["ExperimentConfig", "load_config"]


@dataclass
class SynthSection:
    classes: int = 21
    models: int = 7
    train_samples: int = 10000
    test_samples: int = 2000
    correct_weights: list | None = None
    alpha_correct: float = 12.0
    alpha_incorrect: float = 1.0
    confusion: float = 0.0
    groups: int = 0
    group_profiles: list | None = None


@dataclass
class TrainSection:
    learning_rate: float = 0.01
    minibatch_size: int = 64
    epochs: int = 200


@dataclass
class TrustSection:
    capacity: int = 8192
    tt_init: float | None = None  # default: models / 2
    tt_learning_rate: float = 0.01


@dataclass
class LoopSection:
    mode: str = "predicted"
    budget: float = 0.01
    budgets: list = field(default_factory=lambda: [0.01, 0.001])
    online_epochs: int = 10
    al_epochs: int = 5
    stream_order: str = "shuffled"


@dataclass
class FeatureSection:
    dim: int = 12
    classes: int = 6
    models: int = 7
    hidden: int = 16
    train_samples: int = 600
    supervisor_samples: int = 1200
    stream_samples: int = 2000
    class_sep: float = 2.0
    noise: float = 1.2
    drift: float = 12.0
    drift_at: float = 0.25
    ensemble_epochs: int = 30
    ensemble_lr: float = 0.01
    ensemble_batch: int = 32


@dataclass
class PathsSection:
    out: str = "runs/exp"
    data: str | None = None
    model: str | None = None
    ensemble: str | None = None


_SECTIONS = {
    "synth": SynthSection,
    "train": TrainSection,
    "trust": TrustSection,
    "loop": LoopSection,
    "features": FeatureSection,
    "paths": PathsSection,
}


@dataclass
class ExperimentConfig:
    seed: int = 0
    synth: SynthSection = field(default_factory=SynthSection)
    train: TrainSection = field(default_factory=TrainSection)
    trust: TrustSection = field(default_factory=TrustSection)
    loop: LoopSection = field(default_factory=LoopSection)
    features: FeatureSection = field(default_factory=FeatureSection)
    paths: PathsSection = field(default_factory=PathsSection)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config root must be a JSON object")
        unknown = set(doc) - set(_SECTIONS) - {"seed"}
        if unknown:
            raise ConfigError(f"unknown config key: {sorted(unknown)[0]!r}")
        cfg = cls()
        if "seed" in doc:
            cfg.seed = _expect_int(doc["seed"], "seed")
        for name, section_cls in _SECTIONS.items():
            if name in doc:
                setattr(cfg, name, _build_section(section_cls, doc[name], name))
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(doc)

    def validate(self) -> None:
        s, t, r, l, f = self.synth, self.train, self.trust, self.loop, self.features
        if s.classes < 1 or s.models < 1:
            raise ConfigError("synth.classes and synth.models must be >= 1")
        if s.train_samples < 0 or s.test_samples < 0:
            raise ConfigError("synth sample counts must be >= 0")
        if s.alpha_correct <= 0 or s.alpha_incorrect <= 0:
            raise ConfigError("synth Dirichlet concentrations must be > 0")
        if not 0.0 <= s.confusion <= 1.0:
            raise ConfigError("synth.confusion must be in [0, 1]")
        if s.correct_weights is not None:
            _check_weight_list(s.correct_weights, s.models, "synth.correct_weights")
        if s.group_profiles is not None:
            for i, p in enumerate(s.group_profiles):
                _check_group_profile(p, s.models, f"synth.group_profiles[{i}]")
        if t.learning_rate <= 0 or t.minibatch_size < 1 or t.epochs < 0:
            raise ConfigError("train section values must be positive")
        if r.capacity < 1:
            raise ConfigError("trust.capacity must be >= 1")
        if r.tt_learning_rate <= 0:
            raise ConfigError("trust.tt_learning_rate must be > 0")
        if l.mode not in ("maximal", "predicted", "online", "active"):
            raise ConfigError(f"loop.mode {l.mode!r} is not a known mode")
        if not 0.0 <= l.budget <= 1.0:
            raise ConfigError("loop.budget must be in [0, 1]")
        for b in l.budgets:
            if not 0.0 <= float(b) <= 1.0:
                raise ConfigError("loop.budgets entries must be in [0, 1]")
        if l.online_epochs < 1 or l.al_epochs < 1:
            raise ConfigError("loop epoch counts must be >= 1")
        if l.stream_order not in ("shuffled", "grouped"):
            raise ConfigError(f"loop.stream_order {l.stream_order!r} is not valid")
        if f.dim < 1 or f.classes < 2 or f.models < 1 or f.hidden < 1:
            raise ConfigError("features section sizes must be positive (classes >= 2)")
        if not 0.0 <= f.drift_at <= 1.0:
            raise ConfigError("features.drift_at must be in [0, 1]")
        if f.ensemble_lr <= 0 or f.ensemble_batch < 1 or f.ensemble_epochs < 0:
            raise ConfigError("features ensemble training values must be positive")

    def to_dict(self) -> dict:
        doc = {"seed": self.seed}
        for name in _SECTIONS:
            doc[name] = dataclasses.asdict(getattr(self, name))
        return doc

    def tt_init(self) -> float:
        if self.trust.tt_init is not None:
            return float(self.trust.tt_init)
        return self.synth.models / 2.0

    def tt_init_features(self) -> float:
        if self.trust.tt_init is not None:
            return float(self.trust.tt_init)
        return self.features.models / 2.0


def _build_section(section_cls, data, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"config section {where!r} must be a JSON object")
    fields = {f.name: f for f in dataclasses.fields(section_cls)}
    unknown = set(data) - set(fields)
    if unknown:
        raise ConfigError(f"unknown config key: {where}.{sorted(unknown)[0]}")
    kwargs = {}
    for key, value in data.items():
        kwargs[key] = _coerce(value, fields[key], f"{where}.{key}")
    return section_cls(**kwargs)


def _coerce(value, field_info, where: str):
    hint = field_info.type
    if value is None:
        return None
    if hint in ("int",):
        return _expect_int(value, where)
    if hint in ("float", "float | None"):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number")
        return float(value)
    if hint in ("str", "str | None"):
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string")
        return value
    if hint in ("list", "list | None"):
        if not isinstance(value, list):
            raise ConfigError(f"{where} must be a list")
        return value
    raise ConfigError(f"{where}: unsupported value type")


def _expect_int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where} must be an integer")
    return value


def _check_group_profile(profile, models: int, where: str) -> None:
    if isinstance(profile, list):
        _check_weight_list(profile, models, where)
        return
    if not isinstance(profile, dict):
        raise ConfigError(f"{where} must be a weight list or a profile object")
    unknown = set(profile) - {"weights", "alpha_correct", "alpha_incorrect", "confusion"}
    if unknown:
        raise ConfigError(f"unknown config key: {where}.{sorted(unknown)[0]}")
    if profile.get("weights") is not None:
        _check_weight_list(profile["weights"], models, f"{where}.weights")
    for key in ("alpha_correct", "alpha_incorrect"):
        v = profile.get(key)
        if v is not None and (isinstance(v, bool) or not isinstance(v, (int, float)) or v <= 0):
            raise ConfigError(f"{where}.{key} must be a positive number")
    conf = profile.get("confusion")
    if conf is not None and (isinstance(conf, bool) or not isinstance(conf, (int, float))
                             or not 0.0 <= conf <= 1.0):
        raise ConfigError(f"{where}.confusion must be in [0, 1]")


def _check_weight_list(weights, models: int, where: str) -> None:
    if not isinstance(weights, list) or len(weights) != models + 1:
        raise ConfigError(f"{where} needs {models + 1} weights (counts 0..{models})")
    total = 0.0
    for v in weights:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or v < 0:
            raise ConfigError(f"{where} entries must be non-negative numbers")
        total += float(v)
    if abs(total - 1.0) > 1e-9:
        raise ConfigError(f"{where} must sum to 1, got {total!r}")


def load_config(path) -> ExperimentConfig:
    return ExperimentConfig.from_file(path)
