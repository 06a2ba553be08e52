"""Flat ``key = value`` run configuration.

One setting per line, ``#`` starts a comment.  Unknown keys, duplicate keys
and malformed values are errors reported with their line number.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .datagen import NoisyDataset, make_dataset
from .trainer import TrainConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DataConfig:
    n: int
    p: int
    classes: int = 2
    sigma: float = 0.1
    delta: float = 0.0
    noise: str = "symmetric"
    exclude_true_class: bool = False
    data_seed: int = 0

    def build(self) -> NoisyDataset:
        return make_dataset(self.n, self.p, self.classes, self.sigma, self.delta, self.data_seed,
                            self.noise, self.exclude_true_class)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class RunConfig:
    train: TrainConfig
    data: DataConfig

    def to_dict(self) -> dict:
        return {"train": self.train.to_dict(), "data": self.data.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        return cls(TrainConfig(**d["train"]), DataConfig(**d["data"]))


# config key -> TrainConfig field name
_TRAIN_KEYS = {f.name: f.name for f in fields(TrainConfig)}
_TRAIN_KEYS["lambda"] = _TRAIN_KEYS.pop("lam")
_DATA_KEYS = {f.name: f.name for f in fields(DataConfig)}
REQUIRED = ("mode", "n", "p")

_INT = {"epochs", "hidden", "seed", "seed2", "n", "p", "classes", "data_seed",
        "ramp_steps", "gamma_ramp_steps", "batch_size"}
_FLOAT = {"eta", "lambda", "beta", "gamma", "alpha_mixup", "init_radius", "sigma", "delta"}
_BOOL = {"mixup", "refine_labels", "exclude_true_class"}
_OPTIONAL = {"ramp_steps", "gamma_ramp_steps", "seed2", "batch_size"}


def _convert(key: str, raw: str):
    low = raw.lower()
    if key in _OPTIONAL and low in ("none", "full", ""):
        return None
    if key in _INT:
        return int(raw)
    if key in _FLOAT:
        return float(raw)
    if key in _BOOL:
        if low in ("true", "yes", "1"):
            return True
        if low in ("false", "no", "0"):
            return False
        raise ValueError(f"expected true/false, got {raw!r}")
    return raw


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    values: dict[str, object] = {}
    lines: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _TRAIN_KEYS and key not in _DATA_KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r} (first set on line {lines[key]})")
        try:
            values[key] = _convert(key, raw.strip("\"'"))
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from None
        lines[key] = lineno
    for key in REQUIRED:
        if key not in values:
            raise ConfigError(f"{source}: missing required field {key!r}")
    train_kw = {_TRAIN_KEYS[k]: v for k, v in values.items() if k in _TRAIN_KEYS}
    data_kw = {k: v for k, v in values.items() if k in _DATA_KEYS}
    try:
        return RunConfig(TrainConfig(**train_kw), DataConfig(**data_kw))
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    return parse_config(text, str(path))


def dumps_config(cfg: RunConfig) -> str:
    out = []
    for k, v in cfg.train.to_dict().items():
        out.append(f"{'lambda' if k == 'lam' else k} = {_fmt(v)}")
    for k, v in cfg.data.to_dict().items():
        out.append(f"{k} = {_fmt(v)}")
    return "\n".join(out) + "\n"


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)
