"""Flat ``key = value`` experiment configuration with typed validation."""
from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, fields

from .encoder import ShortTermConfig
from .evaluator import DEFAULT_TOPN
from .fusion import LossConfig
from .model import ModelConfig
from .refine import RefineConfig
from .temporal import TemporalConfig
from .trainer import TrainConfig


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    dataset: str = ""
    T: int = 4  # input intervals; the log is sliced into T + 1
    # refinement
    beta: float = 0.5
    min_sim: float = 0.7
    max_aug_per_user: int = 10
    min_items_for_detection: int = 3
    sim_top_k: int | None = 50
    # encoder / temporal
    d: int = 64
    layers: int = 2
    attn_layers: int = 2
    n_heads: int = 2
    max_seq: int = 30
    edge_dropout: float = 0.0
    message_dropout: float = 0.0
    # loss / training
    lambda1: float = 0.1
    lambda2: float = 1e-2
    n_pr: int = 4
    epochs: int = 100
    batch_size: int = 128
    lr: float = 1e-3
    lr_decay: float = 0.96
    seed: int = 0
    eval_every: int = 0
    patience: int = 10
    topn: tuple = DEFAULT_TOPN
    sampled_negatives: int | None = None
    # ablations
    disable_refine: bool = False
    disable_mean_branch: bool = False
    disable_gru_branch: bool = False
    fixed_gate_value: float | None = None
    detach_gate: bool = False
    out: str = "out"

    def __post_init__(self):
        if not 1 <= self.T:
            raise ConfigError(f"T must be >= 1, got {self.T}")
        try:
            self.refine_config(), self.model_config(), self.loss_config(), self.train_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if any(n < 1 for n in self.topn):
            raise ConfigError("topn values must be >= 1")

    def refine_config(self) -> RefineConfig:
        return RefineConfig(self.beta, self.min_sim, self.max_aug_per_user,
                            self.min_items_for_detection, self.sim_top_k)

    def model_config(self) -> ModelConfig:
        return ModelConfig(ShortTermConfig(self.d, self.layers, self.edge_dropout, self.message_dropout),
                           TemporalConfig(self.n_heads, self.attn_layers, self.max_seq),
                           fixed_gate_value=self.fixed_gate_value,
                           disable_mean_branch=self.disable_mean_branch,
                           disable_gru_branch=self.disable_gru_branch,
                           detach_gate=self.detach_gate)

    def loss_config(self) -> LossConfig:
        return LossConfig(self.lambda1, self.lambda2, self.n_pr)

    def train_config(self) -> TrainConfig:
        return TrainConfig(self.epochs, self.batch_size, self.lr, self.lr_decay, self.seed,
                           self.eval_every, self.patience, tuple(self.topn))

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_text(self) -> str:
        lines = []
        for f in _public_fields():
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            elif v is None:
                v = "none"
            elif isinstance(v, bool):
                v = str(v).lower()
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


def _public_fields():
    return fields(ExperimentConfig)


_OPTIONAL_INT = {"sim_top_k", "sampled_negatives"}
_OPTIONAL_FLOAT = {"fixed_gate_value"}


def _coerce(name: str, raw: str, default):
    low = raw.strip().lower()
    if name in _OPTIONAL_INT | _OPTIONAL_FLOAT and low in ("none", "null", ""):
        return None
    if name in _OPTIONAL_INT:
        return int(raw)
    if name in _OPTIONAL_FLOAT:
        return float(raw)
    if isinstance(default, bool):
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    if isinstance(default, tuple):
        return tuple(int(x) for x in raw.split(",") if x.strip())
    return raw.strip()


def parse_config(text: str, **overrides) -> ExperimentConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment. Unknown keys are errors."""
    defaults = {f.name: f.default for f in _public_fields()}
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected `key = value`, got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in defaults:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _coerce(key, raw, defaults[key])
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**values)


def load_config(path: str | os.PathLike, **overrides) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    cfg = parse_config(text, **overrides)
    if cfg.dataset and not os.path.isabs(cfg.dataset):
        # dataset paths are relative to the config file
        cfg.dataset = os.path.join(os.path.dirname(os.path.abspath(path)), cfg.dataset)
    return cfg
