"""Training configuration: dataclass plus flat key=value config files."""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from ..errors import ConfigError
from ..sepnet.config import ModelConfig, parse_preset

PHASES = ("idnet", "sep", "finetune")


@dataclass
class TrainConfig:
    phase: str = "sep"
    epochs_max: int = 100
    batch_size: int = 1
    initial_lr: float = 0.001
    decay_factor: float = 0.98
    decay_every_epochs: int = 2
    patience: int = 2
    max_restarts: int = 3
    id_weight: float = 0.1
    seed: int = 0
    train_manifest: str = ""
    dev_manifest: str = ""
    test_manifest: str = ""
    model: str = "tastas-6-6"
    num_filters: int = 64
    kernel_len: int = 16
    chunk_len: int = 50
    hidden_size: int = 64
    num_speakers: int = 2
    use_id_loss: bool = False
    sep_ckpt: str = ""
    idnet_ckpt: str = ""
    out_dir: str = "runs"
    early_stop_dev_si_sdri: float = 0.0  # 0 disables
    idnet_segment_s: float = 0.5
    idnet_embedding_dim: int = 128

    def __post_init__(self):
        if self.phase not in PHASES:
            raise ConfigError(f"phase must be one of {PHASES}, got '{self.phase}'")
        if self.batch_size not in (1, 2, 3):
            raise ConfigError(f"batch_size must be 1, 2, or 3, got {self.batch_size}")
        if self.phase == "finetune" and not self.idnet_ckpt:
            raise ConfigError("finetune phase requires idnet_ckpt (a frozen speaker network)")

    def model_config(self) -> ModelConfig:
        cfg = parse_preset(
            self.model,
            num_filters=self.num_filters,
            kernel_len=self.kernel_len,
            chunk_len=self.chunk_len,
            hidden_size=self.hidden_size,
            num_speakers=self.num_speakers,
        )
        if self.use_id_loss and not cfg.use_id_loss:
            cfg = replace(cfg, use_id_loss=True)
        return cfg


_BOOL_STRINGS = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


def _convert(raw: str, target_type):
    raw = raw.strip()
    if target_type is bool:
        if raw.lower() not in _BOOL_STRINGS:
            raise ConfigError(f"expected a boolean, got '{raw}'")
        return _BOOL_STRINGS[raw.lower()]
    if target_type is int:
        return int(raw)
    if target_type is float:
        return float(raw)
    return raw


def load_train_config(path, overrides: dict | None = None) -> TrainConfig:
    """Parse `key=value` lines (UTF-8, '#' comments); every field is addressable."""
    known = {f.name: f.type for f in fields(TrainConfig)}
    types = {f.name: type(getattr(TrainConfig(), f.name)) for f in fields(TrainConfig)}
    values: dict = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got '{stripped}'")
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if key not in known:
            raise ConfigError(f"{path}:{lineno}: unknown config key '{key}'")
        try:
            values[key] = _convert(raw, types[key])
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for '{key}': {exc}") from exc
    if overrides:
        values.update(overrides)
    return TrainConfig(**values)
