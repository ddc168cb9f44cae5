"""Separator configuration and named presets."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

from ..errors import ConfigError


@dataclass(frozen=True)
class StageConfig:
    """Hyperparameters of one refinement stage."""

    num_filters: int = 64
    kernel_len: int = 16
    stride: int = 8
    chunk_len: int = 50
    chunk_hop: int = 25
    num_blocks: int = 6
    hidden_size: int = 64
    num_speakers: int = 2

    def __post_init__(self):
        if self.num_blocks < 1:
            raise ConfigError(f"num_blocks must be >= 1, got {self.num_blocks}")
        if self.stride < 1 or self.kernel_len % self.stride:
            raise ConfigError(f"stride {self.stride} must divide kernel_len {self.kernel_len}")
        if self.chunk_hop * 2 != self.chunk_len:
            raise ConfigError(f"chunk_hop {self.chunk_hop} must be chunk_len/2 ({self.chunk_len}/2)")
        if self.num_speakers < 2:
            raise ConfigError(f"num_speakers must be >= 2, got {self.num_speakers}")

    def input_streams(self, stage_index: int) -> int:
        """Waveforms entering the encoder: mixture alone, or estimates + mixture."""
        return 1 if stage_index == 0 else self.num_speakers + 1


@dataclass(frozen=True)
class ModelConfig:
    """Full multi-stage model description."""

    stage_blocks: tuple[int, ...] = (6,)
    num_filters: int = 64
    kernel_len: int = 16
    chunk_len: int = 50
    hidden_size: int = 64
    num_speakers: int = 2
    use_id_loss: bool = False

    def __post_init__(self):
        if not self.stage_blocks:
            raise ConfigError("model needs at least one stage")
        if len(self.stage_blocks) >= 3:
            warnings.warn(
                "three or more refinement stages cost proportionally more but have "
                "not shown gains over two stages",
                stacklevel=2,
            )
        for blocks in self.stage_blocks:
            if blocks < 1:
                raise ConfigError(f"stage block count must be >= 1, got {blocks}")

    @property
    def num_stages(self) -> int:
        return len(self.stage_blocks)

    def stage(self, index: int) -> StageConfig:
        return StageConfig(
            num_filters=self.num_filters,
            kernel_len=self.kernel_len,
            stride=self.kernel_len // 2,
            chunk_len=self.chunk_len,
            chunk_hop=self.chunk_len // 2,
            num_blocks=self.stage_blocks[index],
            hidden_size=self.hidden_size,
            num_speakers=self.num_speakers,
        )

    def describe(self) -> str:
        inner = ", ".join(str(b) for b in self.stage_blocks)
        return f"TasTas({'I, ' if self.use_id_loss else ''}{inner})"


def parse_preset(name: str, **overrides) -> ModelConfig:
    """Parse a preset like 'tastas-6', 'tastas-6-6', 'tastas-i-6-6', 'tastas-8-9'.

    The optional 'i' enables the identity-consistency loss; the remaining
    numbers are per-stage dual-path block counts. Width overrides
    (num_filters, hidden_size, ...) pass through as keyword arguments.
    """
    parts = name.strip().lower().split("-")
    if parts[0] != "tastas" or len(parts) < 2:
        raise ConfigError(f"unknown model preset '{name}'")
    rest = parts[1:]
    use_id = rest[0] == "i"
    if use_id:
        rest = rest[1:]
    if not rest:
        raise ConfigError(f"preset '{name}' names no stages")
    try:
        blocks = tuple(int(p) for p in rest)
    except ValueError as exc:
        raise ConfigError(f"preset '{name}' has non-numeric stage sizes") from exc
    return ModelConfig(stage_blocks=blocks, use_id_loss=use_id, **overrides)
