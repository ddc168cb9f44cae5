"""Speaker-identity network.

A differentiable spectral front end (windowed DFT, log magnitude) feeds a
small stack of 3x3 conv + pool layers, global average pooling, a linear
embedding layer, and a linear classifier head. After training the network
is frozen; the embedding (the layer before the head) is the speaker
identity vector used by the consistency loss, and gradients then flow only
into the waveform being embedded.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..audio.stft import DEFAULT_HOP, DEFAULT_WINDOW_LEN, hann_window
from ..audio.wavio import DEFAULT_SAMPLE_RATE, Waveform
from ..errors import ConfigError, DataError
from ..numerics import ops
from ..numerics.optim import ParamSet, uniform_fan_in
from ..numerics.tensor import Tensor


@dataclass(frozen=True)
class IdNetConfig:
    num_speakers: int
    segment_s: float = 0.5
    window_len: int = DEFAULT_WINDOW_LEN
    hop: int = DEFAULT_HOP
    conv_channels: tuple[int, ...] = (16, 32, 64, 64)
    embedding_dim: int = 128
    sample_rate_hz: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        if self.num_speakers < 2:
            raise ConfigError(f"speaker classifier needs >= 2 classes, got {self.num_speakers}")
        if self.segment_len < self.window_len:
            raise ConfigError(
                f"segment of {self.segment_len} samples yields under two frames for window {self.window_len}"
            )

    @property
    def segment_len(self) -> int:
        return int(round(self.segment_s * self.sample_rate_hz))


@dataclass(frozen=True)
class SpeakerEmbedding:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(v)):
            raise DataError("embedding contains non-finite values")
        object.__setattr__(self, "values", v)

    def distance(self, other: "SpeakerEmbedding") -> float:
        return float(np.mean((self.values - other.values) ** 2))


def init_idnet_params(config: IdNetConfig, seed: int, dtype=np.float32) -> ParamSet:
    rng = np.random.default_rng(seed)
    params = ParamSet()
    in_ch = 1
    for i, out_ch in enumerate(config.conv_channels):
        params.add(f"conv{i}.weight", uniform_fan_in(rng, (out_ch, in_ch, 3, 3), in_ch * 9, dtype))
        params.add(f"conv{i}.prelu", Tensor(np.full((1,), 0.25, dtype=dtype)))
        in_ch = out_ch
    params.add("embed.weight", uniform_fan_in(rng, (config.embedding_dim, in_ch), in_ch, dtype))
    params.add("embed.bias", Tensor(np.zeros(config.embedding_dim, dtype=dtype)))
    params.add("head.weight", uniform_fan_in(rng, (config.num_speakers, config.embedding_dim), config.embedding_dim, dtype))
    params.add("head.bias", Tensor(np.zeros(config.num_speakers, dtype=dtype)))
    return params


class IdNet:
    """Config + parameters + frozen flag."""

    def __init__(self, config: IdNetConfig, params: ParamSet, frozen: bool = False):
        self.config = config
        self.params = params
        self.frozen = frozen
        self._window = hann_window(config.window_len)
        if frozen:
            self._apply_freeze()

    @staticmethod
    def initialize(config: IdNetConfig, seed: int) -> "IdNet":
        return IdNet(config, init_idnet_params(config, seed))

    def _apply_freeze(self) -> None:
        for _, tensor in self.params.items():
            tensor.requires_grad = False

    def freeze(self) -> "IdNet":
        self.frozen = True
        self._apply_freeze()
        return self

    def _prep_segment(self, segment: Tensor) -> Tensor:
        n = self.config.segment_len
        if segment.ndim != 1 or segment.shape[0] == 0:
            raise DataError(f"segment must be a non-empty 1-D signal, got shape {segment.shape}")
        if segment.shape[0] > n:
            raise DataError(f"segment of {segment.shape[0]} samples exceeds the {n}-sample window")
        if segment.shape[0] < n:
            pad = ops.const(np.zeros(n - segment.shape[0]), dtype=segment.dtype)
            segment = ops.concat([segment, pad], axis=0)
        return segment

    def forward(self, segment: Tensor) -> tuple[Tensor, Tensor]:
        """(logits, embedding) for one fixed-length segment."""
        segment = self._prep_segment(segment)
        spec = ops.stft_ri(segment, self._window, self.config.hop)  # (2, bins, frames)
        power = ops.add(
            ops.add(
                ops.mul(ops.getitem(spec, (0,)), ops.getitem(spec, (0,))),
                ops.mul(ops.getitem(spec, (1,)), ops.getitem(spec, (1,))),
            ),
            ops.const(1e-12, dtype=segment.dtype),
        )
        magnitude = ops.sqrt(power)
        x = ops.log(ops.add(magnitude, ops.const(1.0, dtype=segment.dtype)))
        x = ops.reshape(x, (1, *x.shape))
        for i in range(len(self.config.conv_channels)):
            x = ops.conv2d(x, self.params[f"conv{i}.weight"], padding=1)
            x = ops.prelu(x, self.params[f"conv{i}.prelu"])
            x = ops.max_pool2d(x, 2)
        pooled = ops.tmean(x, axis=(1, 2))  # (C,)
        embedding = ops.add(ops.linear(self.params["embed.weight"], pooled), self.params["embed.bias"])
        logits = ops.add(ops.linear(self.params["head.weight"], embedding), self.params["head.bias"])
        return logits, embedding

    # -- embedding extraction -------------------------------------------------

    def embed_segments_graph(self, wave: Tensor) -> Tensor:
        """Mean embedding over non-overlapping segments; differentiable in the wave."""
        seg_len = self.config.segment_len
        n = wave.shape[0]
        count = max(1, -(-n // seg_len))
        total = None
        for i in range(count):
            piece = ops.getitem(wave, (slice(i * seg_len, min(n, (i + 1) * seg_len)),))
            _, emb = self.forward(piece)
            total = emb if total is None else ops.add(total, emb)
        return ops.mul(total, ops.const(1.0 / count, dtype=wave.dtype))

    def embed_utterance(self, wave: Waveform) -> SpeakerEmbedding:
        """Frozen-path embedding of a whole utterance (no graph kept)."""
        emb = self.embed_segments_graph(Tensor(np.asarray(wave.samples, dtype=np.float32)))
        return SpeakerEmbedding(values=np.asarray(emb.data, dtype=np.float64))

    def classify_segment(self, segment_samples: np.ndarray) -> int:
        logits, _ = self.forward(Tensor(np.asarray(segment_samples, dtype=np.float32)))
        return int(np.argmax(logits.data))


def slice_segments(samples: np.ndarray, segment_len: int) -> list[np.ndarray]:
    """Non-overlapping fixed-length windows; the trailing partial one is zero-padded."""
    if len(samples) == 0:
        raise DataError("cannot slice an empty signal")
    out = []
    for start in range(0, len(samples), segment_len):
        piece = samples[start : start + segment_len]
        if len(piece) < segment_len:
            piece = np.concatenate([piece, np.zeros(segment_len - len(piece))])
        out.append(piece)
    return out
