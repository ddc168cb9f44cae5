"""Short-time Fourier analysis and weighted overlap-add resynthesis.

The analysis path here is plain numpy (complex output, used by the mask
oracle and feature plots). The differentiable twin used inside networks is
``numerics.ops.stft_ri``; both share the same framing rules so frame
counts always agree.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, DataError
from ..numerics.ops import frame_count, reflect_index_map
from .wavio import Waveform

DEFAULT_WINDOW_LEN = 512
DEFAULT_HOP = 128
_COVERAGE_FLOOR = 1e-8


def hann_window(window_len: int) -> np.ndarray:
    """Periodic Hann window (satisfies constant-overlap-add at hop = len/2^k)."""
    n = np.arange(window_len)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / window_len)


@dataclass(frozen=True)
class Spectrogram:
    """Complex STFT bins (frequency x frames) plus everything needed to invert."""

    bins: np.ndarray
    window_len: int
    hop: int
    window: np.ndarray
    original_len: int
    sample_rate_hz: int

    def __post_init__(self):
        if self.bins.shape[0] != self.window_len // 2 + 1:
            raise ConfigError(
                f"spectrogram has {self.bins.shape[0]} bins, window {self.window_len} implies {self.window_len // 2 + 1}"
            )

    @property
    def frames(self) -> int:
        return self.bins.shape[1]

    def magnitude(self) -> np.ndarray:
        return np.abs(self.bins)


def _validate_config(window_len: int, hop: int) -> None:
    if window_len < 2 or window_len & (window_len - 1):
        raise ConfigError(f"window_len must be a power of two, got {window_len}")
    if hop < 1 or window_len % hop:
        raise ConfigError(f"hop {hop} must divide window_len {window_len}")
    if hop == window_len:
        raise ConfigError("hop equal to window_len leaves no overlap to reconstruct from")


def _ola_window_sq(window: np.ndarray, hop: int, frames: int, padded_len: int) -> np.ndarray:
    wsq = window * window
    cov = np.zeros(padded_len)
    for t in range(frames):
        cov[t * hop : t * hop + len(window)] += wsq
    return cov


def stft(
    x: Waveform,
    window_len: int = DEFAULT_WINDOW_LEN,
    hop: int = DEFAULT_HOP,
) -> Spectrogram:
    """Hann-windowed STFT with reflect padding of window_len/2 on both ends."""
    _validate_config(window_len, hop)
    pad = window_len // 2
    n = len(x)
    if n <= pad:
        raise DataError(f"signal of {n} samples is too short for window {window_len}")
    window = hann_window(window_len)
    idx = reflect_index_map(n, pad)
    xp = x.samples[idx]
    frames = frame_count(n, window_len, hop)
    framed = np.lib.stride_tricks.sliding_window_view(xp, window_len)[::hop] * window
    spec = np.fft.rfft(framed, axis=1).T
    # reject configurations whose synthesis coverage would vanish somewhere
    cov = _ola_window_sq(window, hop, frames, len(xp))
    if cov[pad : pad + n].min() < _COVERAGE_FLOOR:
        raise ConfigError(
            f"window/hop ({window_len}/{hop}) does not cover the signal for reconstruction"
        )
    return Spectrogram(
        bins=spec,
        window_len=window_len,
        hop=hop,
        window=window,
        original_len=n,
        sample_rate_hz=x.sample_rate_hz,
    )


def istft(spec: Spectrogram) -> Waveform:
    """Weighted overlap-add inverse; exact for the analysis configurations above."""
    frames = spec.frames
    window_len, hop = spec.window_len, spec.hop
    pad = window_len // 2
    padded_len = (frames - 1) * hop + window_len
    segs = np.fft.irfft(spec.bins.T, n=window_len, axis=1) * spec.window
    acc = np.zeros(padded_len)
    for t in range(frames):
        acc[t * hop : t * hop + window_len] += segs[t]
    cov = _ola_window_sq(spec.window, hop, frames, padded_len)
    region = slice(pad, pad + spec.original_len)
    out = acc[region] / cov[region]
    return Waveform(out, sample_rate_hz=spec.sample_rate_hz)
