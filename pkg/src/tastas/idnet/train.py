"""Speaker classifier training: cross-entropy on fixed-length segments,
then freeze, keeping the best held-out parameters."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..audio.wavio import Waveform
from ..checkpoint import load_container, save_container
from ..errors import CheckpointError, DataError
from ..numerics import ops
from ..numerics.optim import AdamState, ParamSet, adam_step, clip_global_norm
from ..numerics.tensor import Tensor
from .model import IdNet, IdNetConfig, slice_segments

GRAD_CLIP = 5.0
MIN_SEGMENTS_PER_SPEAKER = 20


@dataclass
class IdNetTrainReport:
    epochs_run: int = 0
    train_loss: list[float] = field(default_factory=list)
    holdout_accuracy: list[float] = field(default_factory=list)
    best_accuracy: float = 0.0


def _segment_corpus(utterances, config: IdNetConfig):
    segments: list[tuple[np.ndarray, int]] = []
    labels_seen = set()
    for wave, label in utterances:
        if not 0 <= label < config.num_speakers:
            raise DataError(f"label {label} outside [0, {config.num_speakers})")
        labels_seen.add(label)
        for piece in slice_segments(np.asarray(wave.samples), config.segment_len):
            segments.append((piece.astype(np.float32), label))
    if len(labels_seen) < 2:
        raise DataError(f"need utterances from >= 2 speakers, got {len(labels_seen)}")
    counts = np.zeros(config.num_speakers, dtype=int)
    for _, label in segments:
        counts[label] += 1
    for label in range(config.num_speakers):
        if counts[label] == 0:
            raise DataError(f"speaker class {label} has zero segments")
        if counts[label] < MIN_SEGMENTS_PER_SPEAKER:
            warnings.warn(
                f"speaker class {label} has only {counts[label]} segments; "
                f"at least {MIN_SEGMENTS_PER_SPEAKER} recommended",
                stacklevel=3,
            )
    return segments


def _holdout_split(segments, rng: np.random.Generator, fraction: float):
    by_class: dict[int, list[int]] = {}
    for idx, (_, label) in enumerate(segments):
        by_class.setdefault(label, []).append(idx)
    train_idx, hold_idx = [], []
    for label in sorted(by_class):
        indices = np.array(by_class[label])
        rng.shuffle(indices)
        n_hold = max(1, int(round(fraction * len(indices))))
        hold_idx.extend(indices[:n_hold].tolist())
        train_idx.extend(indices[n_hold:].tolist())
    return sorted(train_idx), sorted(hold_idx)


def _accuracy(net: IdNet, segments, indices) -> float:
    hits = 0
    for i in indices:
        samples, label = segments[i]
        if net.classify_segment(samples) == label:
            hits += 1
    return hits / len(indices)


def train_idnet(
    utterances: list[tuple[Waveform, int]],
    config: IdNetConfig,
    seed: int = 0,
    epochs_max: int = 30,
    lr: float = 1e-3,
    batch_size: int = 8,
    holdout_fraction: float = 0.2,
    target_accuracy: float = 0.98,
) -> tuple[IdNet, IdNetTrainReport]:
    """Train on sliced segments, stop once held-out accuracy is good, freeze."""
    segments = _segment_corpus(utterances, config)
    rng = np.random.default_rng(seed)
    train_idx, hold_idx = _holdout_split(segments, rng, holdout_fraction)

    net = IdNet.initialize(config, seed=seed)
    state = AdamState.for_params(net.params)
    report = IdNetTrainReport()
    best_params = net.params.copy()

    order = np.array(train_idx)
    for epoch in range(epochs_max):
        rng.shuffle(order)
        epoch_loss = 0.0
        for start in range(0, len(order), batch_size):
            batch = order[start : start + batch_size]
            net.params.zero_grads()
            scale = 1.0 / len(batch)
            for i in batch:
                samples, label = segments[i]
                logits, _ = net.forward(Tensor(samples))
                nll = ops.neg(ops.getitem(ops.log_softmax(logits, axis=0), (label,)))
                loss = ops.mul(nll, ops.const(scale, dtype=logits.dtype))
                loss.backward()
                epoch_loss += float(nll.data)
            grads, _ = clip_global_norm(net.params.grads(), GRAD_CLIP)
            net.params, state = adam_step(net.params, grads, state, lr)
        report.train_loss.append(epoch_loss / len(order))
        accuracy = _accuracy(net, segments, hold_idx)
        report.holdout_accuracy.append(accuracy)
        report.epochs_run = epoch + 1
        if accuracy > report.best_accuracy:
            report.best_accuracy = accuracy
            best_params = net.params.copy()
        if accuracy >= target_accuracy:
            break

    net.params = best_params
    net.freeze()
    return net, report


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------


def save_idnet(path, net: IdNet, extras: dict | None = None, label_map: dict[str, int] | None = None) -> None:
    header = {
        "model": {
            "num_speakers": net.config.num_speakers,
            "segment_s": net.config.segment_s,
            "window_len": net.config.window_len,
            "hop": net.config.hop,
            "conv_channels": list(net.config.conv_channels),
            "embedding_dim": net.config.embedding_dim,
            "sample_rate_hz": net.config.sample_rate_hz,
        },
        "extras": dict(extras or {}),
        "frozen": net.frozen,
    }
    blobs = {f"param.{name}": tensor.data for name, tensor in net.params.items()}
    save_container(path, "idnet", header, blobs)
    if label_map:
        labels_path = Path(str(path) + ".labels")
        lines = [f"{name}\t{idx}" for name, idx in sorted(label_map.items(), key=lambda kv: kv[1])]
        labels_path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_idnet(path) -> IdNet:
    kind, header, blobs = load_container(path)
    if kind != "idnet":
        raise CheckpointError(f"{path}: container holds '{kind}', expected 'idnet'")
    m = header["model"]
    config = IdNetConfig(
        num_speakers=int(m["num_speakers"]),
        segment_s=float(m["segment_s"]),
        window_len=int(m["window_len"]),
        hop=int(m["hop"]),
        conv_channels=tuple(int(c) for c in m["conv_channels"]),
        embedding_dim=int(m["embedding_dim"]),
        sample_rate_hz=int(m["sample_rate_hz"]),
    )
    params = ParamSet()
    for name, arr in blobs.items():
        if name.startswith("param."):
            params.add(name[len("param.") :], Tensor(arr))
    if len(params) == 0:
        raise CheckpointError(f"{path}: no parameters in container")
    net = IdNet(config, params, frozen=bool(header.get("frozen", True)))
    return net
