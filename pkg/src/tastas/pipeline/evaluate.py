"""Checkpoint evaluation over a test manifest.

Produces one tab-separated record per utterance plus mean/median summary
rows, including an oracle row from the ideal ratio mask when references
are available. Perceptual metric columns exist for table compatibility
but are marked unsupported.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import objectives
from ..audio.irm import irm_separate
from ..audio.wavio import Waveform
from ..errors import TasTasError
from ..idnet.model import IdNet
from ..sepnet.model import TasTasModel
from .data import ManifestRecord, load_example

UNSUPPORTED = "unsupported"
REPORT_HEADER = "utt_id\tsi_sdri\tsdri\tperm\tid_loss\tpesq\testoi"


@dataclass
class UtteranceResult:
    utt_id: str
    si_sdri: float | None
    sdri: float | None
    perm: tuple[int, ...] | None
    id_loss: float | None
    error: str = ""

    def row(self) -> str:
        if self.error:
            return f"{self.utt_id}\tERROR\t{self.error}"
        id_part = f"{self.id_loss:.6f}" if self.id_loss is not None else "-"
        perm_part = ",".join(str(p) for p in self.perm)
        return (
            f"{self.utt_id}\t{self.si_sdri:.4f}\t{self.sdri:.4f}\t{perm_part}\t{id_part}"
            f"\t{UNSUPPORTED}\t{UNSUPPORTED}"
        )


@dataclass
class EvalSummary:
    results: list[UtteranceResult]
    irm_results: list[UtteranceResult]

    def _clean(self, results) -> list[UtteranceResult]:
        return [r for r in results if not r.error]

    def mean_si_sdri(self) -> float:
        vals = [r.si_sdri for r in self._clean(self.results)]
        return float(np.mean(vals)) if vals else float("nan")

    def median_si_sdri(self) -> float:
        vals = [r.si_sdri for r in self._clean(self.results)]
        return float(np.median(vals)) if vals else float("nan")

    def mean_sdri(self) -> float:
        vals = [r.sdri for r in self._clean(self.results)]
        return float(np.mean(vals)) if vals else float("nan")

    def irm_mean_si_sdri(self) -> float:
        vals = [r.si_sdri for r in self._clean(self.irm_results)]
        return float(np.mean(vals)) if vals else float("nan")

    def irm_mean_sdri(self) -> float:
        vals = [r.sdri for r in self._clean(self.irm_results)]
        return float(np.mean(vals)) if vals else float("nan")

    def table(self, model_name: str) -> str:
        lines = [REPORT_HEADER]
        lines += [r.row() for r in self.results]
        lines.append("")
        lines.append("summary\tsi_sdri\tsdri\tpesq\testoi")
        lines.append(
            f"{model_name} (mean)\t{self.mean_si_sdri():.4f}\t{self.mean_sdri():.4f}"
            f"\t{UNSUPPORTED}\t{UNSUPPORTED}"
        )
        lines.append(
            f"{model_name} (median)\t{self.median_si_sdri():.4f}\t-\t{UNSUPPORTED}\t{UNSUPPORTED}"
        )
        if self.irm_results:
            lines.append(
                f"irm-oracle (mean)\t{self.irm_mean_si_sdri():.4f}\t{self.irm_mean_sdri():.4f}"
                f"\t{UNSUPPORTED}\t{UNSUPPORTED}"
            )
        return "\n".join(lines) + "\n"


def _eval_one(model: TasTasModel, record: ManifestRecord, idnet: IdNet | None) -> UtteranceResult:
    try:
        example = load_example(record)
        estimates = model.separate(example.mixture)
        _, perm_result = objectives.pit_loss(example.targets, estimates)
        perm = perm_result.perm
        id_val = None
        if idnet is not None:
            rate = example.sample_rate_hz
            est_emb = [idnet.embed_utterance(Waveform(e, rate)) for e in estimates]
            ref_emb = [idnet.embed_utterance(Waveform(t, rate)) for t in example.targets]
            id_val = objectives.id_loss(est_emb, ref_emb, perm)
        return UtteranceResult(
            utt_id=record.utt_id,
            si_sdri=objectives.si_sdri(example.mixture, example.targets, estimates, perm),
            sdri=objectives.sdri(example.mixture, example.targets, estimates, perm),
            perm=perm,
            id_loss=id_val,
        )
    except (TasTasError, OSError) as exc:
        return UtteranceResult(record.utt_id, None, None, None, None, error=str(exc))


def _eval_irm(record: ManifestRecord) -> UtteranceResult:
    try:
        example = load_example(record)
        rate = example.sample_rate_hz
        mixture = Waveform(example.mixture, rate)
        refs = [Waveform(t, rate) for t in example.targets]
        estimates = [w.samples for w in irm_separate(mixture, refs)]
        _, perm_result = objectives.pit_loss(example.targets, estimates)
        perm = perm_result.perm
        return UtteranceResult(
            utt_id=record.utt_id,
            si_sdri=objectives.si_sdri(example.mixture, example.targets, estimates, perm),
            sdri=objectives.sdri(example.mixture, example.targets, estimates, perm),
            perm=perm,
            id_loss=None,
        )
    except (TasTasError, OSError) as exc:
        return UtteranceResult(record.utt_id, None, None, None, None, error=str(exc))


def worker_count() -> int:
    raw = os.environ.get("TASTAS_THREADS", "0")
    try:
        return max(0, int(raw))
    except ValueError:
        return 0


def evaluate(
    model: TasTasModel,
    records: list[ManifestRecord],
    include_irm: bool = True,
    idnet: IdNet | None = None,
) -> EvalSummary:
    """Deterministic metrics over a manifest; bad utterances become error rows."""
    workers = worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda r: _eval_one(model, r, idnet), records))
            irm_results = list(pool.map(_eval_irm, records)) if include_irm else []
    else:
        results = [_eval_one(model, r, idnet) for r in records]
        irm_results = [_eval_irm(r) for r in records] if include_irm else []
    return EvalSummary(results=results, irm_results=irm_results)


def write_eval_table(path, summary: EvalSummary, model_name: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(summary.table(model_name), encoding="utf-8")
