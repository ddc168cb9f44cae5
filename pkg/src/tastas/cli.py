"""Command-line entry point.

Commands: synth-data, train-idnet, train-sep, finetune, separate, eval,
grad-check. Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import TasTasError
from .pipeline.config import TrainConfig, load_train_config


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        sys.exit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tastas", description="Multi-stage dual-path BiLSTM speech separation")
    parser.add_argument("--version", action="version", version=f"tastas {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth-data", help="generate a toy mixture corpus with manifests")
    p.add_argument("--speakers", type=int, default=8)
    p.add_argument("--utts-per", type=int, default=25, help="source utterances per speaker (train split)")
    p.add_argument("--dur", type=float, default=1.0, help="utterance duration, seconds")
    p.add_argument("--snr-lo", type=float, default=0.0)
    p.add_argument("--snr-hi", type=float, default=5.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--train-mixes", type=int, default=0, help="override mixture count for the train split")
    p.add_argument("--dev-mixes", type=int, default=0)
    p.add_argument("--test-mixes", type=int, default=0)
    p.add_argument("--from-wavs", default="", help="slice labeled WAV subfolders instead of toy speakers")

    p = sub.add_parser("train-idnet", help="train and freeze the speaker classifier")
    p.add_argument("--config", default="")
    p.add_argument("--train-manifest", default="")
    p.add_argument("--out-dir", default="")
    p.add_argument("--speakers", type=int, default=0)
    p.add_argument("--epochs-max", type=int, default=0)
    p.add_argument("--seed", type=int, default=-1)

    for name, phase in (("train-sep", "sep"), ("finetune", "finetune")):
        p = sub.add_parser(name, help=f"run the {phase} training phase")
        p.add_argument("--config", default="")
        p.add_argument("--train-manifest", default="")
        p.add_argument("--dev-manifest", default="")
        p.add_argument("--out-dir", default="")
        p.add_argument("--model", default="", help="preset such as tastas-6, tastas-6-6, tastas-i-6-6, tastas-8-9")
        p.add_argument("--epochs-max", type=int, default=0)
        p.add_argument("--batch-size", type=int, default=0)
        p.add_argument("--seed", type=int, default=-1)
        p.add_argument("--initial-lr", type=float, default=0.0)
        p.add_argument("--num-filters", type=int, default=0)
        p.add_argument("--hidden-size", type=int, default=0)
        p.add_argument("--chunk-len", type=int, default=0)
        p.add_argument("--resume", default="")
        if phase == "finetune":
            p.add_argument("--sep-ckpt", default="")
            p.add_argument("--idnet-ckpt", default="")
            p.add_argument("--id-weight", type=float, default=-1.0)

    p = sub.add_parser("separate", help="separate one mixture WAV with a trained model")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="evaluate a checkpoint over a test manifest")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-irm", action="store_true", help="skip the oracle mask reference row")
    p.add_argument("--idnet-ckpt", default="", help="include identity-loss column using this frozen network")

    p = sub.add_parser("grad-check", help="finite-difference verification of all primitives")
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--skip-model", action="store_true", help="primitives only, skip the end-to-end model check")
    return parser


# ---------------------------------------------------------------------------
# command bodies
# ---------------------------------------------------------------------------


def _cmd_synth_data(args) -> int:
    from .pipeline.data import slice_wav_folder, synth_mixture_corpus

    out = Path(args.out)
    if args.from_wavs:
        utterances, label_map = slice_wav_folder(args.from_wavs, out / "utterances", args.dur)
        lines = [f"{name}\t{idx}" for name, idx in label_map.items()]
        (out / "speakers.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
        print(f"sliced {len(utterances)} utterances from {len(label_map)} speakers into {out}")
        return 0
    if args.speakers < 2:
        print("error: --speakers must be at least 2", file=sys.stderr)
        return 1
    per_split = {
        "train": args.train_mixes or (args.speakers * args.utts_per) // 2,
        "dev": args.dev_mixes or max(2, (args.speakers * args.utts_per) // 16),
        "test": args.test_mixes or max(2, (args.speakers * args.utts_per) // 8),
    }
    for split, count in per_split.items():
        records = synth_mixture_corpus(
            out,
            split,
            num_mixtures=count,
            num_speakers=args.speakers,
            duration_s=args.dur,
            snr_lo=args.snr_lo,
            snr_hi=args.snr_hi,
            seed=args.seed,
        )
        print(f"{split}: {len(records)} mixtures -> {out / (split + '.tsv')}")
    return 0


def _load_config(args, phase: str) -> TrainConfig:
    overrides: dict = {"phase": phase}
    mapping = {
        "train_manifest": getattr(args, "train_manifest", ""),
        "dev_manifest": getattr(args, "dev_manifest", ""),
        "out_dir": getattr(args, "out_dir", ""),
        "model": getattr(args, "model", ""),
        "sep_ckpt": getattr(args, "sep_ckpt", ""),
        "idnet_ckpt": getattr(args, "idnet_ckpt", ""),
    }
    for key, value in mapping.items():
        if value:
            overrides[key] = value
    numeric = {
        "epochs_max": getattr(args, "epochs_max", 0),
        "batch_size": getattr(args, "batch_size", 0),
        "num_filters": getattr(args, "num_filters", 0),
        "hidden_size": getattr(args, "hidden_size", 0),
        "chunk_len": getattr(args, "chunk_len", 0),
        "num_speakers": getattr(args, "speakers", 0),
    }
    for key, value in numeric.items():
        if value:
            overrides[key] = value
    if getattr(args, "seed", -1) >= 0:
        overrides["seed"] = args.seed
    if getattr(args, "initial_lr", 0.0):
        overrides["initial_lr"] = args.initial_lr
    if getattr(args, "id_weight", -1.0) >= 0:
        overrides["id_weight"] = args.id_weight
    if args.config:
        return load_train_config(args.config, overrides)
    return TrainConfig(**overrides)


def _cmd_train(args, phase: str) -> int:
    from .pipeline.train import run_phase

    config = _load_config(args, phase)
    ckpt, rows = run_phase(config, resume_from=getattr(args, "resume", "") or None)
    print(f"{phase} phase complete: checkpoint at {ckpt} ({len(rows)} report rows)")
    return 0


def _cmd_separate(args) -> int:
    from .audio.wavio import Waveform, wav_read, wav_write
    from .pipeline.train import load_sep_checkpoint

    model, _, _ = load_sep_checkpoint(args.ckpt)
    mixture = wav_read(args.input)
    estimates = model.separate(mixture.samples)
    out_dir = Path(args.out)
    for i, est in enumerate(estimates, start=1):
        path = out_dir / f"est{i}.wav"
        wav_write(path, Waveform(np.clip(est, -1.0, 1.0), mixture.sample_rate_hz))
        print(path)
    return 0


def _cmd_eval(args) -> int:
    from .idnet.train import load_idnet
    from .pipeline.data import read_manifest
    from .pipeline.evaluate import evaluate, write_eval_table
    from .pipeline.train import load_sep_checkpoint

    model, _, _ = load_sep_checkpoint(args.ckpt)
    records = read_manifest(args.manifest)
    idnet = load_idnet(args.idnet_ckpt) if args.idnet_ckpt else None
    summary = evaluate(model, records, include_irm=not args.no_irm, idnet=idnet)
    write_eval_table(args.out, summary, model.config.describe())
    print(f"wrote {args.out}: mean SI-SDRi {summary.mean_si_sdri():+.2f} dB over {len(records)} utterances")
    return 0


def _cmd_grad_check(args) -> int:
    from .numerics.gradcheck import run_suite
    from .verify import tiny_model_check

    suite = run_suite(trials=args.trials, tolerance=args.tol, seed=args.seed)
    for line in suite.lines():
        print(line)
    ok = suite.passed
    if not args.skip_model:
        report = tiny_model_check(tolerance=max(args.tol, 1e-3), seed=args.seed)
        mark = "pass" if report.passed else "FAIL"
        print(
            f"{mark}  full-model          max_rel_err={report.max_rel_err:.3e}  "
            f"({report.param_count} parameters)"
        )
        ok = ok and report.passed
    print("gradient suite:", "PASS" if ok else "FAIL")
    return 0 if ok else 2


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "synth-data":
            return _cmd_synth_data(args)
        if args.command == "train-idnet":
            return _cmd_train(args, "idnet")
        if args.command == "train-sep":
            return _cmd_train(args, "sep")
        if args.command == "finetune":
            return _cmd_train(args, "finetune")
        if args.command == "separate":
            return _cmd_separate(args)
        if args.command == "eval":
            return _cmd_eval(args)
        if args.command == "grad-check":
            return _cmd_grad_check(args)
        return 1
    except TasTasError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
