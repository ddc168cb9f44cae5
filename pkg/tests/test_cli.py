import numpy as np
import pytest

from tastas.audio import wav_read
from tastas.cli import main
from tastas.pipeline import read_manifest


def _checksum_corpus(root):
    import zlib

    crc = 0
    for manifest in sorted(root.glob("*.tsv")):
        crc = zlib.crc32(manifest.read_bytes(), crc)
        for record in read_manifest(manifest):
            crc = zlib.crc32(open(record.mix_path, "rb").read(), crc)
    return crc


def test_usage_error_exits_1(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["separate", "--ckpt", "x"])  # missing --in/--out
    assert exc.value.code == 1


def test_unknown_command_exits_1():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1


def test_synth_data_writes_corpus_and_is_deterministic(tmp_path):
    args = [
        "synth-data", "--speakers", "4", "--dur", "0.6", "--seed", "9",
        "--train-mixes", "3", "--dev-mixes", "2", "--test-mixes", "2",
    ]
    assert main(args + ["--out", str(tmp_path / "c1")]) == 0
    assert main(args + ["--out", str(tmp_path / "c2")]) == 0
    for split, count in (("train", 3), ("dev", 2), ("test", 2)):
        records = read_manifest(tmp_path / "c1" / f"{split}.tsv")
        assert len(records) == count
        for r in records:
            assert 0.0 <= r.snr_db <= 5.0
            assert r.speaker_ids[0] != r.speaker_ids[1]

    def strip_root(root):
        out = []
        for manifest in sorted(root.glob("*.tsv")):
            out.append(manifest.read_text().replace(str(root), "ROOT"))
        return out

    assert strip_root(tmp_path / "c1") == strip_root(tmp_path / "c2")
    import zlib

    wav_crcs = []
    for root in (tmp_path / "c1", tmp_path / "c2"):
        crc = 0
        for wav in sorted(root.rglob("*.wav")):
            crc = zlib.crc32(wav.read_bytes(), crc)
        wav_crcs.append(crc)
    assert wav_crcs[0] == wav_crcs[1]


def test_synth_data_too_few_speakers_exits_1(tmp_path):
    assert main(["synth-data", "--speakers", "1", "--out", str(tmp_path)]) == 1


def test_grad_check_command_passes(capsys):
    assert main(["grad-check", "--trials", "2", "--seed", "1", "--skip-model"]) == 0
    out = capsys.readouterr().out
    assert "gradient suite: PASS" in out
    assert "lstm_cell" in out


def test_grad_check_impossible_tolerance_fails(capsys):
    assert main(["grad-check", "--trials", "1", "--tol", "1e-30", "--skip-model"]) == 2
    assert "FAIL" in capsys.readouterr().out


@pytest.fixture(scope="module")
def cli_run(tmp_path_factory):
    """A tiny corpus plus one short training run, shared by the CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    corpus = root / "corpus"
    assert main([
        "synth-data", "--speakers", "4", "--dur", "0.5", "--seed", "4",
        "--train-mixes", "2", "--dev-mixes", "1", "--test-mixes", "2",
        "--out", str(corpus),
    ]) == 0
    run_dir = root / "run"
    assert main([
        "train-sep",
        "--train-manifest", str(corpus / "train.tsv"),
        "--dev-manifest", str(corpus / "dev.tsv"),
        "--out-dir", str(run_dir),
        "--model", "tastas-1",
        "--num-filters", "8", "--hidden-size", "8", "--chunk-len", "10",
        "--epochs-max", "1", "--seed", "0",
    ]) == 0
    return root


def test_train_sep_writes_checkpoints(cli_run):
    assert (cli_run / "run" / "last.ckpt").exists()
    assert (cli_run / "run" / "best.ckpt").exists()
    assert (cli_run / "run" / "train_report.tsv").exists()


def test_separate_command(cli_run, tmp_path):
    records = read_manifest(cli_run / "corpus" / "test.tsv")
    out = tmp_path / "est"
    assert main([
        "separate", "--ckpt", str(cli_run / "run" / "last.ckpt"),
        "--in", records[0].mix_path, "--out", str(out),
    ]) == 0
    mixture = wav_read(records[0].mix_path)
    for i in (1, 2):
        est = wav_read(out / f"est{i}.wav")
        assert len(est) == len(mixture)


def test_separate_on_silentish_input(cli_run, tmp_path):
    from tastas.audio import Waveform, wav_write

    quiet = tmp_path / "quiet.wav"
    wav_write(quiet, Waveform(np.full(4000, 1e-4)))
    out = tmp_path / "est_quiet"
    assert main([
        "separate", "--ckpt", str(cli_run / "run" / "last.ckpt"),
        "--in", str(quiet), "--out", str(out),
    ]) == 0
    assert (out / "est1.wav").exists()


def test_separate_corrupt_checkpoint_exits_2(cli_run, tmp_path, capsys):
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"garbage checkpoint bytes")
    records = read_manifest(cli_run / "corpus" / "test.tsv")
    assert main([
        "separate", "--ckpt", str(bad), "--in", records[0].mix_path, "--out", str(tmp_path / "o"),
    ]) == 2
    assert "magic" in capsys.readouterr().err


def test_eval_command_writes_table(cli_run, tmp_path):
    report = tmp_path / "eval.tsv"
    assert main([
        "eval", "--ckpt", str(cli_run / "run" / "last.ckpt"),
        "--manifest", str(cli_run / "corpus" / "test.tsv"),
        "--out", str(report),
    ]) == 0
    text = report.read_text()
    assert text.splitlines()[0] == "utt_id\tsi_sdri\tsdri\tperm\tid_loss\tpesq\testoi"
    assert "irm-oracle (mean)" in text
    assert "unsupported" in text


def test_eval_idempotent(cli_run, tmp_path):
    args = [
        "eval", "--ckpt", str(cli_run / "run" / "last.ckpt"),
        "--manifest", str(cli_run / "corpus" / "test.tsv"),
    ]
    assert main(args + ["--out", str(tmp_path / "e1.tsv")]) == 0
    assert main(args + ["--out", str(tmp_path / "e2.tsv")]) == 0
    assert (tmp_path / "e1.tsv").read_text() == (tmp_path / "e2.tsv").read_text()
