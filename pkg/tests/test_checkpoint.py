import struct

import numpy as np
import pytest

from tastas.checkpoint import MAGIC, load_container, save_container
from tastas.errors import CheckpointError
from tastas.idnet import IdNet, IdNetConfig, load_idnet, save_idnet
from tastas.numerics.optim import AdamState
from tastas.pipeline.train import load_sep_checkpoint, save_sep_checkpoint
from tastas.sepnet import ModelConfig, TasTasModel


def test_container_round_trip(tmp_path):
    path = tmp_path / "c.ckpt"
    rng = np.random.default_rng(0)
    blobs = {
        "param.a": rng.standard_normal((3, 4)).astype(np.float32),
        "param.b": rng.standard_normal(7).astype(np.float32),
        "scalarish": np.float32(2.5) * np.ones((), dtype=np.float32),
    }
    header = {"model": {"x": 1}, "extras": {"note": "hi"}}
    save_container(path, "sepnet", header, blobs)
    kind, header2, blobs2 = load_container(path)
    assert kind == "sepnet"
    assert header2["model"] == {"x": 1}
    assert header2["extras"] == {"note": "hi"}
    for name in blobs:
        assert np.array_equal(blobs[name], blobs2[name])


def test_container_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b"NOPE" + b"\x00" * 32)
    with pytest.raises(CheckpointError, match="magic"):
        load_container(path)


def test_container_rejects_unknown_version(tmp_path):
    path = tmp_path / "v9.ckpt"
    path.write_bytes(MAGIC + struct.pack("<I", 9) + b"\x00" * 16)
    with pytest.raises(CheckpointError, match="version 9"):
        load_container(path)


def test_container_rejects_truncation(tmp_path):
    path = tmp_path / "t.ckpt"
    save_container(path, "sepnet", {}, {"param.w": np.ones(100, dtype=np.float32)})
    data = path.read_bytes()
    path.write_bytes(data[: len(data) - 50])
    with pytest.raises(CheckpointError, match="truncated"):
        load_container(path)


def test_sep_checkpoint_round_trip(tmp_path):
    config = ModelConfig(stage_blocks=(1, 1), num_filters=4, kernel_len=16, chunk_len=4, hidden_size=4)
    model = TasTasModel.initialize(config, seed=3, dtype=np.float32)
    adam = AdamState.for_params(model.params)
    adam.m = {n: np.full_like(t.data, 0.25) for n, t in model.params.items()}
    adam = AdamState(step=17, m=adam.m, v=adam.v, beta1=0.9, beta2=0.999, eps=1e-8)
    extras = {"epoch": 4, "best_dev_loss": -3.5, "restart_halvings": 1,
              "epoch_in_restart": 2, "worse_streak": 0, "rng_state": "{}"}
    path = tmp_path / "sep.ckpt"
    save_sep_checkpoint(path, model, adam, extras)
    model2, adam2, extras2 = load_sep_checkpoint(path)
    assert model2.config == config
    assert model2.params.checksum() == model.params.checksum()
    assert adam2.step == 17
    for n in adam.m:
        assert np.array_equal(adam.m[n], adam2.m[n])
    assert extras2["epoch"] == 4
    assert extras2["best_dev_loss"] == -3.5


def test_sep_loader_rejects_idnet_container(tmp_path):
    config = IdNetConfig(num_speakers=2, window_len=64, hop=16, segment_s=0.05,
                         conv_channels=(4,), embedding_dim=8, sample_rate_hz=8000)
    net = IdNet.initialize(config, seed=0)
    path = tmp_path / "id.ckpt"
    save_idnet(path, net)
    with pytest.raises(CheckpointError, match="expected 'sepnet'"):
        load_sep_checkpoint(path)


def test_idnet_checkpoint_round_trip_with_labels(tmp_path):
    config = IdNetConfig(num_speakers=3, window_len=64, hop=16, segment_s=0.05,
                         conv_channels=(4, 8), embedding_dim=16, sample_rate_hz=8000)
    net = IdNet.initialize(config, seed=1).freeze()
    path = tmp_path / "id.ckpt"
    save_idnet(path, net, extras={"best_accuracy": 0.99}, label_map={"alice": 0, "bob": 1, "eve": 2})
    net2 = load_idnet(path)
    assert net2.frozen
    assert net2.config == config
    assert net2.params.checksum() == net.params.checksum()
    labels = (tmp_path / "id.ckpt.labels").read_text().strip().splitlines()
    assert labels == ["alice\t0", "bob\t1", "eve\t2"]
