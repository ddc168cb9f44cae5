import warnings

import numpy as np
import pytest

from tastas.errors import ConfigError
from tastas.numerics import ops
from tastas.numerics.tensor import Tensor
from tastas.sepnet import ModelConfig, StageConfig, TasTasModel, parse_preset
from tastas.sepnet.model import dual_path_block, encode, estimate_masks, init_params

TINY = ModelConfig(stage_blocks=(1,), num_filters=4, kernel_len=16, chunk_len=4, hidden_size=4)


def _tiny_two_stage():
    return ModelConfig(stage_blocks=(1, 1), num_filters=4, kernel_len=16, chunk_len=4, hidden_size=4)


# -- configuration -----------------------------------------------------------------


def test_preset_parsing():
    assert parse_preset("tastas-6").stage_blocks == (6,)
    assert parse_preset("tastas-6-6").stage_blocks == (6, 6)
    assert parse_preset("tastas-8-9").stage_blocks == (8, 9)
    assert not parse_preset("tastas-6-6").use_id_loss
    assert parse_preset("tastas-i-6-6").use_id_loss
    assert parse_preset("tastas-i-2-2").stage_blocks == (2, 2)


def test_preset_rejects_garbage():
    for bad in ("dprnn-6", "tastas", "tastas-i", "tastas-x-6"):
        with pytest.raises(ConfigError):
            parse_preset(bad)


def test_stage_config_invariants():
    with pytest.raises(ConfigError):
        StageConfig(kernel_len=16, stride=5)
    with pytest.raises(ConfigError):
        StageConfig(chunk_len=50, chunk_hop=20)
    with pytest.raises(ConfigError):
        StageConfig(num_blocks=0)


def test_three_stage_config_warns():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        ModelConfig(stage_blocks=(2, 2, 2))
    assert any("stages" in str(w.message) for w in caught)


def test_describe_matches_block_notation():
    assert _tiny_two_stage().describe() == "TasTas(1, 1)"
    cfg = parse_preset("tastas-i-6-6")
    assert cfg.describe() == "TasTas(I, 6, 6)"


# -- encoder ----------------------------------------------------------------------


def test_encoder_frame_count():
    cfg = ModelConfig(stage_blocks=(1,), num_filters=64)
    params = init_params(cfg, seed=0, dtype=np.float64)
    wave = Tensor(np.random.default_rng(0).uniform(-1, 1, 8000))
    rep = encode(params, cfg.stage(0), 0, [wave])
    assert rep.shape == (64, 999)


def test_stage_two_feature_width_triples():
    cfg = _tiny_two_stage()
    params = init_params(cfg, seed=0, dtype=np.float64)
    n = 328
    waves = [Tensor(np.random.default_rng(i).uniform(-1, 1, n)) for i in range(3)]
    rep = encode(params, cfg.stage(1), 1, waves)
    assert rep.shape[0] == 3 * cfg.num_filters


def test_zero_waveform_gives_zero_features():
    cfg = TINY
    params = init_params(cfg, seed=0, dtype=np.float64)
    rep = encode(params, cfg.stage(0), 0, [Tensor(np.zeros(328))])
    assert np.abs(rep.data).max() == 0.0


def test_encode_wrong_stream_count_errors():
    cfg = _tiny_two_stage()
    params = init_params(cfg, seed=0, dtype=np.float64)
    with pytest.raises(ConfigError, match="expects 3"):
        encode(params, cfg.stage(1), 1, [Tensor(np.zeros(328))])


# -- chunking round trip ------------------------------------------------------------


@pytest.mark.parametrize("frames,chunk_len", [(8, 4), (4, 4), (50, 50), (999, 50), (37, 10), (3, 4)])
def test_segment_merge_round_trip(frames, chunk_len):
    rng = np.random.default_rng(frames * 31 + chunk_len)
    x = Tensor(rng.uniform(-1, 1, (5, frames)))
    chunks, pad = ops.segment_chunks(x, chunk_len, chunk_len // 2)
    back = ops.merge_chunks(chunks, chunk_len // 2, frames, pad)
    assert np.abs(back.data - x.data).max() < 1e-9


def test_segment_examples_from_shape_algebra():
    x = Tensor(np.zeros((2, 8)))
    chunks, pad = ops.segment_chunks(x, 4, 2)
    assert chunks.shape == (2, 4, 3)
    assert pad == 0
    x = Tensor(np.zeros((2, 4)))
    chunks, pad = ops.segment_chunks(x, 4, 2)
    assert chunks.shape == (2, 4, 2)
    assert pad == 2


def test_merge_constant_tensor_no_edge_artifacts():
    x = Tensor(np.full((3, 4, 5), 2.5))
    out = ops.merge_chunks(x, 2, 12, 0)
    assert np.abs(out.data - 2.5).max() < 1e-12


# -- dual-path block ------------------------------------------------------------------


def test_block_preserves_shape():
    cfg = ModelConfig(stage_blocks=(1,), num_filters=8, hidden_size=6, chunk_len=6)
    params = init_params(cfg, seed=1, dtype=np.float64)
    x = Tensor(np.random.default_rng(2).uniform(-1, 1, (8, 6, 4)))
    out = dual_path_block(params, "stage0.block0", x)
    assert out.shape == (8, 6, 4)


def test_zero_weight_block_is_identity():
    cfg = ModelConfig(stage_blocks=(1,), num_filters=8, hidden_size=6, chunk_len=6)
    params = init_params(cfg, seed=1, dtype=np.float64)
    for name, tensor in params.items():
        if ".block0." in name and ".norm." not in name:
            tensor.data[...] = 0.0
    x = Tensor(np.random.default_rng(3).uniform(-1, 1, (8, 6, 4)))
    out = dual_path_block(params, "stage0.block0", x)
    assert np.abs(out.data - x.data).max() == 0.0


# -- mask head -------------------------------------------------------------------------


def test_masks_form_a_simplex():
    cfg = ModelConfig(stage_blocks=(1,), num_filters=8, hidden_size=6, chunk_len=6)
    params = init_params(cfg, seed=4, dtype=np.float64)
    rep = encode(params, cfg.stage(0), 0, [Tensor(np.random.default_rng(5).uniform(-1, 1, 500))])
    masks = estimate_masks(params, cfg.stage(0), 0, rep)
    assert masks.shape[0] == 2
    assert np.all(masks.data > 0)
    assert np.all(masks.data < 1)
    assert np.abs(masks.data.sum(axis=0) - 1.0).max() < 1e-9


# -- full model -------------------------------------------------------------------------


def test_stage_outputs_match_mixture_length():
    model = TasTasModel.initialize(_tiny_two_stage(), seed=0, dtype=np.float64)
    for n in (328, 500, 8000):
        outs = model.forward(np.random.default_rng(n).uniform(-1, 1, n))
        assert len(outs) == 2
        for stage in outs:
            assert len(stage) == 2
            for est in stage:
                assert est.shape == (n,)
                assert np.all(np.isfinite(est.data))


def test_forward_deterministic():
    model = TasTasModel.initialize(TINY, seed=7, dtype=np.float64)
    mix = np.random.default_rng(8).uniform(-1, 1, 400)
    a = model.forward(mix)[-1][0].data
    b = model.forward(mix)[-1][0].data
    assert np.array_equal(a, b)


def test_same_seed_same_params():
    p1 = init_params(TINY, seed=42, dtype=np.float32)
    p2 = init_params(TINY, seed=42, dtype=np.float32)
    assert p1.checksum() == p2.checksum()
    p3 = init_params(TINY, seed=43, dtype=np.float32)
    assert p1.checksum() != p3.checksum()


def test_separate_returns_final_stage_arrays():
    model = TasTasModel.initialize(_tiny_two_stage(), seed=0, dtype=np.float32)
    ests = model.separate(np.random.default_rng(1).uniform(-1, 1, 400))
    assert len(ests) == 2
    assert all(e.dtype == np.float64 for e in ests)
