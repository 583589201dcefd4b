"""Stream assembly: dimension algebra, attention behavior, determinism."""
import numpy as np
import numpy.testing as npt
import pytest

from clueai import tensor as T
from clueai.backbones import BackboneConfig
from clueai.errors import ConfigError, DimensionError, InputError
from clueai.gradcheck import gradient_check
from clueai.model import (ClueModel, ModelConfig, ModelInputs, RECT_AUDIO_KERNELS,
                          model_forward)
from clueai.tensor import Tensor


def desk_cfg(**kw):
    base = dict(backbone=BackboneConfig(kind="vgg16", width_multiplier=1 / 8, input_size=32),
                lstm_hidden=64)
    base.update(kw)
    return ModelConfig(**base)


def tiny_cfg(**kw):
    """Desk-geometry model shrunk for cheap gradient checks."""
    base = dict(
        backbone=BackboneConfig(kind="vgg16", width_multiplier=1 / 32, input_size=32),
        lstm_hidden=6,
        audio_channels=(2, 2, 2, 2),
        audio_input_shape=(9, 5),
        audio_out=5,
        proprio_channels=(3,),
        proprio_len=12,
        proprio_out=4,
        fusion_hidden=8,
    )
    base.update(kw)
    return ModelConfig(**base)


def inputs_for(cfg, seed=0):
    rng = np.random.default_rng(seed)
    steps = 3
    return ModelInputs(
        frames=rng.random((steps, 3, cfg.backbone.input_size, cfg.backbone.input_size)),
        mfcc=rng.normal(scale=20, size=cfg.audio_input_shape),
        proprio=rng.random((cfg.proprio_len, 2)),
    )


# -- dimension algebra ---------------------------------------------------------

def test_paper_scale_dimension_algebra():
    cfg = ModelConfig(
        backbone=BackboneConfig(kind="vgg16", width_multiplier=1.0, input_size=224),
        lstm_hidden=512)
    assert cfg.visual_dim == 1024
    assert cfg.audio_out == 64
    assert cfg.proprio_out == 64
    assert cfg.fused_dim == 1024 + 64 + 64 == 1152


def test_desk_scale_visual_dim():
    assert desk_cfg().visual_dim == 128


def test_masked_fusion_dims():
    assert desk_cfg(use_audio=False, use_proprio=False).fused_dim == 128
    assert desk_cfg(use_visual=False).fused_dim == 128
    paper = ModelConfig(
        backbone=BackboneConfig(kind="vgg16", width_multiplier=1.0, input_size=224),
        lstm_hidden=512, use_audio=False, use_proprio=False)
    assert paper.fused_dim == 1024


def test_all_modalities_disabled_rejected():
    with pytest.raises(ConfigError):
        desk_cfg(use_visual=False, use_audio=False, use_proprio=False)


def test_feature_vector_shapes_at_runtime():
    cfg = tiny_cfg()
    model = ClueModel(cfg, seed=0)
    pred, feats = model_forward(model, inputs_for(cfg))
    assert feats.r_v.shape == (2 * cfg.lstm_hidden,)
    assert feats.r_a.shape == (cfg.audio_out,)
    assert feats.r_p.shape == (cfg.proprio_out,)
    assert feats.r_fused.shape == (cfg.fused_dim,)
    assert pred.probs.shape == (7,)
    assert abs(pred.probs.sum() - 1.0) < 1e-6
    assert pred.predicted == int(np.argmax(pred.probs))


# -- attention -----------------------------------------------------------------

def test_attention_zero_scores_average_values():
    cfg = tiny_cfg()
    model = ClueModel(cfg, seed=1)
    model.params["visual.attn.wq"].data[:] = 0.0
    model.params["visual.attn.wk"].data[:] = 0.0
    rng = np.random.default_rng(2)
    seq = Tensor(rng.normal(size=(4, cfg.lstm_hidden)).astype(np.float32))
    cache = {}
    out = model.self_attention(seq, cache)
    attn = cache["attention"].data
    npt.assert_allclose(attn, np.full((4, 4), 0.25), atol=1e-7)
    v = seq.data @ model.params["visual.attn.wv"].data
    npt.assert_allclose(out.data, np.tile(v.mean(axis=0), (4, 1)), atol=1e-5)


def test_attention_rows_sum_to_one():
    cfg = tiny_cfg()
    model = ClueModel(cfg, seed=3)
    rng = np.random.default_rng(4)
    for trial in range(5):
        seq = Tensor(rng.normal(scale=3, size=(6, cfg.lstm_hidden)).astype(np.float32))
        cache = {}
        model.self_attention(seq, cache)
        rows = cache["attention"].data.sum(axis=1)
        npt.assert_allclose(rows, np.ones(6), atol=1e-6)
        assert (cache["attention"].data >= 0).all()


def test_attention_hand_case_h1():
    # H=1, T=2, scalar weights: A = row-softmax of q k^T, out = A v
    seq = np.array([[1.0], [2.0]])
    wq, wk, wv = 0.5, -0.3, 2.0
    q = seq * wq
    k = seq * wk
    v = seq * wv
    scores = q @ k.T / 1.0
    e = np.exp(scores - scores.max(axis=1, keepdims=True))
    a = e / e.sum(axis=1, keepdims=True)
    expect = a @ v

    s = Tensor(seq)
    qp = T.matmul(s, Tensor([[wq]]))
    kp = T.matmul(s, Tensor([[wk]]))
    vp = T.matmul(s, Tensor([[wv]]))
    attn = T.softmax(T.scale(T.matmul(qp, T.transpose(kp)), 1.0), axis=-1)
    out = T.matmul(attn, vp)
    npt.assert_allclose(out.data, expect, rtol=1e-6)


def test_single_step_attention_is_identity_weight():
    cfg = tiny_cfg()
    model = ClueModel(cfg, seed=5)
    ins = inputs_for(cfg)
    ins.frames = ins.frames[:1]
    res = model.forward(ins, mode="eval")
    npt.assert_allclose(res.cache["attention"].data, [[1.0]], atol=1e-7)


# -- structure -------------------------------------------------------------------

def test_attention_off_removes_parameters():
    with_attn = ClueModel(tiny_cfg(), seed=0)
    without = ClueModel(tiny_cfg(attention=False), seed=0)
    attn_names = [n for n in with_attn.params if "attn" in n]
    assert attn_names
    assert not [n for n in without.params if "attn" in n]
    # r_v width is unchanged: mean-over-time context replaces attention
    ins = inputs_for(tiny_cfg())
    res = without.forward(ins, mode="eval")
    assert res.features.r_v.shape == (2 * without.cfg.lstm_hidden,)


def test_disabled_modalities_remove_parameters():
    vis_only = ClueModel(tiny_cfg(use_audio=False, use_proprio=False), seed=0)
    assert not [n for n in vis_only.params if n.startswith(("audio.", "proprio."))]
    audio_only = ClueModel(tiny_cfg(use_visual=False, use_proprio=False), seed=0)
    assert not [n for n in audio_only.params if n.startswith(("visual.", "proprio."))]


def test_rnn_variant_builds_and_runs():
    cfg = tiny_cfg(recurrent_kind="rnn")
    model = ClueModel(cfg, seed=0)
    assert "visual.rnn0.weight" in model.params
    assert model.params["visual.rnn0.weight"].data.shape[1] == cfg.lstm_hidden
    pred, _ = model_forward(model, inputs_for(cfg))
    assert np.isfinite(pred.logits).all()


def test_rect_audio_kernels_build_and_run():
    cfg = tiny_cfg(audio_kernels=RECT_AUDIO_KERNELS, audio_input_shape=(61, 13),
                   audio_channels=(4, 4, 4, 4))
    model = ClueModel(cfg, seed=0)
    ins = inputs_for(cfg)
    ins.mfcc = np.random.default_rng(0).normal(size=(61, 13))
    pred, feats = model_forward(model, ins)
    assert feats.r_a.shape == (cfg.audio_out,)
    assert np.isfinite(pred.logits).all()


def test_rect_audio_kernel_needs_enough_frames():
    with pytest.raises(ConfigError, match="too short"):
        tiny_cfg(audio_kernels=RECT_AUDIO_KERNELS, audio_input_shape=(9, 13))


def test_missing_modality_input_rejected():
    cfg = tiny_cfg()
    model = ClueModel(cfg, seed=0)
    ins = inputs_for(cfg)
    ins.mfcc = None
    with pytest.raises(InputError):
        model.forward(ins)


def test_wrong_mfcc_shape_rejected():
    cfg = tiny_cfg()
    model = ClueModel(cfg, seed=0)
    ins = inputs_for(cfg)
    ins.mfcc = np.zeros((40, 13))
    with pytest.raises(DimensionError):
        model.forward(ins)


# -- behavior ------------------------------------------------------------------------

def test_eval_determinism_and_prng_independence():
    cfg = tiny_cfg()
    model = ClueModel(cfg, seed=0)
    ins = inputs_for(cfg)
    a = model.forward(ins, mode="eval").prediction
    np.random.default_rng(0).random(100)      # unrelated PRNG traffic
    model.reseed_dropout(12345)               # eval must not consume this
    b = model.forward(ins, mode="eval").prediction
    assert (a.logits == b.logits).all()
    assert (a.probs == b.probs).all()


def test_same_seed_same_model():
    cfg = tiny_cfg()
    a = ClueModel(cfg, seed=7)
    b = ClueModel(cfg, seed=7)
    for k in a.params:
        assert (a.params[k].data == b.params[k].data).all()


def test_frame_order_sensitivity():
    cfg = tiny_cfg()
    model = ClueModel(cfg, seed=0)
    ins = inputs_for(cfg, seed=9)
    base = model.forward(ins, mode="eval").features.r_v
    moved = False
    for perm in ([1, 0, 2], [2, 1, 0], [0, 2, 1]):
        shuffled = ModelInputs(frames=ins.frames[perm], mfcc=ins.mfcc, proprio=ins.proprio)
        other = model.forward(shuffled, mode="eval").features.r_v
        if np.linalg.norm(other - base) > 0:
            moved = True
            break
    assert moved, "permuting frames never changed r_v"


def test_train_mode_uses_dropout_eval_does_not():
    cfg = tiny_cfg()
    model = ClueModel(cfg, seed=0)
    ins = inputs_for(cfg)
    model.reseed_dropout(1)
    a = model.forward(ins, mode="train").prediction.logits
    model.reseed_dropout(2)
    b = model.forward(ins, mode="train").prediction.logits
    assert not (a == b).all()


# -- end-to-end gradient check -----------------------------------------------------------

def jitter_biases(model, seed):
    """Move zero-init biases off the exact ReLU kink so the finite-difference
    comparison happens at a differentiable point."""
    rng = np.random.default_rng(seed)
    for name, p in model.params.items():
        if name.endswith(".bias"):
            p.data += rng.uniform(0.05, 0.15, size=p.data.shape)


def test_end_to_end_gradient_check():
    # h = 1e-6: large enough to sit under the float64 noise floor for the
    # attention-path gradients, small enough not to straddle max-pool flips
    for seed in (1, 2, 3):
        cfg = tiny_cfg()
        model = ClueModel(cfg, seed=seed, dtype=np.float64)
        jitter_biases(model, seed + 50)
        ins = inputs_for(cfg, seed=seed)
        weights = np.ones(7)

        def loss():
            res = model.forward(ins, mode="eval")
            return T.weighted_cross_entropy(res.cache["probs"], 2, weights)

        rep = gradient_check(loss, model.parameters(), tolerance=1e-3,
                             h=1e-6, max_per_param=6, sample_seed=seed)
        assert rep.passed, str(rep)
