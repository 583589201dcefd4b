"""Class-activation maps: bounds, flags, upsampling, FD check of the
channel weighting, overlay rendering."""
import numpy as np
import numpy.testing as npt
import pytest

from clueai.errors import DimensionError, InputError
from clueai.explain import ActivationMap, grad_cam, overlay, quadrant_mass_fraction, save_map
from clueai.imageops import bilinear_resize, read_ppm
from clueai.model import ClueModel, ModelInputs
from conftest import small_model_cfg


def build_model_and_inputs(seed=0, dtype=np.float32):
    cfg = small_model_cfg()
    model = ClueModel(cfg, seed=seed, dtype=dtype)
    rng = np.random.default_rng(seed + 1)
    ins = ModelInputs(frames=rng.random((4, 3, 32, 32)),
                      mfcc=rng.normal(scale=20, size=cfg.audio_input_shape),
                      proprio=rng.random((cfg.proprio_len, 2)))
    return model, ins


def test_cam_values_bounded():
    model, ins = build_model_and_inputs()
    for cls in (0, 3, 6):
        cam = grad_cam(model, ins, target_class=cls, frame_index=1)
        assert cam.values.min() >= 0.0 and cam.values.max() <= 1.0
        assert cam.upsampled.min() >= 0.0 and cam.upsampled.max() <= 1.0
        assert cam.upsampled.shape == (32, 32)


def test_cam_zero_flag_when_visual_path_cut():
    model, ins = build_model_and_inputs()
    # cut the visual contribution out of the fusion input: gradient to the
    # backbone map is exactly zero, so every weighted activation is <= 0
    vdim = model.cfg.visual_dim
    model.params["fusion.dense1.weight"].data[:, :vdim] = 0.0
    cam = grad_cam(model, ins, target_class=2, frame_index=0)
    assert cam.flagged_zero
    assert (cam.values == 0).all()
    assert quadrant_mass_fraction(cam, "TL") == 0.0


def test_cam_input_validation():
    model, ins = build_model_and_inputs()
    with pytest.raises(InputError):
        grad_cam(model, ins, target_class=99, frame_index=0)
    with pytest.raises(InputError):
        grad_cam(model, ins, target_class=0, frame_index=44)


def test_channel_weights_match_finite_differences():
    # alpha_k from the tape equals a central-difference probe of the class
    # logit under a uniform per-channel shift of the last conv map
    model, ins = build_model_and_inputs(dtype=np.float64)
    rng = np.random.default_rng(5)
    for name, p in model.params.items():
        if name.endswith(".bias"):
            p.data += rng.uniform(0.05, 0.15, size=p.data.shape)
    target, frame = 4, 2
    cam = grad_cam(model, ins, target_class=target, frame_index=frame)

    res = model.forward(ins, mode="eval")
    t, c, mh, mw = res.cache["last_conv"].shape
    h = 1e-5
    for k in range(0, c, 3):
        delta = np.zeros((t, c, mh, mw))
        delta[frame, k] = h
        yp = model.forward(ins, mode="eval", visual_conv_delta=delta).prediction.logits[target]
        delta[frame, k] = -h
        ym = model.forward(ins, mode="eval", visual_conv_delta=delta).prediction.logits[target]
        numeric = (yp - ym) / (2 * h) / (mh * mw)      # mean over the map
        a = cam.channel_weights[k]
        assert abs(a - numeric) / max(abs(a), abs(numeric), 1e-8) < 1e-3


def test_upsampling_preserves_argmax_cell():
    rng = np.random.default_rng(0)
    for _ in range(10):
        src = rng.random((2, 2))
        src[rng.integers(2), rng.integers(2)] += 1.0
        up = bilinear_resize(src, 32, 32)
        sy, sx = np.unravel_index(np.argmax(src), (2, 2))
        uy, ux = np.unravel_index(np.argmax(up), (32, 32))
        assert sy * 16 <= uy < (sy + 1) * 16
        assert sx * 16 <= ux < (sx + 1) * 16


def test_overlay_colormap_endpoints():
    frame = np.full((3, 8, 8), 0.5)
    zero_map = ActivationMap(values=np.zeros((2, 2)), target_class=0, frame_index=0,
                             upsampled=np.zeros((8, 8)), flagged_zero=True,
                             channel_weights=np.zeros(4))
    img = overlay(zero_map, frame)
    npt.assert_allclose(img[2], 0.75)            # blue everywhere
    npt.assert_allclose(img[0], 0.25)
    hot = ActivationMap(values=np.ones((2, 2)), target_class=0, frame_index=0,
                        upsampled=np.ones((8, 8)), flagged_zero=False,
                        channel_weights=np.zeros(4))
    img = overlay(hot, frame)
    npt.assert_allclose(img[0], 0.75)            # red everywhere
    npt.assert_allclose(img[2], 0.25)


def test_overlay_size_mismatch():
    m = ActivationMap(values=np.zeros((2, 2)), target_class=0, frame_index=0,
                      upsampled=np.zeros((8, 8)), flagged_zero=True,
                      channel_weights=np.zeros(4))
    with pytest.raises(DimensionError):
        overlay(m, np.zeros((3, 16, 16)))


def test_save_map_deterministic(tmp_path):
    model, ins = build_model_and_inputs()
    cam = grad_cam(model, ins, target_class=1, frame_index=0)
    p1, t1 = save_map(cam, ins.frames[0], tmp_path / "a", "e007", "LOC")
    p2, t2 = save_map(cam, ins.frames[0], tmp_path / "b", "e007", "LOC")
    assert p1.name == "cam_e007_LOC_0.ppm"
    assert p1.read_bytes() == p2.read_bytes()
    assert t1.read_bytes() == t2.read_bytes()
    img = read_ppm(p1)
    assert img.shape == (3, 32, 32)
