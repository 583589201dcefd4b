"""Synthetic episode generation: determinism, class signatures, persistence."""
import numpy as np
import numpy.testing as npt
import pytest

from clueai import datagen as D
from clueai.errors import ConfigError, DataError, FormatError, InputError

FAST = D.GenParams(S=32, T=8, T_p=50)


def red_blob_mass(frame) -> float:
    """Oracle: pixels whose red channel clearly dominates (the object color)."""
    r, g, b = frame
    return float(((r - np.maximum(g, b)) > 0.25).sum())


# -- single-episode generation --------------------------------------------------

def test_episode_determinism():
    a = D.generate_episode("DIS", seed=7, params=FAST)
    b = D.generate_episode("DIS", seed=7, params=FAST)
    assert (a.frames == b.frames).all()
    assert (a.audio.samples == b.audio.samples).all()
    assert (a.proprio == b.proprio).all()
    assert a.signal_region == b.signal_region
    assert a.event_frame == b.event_frame


def test_safe_quieter_than_eua():
    for seed in range(5):
        safe = D.generate_episode("SAFE", seed=seed, params=FAST)
        eua = D.generate_episode("EUA", seed=seed, params=FAST)
        assert safe.audio.rms() < eua.audio.rms()


def test_dis_blob_disappears():
    for seed in range(5):
        ep = D.generate_episode("DIS", seed=seed, params=FAST)
        first = red_blob_mass(ep.frames[0])
        last = red_blob_mass(ep.frames[-1])
        assert first > 10
        assert last < 0.1 * first


def test_episode_invariants():
    for label in D.CLASSES:
        ep = D.generate_episode(label, seed=3, params=FAST)
        assert ep.frames.shape == (8, 3, 32, 32)
        assert ep.frames.min() >= 0.0 and ep.frames.max() <= 1.0
        assert (np.diff(ep.frame_timestamps) > 0).all()
        assert ep.proprio.shape == (50, 2)
        assert ep.proprio.min() >= 0.0 and ep.proprio.max() <= 1.0
        assert ep.signal_region in D.QUADRANTS
        assert 0 <= ep.event_frame < 8
        assert np.abs(ep.audio.samples).max() <= 1.0


def test_unknown_label_rejected():
    with pytest.raises(ConfigError):
        D.generate_episode("WAT", seed=0)


# -- dataset level ----------------------------------------------------------------

def test_small_dataset_roundtrip(tmp_path):
    counts = {c: 2 for c in D.CLASSES}
    manifest = D.generate_dataset(counts, dataset_seed=5, out_dir=tmp_path / "d", params=FAST)
    assert len(manifest.rows) == 14
    assert manifest.counts == counts
    loaded = D.load_manifest(tmp_path / "d")
    assert [r.id for r in loaded.rows] == [r.id for r in manifest.rows]
    ep = loaded.load_episode("e000")
    assert ep.label == "SAFE"
    assert ep.frames.shape == (8, 3, 32, 32)


def test_dataset_byte_determinism(tmp_path):
    counts = {c: 1 for c in D.CLASSES}
    counts["SAFE"] = 2
    D.generate_dataset(counts, dataset_seed=9, out_dir=tmp_path / "a", params=FAST)
    D.generate_dataset(counts, dataset_seed=9, out_dir=tmp_path / "b", params=FAST)
    files_a = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(tmp_path / "b") for p in (tmp_path / "b").rglob("*") if p.is_file())
    assert files_a == files_b
    for rel in files_a:
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()


def test_counts_validation(tmp_path):
    with pytest.raises(ConfigError):
        D.generate_dataset({c: 0 for c in D.CLASSES}, 1, tmp_path / "x", FAST)


def test_save_load_save_byte_identical(tmp_path):
    ep = D.generate_episode("FCA", seed=11, params=FAST)
    D.save_episode(ep, tmp_path / "one")
    m = D.DatasetManifest(root=tmp_path, dataset_seed=0, params=FAST,
                          rows=[D.ManifestRow("one", "FCA", "one", 11,
                                              ep.signal_region, ep.event_frame)])
    back = m.load_episode("one")
    D.save_episode(back, tmp_path / "two")
    for name in ("frame_000.ppm", "frame_007.ppm", "audio.wav", "proprio.csv"):
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()


def test_truncated_ppm_rejected(tmp_path):
    ep = D.generate_episode("SAFE", seed=1, params=FAST)
    D.save_episode(ep, tmp_path / "e")
    f = tmp_path / "e" / "frame_000.ppm"
    f.write_bytes(f.read_bytes()[:50])
    m = D.DatasetManifest(root=tmp_path, dataset_seed=0, params=FAST,
                          rows=[D.ManifestRow("e", "SAFE", "e", 1, "TL", 7)])
    with pytest.raises(FormatError, match="byte"):
        m.load_episode("e")


def test_missing_episode_named(tmp_path):
    m = D.DatasetManifest(root=tmp_path, dataset_seed=0, params=FAST,
                          rows=[D.ManifestRow("e042", "SAFE", "e042", 1, "TL", 7)])
    with pytest.raises(FormatError, match="e042"):
        m.load_episode("e042")
    with pytest.raises(DataError, match="e999"):
        m.row("e999")


# -- temporal subsampling -----------------------------------------------------------

def test_subsample_identity_when_rate_high():
    frames = np.arange(5)[:, None]
    ts = np.array([0.0, 1.0, 2.0, 3.0, 4.0])
    out, ots = D.temporal_subsample(frames, ts, rate_hz=2.0)
    npt.assert_array_equal(out, frames)
    npt.assert_array_equal(ots, ts)


def test_subsample_eighth_hz():
    frames = np.arange(64)[:, None]
    ts = np.arange(64, dtype=np.float64)
    out, ots = D.temporal_subsample(frames, ts, rate_hz=0.125)
    npt.assert_array_equal(ots, [0, 8, 16, 24, 32, 40, 48, 56])
    npt.assert_array_equal(out.reshape(-1), [0, 8, 16, 24, 32, 40, 48, 56])


def test_subsample_single_frame():
    out, ots = D.temporal_subsample(np.ones((1, 2)), np.array([3.0]), 0.125)
    assert out.shape == (1, 2)
    assert ots[0] == 3.0


def test_subsample_empty_rejected():
    with pytest.raises(InputError):
        D.temporal_subsample(np.zeros((0, 2)), np.zeros(0), 1.0)


# -- split and class weights -----------------------------------------------------------

def _manifest_with_counts(counts):
    rows = []
    i = 0
    for label, n in counts.items():
        for _ in range(n):
            rows.append(D.ManifestRow(f"e{i:03d}", label, f"e{i:03d}", i, "TL", 4))
            i += 1
    return D.DatasetManifest(root=None, dataset_seed=0, params=FAST, rows=rows)


def test_split_counts_on_paper_numbers():
    m = _manifest_with_counts(D.PAPER_COUNTS)
    train, test = D.stratified_split(m, 0.8, seed=0)
    assert len(train) + len(test) == 249
    by_label = {c: 0 for c in D.CLASSES}
    for tid in test:
        by_label[m.row(tid).label] += 1
    assert by_label == {"SAFE": 14, "LOC": 4, "DIS": 8, "EUA": 7,
                        "OTA": 4, "SPC": 9, "FCA": 5}
    assert not set(train) & set(test)
    assert sorted(train + test) == sorted(m.ids())


def test_split_is_seeded():
    m = _manifest_with_counts(D.PAPER_COUNTS)
    a = D.stratified_split(m, 0.8, seed=1)
    b = D.stratified_split(m, 0.8, seed=1)
    c = D.stratified_split(m, 0.8, seed=2)
    assert a == b
    assert a != c


def test_split_rejects_tiny_class():
    m = _manifest_with_counts({"SAFE": 2, "LOC": 1, "DIS": 2, "EUA": 2,
                               "OTA": 2, "SPC": 2, "FCA": 2})
    with pytest.raises(DataError, match="LOC"):
        D.stratified_split(m, 0.8, seed=0)


def test_class_weights_uniform_counts():
    npt.assert_allclose(D.class_weights({c: 10 for c in D.CLASSES}), np.ones(7))


def test_class_weights_paper_ratio():
    w = D.class_weights(D.PAPER_COUNTS)
    assert w[D.CLASS_INDEX["OTA"]] / w[D.CLASS_INDEX["SAFE"]] == pytest.approx(68 / 18, rel=1e-12)
    assert w.mean() == pytest.approx(1.0, rel=1e-12)


def test_class_weights_monotone():
    w = D.class_weights(D.PAPER_COUNTS)
    counts = np.array([D.PAPER_COUNTS[c] for c in D.CLASSES], dtype=float)
    order = np.argsort(counts)
    assert (np.diff(w[order]) <= 0).all()


def test_class_weights_empty_class():
    with pytest.raises(DataError):
        D.class_weights({**D.PAPER_COUNTS, "FCA": 0})


# -- separability sanity ---------------------------------------------------------------

def test_trivial_features_beat_chance(tmp_path):
    counts = {c: 6 for c in D.CLASSES}
    manifest = D.generate_dataset(counts, dataset_seed=3, out_dir=tmp_path / "d", params=FAST)
    feats, labels = [], []
    for row in manifest.rows:
        ep = manifest.load_episode(row.id)
        feats.append([ep.audio.rms() * 100, red_blob_mass(ep.frames[-1]) / 10])
        labels.append(D.CLASS_INDEX[row.label])
    feats = np.asarray(feats)
    labels = np.asarray(labels)
    centroids = np.stack([feats[labels == k].mean(axis=0) for k in range(7)])
    pred = np.argmin(((feats[:, None, :] - centroids[None]) ** 2).sum(-1), axis=1)
    acc = (pred == labels).mean()
    assert acc > 1 / 7, f"nearest-centroid accuracy {acc:.2f} not above chance"
