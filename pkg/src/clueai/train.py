"""Training loop (per-episode Adam updates) and evaluation over a dataset."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .audio import MfccParams, mfcc
from .datagen import CLASS_INDEX, DatasetManifest, Episode, temporal_subsample
from .errors import NumericError
from .imageops import fit_frame
from .metrics import MetricsReport, compute_metrics
from .model import ClueModel, ModelConfig, ModelInputs
from .optim import Adam, TrainConfig
from .tensor import weighted_cross_entropy


@dataclass
class PreparedEpisode:
    """Episode arrays resized/featurized once so epochs stay cheap."""
    id: str
    label_idx: int
    inputs: ModelInputs
    signal_region: str
    event_frame: int


def prepare_episode(ep: Episode, cfg: ModelConfig, mfcc_params: MfccParams | None = None,
                    frame_rate_hz: float = 0.125) -> PreparedEpisode:
    frames = None
    if cfg.use_visual:
        frames, _ = temporal_subsample(ep.frames, ep.frame_timestamps, frame_rate_hz)
        size = cfg.backbone.input_size
        if frames.shape[-1] != size or frames.shape[-2] != size:
            frames = np.stack([fit_frame(f, size) for f in frames])
        frames = frames.astype(np.float32)
    coeffs = None
    if cfg.use_audio:
        coeffs = mfcc(ep.audio, mfcc_params or MfccParams()).coeffs.astype(np.float32)
    proprio = ep.proprio.astype(np.float32) if cfg.use_proprio else None
    return PreparedEpisode(
        id=ep.id, label_idx=CLASS_INDEX[ep.label],
        inputs=ModelInputs(frames=frames, mfcc=coeffs, proprio=proprio),
        signal_region=ep.signal_region, event_frame=ep.event_frame)


def prepare_dataset(manifest: DatasetManifest, ids: list[str], cfg: ModelConfig,
                    mfcc_params: MfccParams | None = None,
                    frame_rate_hz: float = 0.125) -> list[PreparedEpisode]:
    return [prepare_episode(manifest.load_episode(i), cfg, mfcc_params, frame_rate_hz)
            for i in ids]


def train(model_cfg: ModelConfig, train_cfg: TrainConfig,
          episodes: list[PreparedEpisode]) -> tuple[ClueModel, list[float]]:
    """Full-pass epochs with batch-size-1 Adam updates and weighted
    cross-entropy.  Returns the model (in eval mode, i.e. just use
    mode="eval" on forward) and the per-epoch mean loss history."""
    if not episodes:
        raise NumericError("empty training set")
    model = ClueModel(model_cfg, seed=train_cfg.seed)
    model.reseed_dropout(train_cfg.seed)
    opt = Adam(model.parameters(), train_cfg)
    order_rng = np.random.default_rng(np.random.SeedSequence([train_cfg.seed, 404]))
    weights = np.asarray(train_cfg.class_weights, dtype=np.float64)

    history: list[float] = []
    for epoch in range(train_cfg.epochs):
        order = order_rng.permutation(len(episodes))
        total = 0.0
        for j in order:
            ep = episodes[j]
            opt.zero_grad()
            res = model.forward(ep.inputs, mode="train")
            loss = weighted_cross_entropy(res.cache["probs"], ep.label_idx, weights)
            val = float(loss.data)
            if not np.isfinite(val):
                raise NumericError(f"non-finite loss at epoch {epoch}, episode {ep.id}")
            loss.backward()
            opt.step()
            total += val
        history.append(total / len(episodes))
    return model, history


def predict(model: ClueModel, episodes: list[PreparedEpisode]) -> tuple[np.ndarray, np.ndarray]:
    y_true = np.array([ep.label_idx for ep in episodes], dtype=np.int64)
    y_pred = np.array([model.forward(ep.inputs, mode="eval").prediction.predicted
                       for ep in episodes], dtype=np.int64)
    return y_true, y_pred


def evaluate(model: ClueModel, episodes: list[PreparedEpisode]) -> MetricsReport:
    if not episodes:
        raise NumericError("empty evaluation set")
    t0 = time.perf_counter()
    y_true, y_pred = predict(model, episodes)
    report = compute_metrics(y_true, y_pred, model.cfg.num_classes)
    report.test_seconds = time.perf_counter() - t0
    return report


def train_and_evaluate(model_cfg: ModelConfig, train_cfg: TrainConfig,
                       train_eps: list[PreparedEpisode],
                       test_eps: list[PreparedEpisode]):
    t0 = time.perf_counter()
    model, history = train(model_cfg, train_cfg, train_eps)
    train_seconds = time.perf_counter() - t0
    report = evaluate(model, test_eps)
    report.train_seconds = train_seconds
    return model, history, report
