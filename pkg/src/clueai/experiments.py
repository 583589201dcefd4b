"""The experiment grid: seed-averaged training runs, modality/attention
ablation, pixel-noise robustness sweep, audio-kernel comparison and the
backbone sweep with timing.

Every CSV cell is printed with 6 decimals and all run orders are fixed, so
rerunning a plan reproduces the output files byte for byte (timing.csv is
the one exception: wall-clock values are hardware-bound).
"""
from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .backbones import BackboneConfig
from .datagen import CLASSES, DatasetManifest, class_weights, stratified_split
from .errors import ConfigError
from .metrics import MetricsReport, aggregate
from .model import ClueModel, ModelConfig, RECT_AUDIO_KERNELS
from .optim import TrainConfig
from .train import PreparedEpisode, evaluate, prepare_dataset, train_and_evaluate


@dataclass
class ExperimentPlan:
    model_cfg: ModelConfig
    dataset: DatasetManifest
    seeds: list[int]
    epochs: int = 40
    learning_rate: float = 1e-4
    train_frac: float = 0.8
    out_dir: Path | None = None
    config_id: str = "default"
    jobs: int = 1

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("seed list must be non-empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct")


@dataclass
class SeedResult:
    seed: int
    report: MetricsReport
    history: list[float]
    model: ClueModel | None = None


@dataclass
class AggregateResult:
    config_id: str
    per_seed: list[SeedResult]
    mean_f1: float
    std_f1: float
    mean_precision: float
    std_precision: float
    mean_recall: float
    std_recall: float
    mean_train_seconds: float
    std_train_seconds: float
    mean_test_seconds: float
    std_test_seconds: float


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def _prepare_all(manifest: DatasetManifest, cfg: ModelConfig) -> dict[str, PreparedEpisode]:
    prepared = prepare_dataset(manifest, manifest.ids(), cfg)
    return {p.id: p for p in prepared}


def run_one_seed(plan: ExperimentPlan, seed: int,
                 prepared: dict[str, PreparedEpisode], keep_model: bool = False) -> SeedResult:
    train_ids, test_ids = stratified_split(plan.dataset, plan.train_frac, seed)
    tcfg = TrainConfig(learning_rate=plan.learning_rate, epochs=plan.epochs, seed=seed,
                       class_weights=class_weights(plan.dataset))
    model, history, report = train_and_evaluate(
        plan.model_cfg, tcfg,
        [prepared[i] for i in train_ids], [prepared[i] for i in test_ids])
    return SeedResult(seed=seed, report=report, history=history,
                      model=model if keep_model else None)


def run_seeded(plan: ExperimentPlan, prepared: dict[str, PreparedEpisode] | None = None,
               keep_models: bool = False) -> AggregateResult:
    """Train/evaluate once per seed (fresh split, init and dropout stream
    each time) and aggregate mean +/- population std."""
    if prepared is None:
        prepared = _prepare_all(plan.dataset, plan.model_cfg)
    if plan.jobs > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=plan.jobs) as pool:
            futures = {s: pool.submit(run_one_seed, plan, s, prepared, keep_models)
                       for s in plan.seeds}
            results = [futures[s].result() for s in plan.seeds]
    else:
        results = [run_one_seed(plan, s, prepared, keep_models) for s in plan.seeds]

    f1s = [r.report.weighted_f1 for r in results]
    pres = [r.report.weighted_precision for r in results]
    recs = [r.report.weighted_recall for r in results]
    trs = [r.report.train_seconds for r in results]
    tes = [r.report.test_seconds for r in results]
    agg = AggregateResult(
        config_id=plan.config_id, per_seed=results,
        mean_f1=aggregate(f1s)[0], std_f1=aggregate(f1s)[1],
        mean_precision=aggregate(pres)[0], std_precision=aggregate(pres)[1],
        mean_recall=aggregate(recs)[0], std_recall=aggregate(recs)[1],
        mean_train_seconds=aggregate(trs)[0], std_train_seconds=aggregate(trs)[1],
        mean_test_seconds=aggregate(tes)[0], std_test_seconds=aggregate(tes)[1],
    )
    if plan.out_dir is not None:
        write_per_seed_csv([agg], plan.out_dir / "per_seed.csv")
        write_summary_csv([agg], plan.out_dir / "summary.csv")
        write_confusions(agg, plan.out_dir)
    return agg


# ---------------------------------------------------------------------------
# CSV writers

def write_per_seed_csv(aggs: list[AggregateResult], path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = ["config_id", "seed"]
    for c in CLASSES:
        cols += [f"precision_{c}", f"recall_{c}", f"f1_{c}"]
    cols += ["weighted_precision", "weighted_recall", "weighted_f1", "accuracy"]
    lines = [",".join(cols)]
    for agg in aggs:
        for r in agg.per_seed:
            rep = r.report
            cells = [agg.config_id, str(r.seed)]
            for k in range(len(CLASSES)):
                cells += [_fmt(rep.precision[k]), _fmt(rep.recall[k]), _fmt(rep.f1[k])]
            cells += [_fmt(rep.weighted_precision), _fmt(rep.weighted_recall),
                      _fmt(rep.weighted_f1), _fmt(rep.accuracy)]
            lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n")


def write_summary_csv(aggs: list[AggregateResult], path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["# std columns are population standard deviations over seeds",
             "config_id,precision_mean,precision_std,recall_mean,recall_std,"
             "f1_mean,f1_std"]
    for a in aggs:
        lines.append(",".join([a.config_id, _fmt(a.mean_precision), _fmt(a.std_precision),
                               _fmt(a.mean_recall), _fmt(a.std_recall),
                               _fmt(a.mean_f1), _fmt(a.std_f1)]))
    path.write_text("\n".join(lines) + "\n")


def write_confusions(agg: AggregateResult, out_dir: Path):
    out_dir.mkdir(parents=True, exist_ok=True)
    for r in agg.per_seed:
        lines = ["true\\pred," + ",".join(CLASSES)]
        for i, c in enumerate(CLASSES):
            lines.append(c + "," + ",".join(_fmt(v) for v in r.report.normalized[i]))
        (out_dir / f"confusion_{agg.config_id}_{r.seed}.csv").write_text("\n".join(lines) + "\n")


def write_timing_csv(aggs: list[AggregateResult], path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["config_id,train_mean_s,train_std_s,test_mean_s,test_std_s"]
    for a in aggs:
        lines.append(",".join([a.config_id, _fmt(a.mean_train_seconds), _fmt(a.std_train_seconds),
                               _fmt(a.mean_test_seconds), _fmt(a.std_test_seconds)]))
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# ablation (modality mask x attention)

ABLATION_ROWS = [
    # (config id, visual, audio, proprio, attention) in table order
    ("p", False, False, True, False),
    ("a", False, True, False, False),
    ("v+attn", True, False, False, True),
    ("v+p+attn", True, False, True, True),
    ("v+a+attn", True, True, False, True),
    ("v+a+p", True, True, True, False),
    ("v+a+p+attn", True, True, True, True),
]


def ablation_suite(dataset: DatasetManifest, seeds: list[int], base_cfg: ModelConfig,
                   epochs: int = 15, learning_rate: float = 1e-4,
                   out_dir: Path | None = None, jobs: int = 1) -> list[AggregateResult]:
    """The seven mask/attention combinations, trained on identical seeds."""
    results = []
    for cid, s_v, s_a, s_p, attn in ABLATION_ROWS:
        cfg = replace(base_cfg, use_visual=s_v, use_audio=s_a, use_proprio=s_p,
                      attention=attn)
        plan = ExperimentPlan(model_cfg=cfg, dataset=dataset, seeds=list(seeds),
                              epochs=epochs, learning_rate=learning_rate,
                              config_id=cid, jobs=jobs)
        results.append(run_seeded(plan))
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        lines = ["s_v,s_a,s_p,attention,config_id,precision_mean,precision_std,"
                 "recall_mean,recall_std,f1_mean,f1_std"]
        for (cid, s_v, s_a, s_p, attn), agg in zip(ABLATION_ROWS, results):
            lines.append(",".join([
                str(int(s_v)), str(int(s_a)), str(int(s_p)), str(int(attn)), cid,
                _fmt(agg.mean_precision), _fmt(agg.std_precision),
                _fmt(agg.mean_recall), _fmt(agg.std_recall),
                _fmt(agg.mean_f1), _fmt(agg.std_f1)]))
        (out_dir / "ablation.csv").write_text("\n".join(lines) + "\n")
        write_per_seed_csv(results, out_dir / "per_seed.csv")
    return results


# ---------------------------------------------------------------------------
# pixel-noise robustness

def corrupt_frames(frames: np.ndarray, prob: float, rng: np.random.Generator) -> np.ndarray:
    """Zero whole pixels (all channels) independently with probability `prob`."""
    if prob == 0.0:
        return frames
    t, _, h, w = frames.shape
    mask = rng.random((t, h, w)) < prob
    out = frames.copy()
    out[np.broadcast_to(mask[:, None, :, :], frames.shape)] = 0.0
    return out


def noise_sweep(model: ClueModel, test_eps: list[PreparedEpisode],
                probs: list[float], seeds: list[int],
                out_dir: Path | None = None) -> list[tuple[float, float, float]]:
    """Evaluate one trained model on test frames corrupted at each
    probability; returns (p, mean F1, std F1) rows.  Training data stays
    clean; p=0 evaluates the unmodified frames (bitwise)."""
    rows = []
    for pi, p in enumerate(probs):
        if not 0.0 <= p < 1.0:
            raise ConfigError(f"noise probability {p} outside [0, 1)")
        f1s = []
        for seed in seeds:
            corrupted = []
            for ei, ep in enumerate(test_eps):
                if p == 0.0:
                    corrupted.append(ep)
                    continue
                rng = np.random.default_rng(np.random.SeedSequence([seed, pi, ei]))
                from .model import ModelInputs
                corrupted.append(PreparedEpisode(
                    id=ep.id, label_idx=ep.label_idx,
                    inputs=ModelInputs(frames=corrupt_frames(ep.inputs.frames, p, rng),
                                       mfcc=ep.inputs.mfcc, proprio=ep.inputs.proprio),
                    signal_region=ep.signal_region, event_frame=ep.event_frame))
            f1s.append(evaluate(model, corrupted).weighted_f1)
        mean, std = aggregate(f1s)
        rows.append((p, mean, std))
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        lines = ["p,f1_mean,f1_std"]
        for p, mean, std in rows:
            lines.append(",".join([_fmt(p), _fmt(mean), _fmt(std)]))
        (out_dir / "noise_curve.csv").write_text("\n".join(lines) + "\n")
    return rows


# ---------------------------------------------------------------------------
# audio kernel comparison (square vs rectangular)

def kernel_sweep(dataset: DatasetManifest, seeds: list[int], base_cfg: ModelConfig,
                 epochs: int = 15, learning_rate: float = 1e-4,
                 out_dir: Path | None = None, jobs: int = 1) -> list[AggregateResult]:
    n_frames = base_cfg.audio_input_shape[0]
    if n_frames < RECT_AUDIO_KERNELS[0][0][0]:
        raise ConfigError(
            f"rectangular audio kernels need >= {RECT_AUDIO_KERNELS[0][0][0]} MFCC frames, "
            f"got {n_frames}")
    rows = [("square3x3", base_cfg),
            ("rect16x4_16x5", replace(base_cfg, audio_kernels=RECT_AUDIO_KERNELS))]
    results = []
    for cid, cfg in rows:
        plan = ExperimentPlan(model_cfg=cfg, dataset=dataset, seeds=list(seeds),
                              epochs=epochs, learning_rate=learning_rate,
                              config_id=cid, jobs=jobs)
        results.append(run_seeded(plan))
    if out_dir is not None:
        write_summary_csv(results, out_dir / "kernel_comparison.csv")
        write_per_seed_csv(results, out_dir / "per_seed.csv")
    return results


# ---------------------------------------------------------------------------
# backbone sweep (with timing)

def backbone_rows(width_multiplier: float, desk_size: int) -> list[tuple[str, BackboneConfig]]:
    # alexnet needs input >= 63, and the AP / no-AP feature-size contrast only
    # exists while the final map is larger than 1x1, so the whole sweep runs
    # at >= 64 pixels; the loader resizes frames as needed.
    size = max(64, desk_size)
    return [
        ("resnet18_ap", BackboneConfig(kind="resnet18", width_multiplier=width_multiplier,
                                       input_size=size, with_avg_pool=True)),
        ("resnet18_noap", BackboneConfig(kind="resnet18", width_multiplier=width_multiplier,
                                         input_size=size)),
        ("alexnet", BackboneConfig(kind="alexnet", width_multiplier=width_multiplier,
                                   input_size=size)),
        ("vgg16", BackboneConfig(kind="vgg16", width_multiplier=width_multiplier,
                                 input_size=size)),
    ]


def backbone_sweep(dataset: DatasetManifest, seeds: list[int], base_cfg: ModelConfig,
                   epochs: int = 15, learning_rate: float = 1e-4,
                   out_dir: Path | None = None, jobs: int = 1) -> list[AggregateResult]:
    results = []
    for cid, bcfg in backbone_rows(base_cfg.backbone.width_multiplier,
                                   base_cfg.backbone.input_size):
        cfg = replace(base_cfg, backbone=bcfg)
        plan = ExperimentPlan(model_cfg=cfg, dataset=dataset, seeds=list(seeds),
                              epochs=epochs, learning_rate=learning_rate,
                              config_id=cid, jobs=jobs)
        results.append(run_seeded(plan))
    if out_dir is not None:
        write_summary_csv(results, out_dir / "backbone_comparison.csv")
        write_timing_csv(results, out_dir / "timing.csv")
        write_per_seed_csv(results, out_dir / "per_seed.csv")
    return results
