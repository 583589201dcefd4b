"""Command-line entry point.

Subcommands: gen, train, eval, ablate, noise, kernels, backbones, cam,
export-weights, import-weights.  Every run writes resolved_config.txt
(defaults + config file + overrides) into its output directory before any
work starts; rerunning with that file reproduces the outputs byte for
byte (timing.csv excepted, wall-clock is hardware-bound).

Exit codes: 0 success, 1 numeric failure (non-finite loss), 2 usage or
input error.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import config as C
from .datagen import (CLASSES, PAPER_COUNTS, class_weights, generate_dataset,
                      load_manifest, stratified_split)
from .errors import ClueError, ConfigError, NumericError
from .experiments import (ExperimentPlan, ablation_suite, backbone_sweep,
                          kernel_sweep, noise_sweep, run_seeded,
                          write_per_seed_csv, write_summary_csv, write_confusions)
from .explain import grad_cam, save_map
from .manifest import export_weights, import_weights
from .model import ClueModel
from .train import evaluate, prepare_dataset, prepare_episode, train_and_evaluate
from .optim import TrainConfig


def _add_common(p: argparse.ArgumentParser, data: bool = True):
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--set", dest="overrides", action="append", default=[],
                   metavar="KEY=VALUE", help="override one config key")
    p.add_argument("--out", required=True, help="output directory")
    if data:
        p.add_argument("--data", default=os.environ.get("CLUE_DATA_DIR"),
                       help="dataset directory (default: $CLUE_DATA_DIR)")
    # dedicated flags mirror the feature-extraction sweep axes
    p.add_argument("--backbone", choices=("vgg16", "alexnet", "resnet18"))
    p.add_argument("--width-mult", type=float, dest="width_mult")
    p.add_argument("--input-size", type=int, dest="input_size")
    p.add_argument("--avg-pool", choices=("on", "off"), dest="avg_pool")
    p.add_argument("--epochs", type=int)
    p.add_argument("--modality", help="subset of v,a,p (e.g. v,a)")
    p.add_argument("--jobs", type=int, default=1,
                   help="parallel workers across seeds (default 1)")


def _resolve(args) -> dict:
    overrides = list(args.overrides)
    for key in ("backbone", "width_mult", "input_size", "avg_pool", "epochs", "modality"):
        val = getattr(args, key, None)
        if val is not None:
            overrides.append(f"{key}={val}")
    return C.resolve(args.config, overrides)


def _echo(cfg: dict, out_dir: Path, extra: dict | None = None):
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "resolved_config.txt").write_text(C.format_resolved(cfg, extra))


def _dataset(args):
    if not args.data:
        raise ConfigError("no dataset directory: pass --data or set CLUE_DATA_DIR")
    if not Path(args.data).is_dir():
        raise ConfigError(f"dataset directory not found: {args.data}")
    return load_manifest(args.data)


def _seed_list(raw: str) -> list[int]:
    try:
        return [int(s) for s in raw.split(",") if s != ""]
    except ValueError:
        raise ConfigError(f"bad seed list {raw!r}") from None


# ---------------------------------------------------------------------------
# subcommands

def cmd_gen(args) -> int:
    cfg = _resolve(args)
    out = Path(args.out)
    if args.counts:
        values = [int(x) for x in args.counts.split(",")]
        if len(values) != len(CLASSES):
            raise ConfigError(f"--counts needs {len(CLASSES)} values in order {','.join(CLASSES)}")
        counts = dict(zip(CLASSES, values))
    else:
        counts = dict(PAPER_COUNTS)
    _echo(cfg, out, {"command": "gen", "seed": args.seed, "counts": args.counts or "paper"})
    manifest = generate_dataset(counts, args.seed, out, C.gen_params(cfg))
    for c in CLASSES:
        print(f"{c}: {manifest.counts[c]}")
    print(f"total: {len(manifest.rows)} episodes -> {out}")
    return 0


def _prepared_split(cfg, manifest, seed):
    mcfg = C.model_config(cfg, manifest.params)
    prepared = {p.id: p for p in prepare_dataset(manifest, manifest.ids(), mcfg,
                                                 C.mfcc_params(cfg), cfg["frame_rate_hz"])}
    train_ids, test_ids = stratified_split(manifest, cfg["train_frac"], seed)
    return mcfg, prepared, train_ids, test_ids


def cmd_train(args) -> int:
    cfg = _resolve(args)
    manifest = _dataset(args)
    out = Path(args.out)
    _echo(cfg, out, {"command": "train", "data": args.data, "seed": args.seed})
    mcfg, prepared, train_ids, test_ids = _prepared_split(cfg, manifest, args.seed)
    tcfg = TrainConfig(learning_rate=cfg["lr"], epochs=cfg["epochs"],
                       beta1=cfg["beta1"], beta2=cfg["beta2"], epsilon=cfg["epsilon"],
                       seed=args.seed, class_weights=class_weights(manifest))
    model, history, report = train_and_evaluate(
        mcfg, tcfg, [prepared[i] for i in train_ids], [prepared[i] for i in test_ids])
    export_weights(model.params, out / "weights")
    (out / "loss_history.csv").write_text(
        "epoch,mean_loss\n" + "".join(f"{i},{v:.6f}\n" for i, v in enumerate(history)))
    agg = _single_agg(args.seed, report, history, config_id="train")
    write_per_seed_csv([agg], out / "per_seed.csv")
    write_summary_csv([agg], out / "summary.csv")
    write_confusions(agg, out)
    print(f"weighted F1 {report.weighted_f1:.4f} accuracy {report.accuracy:.4f} "
          f"({len(train_ids)} train / {len(test_ids)} test)")
    return 0


def _single_agg(seed, report, history, config_id):
    from .experiments import AggregateResult, SeedResult
    sr = SeedResult(seed=seed, report=report, history=history)
    return AggregateResult(
        config_id=config_id, per_seed=[sr],
        mean_f1=report.weighted_f1, std_f1=0.0,
        mean_precision=report.weighted_precision, std_precision=0.0,
        mean_recall=report.weighted_recall, std_recall=0.0,
        mean_train_seconds=report.train_seconds, std_train_seconds=0.0,
        mean_test_seconds=report.test_seconds, std_test_seconds=0.0)


def cmd_eval(args) -> int:
    cfg = _resolve(args)
    manifest = _dataset(args)
    out = Path(args.out)
    _echo(cfg, out, {"command": "eval", "data": args.data, "seed": args.seed,
                     "weights": args.weights})
    mcfg, prepared, train_ids, test_ids = _prepared_split(cfg, manifest, args.seed)
    model = ClueModel(mcfg, seed=args.seed)
    import_weights(model.params, args.weights)
    report = evaluate(model, [prepared[i] for i in test_ids])
    agg = _single_agg(args.seed, report, [], config_id="eval")
    write_per_seed_csv([agg], out / "per_seed.csv")
    write_summary_csv([agg], out / "summary.csv")
    write_confusions(agg, out)
    print(f"weighted F1 {report.weighted_f1:.4f} accuracy {report.accuracy:.4f} "
          f"on {len(test_ids)} test episodes")
    return 0


def cmd_ablate(args) -> int:
    cfg = _resolve(args)
    manifest = _dataset(args)
    out = Path(args.out)
    seeds = _seed_list(args.seeds)
    _echo(cfg, out, {"command": "ablate", "data": args.data, "seeds": args.seeds})
    mcfg = C.model_config(cfg, manifest.params)
    results = ablation_suite(manifest, seeds, mcfg, epochs=cfg["sweep_epochs"],
                             learning_rate=cfg["lr"], out_dir=out, jobs=args.jobs)
    for r in results:
        print(f"{r.config_id:>12}: F1 {r.mean_f1:.4f} +/- {r.std_f1:.4f}")
    return 0


def cmd_noise(args) -> int:
    cfg = _resolve(args)
    manifest = _dataset(args)
    out = Path(args.out)
    probs = [float(x) for x in args.probs.split(",")]
    _echo(cfg, out, {"command": "noise", "data": args.data, "seed": args.seed,
                     "probs": args.probs, "weights": args.weights})
    mcfg, prepared, train_ids, test_ids = _prepared_split(cfg, manifest, args.seed)
    model = ClueModel(mcfg, seed=args.seed)
    import_weights(model.params, args.weights)
    rows = noise_sweep(model, [prepared[i] for i in test_ids], probs,
                       seeds=[args.seed], out_dir=out)
    for p, mean, std in rows:
        print(f"p={p:.2f}: F1 {mean:.4f} +/- {std:.4f}")
    return 0


def cmd_kernels(args) -> int:
    cfg = _resolve(args)
    manifest = _dataset(args)
    out = Path(args.out)
    seeds = _seed_list(args.seeds)
    _echo(cfg, out, {"command": "kernels", "data": args.data, "seeds": args.seeds})
    mcfg = C.model_config(cfg, manifest.params)
    results = kernel_sweep(manifest, seeds, mcfg, epochs=cfg["sweep_epochs"],
                           learning_rate=cfg["lr"], out_dir=out, jobs=args.jobs)
    for r in results:
        print(f"{r.config_id:>14}: P {r.mean_precision:.4f} R {r.mean_recall:.4f} "
              f"F1 {r.mean_f1:.4f}")
    return 0


def cmd_backbones(args) -> int:
    cfg = _resolve(args)
    manifest = _dataset(args)
    out = Path(args.out)
    seeds = _seed_list(args.seeds)
    _echo(cfg, out, {"command": "backbones", "data": args.data, "seeds": args.seeds})
    mcfg = C.model_config(cfg, manifest.params)
    results = backbone_sweep(manifest, seeds, mcfg, epochs=cfg["sweep_epochs"],
                             learning_rate=cfg["lr"], out_dir=out, jobs=args.jobs)
    for r in results:
        print(f"{r.config_id:>14}: F1 {r.mean_f1:.4f} train {r.mean_train_seconds:.1f}s "
              f"test {r.mean_test_seconds:.2f}s")
    return 0


def cmd_cam(args) -> int:
    cfg = _resolve(args)
    manifest = _dataset(args)
    out = Path(args.out)
    if args.cls not in CLASSES:
        raise ConfigError(f"--class must be one of {','.join(CLASSES)}")
    _echo(cfg, out, {"command": "cam", "data": args.data, "episode": args.episode,
                     "class": args.cls, "frame": args.frame, "weights": args.weights})
    mcfg = C.model_config(cfg, manifest.params)
    model = ClueModel(mcfg, seed=args.seed)
    import_weights(model.params, args.weights)
    row = manifest.row(args.episode)
    ep = prepare_episode(manifest.load_episode(args.episode), mcfg,
                         C.mfcc_params(cfg), cfg["frame_rate_hz"])
    frame_index = args.frame if args.frame is not None else row.event_frame
    cam = grad_cam(model, ep.inputs, CLASSES.index(args.cls), frame_index)
    ppm, tsv = save_map(cam, ep.inputs.frames[frame_index], out, args.episode, args.cls)
    flag = " (flagged: zero map)" if cam.flagged_zero else ""
    print(f"wrote {ppm} and {tsv}{flag}")
    return 0


def cmd_export_weights(args) -> int:
    cfg = _resolve(args)
    out = Path(args.out)
    _echo(cfg, out, {"command": "export-weights", "seed": args.seed})
    data_params = load_manifest(args.data).params if args.data and Path(args.data).is_dir() else None
    mcfg = C.model_config(cfg, data_params)
    model = ClueModel(mcfg, seed=args.seed)
    export_weights(model.params, out / "weights")
    print(f"exported {len(model.params)} parameters to {out / 'weights'}")
    return 0


def cmd_import_weights(args) -> int:
    cfg = _resolve(args)
    out = Path(args.out)
    _echo(cfg, out, {"command": "import-weights", "weights": args.weights})
    data_params = load_manifest(args.data).params if args.data and Path(args.data).is_dir() else None
    mcfg = C.model_config(cfg, data_params)
    model = ClueModel(mcfg, seed=args.seed)
    import_weights(model.params, args.weights)
    print(f"verified {len(model.params)} parameters against the model")
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="clueai",
        description="three-stream anomaly identification: data, training, experiments")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic dataset")
    _add_common(p, data=False)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--counts", help=f"per-class counts in order {','.join(CLASSES)}")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train one model on one split")
    _add_common(p)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate saved weights on a split")
    _add_common(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--weights", required=True, help="weight manifest directory")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="modality/attention ablation table")
    _add_common(p)
    p.add_argument("--seeds", default="0,1,2,3,4")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("noise", help="pixel-noise robustness curve")
    _add_common(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--weights", required=True)
    p.add_argument("--probs", default="0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8")
    p.set_defaults(func=cmd_noise)

    p = sub.add_parser("kernels", help="square vs rectangular audio kernels")
    _add_common(p)
    p.add_argument("--seeds", default="0,1,2")
    p.set_defaults(func=cmd_kernels)

    p = sub.add_parser("backbones", help="feature-extractor sweep with timing")
    _add_common(p)
    p.add_argument("--seeds", default="0,1,2")
    p.set_defaults(func=cmd_backbones)

    p = sub.add_parser("cam", help="class activation map for one episode")
    _add_common(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--weights", required=True)
    p.add_argument("--episode", required=True)
    p.add_argument("--class", dest="cls", required=True)
    p.add_argument("--frame", type=int, default=None,
                   help="frame index (default: the episode's event frame)")
    p.set_defaults(func=cmd_cam)

    p = sub.add_parser("export-weights", help="write a fresh model's weight manifest")
    _add_common(p)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_export_weights)

    p = sub.add_parser("import-weights", help="verify a weight manifest against a model")
    _add_common(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--weights", required=True)
    p.set_defaults(func=cmd_import_weights)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NumericError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return 1
    except ClueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
