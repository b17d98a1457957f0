"""Command-line entry points: train, eval, diagnose, ablate.

Every run writes a `manifest.json` (tool version, config hash, seed)
next to its artifacts so results stay traceable to the exact settings
that produced them. Exit codes: 2 for configuration problems, 3 for
unreadable or malformed data, 4 for numeric failures during training.
"""

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .ablate import expand_cells, parse_grid, run_grid
from .config import (canonical_text, config_from_mapping, config_hash,
                     load_config, parse_config_text)
from .errors import (AvtadError, ConfigurationError, DataFormatError,
                     NumericError)
from .evaluation import mean_ap
from .pipeline import (check_class_counts, diagnostic_samples,
                       distance_profiles, evaluate_model, ground_truth_rows,
                       gt_injected_results, position_profile)
from .synthdata import read_dataset
from .train import load_checkpoint, save_checkpoint, train


# -- shared helpers ------------------------------------------------------


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_manifest(out_dir, command, cfg, extra=None):
    doc = {"command": command, "version": __version__,
           "config_hash": config_hash(cfg), "seed": cfg.seed}
    doc.update(extra or {})
    path = Path(out_dir) / "manifest.json"
    path.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n",
                    encoding="utf-8")


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_map_table(path, table):
    rows = [(task, repr(thr), repr(v)) for task, thr, v in table.rows()]
    tasks = sorted({task for task, _, _ in table.rows()})
    for task in tasks:
        rows.append((task, "avg", repr(table.average(task))))
    _write_csv(path, ("task", "threshold", "mAP"), rows)


def write_predictions(path, per_video_rows):
    """Detection records with the canonical field names, per video."""
    doc = {}
    for vid in sorted(per_video_rows):
        doc[vid] = [{"start_seconds": float(s), "end_seconds": float(e),
                     "verb_id": int(v), "noun_id": int(n),
                     "score": float(sc)}
                    for (s, e, v, n, sc) in per_video_rows[vid]]
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n",
                          encoding="utf-8")


def _detection_rows_by_video(per_video, suppression="pair"):
    rows = {}
    for vid, by_task in per_video.items():
        rows[vid] = [(d.start, d.end, d.verb, d.noun, d.score)
                     for d in by_task[suppression].detections]
    return rows


def _load_cfg(args):
    cfg = load_config(args.config, overrides=args.set)
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


# -- train ---------------------------------------------------------------


def cmd_train(args):
    cfg = _load_cfg(args)
    videos = read_dataset(args.dataset)
    check_class_counts(cfg, videos)
    out = _out_dir(args)
    model, store, lines = train(cfg, videos)
    (out / "train_log.txt").write_text("\n".join(lines) + "\n",
                                       encoding="utf-8")
    save_checkpoint(out / "checkpoint.bin", cfg, store)
    write_manifest(out, "train", cfg, extra={
        "num_videos": len(videos),
        "iterations": cfg.optimizer_iterations,
    })
    print(f"trained {cfg.optimizer_iterations} iterations on "
          f"{len(videos)} videos")
    if lines:
        print(lines[-1])
    print(f"checkpoint: {out / 'checkpoint.bin'}")
    return 0


# -- eval ----------------------------------------------------------------


def cmd_eval(args):
    out = _out_dir(args)
    videos = read_dataset(args.dataset)
    overrides = dict(kv.split("=", 1) for kv in args.set) if args.set else {}
    if args.inject_gt:
        cfg = _load_cfg(args)
        check_class_counts(cfg, videos)
        results = gt_injected_results(videos)
        table = mean_ap(results, ground_truth_rows(videos),
                        thresholds=tuple(cfg.eval_thresholds))
        per_video_rows = {}
        for vid, s, e, v, n, sc in results["action"]:
            per_video_rows.setdefault(vid, []).append((s, e, v, n, sc))
        num_dets = sum(len(r) for r in per_video_rows.values())
    else:
        if args.checkpoint is None:
            raise ConfigurationError(
                "eval needs --checkpoint (or --inject-gt)")
        cfg, _store, model = load_checkpoint(args.checkpoint,
                                             overrides=overrides)
        check_class_counts(cfg, videos)
        table, per_video = evaluate_model(model, videos,
                                          cfg.eval_thresholds)
        per_video_rows = _detection_rows_by_video(per_video)
        num_dets = sum(len(r) for r in per_video_rows.values())
    write_map_table(out / "map_table.csv", table)
    write_predictions(out / "predictions.json", per_video_rows)
    write_manifest(out, "eval", cfg, extra={
        "num_videos": len(videos),
        "num_detections": num_dets,
        "skipped_classes": table.skipped_classes,
    })
    for task in ("verb", "noun", "action"):
        print(f"{task} mAP (avg over thresholds): {table.average(task):.4f}")
    return 0


# -- diagnose ------------------------------------------------------------

_BIN_HEADER = ("bin_low", "bin_high", "duration_group", "mean_tiou",
               "mean_conf_with_centricity", "mean_conf_without", "count")


def _bin_rows(bins):
    return [(repr(b.low), repr(b.high), b.duration_group, repr(b.mean_tiou),
             repr(b.mean_conf_with), repr(b.mean_conf_without), b.count)
            for b in bins]


def cmd_diagnose(args):
    out = _out_dir(args)
    videos = read_dataset(args.dataset)
    overrides = dict(kv.split("=", 1) for kv in args.set) if args.set else {}
    cfg, _store, model = load_checkpoint(args.checkpoint,
                                         overrides=overrides)
    check_class_counts(cfg, videos)
    records, samples = diagnostic_samples(model, videos)
    rel_bins, sec_bins = distance_profiles(records)
    _write_csv(out / "centre_distance_relative.csv", _BIN_HEADER,
               _bin_rows(rel_bins))
    _write_csv(out / "centre_distance_seconds.csv", _BIN_HEADER,
               _bin_rows(sec_bins))
    pos_rows = [(repr(r["position"]), repr(r["mean_centricity"]),
                 repr(r["mean_actionness"]), repr(r["mean_tiou"]), r["count"])
                for r in position_profile(samples)]
    _write_csv(out / "position_profile.csv",
               ("position", "mean_centricity", "mean_actionness",
                "mean_tiou", "count"), pos_rows)
    write_manifest(out, "diagnose", cfg, extra={
        "num_videos": len(videos),
        "num_records": len(records),
        "num_position_samples": len(samples),
    })
    print(f"profiled {len(records)} matched proposals from "
          f"{len(videos)} videos")
    return 0


# -- ablate --------------------------------------------------------------


def run_cell(cfg, train_path, eval_path, out_dir):
    """Train + eval one configuration; the same path the standalone
    commands take, so a grid cell reproduces a by-hand run exactly."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    train_videos = read_dataset(train_path)
    check_class_counts(cfg, train_videos)
    model, store, lines = train(cfg, train_videos)
    (out / "train_log.txt").write_text("\n".join(lines) + "\n",
                                       encoding="utf-8")
    save_checkpoint(out / "checkpoint.bin", cfg, store)
    eval_videos = read_dataset(eval_path)
    check_class_counts(cfg, eval_videos)
    table, per_video = evaluate_model(model, eval_videos,
                                      cfg.eval_thresholds)
    write_map_table(out / "map_table.csv", table)
    write_predictions(out / "predictions.json",
                      _detection_rows_by_video(per_video))
    write_manifest(out, "train+eval", cfg, extra={
        "num_train_videos": len(train_videos),
        "num_eval_videos": len(eval_videos),
    })
    return {task: table.average(task) for task in ("verb", "noun", "action")}


def cmd_ablate(args):
    out = _out_dir(args)
    axes = parse_grid(args.grid)
    cells = expand_cells(axes)
    base_cfg = _load_cfg(args)
    base_text = canonical_text(base_cfg)
    eval_path = args.eval_dataset or args.dataset
    results = run_grid(base_text, cells, args.dataset, eval_path, out,
                       seed=args.seed, workers=args.workers)
    rows = [(name, task, repr(summary[task]))
            for name, summary in results
            for task in ("verb", "noun", "action")]
    _write_csv(out / "ablation_summary.csv", ("cell", "task", "avg_mAP"),
               rows)
    write_manifest(out, "ablate", base_cfg, extra={
        "grid": args.grid,
        "cells": [name for name, _ in cells],
        "workers": args.workers,
    })
    for name, summary in results:
        print(f"{name}: action mAP {summary['action']:.4f}")
    return 0


# -- parser --------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="avtad",
        description="audio-visual temporal action detection toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, checkpoint=False):
        p.add_argument("--config", default=None,
                       help="config file of dotted key = value lines")
        p.add_argument("--dataset", required=True,
                       help="dataset directory (annotations + features)")
        p.add_argument("--out", required=True,
                       help="output directory for artifacts")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--set", action="append", default=[],
                       metavar="KEY=VALUE", help="override one config key")
        if checkpoint:
            p.add_argument("--checkpoint", default=None, required=False,
                           help="trained model file")

    p_train = sub.add_parser("train", help="fit a detector on a dataset")
    common(p_train)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="score a trained detector")
    common(p_eval, checkpoint=True)
    p_eval.add_argument("--inject-gt", action="store_true",
                        help="score the annotations against themselves "
                             "(pipeline sanity check)")
    p_eval.set_defaults(func=cmd_eval)

    p_diag = sub.add_parser("diagnose",
                            help="per-proposal quality profiles")
    common(p_diag, checkpoint=True)
    p_diag.set_defaults(func=cmd_diagnose)

    p_abl = sub.add_parser("ablate", help="train/eval a grid of variants")
    common(p_abl)
    p_abl.add_argument("--grid", required=True,
                       help="axes like audio=on,off;lambda3=0,1.7")
    p_abl.add_argument("--eval-dataset", default=None,
                       help="held-out dataset (defaults to --dataset)")
    p_abl.add_argument("--workers", type=int, default=1,
                       help="parallel worker processes")
    p_abl.set_defaults(func=cmd_ablate)
    return parser


EXIT_CODES = (
    (ConfigurationError, 2),
    (DataFormatError, 3),
    (NumericError, 4),
)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except AvtadError as e:
        for klass, code in EXIT_CODES:
            if isinstance(e, klass):
                print(f"error: {e}", file=sys.stderr)
                return code
        print(f"error: {e}", file=sys.stderr)
        return 1


def entry():
    """Console-script hook."""
    sys.exit(main())


if __name__ == "__main__":
    entry()
