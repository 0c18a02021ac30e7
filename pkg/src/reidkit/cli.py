"""Command-line interface.

Machine output goes to files (or stdout for `mine`); diagnostics go to
stderr. Exit codes: 0 success, 2 usage error, 3 data/format error, 4
insufficient-data precondition. Subcommands never modify their input files,
and report-style outputs get a rendered PNG figure next to them unless
--no-figure is passed.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from ._rng import spawn_rng
from .clusters import DEFAULT_BINS, cluster_stats, export_histogram_csv
from .core import DistanceKind, distance
from .encoder import ACTIVATIONS, encode, init_encoder, load_checkpoint, save_checkpoint
from .episodes import EpisodeSpec, evaluate
from .errors import (
    BatchTooSmallError,
    FormatError,
    InsufficientDataError,
    ReidkitError,
)
from .figures import (
    save_distance_histogram,
    save_loss_curve,
    save_metric_bars,
    save_metric_trend,
    save_projection_scatter,
)
from .pca import pca_project
from .reports import (
    build_report,
    cluster_block,
    merge_report_docs,
    metric_row,
    read_report_doc,
    write_report_doc,
)
from .store import atomic_write_text, format_float32, read_store, write_store
from .synthetic import SyntheticSpec, generate_synthetic
from .training import TrainConfig, sample_pair_rows, train
from .triplets import LossConfig, TripletBatch, mine_hard_triplets

_DISTANCES = [k.value for k in DistanceKind]


def _say(msg: str) -> None:
    print(msg, file=sys.stderr)


def _load_json(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise FormatError(f"{path}: expected a JSON object")
    return doc


def _figure_path(out_path) -> Path:
    return Path(out_path).with_suffix(".png")


def _check_distinct(parser, in_paths, out_paths) -> None:
    resolved_in = {Path(p).resolve() for p in in_paths}
    for out in out_paths:
        if Path(out).resolve() in resolved_in:
            parser.error(f"output path {out} would overwrite an input file")


# ---------------------------------------------------------------- gen-synthetic

def _cmd_gen_synthetic(args) -> int:
    doc = _load_json(args.spec) if args.spec else {}
    known = {f for f in SyntheticSpec.__dataclass_fields__}
    unknown = set(doc) - known
    if unknown:
        raise FormatError(f"{args.spec}: unknown spec keys {sorted(unknown)}")
    spec = SyntheticSpec(**doc)
    t0 = time.perf_counter()
    splits = dict(zip(("train", "val", "test"), generate_synthetic(spec)))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "tool": "reidkit",
        "tool_version": __version__,
        "spec": {f: getattr(spec, f) for f in SyntheticSpec.__dataclass_fields__},
        "dim": spec.input_dim,
        "splits": {},
    }
    for name, part in splits.items():
        path = out_dir / f"inputs_{name}.f2fe"
        write_store(part, path)
        manifest["splits"][name] = {
            "path": path.name,
            "records": len(part),
            "subjects": len(part.subject_ids()),
        }
        _say(f"wrote {path} ({len(part)} records)")
    manifest["timing"] = {"wall_clock_s": time.perf_counter() - t0}
    atomic_write_text(out_dir / "manifest.json", json.dumps(manifest, indent=2) + "\n")
    _say(f"wrote {out_dir / 'manifest.json'}")
    return 0


# ------------------------------------------------------------------------ train

_TRAIN_DEFAULTS = {
    "layer_dims": None,  # default filled from the input store: [dim, 64, 128]
    "activation": "relu",
    "init_seed": 0,
    "subjects_per_batch": 32,
    "steps": 1000,
    "learning_rate": 1e-3,
    "optimizer": "adam",
    "beta1": 0.9,
    "beta2": 0.999,
    "eps": 1e-8,
    "margin": 0.2,
    "distance": "euclidean",
    "seed": 0,
    "l2_normalize_output": False,
}


def _cmd_train(args) -> int:
    doc = _load_json(args.config) if args.config else {}
    unknown = set(doc) - set(_TRAIN_DEFAULTS)
    if unknown:
        raise FormatError(f"{args.config}: unknown config keys {sorted(unknown)}")
    cfg = dict(_TRAIN_DEFAULTS, **doc)
    inputs = read_store(args.train)
    if cfg["layer_dims"] is None:
        cfg["layer_dims"] = [inputs.dim, 64, 128]
    if cfg["activation"] not in ACTIVATIONS:
        raise FormatError(f"activation must be one of {ACTIVATIONS}, got {cfg['activation']!r}")
    model = init_encoder(cfg["layer_dims"], cfg["activation"], cfg["init_seed"])
    train_cfg = TrainConfig(
        subjects_per_batch=cfg["subjects_per_batch"],
        steps=cfg["steps"],
        learning_rate=cfg["learning_rate"],
        optimizer=cfg["optimizer"],
        beta1=cfg["beta1"],
        beta2=cfg["beta2"],
        eps=cfg["eps"],
        loss=LossConfig(margin=cfg["margin"], distance=DistanceKind(cfg["distance"])),
        seed=cfg["seed"],
        l2_normalize_output=cfg["l2_normalize_output"],
    )
    t0 = time.perf_counter()
    trained, report = train(model, inputs, train_cfg)
    wall = time.perf_counter() - t0
    save_checkpoint(trained, args.out_model)
    _say(f"wrote {args.out_model}")
    log_doc = {
        "tool": "reidkit",
        "tool_version": __version__,
        "config": dict(cfg, train_store=str(args.train)),
        "steps": {
            "loss": report.losses,
            "survivors": report.survivors,
            "dropped": report.dropped,
        },
        "model_checksum": report.model_checksum,
        "timing": {
            "wall_clock_s": wall,
            "step_seconds": report.step_seconds,
        },
    }
    atomic_write_text(args.log, json.dumps(log_doc, indent=2) + "\n")
    _say(f"wrote {args.log}")
    if not args.no_figure:
        fig = _figure_path(args.log)
        save_loss_curve(report.losses, fig)
        _say(f"wrote {fig}")
    return 0


# ------------------------------------------------------------------------ embed

def _cmd_embed(args) -> int:
    model = load_checkpoint(args.model)
    inputs = read_store(args.in_path)
    flag = True if args.l2_normalize else None
    out = encode(model, inputs, flag)
    write_store(out, args.out)
    _say(f"wrote {args.out} ({len(out)} records, dim {out.dim})")
    return 0


# ------------------------------------------------------------------------- mine

def _cmd_mine(args) -> int:
    emb = read_store(args.in_path)
    eligible = emb.eligible_subjects(2)
    if args.subjects < 2:
        raise BatchTooSmallError(f"--subjects must be >= 2, got {args.subjects}")
    if len(eligible) < args.subjects:
        raise InsufficientDataError(
            f"need {args.subjects} subjects with >= 2 images, only {len(eligible)} eligible"
        )
    rng = spawn_rng(args.seed, 0)
    rows_a, rows_p, ids = sample_pair_rows(emb, eligible, args.subjects, rng)
    cfg = LossConfig(margin=args.alpha)
    batch = TripletBatch(
        emb.vectors[rows_a].astype(np.float64),
        emb.vectors[rows_p].astype(np.float64),
        tuple(ids),
    )
    mined = mine_hard_triplets(batch, cfg, args.seed)
    print(f"batch={len(batch)} survivors={len(mined.survivors)} dropped={len(mined.dropped)}")
    for ai, _, ni in mined.triples:
        d_pos = distance(cfg.distance, batch.anchors[ai], batch.positives[ai])
        d_neg = distance(cfg.distance, batch.anchors[ai], batch.anchors[ni])
        print(
            f"pair={ai} subject={ids[ai]} negative={ni} negative_subject={ids[ni]} "
            f"d_pos={d_pos:.6g} d_neg={d_neg:.6g}"
        )
    for di in mined.dropped:
        print(f"dropped={di} subject={ids[di]} (no candidate negative)")
    return 0


# ------------------------------------------------------------------------- eval

def _cmd_eval(args) -> int:
    emb = read_store(args.in_path)
    try:
        hit_rs = tuple(int(tok) for tok in args.hit_r.split(",") if tok.strip())
    except ValueError:
        raise FormatError(f"--hit-r must be a comma-separated list of integers, got {args.hit_r!r}")
    spec = EpisodeSpec(
        n_way=args.n_way,
        k_shot=args.k_shot,
        hit_rs=hit_rs,
        episodes=args.episodes,
        seed=args.seed,
        distance=DistanceKind(args.distance),
    )
    t0 = time.perf_counter()
    aggregate = evaluate(emb, spec)
    wall = time.perf_counter() - t0
    config = {
        "input": str(args.in_path),
        "n_way": spec.n_way,
        "k_shot": spec.k_shot,
        "hit_rs": list(spec.hit_rs),
        "episodes": spec.episodes,
        "seed": spec.seed,
        "distance": spec.distance.value,
    }
    row = metric_row(aggregate)
    doc = build_report(config, [row], wall)
    write_report_doc(doc, args.out)
    _say(f"wrote {args.out}")
    if not args.no_figure:
        fig = _figure_path(args.out)
        save_metric_bars(row, fig)
        _say(f"wrote {fig}")
    return 0


# ---------------------------------------------------------------- cluster-stats

def _cmd_cluster_stats(args) -> int:
    emb = read_store(args.in_path)
    t0 = time.perf_counter()
    stats = cluster_stats(emb, DistanceKind(args.distance), args.bins)
    wall = time.perf_counter() - t0
    export_histogram_csv(stats, args.out)
    _say(f"wrote {args.out}")
    config = {
        "input": str(args.in_path),
        "bins": args.bins,
        "distance": args.distance,
    }
    doc = build_report(config, [], wall, cluster=stats)
    write_report_doc(doc, args.report)
    _say(f"wrote {args.report}")
    if not args.no_figure:
        fig = _figure_path(args.out)
        save_distance_histogram(stats, fig)
        _say(f"wrote {fig}")
    return 0


# ----------------------------------------------------------------------- report

def _cmd_report(args) -> int:
    docs = [read_report_doc(p) for p in args.merge]
    merged = merge_report_docs(docs)
    write_report_doc(merged, args.out)
    _say(f"wrote {args.out}")
    if not args.no_figure and merged["rows"]:
        fig = _figure_path(args.out)
        save_metric_trend(merged["rows"], fig)
        _say(f"wrote {fig}")
    return 0


# ---------------------------------------------------------------------- project

def _cmd_project(args) -> int:
    emb = read_store(args.in_path)
    coords, degenerate = pca_project(emb, components=2)
    if degenerate:
        _say("warning: constant embeddings, projection is all zeros")
    lines = ["subject_id,image_id,x,y"]
    for i, rec in enumerate(emb):
        lines.append(f"{rec.subject},{rec.image},{float(coords[i, 0])!r},{float(coords[i, 1])!r}")
    atomic_write_text(args.out, "\r\n".join(lines) + "\r\n")
    _say(f"wrote {args.out}")
    if not args.no_figure:
        fig = _figure_path(args.out)
        save_projection_scatter(coords, emb.subjects, fig)
        _say(f"wrote {fig}")
    return 0


# ----------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reidkit",
        description="Subject re-identification toolkit: train embedding encoders, "
        "evaluate episodic retrieval, and report cluster separation.",
    )
    parser.add_argument("--version", action="version", version=f"reidkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synthetic", help="generate a clustered synthetic benchmark")
    p.add_argument("--spec", default=None, help="JSON file of generation parameters")
    p.add_argument("--out-dir", required=True, help="directory for the three split stores")
    p.set_defaults(func=_cmd_gen_synthetic)

    p = sub.add_parser("train", help="train an encoder on an input store")
    p.add_argument("--config", default=None, help="JSON training configuration")
    p.add_argument("--train", required=True, help="input store with training vectors")
    p.add_argument("--out-model", required=True, help="checkpoint output path")
    p.add_argument("--log", required=True, help="training log (JSON) output path")
    p.add_argument("--no-figure", action="store_true", help="skip the loss-curve PNG")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("embed", help="encode a store through a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--l2-normalize", action="store_true", help="force unit-norm outputs")
    p.set_defaults(func=_cmd_embed)

    p = sub.add_parser("mine", help="mine one hard-negative batch and print it")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--subjects", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", type=float, default=0.2, help="margin recorded in the"
                   " loss config; the hardness rule itself never uses it")
    p.set_defaults(func=_cmd_mine)

    p = sub.add_parser("eval", help="episodic N-way K-shot retrieval evaluation")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--n-way", type=int, required=True)
    p.add_argument("--k-shot", type=int, required=True)
    p.add_argument("--hit-r", default="1,5", help="comma-separated hit radii")
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--distance", choices=_DISTANCES, default="euclidean")
    p.add_argument("--out", required=True, help="report (JSON) output path")
    p.add_argument("--no-figure", action="store_true")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("cluster-stats", help="intra/inter distance statistics")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--bins", type=int, default=DEFAULT_BINS)
    p.add_argument("--distance", choices=_DISTANCES, default="euclidean")
    p.add_argument("--out", required=True, help="histogram CSV output path")
    p.add_argument("--report", required=True, help="stats report (JSON) output path")
    p.add_argument("--no-figure", action="store_true")
    p.set_defaults(func=_cmd_cluster_stats)

    p = sub.add_parser("report", help="merge run reports into one table")
    p.add_argument("--merge", nargs="+", required=True, help="report files to merge")
    p.add_argument("--out", required=True)
    p.add_argument("--no-figure", action="store_true")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("project", help="2-D PCA projection for scatter plotting")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--out", required=True, help="projection CSV output path")
    p.add_argument("--no-figure", action="store_true")
    p.set_defaults(func=_cmd_project)

    return parser


_INPUT_ARGS = ("in_path", "train", "model", "spec", "config", "merge")
_OUTPUT_ARGS = ("out", "out_model", "log", "report")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    ins = []
    for name in _INPUT_ARGS:
        value = getattr(args, name, None)
        if value is None:
            continue
        ins.extend(value if isinstance(value, list) else [value])
    outs = [getattr(args, name) for name in _OUTPUT_ARGS if getattr(args, name, None)]
    try:
        _check_distinct(parser, ins, outs)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    try:
        return args.func(args)
    except (InsufficientDataError, BatchTooSmallError) as exc:
        _say(f"error: {exc}")
        return 4
    except (ReidkitError, OSError) as exc:
        _say(f"error: {exc}")
        return 3


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
