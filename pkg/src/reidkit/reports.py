"""Run report documents: JSON with a stable key layout.

A report carries the tool version, the fully resolved configuration (every
default materialized, seed included), metric rows shaped like a results
table (one row per n_way/k_shot setting), optional cluster statistics, and a
``timing`` block. Everything outside ``timing`` is deterministic for a fixed
seed, so two runs of the same command agree byte for byte once that block is
dropped; ``strip_volatile`` does exactly that.
"""

from __future__ import annotations

import json
from datetime import datetime, timezone

from .clusters import ClusterStats
from .episodes import AggregateReport
from .errors import FormatError
from .store import atomic_write_text

TOOL_NAME = "reidkit"


def _tool_version() -> str:
    from . import __version__

    return __version__


def setting_label(n_way: int, k_shot: int) -> str:
    return f"{n_way}-{k_shot}"


def metric_row(aggregate: AggregateReport) -> dict:
    spec = aggregate.spec
    return {
        "setting": setting_label(spec.n_way, spec.k_shot),
        "n_way": spec.n_way,
        "k_shot": spec.k_shot,
        "episodes": aggregate.episodes,
        "m_recall_at_k": aggregate.m_recall_at_k,
        "recall_std": aggregate.recall_std,
        "m_hit_at_r": {str(r): aggregate.m_hit_at_r[r] for r in sorted(aggregate.m_hit_at_r)},
        "hit_std": {str(r): aggregate.hit_std[r] for r in sorted(aggregate.hit_std)},
    }


def cluster_block(stats: ClusterStats) -> dict:
    return {
        "n_subjects": len(stats.per_subject_mean),
        "miasd_mean": stats.miasd_mean,
        "miasd_std": stats.miasd_std,
        "miesd_mean": stats.miesd_mean,
        "miesd_std": stats.miesd_std,
        "bins": len(stats.intra_counts),
    }


def timing_block(wall_clock_s: float) -> dict:
    return {
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "wall_clock_s": wall_clock_s,
    }


def build_report(
    config: dict,
    rows: list[dict],
    wall_clock_s: float,
    cluster: ClusterStats | None = None,
) -> dict:
    doc = {
        "tool": TOOL_NAME,
        "tool_version": _tool_version(),
        "config": config,
        "rows": rows,
    }
    if cluster is not None:
        doc["cluster_stats"] = cluster_block(cluster)
    doc["timing"] = timing_block(wall_clock_s)
    return doc


def write_report_doc(doc: dict, path) -> None:
    atomic_write_text(path, json.dumps(doc, indent=2) + "\n")


def read_report_doc(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not a report document: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("tool") != TOOL_NAME:
        raise FormatError(f"{path}: not a {TOOL_NAME} report document")
    return doc


def merge_report_docs(docs: list[dict]) -> dict:
    """One table out of many runs: rows sorted by (n_way, k_shot, setting).

    Each merged row keeps its source run's config so the merged document
    still tells how every number was produced.
    """
    rows = []
    for doc in docs:
        for row in doc.get("rows", []):
            merged = dict(row)
            merged["config"] = doc.get("config", {})
            rows.append(merged)
    rows.sort(key=lambda r: (r.get("n_way", 0), r.get("k_shot", 0), r.get("setting", "")))
    return {
        "tool": TOOL_NAME,
        "tool_version": _tool_version(),
        "rows": rows,
        "timing": timing_block(0.0),
    }


def strip_volatile(doc: dict) -> dict:
    """Copy of the document without its timing block (for byte comparisons)."""
    out = {k: v for k, v in doc.items() if k != "timing"}
    return out
