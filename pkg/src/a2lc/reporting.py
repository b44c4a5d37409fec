"""Label-quality metrics and the per-run report files."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .dataset import DatasetState
from .lcm import CorrectionEvent

ROUNDS_HEADER = ["round", "clicks_used", "data_accuracy", "data_miou",
                 "lcm_corrected", "lcm_oa_before", "lcm_oa_after"]
EVENTS_HEADER = ["round", "mask_id", "source", "old_label", "new_label",
                 "confidence", "tau", "old_rank", "new_rank"]


@dataclass
class RoundReport:
    round: int
    clicks_used: int
    data_accuracy: float
    data_miou: float
    lcm_corrected_count: int
    lcm_oa_before: float | None
    lcm_oa_after: float | None
    sampled_class_counts: list[int]
    pool_size_before: int = 0
    pool_size_after: int = 0
    tau: float | None = None
    imbalance: float | None = None
    queried_ids: list[int] = field(default_factory=list)
    events: list[CorrectionEvent] = field(default_factory=list, repr=False)


@dataclass
class RunReport:
    config: dict[str, Any]
    config_hash: str
    master_seed: int
    initial_accuracy: float
    initial_miou: float
    rounds: list[RoundReport]
    events: list[CorrectionEvent]
    events_path: str | None = None

    @property
    def lcm_enabled(self) -> bool:
        return bool(self.config["run"]["lcm_enabled"])


def data_accuracy(ds: DatasetState) -> float:
    """Fraction of pixels whose pseudo-label matches the truth."""
    if ds.num_pixels == 0:
        raise ValueError("empty dataset")
    agree = ds.pseudo_label == ds.true_label
    return float(ds.mask_sizes[agree].sum() / ds.num_pixels)


def miou(pred: np.ndarray, truth: np.ndarray, num_classes: int, weights: np.ndarray | None = None) -> float:
    """Mean IoU over classes present in either labeling. ``weights`` counts pixels per entry."""
    pred = np.asarray(pred, dtype=int)
    truth = np.asarray(truth, dtype=int)
    if pred.size == 0:
        raise ValueError("empty dataset")
    w = np.ones(pred.size) if weights is None else np.asarray(weights, dtype=float)
    inter = np.bincount(truth[pred == truth], weights=w[pred == truth], minlength=num_classes)
    union = (np.bincount(pred, weights=w, minlength=num_classes)
             + np.bincount(truth, weights=w, minlength=num_classes) - inter)
    keep = union > 0
    return float(np.mean(inter[keep] / union[keep]))


def data_miou(ds: DatasetState) -> float:
    return miou(ds.pseudo_label, ds.true_label, ds.num_classes, ds.mask_sizes)


def resolve_events(events: Sequence[CorrectionEvent], ds: DatasetState) -> list[CorrectionEvent]:
    """Fill the correctness flags against the hidden truth."""
    out = []
    for e in events:
        truth = int(ds.true_label[e.mask_id])
        out.append(replace(e, was_correct_before=e.old_label == truth, is_correct_after=e.new_label == truth))
    return out


def lcm_oa(events: Sequence[CorrectionEvent]) -> tuple[float | None, float | None]:
    """Overall accuracy of lcm-touched masks before and after; ``(None, None)`` if none."""
    lcm = [e for e in events if e.source == "lcm"]
    if not lcm:
        return None, None
    if any(e.was_correct_before is None or e.is_correct_after is None for e in lcm):
        raise ValueError("events must be resolved against truth first")
    n = len(lcm)
    return (sum(e.was_correct_before for e in lcm) / n, sum(e.is_correct_after for e in lcm) / n)


def class_sampling_report(queried_labels: Sequence[Sequence[int]], num_classes: int):
    """Per-round and cumulative tallies of queried masks by pseudo-label at query time."""
    per_round = [np.bincount(np.asarray(q, dtype=int), minlength=num_classes).astype(int).tolist()
                 for q in queried_labels]
    cumulative = np.sum(per_round, axis=0).astype(int).tolist() if per_round else [0] * num_classes
    return per_round, cumulative


def _num(x: float | None) -> str:
    return "" if x is None else f"{x:.6f}"


def _opt(x) -> str:
    return "" if x is None else str(x)


def _round_floats(obj):
    if isinstance(obj, float):
        return round(obj, 6)
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def manifest_dict(run: RunReport) -> dict[str, Any]:
    cumulative = [int(sum(col)) for col in zip(*(r.sampled_class_counts for r in run.rounds))]
    return _round_floats({
        "tool": "a2lc",
        "tool_version": __version__,
        "config": run.config,
        "config_hash": run.config_hash,
        "master_seed": run.master_seed,
        "lcm_enabled": run.lcm_enabled,
        "click_unit": "mask query",
        "initial": {"data_accuracy": run.initial_accuracy, "data_miou": run.initial_miou},
        "rounds": [
            {"round": r.round, "clicks_used": r.clicks_used, "pool_size_before": r.pool_size_before,
             "pool_size_after": r.pool_size_after, "tau": r.tau, "imbalance": r.imbalance,
             "sampled_class_counts": r.sampled_class_counts}
            for r in run.rounds
        ],
        "cumulative_sampled_class_counts": cumulative,
        "files": {"rounds": "rounds.csv", "events": "events.csv"},
    })


def _write_csv(path: Path, header: list[str], rows: list[list[str]]) -> None:
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise OSError(f"could not write {path}: {exc}") from exc


def emit_outputs(run: RunReport, out_dir: str | Path) -> dict[str, Path]:
    """Write rounds.csv, events.csv and manifest.json into ``out_dir``."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"could not create output directory {out}: {exc}") from exc
    paths = {"rounds": out / "rounds.csv", "events": out / "events.csv", "manifest": out / "manifest.json"}

    _write_csv(paths["rounds"], ROUNDS_HEADER, [
        [str(r.round), str(r.clicks_used), _num(r.data_accuracy), _num(r.data_miou),
         str(r.lcm_corrected_count), _num(r.lcm_oa_before), _num(r.lcm_oa_after)]
        for r in run.rounds
    ])
    _write_csv(paths["events"], EVENTS_HEADER, [
        [str(e.round), str(e.mask_id), e.source, str(e.old_label), str(e.new_label),
         _num(e.confidence), _num(e.tau), _opt(e.old_rank), _opt(e.new_rank)]
        for e in run.events
    ])
    text = json.dumps(manifest_dict(run), indent=2, sort_keys=True) + "\n"
    try:
        paths["manifest"].write_text(text, newline="\n")
    except OSError as exc:
        raise OSError(f"could not write {paths['manifest']}: {exc}") from exc
    run.events_path = str(paths["events"])
    return paths
