"""Mask acquisition scores and budgeted selection.

Counts are pixel counts per pseudo-label class over the current unqueried
pool. The imbalance score uses the natural logarithm with ``0 log 0 = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .dataset import DatasetState
from .proxy import ProxyModel

SCORERS = ("random", "entropy", "margin", "cil", "abc")


@dataclass(frozen=True)
class AcquisitionConfig:
    scorer: str = "abc"
    kl_exponent: int = 3
    seed: int = 0

    def validate(self) -> None:
        if self.scorer not in SCORERS:
            raise ValueError(f"unknown scorer {self.scorer!r}; expected one of {SCORERS}")
        if int(self.kl_exponent) != self.kl_exponent or self.kl_exponent < 1:
            raise ValueError("kl_exponent must be a positive integer")


@dataclass(frozen=True)
class MaskScore:
    mask_id: int
    score: float


def _check_counts(counts) -> np.ndarray:
    counts = np.asarray(counts, dtype=float)
    if counts.ndim != 1 or np.any(counts < 0):
        raise ValueError("counts must be a vector of nonnegative values")
    if counts.sum() <= 0:
        raise ValueError("class counts are all zero (empty pool)")
    return counts


def class_rarity(counts) -> np.ndarray:
    """Smallest present count divided by each class's count; absent classes get 0."""
    counts = _check_counts(counts)
    present = counts > 0
    out = np.zeros_like(counts)
    out[present] = counts[present].min() / counts[present]
    return out


def dataset_imbalance(counts) -> float:
    """KL divergence of the class distribution from uniform."""
    counts = _check_counts(counts)
    p = counts / counts.sum()
    nz = p > 0
    return float(np.sum(p[nz] * np.log(p[nz] * len(p))))


def adaptive_weight(counts, kl_exponent: int = 3) -> np.ndarray:
    rarity = class_rarity(counts)
    power = dataset_imbalance(counts) ** kl_exponent
    return rarity ** power


def score_pixel_cil(probs: np.ndarray, pseudo_label) -> np.ndarray | float:
    """One minus the predicted probability of the pseudo-label."""
    probs = np.asarray(probs, dtype=float)
    if probs.ndim == 1:
        return float(1.0 - probs[int(pseudo_label)])
    labels = np.asarray(pseudo_label, dtype=int)
    return 1.0 - probs[np.arange(len(probs)), labels]


def score_pixel_abc(probs: np.ndarray, pseudo_label, weights: np.ndarray):
    weights = np.asarray(weights, dtype=float)
    return weights[pseudo_label] * score_pixel_cil(probs, pseudo_label)


def _cosine_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # zero-norm vectors contribute a cosine of 0
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    denom = na * nb
    dot = np.einsum("ij,ij->i", a, b)
    return np.divide(dot, denom, out=np.zeros_like(dot), where=denom > 0)


def aggregate_masks(features: np.ndarray, predicted: np.ndarray, pixel_scores: np.ndarray,
                    segment: np.ndarray, num_segments: int, num_classes: int) -> np.ndarray:
    """Cosine-weighted sum of pixel scores per mask.

    Each pixel's score is weighted by the cosine between its feature and the
    mean feature of the mask's pixels that are predicted as the mask's
    dominant class.
    """
    votes = np.zeros((num_segments, num_classes), dtype=np.int64)
    np.add.at(votes, (segment, predicted), 1)
    dominant = votes.argmax(axis=1)
    in_dominant = predicted == dominant[segment]
    sums = np.zeros((num_segments, features.shape[1]))
    np.add.at(sums, segment[in_dominant], features[in_dominant])
    centre = sums / votes[np.arange(num_segments), dominant][:, None]
    cos = _cosine_rows(features, centre[segment])
    return np.bincount(segment, weights=cos * pixel_scores, minlength=num_segments)


@dataclass
class PixelView:
    """Proxy outputs for the pixels of a set of masks, computed once per round."""

    mask_ids: np.ndarray
    segment: np.ndarray
    probs: np.ndarray
    features: np.ndarray
    pseudo: np.ndarray

    @classmethod
    def build(cls, model: ProxyModel, ds: DatasetState, mask_ids) -> "PixelView":
        mask_ids = np.asarray(mask_ids, dtype=int)
        pix = ds.pixel_ids(mask_ids)
        x = ds.features[pix]
        return cls(mask_ids, np.repeat(np.arange(len(mask_ids)), ds.mask_sizes[mask_ids]),
                   model.probs(x), model.features(x), ds.pseudo_label[ds.pixel_mask[pix]])

    def cosine_sum(self, pixel_scores: np.ndarray) -> np.ndarray:
        return aggregate_masks(self.features, self.probs.argmax(axis=1), pixel_scores,
                               self.segment, len(self.mask_ids), self.probs.shape[1])

    def segment_mean(self, values: np.ndarray) -> np.ndarray:
        return (np.bincount(self.segment, weights=values, minlength=len(self.mask_ids))
                / np.bincount(self.segment, minlength=len(self.mask_ids)))


def score_masks_abc(model: ProxyModel, ds: DatasetState, mask_ids, weights) -> np.ndarray:
    view = PixelView.build(model, ds, mask_ids)
    return view.cosine_sum(score_pixel_abc(view.probs, view.pseudo, weights))


def score_mask_abc(model: ProxyModel, mask_id: int, ds: DatasetState, weights) -> float:
    return float(score_masks_abc(model, ds, [ds.check_mask(mask_id)], weights)[0])


def _entropy(p: np.ndarray) -> np.ndarray:
    logp = np.log(np.where(p > 0, p, 1.0))
    return -(p * logp).sum(axis=1)


def _margin(p: np.ndarray) -> np.ndarray:
    top2 = np.sort(p, axis=1)[:, -2:]
    return 1.0 - (top2[:, 1] - top2[:, 0])


def score_masks(model: ProxyModel, ds: DatasetState, mask_ids, scorer: str,
                weights=None, seed: int = 0) -> np.ndarray:
    """Scores for ``mask_ids`` under ``scorer``; ``weights`` is required for ``abc``."""
    mask_ids = np.asarray(mask_ids, dtype=int)
    if scorer not in SCORERS:
        raise ValueError(f"unknown scorer {scorer!r}; expected one of {SCORERS}")
    if mask_ids.size == 0:
        return np.zeros(0)
    if scorer == "random":
        # draw for every mask so a mask's score does not depend on the pool
        return np.random.default_rng(seed).random(ds.num_masks)[mask_ids]
    view = PixelView.build(model, ds, mask_ids)
    if scorer == "entropy":
        return view.segment_mean(_entropy(view.probs))
    if scorer == "margin":
        return view.segment_mean(_margin(view.probs))
    if scorer == "cil":
        return view.cosine_sum(score_pixel_cil(view.probs, view.pseudo))
    if weights is None:
        raise ValueError("abc scoring needs adaptive class weights")
    return view.cosine_sum(score_pixel_abc(view.probs, view.pseudo, weights))


def score_mask_baseline(model: ProxyModel, mask_id: int, ds: DatasetState, scorer: str,
                        seed: int = 0) -> float:
    if scorer not in ("random", "entropy", "margin", "cil"):
        raise ValueError(f"unknown baseline scorer {scorer!r}")
    return float(score_masks(model, ds, [ds.check_mask(mask_id)], scorer, seed=seed)[0])


def as_mask_scores(mask_ids, scores) -> list[MaskScore]:
    return [MaskScore(int(m), float(s)) for m, s in zip(mask_ids, scores)]


def select_top_b(scores: Sequence[MaskScore], budget: int,
                 excluded: Iterable[int] = ()) -> list[int]:
    """Highest-scoring ``budget`` masks outside ``excluded``; ties go to the lower mask id."""
    if budget < 0:
        raise ValueError("budget must be nonnegative")
    excluded = set(int(m) for m in excluded)
    best: dict[int, float] = {}
    for s in scores:
        if s.mask_id in excluded:
            continue
        if not np.isfinite(s.score):
            raise ValueError(f"non-finite score for mask {s.mask_id}")
        if s.mask_id in best:
            raise ValueError(f"duplicate score entry for mask {s.mask_id}")
        best[s.mask_id] = s.score
    ranked = sorted(best.items(), key=lambda kv: (-kv[1], kv[0]))
    return [m for m, _ in ranked[:budget]]
