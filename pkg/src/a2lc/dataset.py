"""Synthetic mask-labeled datasets with class imbalance and confusable-class noise.

Pixels are stored contiguously per mask: mask ``m`` owns pixel ids
``mask_offsets[m]:mask_offsets[m + 1]``. Pseudo-labels live on masks only;
a pixel's pseudo-label is always its mask's.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, Sequence

import numpy as np


class MaskStatus(IntEnum):
    UNQUERIED = 0
    HUMAN_CORRECTED = 1
    LCM_CORRECTED = 2


CONFUSION_MODES = ("nearest_prototype", "uniform_random")


@dataclass(frozen=True)
class SynthConfig:
    """Generator settings.

    ``confused_pairs`` places the second prototype of each pair at exactly
    ``prototype_separation`` from the first while every other prototype sits at
    least twice that far away, so the pair are each other's nearest neighbour.
    ``seed`` of ``None`` means "derive from the run's master seed".
    """

    num_classes: int = 10
    feature_dim: int = 16
    num_masks: int = 400
    zipf_exponent: float = 1.2
    min_pixels: int = 4
    max_pixels: int = 24
    prototype_separation: float = 3.0
    within_mask_sigma: float = 1.0
    noise_rate: float = 0.3
    confusion_mode: str = "nearest_prototype"
    confused_pairs: tuple[tuple[int, int], ...] = ()
    seed: int | None = None

    def validate(self) -> None:
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if self.feature_dim < 1:
            raise ValueError("feature_dim must be positive")
        if self.num_masks < self.num_classes:
            raise ValueError(
                f"num_masks ({self.num_masks}) must be at least num_classes ({self.num_classes})")
        if self.zipf_exponent < 0:
            raise ValueError("zipf_exponent must be >= 0")
        if not 1 <= self.min_pixels <= self.max_pixels:
            raise ValueError("pixel range must satisfy 1 <= min_pixels <= max_pixels")
        if self.prototype_separation <= 0:
            raise ValueError("prototype_separation must be positive")
        if self.within_mask_sigma <= 0:
            raise ValueError("within_mask_sigma must be positive")
        if not 0.0 <= self.noise_rate <= 1.0:
            raise ValueError("noise_rate must lie in [0, 1]")
        if self.confusion_mode not in CONFUSION_MODES:
            raise ValueError(f"confusion_mode must be one of {CONFUSION_MODES}")
        used: set[int] = set()
        for pair in self.confused_pairs:
            if len(pair) != 2 or pair[0] == pair[1]:
                raise ValueError(f"confused pair {pair} must name two distinct classes")
            for c in pair:
                if not 0 <= c < self.num_classes:
                    raise ValueError(f"confused pair {pair} references unknown class {c}")
                if c in used:
                    raise ValueError(f"class {c} appears in more than one confused pair")
                used.add(c)


@dataclass(frozen=True)
class PixelSample:
    pixel_id: int
    mask_id: int
    feature: np.ndarray
    true_class: int


@dataclass(frozen=True)
class Mask:
    """Read-only snapshot of one mask."""

    mask_id: int
    pixel_ids: tuple[int, ...]
    pseudo_label: int
    true_label: int
    status: MaskStatus
    ever_queried: bool


@dataclass(eq=False)
class DatasetState:
    num_classes: int
    features: np.ndarray        # (num_pixels, d)
    mask_offsets: np.ndarray    # (num_masks + 1,)
    true_label: np.ndarray      # (num_masks,)
    pseudo_label: np.ndarray    # (num_masks,)
    status: np.ndarray          # (num_masks,) MaskStatus codes
    ever_queried: np.ndarray    # (num_masks,) bool
    prototypes: np.ndarray      # (num_classes, d)
    round: int = 0
    pixel_mask: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        sizes = np.diff(self.mask_offsets)
        if np.any(sizes <= 0):
            raise ValueError("every mask needs at least one pixel")
        if self.mask_offsets[-1] != len(self.features):
            raise ValueError("mask offsets do not cover the pixel array")
        self.pixel_mask = np.repeat(np.arange(len(sizes)), sizes)

    @property
    def num_masks(self) -> int:
        return len(self.true_label)

    @property
    def num_pixels(self) -> int:
        return len(self.features)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def mask_sizes(self) -> np.ndarray:
        return np.diff(self.mask_offsets)

    def check_mask(self, mask_id: int) -> int:
        mask_id = int(mask_id)
        if not 0 <= mask_id < self.num_masks:
            raise KeyError(f"unknown mask id {mask_id}")
        return mask_id

    def pixel_slice(self, mask_id: int) -> slice:
        m = self.check_mask(mask_id)
        return slice(int(self.mask_offsets[m]), int(self.mask_offsets[m + 1]))

    def pixel_ids(self, mask_ids: Iterable[int]) -> np.ndarray:
        """Pixel ids of the given masks, concatenated in mask order."""
        parts = [np.arange(self.mask_offsets[m], self.mask_offsets[m + 1]) for m in mask_ids]
        return np.concatenate(parts) if parts else np.zeros(0, dtype=int)

    def pixel_pseudo_labels(self) -> np.ndarray:
        return self.pseudo_label[self.pixel_mask]

    def pixel_true_labels(self) -> np.ndarray:
        return self.true_label[self.pixel_mask]

    def unqueried_ids(self) -> np.ndarray:
        return np.flatnonzero(~self.ever_queried)

    def mask(self, mask_id: int) -> Mask:
        m = self.check_mask(mask_id)
        sl = self.pixel_slice(m)
        return Mask(m, tuple(range(sl.start, sl.stop)), int(self.pseudo_label[m]),
                    int(self.true_label[m]), MaskStatus(int(self.status[m])), bool(self.ever_queried[m]))

    def pixel(self, pixel_id: int) -> PixelSample:
        p = int(pixel_id)
        m = int(self.pixel_mask[p])
        return PixelSample(p, m, self.features[p], int(self.true_label[m]))

    def copy(self) -> "DatasetState":
        return DatasetState(self.num_classes, self.features, self.mask_offsets.copy(),
                            self.true_label.copy(), self.pseudo_label.copy(), self.status.copy(),
                            self.ever_queried.copy(), self.prototypes, self.round)


def zipf_mask_counts(num_classes: int, num_masks: int, exponent: float) -> np.ndarray:
    """Masks per class proportional to ``(k+1)^-s``, largest-remainder rounded, at least one each."""
    if num_masks < num_classes:
        raise ValueError("need at least one mask per class")
    share = np.arange(1, num_classes + 1, dtype=float) ** -exponent
    quota = num_masks * share / share.sum()
    counts = np.floor(quota).astype(int)
    remainder = quota - counts
    # stable sort keeps ascending class id among equal remainders
    order = np.argsort(-remainder, kind="stable")
    counts[order[: num_masks - counts.sum()]] += 1
    while np.any(counts == 0):
        empty = int(np.flatnonzero(counts == 0)[0])
        donor = int(np.argmax(counts))
        counts[donor] -= 1
        counts[empty] += 1
    return counts


def _pairwise_min(points: np.ndarray) -> float:
    if len(points) < 2:
        return np.inf
    diff = points[:, None, :] - points[None, :, :]
    dist = np.sqrt((diff ** 2).sum(-1))
    return float(dist[np.triu_indices(len(points), 1)].min())


def make_prototypes(config: SynthConfig, rng: np.random.Generator, max_tries: int = 10_000) -> np.ndarray:
    sep = config.prototype_separation
    partner = {b: a for a, b in config.confused_pairs}
    anchors = [c for c in range(config.num_classes) if c not in partner]
    anchor_sep = 2.0 * sep if config.confused_pairs else sep
    # start near the separation so typical gaps stay close to it; widen on repeated rejection
    scale = 1.25 * anchor_sep / np.sqrt(2.0 * config.feature_dim)
    protos = np.zeros((config.num_classes, config.feature_dim))
    for attempt in range(max_tries):
        if attempt and attempt % 50 == 0:
            scale *= 1.1
        cand = rng.normal(0.0, scale, size=(len(anchors), config.feature_dim))
        if _pairwise_min(cand) >= anchor_sep:
            protos[anchors] = cand
            break
    else:
        raise RuntimeError("could not place prototypes at the requested separation")
    placed = list(anchors)
    for b, a in sorted(partner.items()):
        for _ in range(max_tries):
            u = rng.normal(size=config.feature_dim)
            cand = protos[a] + sep * u / np.linalg.norm(u)
            others = [c for c in placed if c != a]
            if not others or np.linalg.norm(protos[others] - cand, axis=1).min() >= 1.5 * sep:
                protos[b] = cand
                placed.append(b)
                break
        else:
            raise RuntimeError(f"could not place confusable partner for class {a}")
    return protos


def nearest_prototype_neighbors(prototypes: np.ndarray) -> np.ndarray:
    dist = np.linalg.norm(prototypes[:, None, :] - prototypes[None, :, :], axis=-1)
    np.fill_diagonal(dist, np.inf)
    return dist.argmin(axis=1)


def generate(config: SynthConfig, seed: int | None = None) -> DatasetState:
    """Build a dataset; deterministic in ``seed`` (falls back to ``config.seed``)."""
    config.validate()
    seed = config.seed if seed is None else seed
    if seed is None:
        raise ValueError("generate needs a seed (config.seed or explicit argument)")
    rng = np.random.default_rng(seed)
    C = config.num_classes

    prototypes = make_prototypes(config, rng)
    per_class = zipf_mask_counts(C, config.num_masks, config.zipf_exponent)
    true_label = rng.permutation(np.repeat(np.arange(C), per_class))
    sizes = rng.integers(config.min_pixels, config.max_pixels + 1, size=config.num_masks)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    owner_class = np.repeat(true_label, sizes)
    features = prototypes[owner_class] + config.within_mask_sigma * rng.normal(
        size=(int(offsets[-1]), config.feature_dim))

    flip = rng.random(config.num_masks) < config.noise_rate
    pseudo = true_label.copy()
    if config.confusion_mode == "nearest_prototype":
        neighbor = nearest_prototype_neighbors(prototypes)
        pseudo[flip] = neighbor[true_label[flip]]
    else:
        shift = rng.integers(1, C, size=config.num_masks)
        pseudo[flip] = (true_label[flip] + shift[flip]) % C

    return DatasetState(
        num_classes=C,
        features=features,
        mask_offsets=offsets,
        true_label=true_label,
        pseudo_label=pseudo,
        status=np.full(config.num_masks, int(MaskStatus.UNQUERIED), dtype=np.int8),
        ever_queried=np.zeros(config.num_masks, dtype=bool),
        prototypes=prototypes,
    )


def oracle_label(ds: DatasetState, mask_id: int) -> int:
    return int(ds.true_label[ds.check_mask(mask_id)])


class Oracle:
    """Exact annotator; every query costs one click."""

    def __init__(self, ds: DatasetState) -> None:
        self.ds = ds
        self.clicks = 0

    def __call__(self, mask_id: int) -> int:
        label = oracle_label(self.ds, mask_id)
        self.clicks += 1
        return label


def class_pixel_counts(ds: DatasetState, mask_ids: Sequence[int] | np.ndarray | None = None) -> np.ndarray:
    """Pixel counts per pseudo-label class over ``mask_ids`` (default: the unqueried pool)."""
    ids = ds.unqueried_ids() if mask_ids is None else np.asarray(mask_ids, dtype=int)
    if ids.size == 0:
        return np.zeros(ds.num_classes, dtype=np.int64)
    counts = np.bincount(ds.pseudo_label[ids], weights=ds.mask_sizes[ids], minlength=ds.num_classes)
    return np.rint(counts).astype(np.int64)


def rank_classes(counts: Sequence[int] | np.ndarray) -> np.ndarray:
    """0-based position of each class under a descending count sort; ties go to the lower id."""
    counts = np.asarray(counts)
    order = np.lexsort((np.arange(len(counts)), -counts))
    ranks = np.empty(len(counts), dtype=int)
    ranks[order] = np.arange(len(counts))
    return ranks
