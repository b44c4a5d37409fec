"""Label correction network and its conservative relabeling rule.

The network is trained only on the masks queried in the current round
(clean, annotator-provided labels) with class-balanced cross-entropy, then
proposes labels for the remaining unqueried masks. A proposal is applied
only when every enabled gate in ``selection_criteria`` passes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import DatasetState, class_pixel_counts, rank_classes
from .nn import ACTIVATIONS, MLP
from .proxy import ProxyModel, mask_features


@dataclass(frozen=True)
class SelectionConfig:
    tau_initial: float = 0.99
    tau_increment: float = 0.002
    tau_cap: float = 0.999
    alpha: float = 0.5
    use_confidence: bool = True   # J1
    use_tail_prediction: bool = True   # J2
    use_rarest_label: bool = True   # J3

    def validate(self) -> None:
        if not 0.0 < self.tau_initial < 1.0:
            raise ValueError("tau_initial must lie in (0, 1)")
        if self.tau_increment < 0:
            raise ValueError("tau_increment must be >= 0")
        if not self.tau_initial <= self.tau_cap < 1.0:
            raise ValueError("tau_cap must satisfy tau_initial <= tau_cap < 1")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")


@dataclass(frozen=True)
class LcmHyper:
    hidden_dims: tuple[int, ...] = (256, 128, 64)
    activation: str = "relu"
    epochs: int = 300
    learning_rate: float = 0.05
    batch_size: int = 0  # 0 = full batch
    seed: int = 0

    def validate(self) -> None:
        if not 1 <= len(self.hidden_dims) <= 7 or any(h < 1 for h in self.hidden_dims):
            raise ValueError("hidden_dims must list 1 to 7 positive layer widths")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.epochs < 0 or self.learning_rate <= 0 or self.batch_size < 0:
            raise ValueError("lcm epochs >= 0, learning_rate > 0, batch_size >= 0 required")


@dataclass(eq=False)
class LcmModel:
    net: MLP

    @property
    def num_classes(self) -> int:
        return self.net.num_outputs

    def predict(self, mask_features: np.ndarray) -> np.ndarray:
        return self.net.probs(mask_features)


@dataclass(frozen=True)
class CorrectionEvent:
    """One label change proposal that was applied (or a human query).

    ``confidence``, ``tau`` and the ranks are recorded for lcm events only.
    The correctness flags are filled in against the hidden truth by
    :func:`a2lc.reporting.resolve_events`.
    """

    round: int
    mask_id: int
    source: str  # "human" or "lcm"
    old_label: int
    new_label: int
    confidence: float | None = None
    tau: float | None = None
    old_rank: int | None = None
    new_rank: int | None = None
    was_correct_before: bool | None = None
    is_correct_after: bool | None = None


def class_weights(labels: Sequence[int], num_classes: int) -> np.ndarray:
    """Normalized inverse-frequency weights over the classes present in ``labels``."""
    labels = np.asarray(labels, dtype=int)
    if labels.size == 0:
        raise ValueError("class weights need at least one queried mask")
    counts = np.bincount(labels, minlength=num_classes).astype(float)
    present = counts > 0
    inv = np.zeros(num_classes)
    inv[present] = labels.size / counts[present]
    return inv / inv.sum()


def init_lcm(input_dim: int, num_classes: int, hyper: LcmHyper) -> LcmModel:
    rng = np.random.default_rng(hyper.seed)
    return LcmModel(MLP.init([input_dim, *hyper.hidden_dims, num_classes], hyper.activation, rng))


def fit_lcm(features: np.ndarray, labels: Sequence[int], num_classes: int, hyper: LcmHyper) -> LcmModel:
    hyper.validate()
    labels = np.asarray(labels, dtype=int)
    lam = class_weights(labels, num_classes)
    model = init_lcm(features.shape[1], num_classes, hyper)
    rng = np.random.default_rng([hyper.seed, 1])
    model.net.fit(features, labels, epochs=hyper.epochs, learning_rate=hyper.learning_rate,
                  batch_size=hyper.batch_size, rng=rng, sample_weight=lam[labels])
    return model


def train_lcm(queried_ids, proxy: ProxyModel, ds: DatasetState, hyper: LcmHyper) -> LcmModel:
    """Train on the queried masks' (already human-corrected) labels."""
    queried_ids = np.asarray(queried_ids, dtype=int)
    if queried_ids.size == 0:
        raise ValueError("train_lcm needs at least one queried mask")
    return fit_lcm(mask_features(proxy, ds, queried_ids), ds.pseudo_label[queried_ids],
                   ds.num_classes, hyper)


def lcm_predict(lcm: LcmModel, mask_feature: np.ndarray) -> np.ndarray:
    return lcm.predict(mask_feature)


def tail_classes(ranks: np.ndarray, alpha: float) -> np.ndarray:
    """Boolean mask of classes whose rank is at least ``(1 - alpha) * C``."""
    ranks = np.asarray(ranks)
    return ranks >= (1.0 - alpha) * len(ranks)


def rarest_class(ranks: np.ndarray) -> int:
    return int(np.argmax(ranks))


def selection_criteria(prediction: np.ndarray, pseudo_label: int, ranks: np.ndarray, tau: float,
                       alpha: float, criteria: tuple[bool, bool, bool] = (True, True, True)) -> bool:
    """Whether an lcm proposal may overwrite ``pseudo_label``.

    ``criteria`` holds one flag per gate, ordered like the ``use_*`` fields
    of ``SelectionConfig``; disabled gates always pass.
    """
    prediction = np.asarray(prediction, dtype=float)
    ranks = np.asarray(ranks)
    use_conf, use_tail, use_rarest = criteria
    if use_conf and prediction.max() < tau:
        return False
    if use_tail and tail_classes(ranks, alpha)[int(prediction.argmax())]:
        return False
    if use_rarest and int(pseudo_label) == rarest_class(ranks):
        return False
    return True


def next_tau(selection: SelectionConfig, round: int) -> float:
    if round < 1:
        raise ValueError("rounds are numbered from 1")
    return min(selection.tau_cap, selection.tau_initial + selection.tau_increment * (round - 1))


def correct_unqueried(lcm: LcmModel, proxy: ProxyModel, ds: DatasetState, unqueried_ids,
                      selection: SelectionConfig, round: int) -> list[CorrectionEvent]:
    """Propose relabels for ``unqueried_ids``; does not mutate ``ds``.

    Ranks come from the pixel counts of ``unqueried_ids`` at call time.
    Events are returned in ascending mask id order.
    """
    ids = np.sort(np.asarray(unqueried_ids, dtype=int))
    if ids.size == 0:
        return []
    tau = next_tau(selection, round)
    ranks = rank_classes(class_pixel_counts(ds, ids))
    tail = tail_classes(ranks, selection.alpha)
    rarest = rarest_class(ranks)

    probs = lcm.predict(mask_features(proxy, ds, ids))
    pred = probs.argmax(axis=1)
    conf = probs.max(axis=1)
    old = ds.pseudo_label[ids]
    ok = pred != old
    if selection.use_confidence:
        ok &= conf >= tau
    if selection.use_tail_prediction:
        ok &= ~tail[pred]
    if selection.use_rarest_label:
        ok &= old != rarest
    return [
        CorrectionEvent(round, int(m), "lcm", int(o), int(p), float(c), tau, int(ranks[o]), int(ranks[p]))
        for m, o, p, c in zip(ids[ok], old[ok], pred[ok], conf[ok])
    ]
