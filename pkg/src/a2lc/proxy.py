"""Trainable stand-in for the segmentation network.

A one-hidden-layer classifier ``d -> h -> C`` trained on pixel features
against the current pseudo-labels. Its last hidden activation serves as the
pixel representation used by mask features and cosine weighting.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import DatasetState
from .nn import MLP

_HEADER = "a2lc-proxy 1"


@dataclass(frozen=True)
class ProxyHyper:
    hidden_dim: int = 32
    epochs: int = 15
    learning_rate: float = 0.1
    batch_size: int = 64
    seed: int = 0
    activation: str = "relu"
    warm_start: bool = False
    raw_features: bool = False  # debug: use input features as the representation

    def validate(self) -> None:
        for key in ("hidden_dim", "learning_rate", "batch_size"):
            if getattr(self, key) <= 0:
                raise ValueError(f"proxy {key} must be positive")
        if self.epochs < 0:
            raise ValueError("proxy epochs must be >= 0")


@dataclass(eq=False)
class ProxyModel:
    net: MLP
    trained_on_round: int = 0
    raw_features: bool = False

    @property
    def num_classes(self) -> int:
        return self.net.num_outputs

    @property
    def feature_dim(self) -> int:
        return self.net.input_dim

    def probs(self, x: np.ndarray) -> np.ndarray:
        return self.net.probs(x)

    def features(self, x: np.ndarray) -> np.ndarray:
        if self.raw_features:
            return self.net._check_input(x).copy()
        return self.net.hidden(x)

    def dumps(self) -> str:
        return (f"{_HEADER}\ntrained_on_round {self.trained_on_round}\n"
                f"raw_features {int(self.raw_features)}\n" + self.net.dumps())

    @classmethod
    def loads(cls, text: str) -> "ProxyModel":
        head, rnd, raw, body = text.split("\n", 3)
        if head != _HEADER:
            raise ValueError("not an a2lc-proxy file")
        return cls(MLP.loads(body), int(rnd.split()[1]), bool(int(raw.split()[1])))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), newline="\n")

    @classmethod
    def load(cls, path: str | Path) -> "ProxyModel":
        return cls.loads(Path(path).read_text())


def init_proxy(feature_dim: int, num_classes: int, hyper: ProxyHyper) -> ProxyModel:
    rng = np.random.default_rng(hyper.seed)
    net = MLP.init([feature_dim, hyper.hidden_dim, num_classes], hyper.activation, rng)
    return ProxyModel(net, 0, hyper.raw_features)


def train_proxy(ds: DatasetState, hyper: ProxyHyper, *, round: int = 0,
                previous: ProxyModel | None = None) -> ProxyModel:
    """Fit on every pixel against its mask's current pseudo-label.

    Starts from a fresh initialization unless ``hyper.warm_start`` is set and a
    ``previous`` model is supplied.
    """
    hyper.validate()
    if ds.num_pixels == 0:
        raise ValueError("cannot train on an empty dataset")
    if hyper.warm_start and previous is not None:
        model = ProxyModel(previous.net.copy(), round, hyper.raw_features)
    else:
        model = init_proxy(ds.feature_dim, ds.num_classes, hyper)
        model.trained_on_round = round
    rng = np.random.default_rng([hyper.seed, 1])
    model.net.fit(ds.features, ds.pixel_pseudo_labels(), epochs=hyper.epochs,
                  learning_rate=hyper.learning_rate, batch_size=hyper.batch_size, rng=rng)
    return model


def pixel_probs(model: ProxyModel, feature: np.ndarray) -> np.ndarray:
    return model.probs(feature)


def pixel_feature(model: ProxyModel, feature: np.ndarray) -> np.ndarray:
    return model.features(feature)


def segment_mean(values: np.ndarray, segment: np.ndarray, num_segments: int) -> np.ndarray:
    """Row means of ``values`` grouped by ``segment`` (empty groups give zeros)."""
    sums = np.zeros((num_segments, values.shape[1]))
    np.add.at(sums, segment, values)
    counts = np.bincount(segment, minlength=num_segments)
    return sums / np.maximum(counts, 1)[:, None]


def mask_features(model: ProxyModel, ds: DatasetState, mask_ids) -> np.ndarray:
    """Average pixel representation per mask, rows aligned with ``mask_ids``."""
    mask_ids = np.asarray(mask_ids, dtype=int)
    if mask_ids.size == 0:
        return np.zeros((0, model.features(ds.features[:1]).shape[1]))
    pix = ds.pixel_ids(mask_ids)
    seg = np.repeat(np.arange(len(mask_ids)), ds.mask_sizes[mask_ids])
    return segment_mean(model.features(ds.features[pix]), seg, len(mask_ids))


def mask_feature(model: ProxyModel, mask_id: int, ds: DatasetState) -> np.ndarray:
    return mask_features(model, ds, [ds.check_mask(mask_id)])[0]


def dominant_from_predictions(predicted: np.ndarray, num_classes: int) -> int:
    """Most frequent predicted class; ties go to the lowest class id."""
    return int(np.argmax(np.bincount(predicted, minlength=num_classes)))


def dominant_label(model: ProxyModel, mask_id: int, ds: DatasetState) -> int:
    sl = ds.pixel_slice(mask_id)
    predicted = model.probs(ds.features[sl]).argmax(axis=1)
    return dominant_from_predictions(predicted, ds.num_classes)
