import numpy as np
import pytest

from a2lc.config import RunConfig
from a2lc.dataset import DatasetState, MaskStatus
from a2lc.nn import MLP
from a2lc.proxy import ProxyModel


def make_dataset(sizes, pseudo, true=None, num_classes=None, features=None, dim=2, seed=0):
    """Hand-built dataset; features default to seeded noise."""
    sizes = np.asarray(sizes, dtype=int)
    pseudo = np.asarray(pseudo, dtype=int)
    true = pseudo.copy() if true is None else np.asarray(true, dtype=int)
    C = num_classes or int(max(pseudo.max(), true.max()) + 1)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    if features is None:
        features = np.random.default_rng(seed).normal(size=(int(offsets[-1]), dim))
    features = np.asarray(features, dtype=float)
    return DatasetState(
        num_classes=C,
        features=features,
        mask_offsets=offsets,
        true_label=true,
        pseudo_label=pseudo,
        status=np.full(len(sizes), int(MaskStatus.UNQUERIED), dtype=np.int8),
        ever_queried=np.zeros(len(sizes), dtype=bool),
        prototypes=np.zeros((C, features.shape[1])),
    )


def fixed_model(out_weights) -> ProxyModel:
    """Proxy with an identity ReLU hidden layer and hand-set output weights (d x C)."""
    out = np.asarray(out_weights, dtype=float)
    d, C = out.shape
    return ProxyModel(MLP([np.eye(d), out], [np.zeros(d), np.zeros(C)], "relu"))


@pytest.fixture
def small_config():
    """A fast end-to-end configuration (a few seconds per run at most)."""
    return RunConfig().replace(
        run={"rounds": 3, "budget": 10, "master_seed": 0},
        synth={"num_classes": 6, "num_masks": 150, "feature_dim": 8, "zipf_exponent": 1.0},
        proxy={"epochs": 8, "hidden_dim": 16},
        lcm={"epochs": 100, "hidden_dims": (64, 32)},
    )


# one line per acceptance criterion, filled by test_acceptance and shown in the summary
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
