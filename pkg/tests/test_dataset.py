import dataclasses

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from a2lc.dataset import (
    Oracle,
    SynthConfig,
    class_pixel_counts,
    generate,
    nearest_prototype_neighbors,
    oracle_label,
    rank_classes,
    zipf_mask_counts,
)

from .conftest import make_dataset


def test_zero_noise_keeps_truth():
    ds = generate(SynthConfig(noise_rate=0.0, seed=4))
    assert np.array_equal(ds.pseudo_label, ds.true_label)


def test_uniform_zipf_gives_equal_counts():
    ds = generate(SynthConfig(num_classes=4, num_masks=40, zipf_exponent=0.0, seed=0))
    assert np.bincount(ds.true_label).tolist() == [10, 10, 10, 10]


def test_zipf_largest_remainder_example():
    # 22 * (1, 1/2, 1/3) / (11/6) = (12, 6, 4) exactly
    assert zipf_mask_counts(3, 22, 1.0).tolist() == [12, 6, 4]


def test_zipf_remainders_go_to_largest_fraction():
    # quotas 10 * (1, 1/2, 1/3) / (11/6) = 5.4545, 2.7273, 1.8182 -> floors 5, 2, 1; two left over
    assert zipf_mask_counts(3, 10, 1.0).tolist() == [5, 3, 2]


def test_zipf_minimum_one_mask_per_class():
    counts = zipf_mask_counts(5, 5, 4.0)
    assert counts.tolist() == [1, 1, 1, 1, 1]
    assert zipf_mask_counts(6, 10, 3.0).min() >= 1


def test_too_few_masks_rejected():
    with pytest.raises(ValueError, match="at least num_classes"):
        generate(SynthConfig(num_classes=5, num_masks=4, seed=0))


@pytest.mark.parametrize("bad", [
    {"noise_rate": 1.5}, {"prototype_separation": 0.0}, {"within_mask_sigma": -1.0},
    {"confusion_mode": "mirror"}, {"min_pixels": 5, "max_pixels": 2}, {"confused_pairs": ((0, 0),)},
])
def test_invalid_config_rejected(bad):
    with pytest.raises(ValueError):
        dataclasses.replace(SynthConfig(seed=0), **bad).validate()


def test_generation_is_deterministic():
    cfg = SynthConfig(seed=11)
    a, b = generate(cfg), generate(cfg)
    for name in ("features", "mask_offsets", "true_label", "pseudo_label", "prototypes"):
        assert np.array_equal(getattr(a, name), getattr(b, name))


def test_prototypes_respect_separation():
    cfg = SynthConfig(num_classes=12, prototype_separation=2.0, seed=3)
    p = generate(cfg).prototypes
    dist = np.linalg.norm(p[:, None] - p[None], axis=-1)
    assert dist[np.triu_indices(12, 1)].min() >= 2.0


def test_confused_pairs_are_mutual_nearest_neighbours():
    cfg = SynthConfig(num_classes=6, confused_pairs=((0, 1), (2, 3)), seed=5)
    nn = nearest_prototype_neighbors(generate(cfg).prototypes)
    assert nn[0] == 1 and nn[1] == 0 and nn[2] == 3 and nn[3] == 2


def test_noise_rate_converges():
    ds = generate(SynthConfig(num_masks=2000, noise_rate=0.3, seed=1))
    assert abs(np.mean(ds.pseudo_label != ds.true_label) - 0.3) < 0.03


def test_nearest_prototype_flips_go_to_neighbour():
    ds = generate(SynthConfig(noise_rate=0.5, seed=2))
    nn = nearest_prototype_neighbors(ds.prototypes)
    noisy = ds.pseudo_label != ds.true_label
    assert noisy.any()
    assert np.array_equal(ds.pseudo_label[noisy], nn[ds.true_label[noisy]])


def test_uniform_random_flips_change_class():
    ds = generate(SynthConfig(noise_rate=1.0, confusion_mode="uniform_random", seed=2))
    assert np.all(ds.pseudo_label != ds.true_label)


def test_features_centre_on_true_prototype():
    ds = generate(SynthConfig(num_masks=300, within_mask_sigma=0.5, seed=9))
    truth = ds.pixel_true_labels()
    for c in range(ds.num_classes):
        centre = ds.features[truth == c].mean(axis=0)
        assert np.linalg.norm(centre - ds.prototypes[c]) < 0.5


def test_oracle_is_exact_and_counts_clicks():
    ds = make_dataset([2, 3], pseudo=[0, 0], true=[3, 1], num_classes=4)
    assert oracle_label(ds, 0) == 3
    oracle = Oracle(ds)
    assert oracle(1) == oracle(1) == 1
    assert oracle.clicks == 2
    ds.pseudo_label[0] = 3
    assert oracle_label(ds, 0) == 3


def test_oracle_unknown_mask():
    ds = make_dataset([1], pseudo=[0])
    with pytest.raises(KeyError):
        oracle_label(ds, 5)


def test_class_pixel_counts_tally():
    ds = make_dataset([4, 2, 2], pseudo=[0, 1, 1])
    assert class_pixel_counts(ds).tolist() == [4, 4]


def test_class_pixel_counts_empty_pool():
    ds = make_dataset([4, 2], pseudo=[0, 1])
    ds.ever_queried[:] = True
    assert class_pixel_counts(ds).tolist() == [0, 0]


def test_class_pixel_counts_single_class():
    ds = make_dataset([3, 5], pseudo=[2, 2], num_classes=4)
    assert class_pixel_counts(ds).tolist() == [0, 0, 8, 0]


def test_class_pixel_counts_excludes_queried():
    ds = make_dataset([3, 5, 1], pseudo=[0, 1, 1])
    ds.ever_queried[1] = True
    assert class_pixel_counts(ds).tolist() == [3, 1]


@pytest.mark.parametrize("counts, ranks", [
    ([10, 5, 1], [0, 1, 2]),
    ([7, 7, 7, 7], [0, 1, 2, 3]),
    ([1, 10], [1, 0]),
    ([3, 9, 3, 0], [1, 0, 2, 3]),
])
def test_rank_classes(counts, ranks):
    assert rank_classes(counts).tolist() == ranks


@given(st.lists(st.integers(0, 50), min_size=2, max_size=12))
def test_rank_classes_is_permutation(counts):
    ranks = rank_classes(counts)
    assert sorted(ranks.tolist()) == list(range(len(counts)))


def test_dataset_views():
    ds = make_dataset([2, 1], pseudo=[1, 0], true=[1, 1])
    m = ds.mask(0)
    assert m.pixel_ids == (0, 1) and m.pseudo_label == 1 and not m.ever_queried
    assert ds.pixel(2).mask_id == 1 and ds.pixel(2).true_class == 1
    assert ds.pixel_pseudo_labels().tolist() == [1, 1, 0]
