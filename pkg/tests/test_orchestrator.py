import numpy as np
import pytest

from a2lc.config import RunConfig, config_hash, to_dict
from a2lc.dataset import MaskStatus, Oracle
from a2lc.orchestrator import (
    apply_lcm_events,
    apply_manual_corrections,
    build_dataset,
    derive_seed,
    initial_state,
    run_round,
    simulate,
)
from a2lc.lcm import CorrectionEvent

from .conftest import make_dataset


def check_bookkeeping(result, budget):
    """Bookkeeping invariants of one run: no mask queried twice, exact click and pool accounting."""
    seen: set[int] = set()
    pool = result.initial_dataset.num_masks
    for r in result.report.rounds:
        assert not seen & set(r.queried_ids)
        assert len(set(r.queried_ids)) == len(r.queried_ids)
        seen |= set(r.queried_ids)
        assert r.pool_size_before == pool
        assert r.clicks_used == len(r.queried_ids) == min(budget, pool)
        pool -= len(r.queried_ids)
        assert r.pool_size_after == pool
    assert np.flatnonzero(result.dataset.ever_queried).tolist() == sorted(seen)


def test_manual_correction_examples():
    ds = make_dataset([2, 3, 1], pseudo=[0, 1, 1], true=[0, 0, 1])
    oracle = Oracle(ds)
    events = apply_manual_corrections(ds, [0, 1], oracle, round=1)
    assert [(e.mask_id, e.old_label, e.new_label, e.source) for e in events] == [(0, 0, 0, "human"),
                                                                              (1, 1, 0, "human")]
    assert ds.pseudo_label.tolist() == [0, 0, 1]
    assert ds.status.tolist() == [MaskStatus.HUMAN_CORRECTED] * 2 + [MaskStatus.UNQUERIED]
    assert oracle.clicks == 2
    with pytest.raises(ValueError, match="already queried"):
        apply_manual_corrections(ds, [1], oracle)
    with pytest.raises(ValueError, match="duplicate"):
        apply_manual_corrections(ds, [2, 2], oracle)


def test_lcm_events_cannot_touch_queried_masks():
    ds = make_dataset([1, 1], pseudo=[0, 1])
    ds.ever_queried[0] = True
    with pytest.raises(ValueError):
        apply_lcm_events(ds, [CorrectionEvent(1, 0, "lcm", 0, 1)])
    apply_lcm_events(ds, [CorrectionEvent(1, 1, "lcm", 1, 0)])
    assert ds.pseudo_label.tolist() == [0, 0] and ds.status[1] == MaskStatus.LCM_CORRECTED


def test_derive_seed_separates_streams_and_rounds():
    seeds = {derive_seed(0, r, s) for r in range(3) for s in ("synth", "proxy", "lcm", "acquisition")}
    assert len(seeds) == 12
    assert derive_seed(5, 2, "proxy", 1) == derive_seed(5, 2, "proxy", 1)


def test_run_round_does_not_mutate_inputs(small_config):
    ds = build_dataset(small_config)
    state = initial_state(ds, small_config)
    before = ds.pseudo_label.copy()
    new_state, new_ds, report = run_round(state, ds, small_config)
    assert np.array_equal(ds.pseudo_label, before) and not ds.ever_queried.any()
    assert new_state.round == 1 and report.round == 1
    assert np.intersect1d(new_state.queried, new_state.unqueried).size == 0
    assert np.array_equal(np.union1d(new_state.queried, new_state.unqueried), state.pool)


def test_small_run_bookkeeping(small_config):
    result = simulate(small_config)
    assert len(result.report.rounds) == 3
    check_bookkeeping(result, small_config.budget)
    assert sum(r.clicks_used for r in result.report.rounds) <= 3 * small_config.budget


def test_budget_larger_than_pool(small_config):
    cfg = small_config.replace(run={"budget": 100}, synth={"num_masks": 40}, lcm={"epochs": 20})
    result = simulate(cfg)
    rounds = result.report.rounds
    assert rounds[0].clicks_used == 40 and rounds[1].clicks_used == 0
    assert rounds[1].pool_size_before == 0 and rounds[1].lcm_oa_before is None
    assert result.report.rounds[-1].data_accuracy == 1.0
    check_bookkeeping(result, 100)


def test_zero_budget_single_round(small_config):
    cfg = small_config.replace(run={"rounds": 1, "budget": 0})
    result = simulate(cfg)
    r = result.report.rounds[0]
    assert r.clicks_used == 0 and r.lcm_corrected_count == 0
    assert r.data_accuracy == result.report.initial_accuracy


def test_zero_noise_human_queries_are_no_ops(small_config):
    cfg = small_config.replace(synth={"noise_rate": 0.0})
    result = simulate(cfg)
    check_bookkeeping(result, cfg.budget)
    human = [e for e in result.report.events if e.source == "human"]
    assert human and all(e.old_label == e.new_label and e.was_correct_before for e in human)
    for r in result.report.rounds:
        if not any(e.source == "lcm" for e in r.events):
            assert r.data_accuracy == 1.0


def test_same_seed_same_report(small_config):
    a, b = simulate(small_config).report, simulate(small_config).report
    assert a.rounds == b.rounds and a.events == b.events and a.config_hash == b.config_hash


def test_different_master_seed_changes_dataset(small_config):
    a = build_dataset(small_config)
    b = build_dataset(small_config.replace(run={"master_seed": 1}))
    assert not np.array_equal(a.features, b.features)
    pinned = small_config.replace(synth={"seed": 42})
    assert np.array_equal(build_dataset(pinned).features,
                          build_dataset(pinned.replace(run={"master_seed": 9})).features)


@pytest.mark.parametrize("seed", [0, 1])
def test_manual_only_accuracy_is_monotone(small_config, seed):
    cfg = small_config.replace(run={"lcm_enabled": False, "master_seed": seed})
    result = simulate(cfg)
    acc = [result.report.initial_accuracy] + [r.data_accuracy for r in result.report.rounds]
    assert all(b >= a for a, b in zip(acc, acc[1:]))
    assert all(r.tau is None and r.lcm_oa_before is None for r in result.report.rounds)


def test_human_corrections_are_final(small_config):
    snapshots = []
    simulate(small_config, on_round=lambda state, ds, report: snapshots.append(ds.copy()))
    final = snapshots[-1]
    for i, snap in enumerate(snapshots):
        queried = np.flatnonzero(snap.ever_queried)
        assert np.array_equal(snap.pseudo_label[queried], snap.true_label[queried])
        for later in snapshots[i + 1:]:
            assert np.array_equal(later.pseudo_label[queried], snap.pseudo_label[queried])
    assert np.all(final.status[final.ever_queried] == MaskStatus.HUMAN_CORRECTED)


def test_lcm_events_only_touch_the_round_pool(small_config):
    result = simulate(small_config)
    queried_before: set[int] = set()
    for r in result.report.rounds:
        queried_before |= set(r.queried_ids)
        for e in r.events:
            if e.source == "lcm":
                assert e.mask_id not in queried_before


def test_config_echo_hash_matches():
    cfg = RunConfig()
    assert config_hash(to_dict(cfg)) == config_hash(cfg)
