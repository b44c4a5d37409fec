"""Round loop: score, query, correct manually, correct automatically, retrain.

Seed splitting: every random stream in round ``r`` is seeded from
``SeedSequence([master_seed, r, stream, component_seed])`` where ``stream``
is 0 for the dataset, 1 for the proxy, 2 for the lcm and 3 for random
acquisition, and ``component_seed`` is the seed field of that component's
config section. Round 0 is the initial proxy fit.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import reporting
from .acquisition import adaptive_weight, as_mask_scores, dataset_imbalance, score_masks, select_top_b
from .config import RunConfig, config_hash, to_dict, validate
from .dataset import DatasetState, MaskStatus, Oracle, class_pixel_counts, generate
from .lcm import CorrectionEvent, correct_unqueried, next_tau, train_lcm
from .proxy import ProxyModel, train_proxy
from .reporting import RoundReport, RunReport

log = logging.getLogger(__name__)

STREAMS = {"synth": 0, "proxy": 1, "lcm": 2, "acquisition": 3}


def derive_seed(master_seed: int, round: int, stream: str, component_seed: int = 0) -> int:
    seq = np.random.SeedSequence([int(master_seed), int(round), STREAMS[stream], int(component_seed)])
    return int(seq.generate_state(1, np.uint32)[0])


@dataclass
class RoundState:
    round: int
    pool: np.ndarray
    proxy: ProxyModel
    queried: np.ndarray
    unqueried: np.ndarray
    clicks_used: int = 0


@dataclass
class ExperimentResult:
    report: RunReport
    dataset: DatasetState
    proxy: ProxyModel
    initial_dataset: DatasetState


def apply_manual_corrections(ds: DatasetState, selected_ids, oracle: Callable[[int], int],
                             round: int = 0) -> list[CorrectionEvent]:
    """Replace each selected mask's pseudo-label with the oracle answer, in place."""
    ids = [int(m) for m in selected_ids]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate mask id in query batch")
    for m in ids:
        ds.check_mask(m)
        if ds.ever_queried[m]:
            raise ValueError(f"mask {m} was already queried")
    events = []
    for m in ids:
        old = int(ds.pseudo_label[m])
        label = int(oracle(m))
        ds.pseudo_label[m] = label
        ds.status[m] = MaskStatus.HUMAN_CORRECTED
        ds.ever_queried[m] = True
        events.append(CorrectionEvent(round, m, "human", old, label))
    return events


def apply_lcm_events(ds: DatasetState, events: list[CorrectionEvent]) -> None:
    for e in sorted(events, key=lambda e: e.mask_id):
        if ds.ever_queried[e.mask_id]:
            raise ValueError(f"lcm may not relabel queried mask {e.mask_id}")
        ds.pseudo_label[e.mask_id] = e.new_label
        ds.status[e.mask_id] = MaskStatus.LCM_CORRECTED


def _proxy_hyper(config: RunConfig, round: int):
    seed = derive_seed(config.master_seed, round, "proxy", config.proxy.seed)
    return dataclasses.replace(config.proxy, seed=seed)


def initial_state(ds: DatasetState, config: RunConfig) -> RoundState:
    proxy = train_proxy(ds, _proxy_hyper(config, 0), round=0)
    pool = ds.unqueried_ids()
    return RoundState(0, pool, proxy, np.zeros(0, dtype=int), pool.copy())


def run_round(state: RoundState, ds: DatasetState, config: RunConfig):
    """Execute one round; returns ``(new_state, new_dataset, report)`` without mutating inputs."""
    r = state.round + 1
    ds = ds.copy()
    ds.round = r
    C = ds.num_classes
    pool = np.asarray(state.pool, dtype=int)
    tau = next_tau(config.selection, r) if config.lcm_enabled else None

    if pool.size == 0:
        report = RoundReport(r, 0, reporting.data_accuracy(ds), reporting.data_miou(ds), 0, None, None,
                             [0] * C, 0, 0, tau, None, [])
        empty = np.zeros(0, dtype=int)
        return RoundState(r, pool, state.proxy, empty, empty), ds, report

    counts = class_pixel_counts(ds, pool)
    weights = adaptive_weight(counts, config.acquisition.kl_exponent)
    imbalance = dataset_imbalance(counts)
    acq_seed = derive_seed(config.master_seed, r, "acquisition", config.acquisition.seed)
    scores = score_masks(state.proxy, ds, pool, config.acquisition.scorer, weights, seed=acq_seed)
    selected = select_top_b(as_mask_scores(pool, scores), config.budget,
                            excluded=np.flatnonzero(ds.ever_queried))
    sampled = np.bincount(ds.pseudo_label[selected], minlength=C).astype(int).tolist()

    oracle = Oracle(ds)
    events = apply_manual_corrections(ds, selected, oracle, r)
    queried = np.asarray(selected, dtype=int)
    unqueried = np.setdiff1d(pool, queried)

    lcm_events: list[CorrectionEvent] = []
    if config.lcm_enabled and queried.size:
        lcm_seed = derive_seed(config.master_seed, r, "lcm", config.lcm.seed)
        lcm = train_lcm(queried, state.proxy, ds, dataclasses.replace(config.lcm, seed=lcm_seed))
        lcm_events = correct_unqueried(lcm, state.proxy, ds, unqueried, config.selection, r)
        apply_lcm_events(ds, lcm_events)
    events = reporting.resolve_events(events + lcm_events, ds)
    oa_before, oa_after = reporting.lcm_oa(events)

    proxy = train_proxy(ds, _proxy_hyper(config, r), round=r, previous=state.proxy)

    report = RoundReport(
        round=r,
        clicks_used=oracle.clicks,
        data_accuracy=reporting.data_accuracy(ds),
        data_miou=reporting.data_miou(ds),
        lcm_corrected_count=len(lcm_events),
        lcm_oa_before=oa_before,
        lcm_oa_after=oa_after,
        sampled_class_counts=sampled,
        pool_size_before=int(pool.size),
        pool_size_after=int(unqueried.size),
        tau=tau,
        imbalance=imbalance,
        queried_ids=[int(m) for m in queried],
        events=events,
    )
    log.info("round %d: clicks=%d acc=%.4f miou=%.4f lcm=%d", r, report.clicks_used,
             report.data_accuracy, report.data_miou, report.lcm_corrected_count)
    return RoundState(r, unqueried, proxy, queried, unqueried, oracle.clicks), ds, report


def build_dataset(config: RunConfig) -> DatasetState:
    seed = config.synth.seed
    if seed is None:
        seed = derive_seed(config.master_seed, 0, "synth")
    return generate(config.synth, seed=seed)


def simulate(config: RunConfig, on_round: Callable[[RoundState, DatasetState, RoundReport], None] | None = None
             ) -> ExperimentResult:
    validate(config)
    ds = build_dataset(config)
    initial = ds.copy()
    state = initial_state(ds, config)
    rounds: list[RoundReport] = []
    events: list[CorrectionEvent] = []
    for _ in range(config.rounds):
        state, ds, report = run_round(state, ds, config)
        events.extend(report.events)
        rounds.append(report)
        if on_round is not None:
            on_round(state, ds, report)
    echo = to_dict(config)
    run = RunReport(
        config=echo,
        config_hash=config_hash(echo),
        master_seed=config.master_seed,
        initial_accuracy=reporting.data_accuracy(initial),
        initial_miou=reporting.data_miou(initial),
        rounds=rounds,
        events=events,
    )
    return ExperimentResult(run, ds, state.proxy, initial)


def run_experiment(config: RunConfig) -> RunReport:
    return simulate(config).report
