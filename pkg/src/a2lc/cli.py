"""Command-line entry point.

Configuration errors exit with status 2; other failures exit with 1.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import reporting
from .acquisition import adaptive_weight, score_masks
from .config import ConfigError, RunConfig
from .dataset import class_pixel_counts
from .orchestrator import build_dataset, derive_seed, initial_state, run_round, simulate

log = logging.getLogger("a2lc")


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, metavar="PATH", help="run configuration file")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--seed", type=int, metavar="N", help="override run.master_seed")
    common.add_argument("--scorer", metavar="NAME", help="override acquisition.scorer")
    common.add_argument("--rounds", type=int, metavar="N", help="override run.rounds")
    common.add_argument("--budget", type=int, metavar="N", help="override run.budget")
    common.add_argument("--no-lcm", action="store_true", help="disable automatic correction")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="a2lc", description="Active and automated label correction simulator.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("run", parents=[common], help="run a full experiment and write outputs")
    score = sub.add_parser("score", parents=[common], help="dump per-mask scores at a round")
    score.add_argument("--round", type=int, default=1, metavar="R",
                       help="score the pool as seen at the start of round R (default 1)")
    sub.add_parser("synth", parents=[common], help="print a summary of the generated dataset")
    sub.add_parser("validate", parents=[common], help="check the config and print it normalized")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = cfgmod.load(args.config)
    run: dict = {}
    if args.seed is not None:
        run["master_seed"] = args.seed
    if args.rounds is not None:
        run["rounds"] = args.rounds
    if args.budget is not None:
        run["budget"] = args.budget
    if args.no_lcm:
        run["lcm_enabled"] = False
    overrides: dict = {"run": run} if run else {}
    if args.scorer is not None:
        overrides["acquisition"] = {"scorer": args.scorer}
    if overrides:
        cfg = cfg.replace(**overrides)
    cfgmod.validate(cfg)
    return cfg


def cmd_run(cfg: RunConfig, args) -> int:
    report = simulate(cfg).report
    out = Path(args.out or "a2lc-out")
    paths = reporting.emit_outputs(report, out)
    for r in report.rounds:
        print(f"round {r.round}: clicks={r.clicks_used} accuracy={r.data_accuracy:.6f} "
              f"miou={r.data_miou:.6f} lcm_corrected={r.lcm_corrected_count}")
    print(f"wrote {paths['rounds']}, {paths['events']}, {paths['manifest']}")
    return 0


def cmd_score(cfg: RunConfig, args) -> int:
    if not 1 <= args.round <= cfg.rounds:
        raise ConfigError(f"--round must lie in [1, {cfg.rounds}]")
    ds = build_dataset(cfg)
    state = initial_state(ds, cfg)
    for _ in range(args.round - 1):
        state, ds, _ = run_round(state, ds, cfg)
    pool = state.pool
    weights = adaptive_weight(class_pixel_counts(ds, pool), cfg.acquisition.kl_exponent) if pool.size else None
    seed = derive_seed(cfg.master_seed, args.round, "acquisition", cfg.acquisition.seed)
    scores = score_masks(state.proxy, ds, pool, cfg.acquisition.scorer, weights, seed=seed)
    rows = [[str(m), f"{s:.6f}", str(ds.pseudo_label[m])] for m, s in zip(pool, scores)]
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        fh = (out / f"scores_round{args.round}.csv").open("w", newline="")
    else:
        fh = sys.stdout
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["mask_id", "score", "pseudo_label"])
        writer.writerows(rows)
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def synth_summary(cfg: RunConfig) -> dict:
    ds = build_dataset(cfg)
    C = ds.num_classes
    return {
        "num_classes": C,
        "num_masks": ds.num_masks,
        "num_pixels": ds.num_pixels,
        "feature_dim": ds.feature_dim,
        "true_mask_counts": np.bincount(ds.true_label, minlength=C).tolist(),
        "pseudo_mask_counts": np.bincount(ds.pseudo_label, minlength=C).tolist(),
        "pseudo_pixel_counts": class_pixel_counts(ds, np.arange(ds.num_masks)).tolist(),
        "noisy_mask_fraction": round(float(np.mean(ds.pseudo_label != ds.true_label)), 6),
        "data_accuracy": round(reporting.data_accuracy(ds), 6),
        "data_miou": round(reporting.data_miou(ds), 6),
    }


def cmd_synth(cfg: RunConfig, args) -> int:
    text = json.dumps(synth_summary(cfg), indent=2) + "\n"
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "synth.json").write_text(text, newline="\n")
    sys.stdout.write(text)
    return 0


def cmd_validate(cfg: RunConfig, args) -> int:
    sys.stdout.write(cfgmod.dumps(cfg))
    return 0


COMMANDS = {"run": cmd_run, "score": cmd_score, "synth": cmd_synth, "validate": cmd_validate}


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - surfaced as exit code 1
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
