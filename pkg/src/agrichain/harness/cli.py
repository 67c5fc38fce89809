"""Command line entry point: ``agrichain {train,evaluate,sweep,tune-ss}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from ..agents import RandomPolicy
from ..agents.common import episode_seed, evaluate
from ..env import SupplyChainEnv
from .config import ALGORITHMS, ConfigError, ExperimentConfig, load_builtin, load_config
from .experiment import AXES, ExperimentError, SweepSpec, restore_learner, run_experiment, run_sweep, tune_ss
from .metrics import MetricsLog, format_summary, row_from_stats, summarize

log = logging.getLogger("agrichain")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML config (default: the shipped default)")
    p.add_argument("--seed", type=int, help="run this single seed instead of the config's list")
    p.add_argument("--out", help="CSV output path (default: stdout)")
    p.add_argument("--algo", choices=ALGORITHMS, help="override the configured algorithm")
    p.add_argument("--workers", type=int, help="a3c_dppo thread-pool size")
    p.add_argument("--epochs", type=int, help="override the configured epoch count")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--sync", dest="execution", action="store_const", const="sync")
    mode.add_argument("--async", dest="execution", action="store_const", const="async")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="agrichain", description="Perishable supply-chain inventory experiments")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train the configured algorithm and write per-epoch metrics")
    _common(p)
    p.add_argument("--checkpoint-dir", help="save final networks here, one file per seed")
    p.add_argument("--summary", action="store_true", help="print a mean ± std summary to stderr")

    p = sub.add_parser("evaluate", help="evaluate a frozen policy (random, ss, or a checkpoint)")
    _common(p)
    p.add_argument("--checkpoint", help="snapshot written by train --checkpoint-dir")
    p.add_argument("--episodes", type=int, help="evaluation episodes (default: config eval_episodes)")

    p = sub.add_parser("sweep", help="repeat the experiment along one scenario axis")
    _common(p)
    p.add_argument("--axis", required=True, choices=AXES)
    p.add_argument("--values", required=True, help="comma-separated axis values")
    p.add_argument("--summary", action="store_true")

    p = sub.add_parser("tune-ss", help="grid-tune (s,S) levels and print them as JSON")
    _common(p)
    return ap


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else load_builtin("default")
    upd = {}
    if args.seed is not None:
        upd["seeds"] = (args.seed,)
    if args.algo:
        upd["algorithm"] = args.algo
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigError("workers", "must be >= 1")
        upd["workers"] = args.workers
    if args.execution:
        upd["execution"] = args.execution
    if args.epochs is not None:
        if args.epochs < 0:
            raise ConfigError("epochs", "must be >= 0")
        upd["epochs"] = args.epochs
    return cfg.with_updates(**upd)


def _write(log_: MetricsLog, out) -> None:
    if out:
        log_.write_csv(out)
    else:
        sys.stdout.write(log_.to_csv())


def _progress(args):
    return (lambda msg: print(msg, file=sys.stderr)) if args.verbose else None


def cmd_train(args) -> int:
    cfg = _load(args)
    metrics = run_experiment(cfg, _progress(args), checkpoint_dir=args.checkpoint_dir)
    _write(metrics, args.out)
    if args.summary:
        print(format_summary(summarize(metrics)), file=sys.stderr)
    return 0


def cmd_evaluate(args) -> int:
    cfg = _load(args)
    episodes = args.episodes or cfg.eval_episodes
    out = MetricsLog()
    for seed in cfg.seeds:
        env = SupplyChainEnv(cfg.scenario, seed=seed, stream_id=3)
        if args.checkpoint:
            policy = restore_learner(cfg, args.checkpoint, seed).policy()
        elif cfg.algorithm == "random":
            policy = RandomPolicy(episode_seed(seed, 31))
        elif cfg.algorithm == "ss":
            policy = tune_ss(cfg, seed)
        else:
            raise ExperimentError(f"evaluating {cfg.algorithm} needs --checkpoint")
        stats = evaluate(env, policy, episodes, seed)
        out.append(row_from_stats(0, seed, f"{cfg.algorithm}:eval", stats, 0.0))
    _write(out, args.out)
    return 0


def cmd_sweep(args) -> int:
    cfg = _load(args)
    try:
        values = tuple(float(v) for v in args.values.split(",") if v.strip())
    except ValueError:
        raise ConfigError("values", f"not a comma-separated number list: {args.values!r}") from None
    metrics = run_sweep(SweepSpec(args.axis, values, cfg), _progress(args))
    _write(metrics, args.out)
    if args.summary:
        print(format_summary(summarize(metrics)), file=sys.stderr)
    return 0


def cmd_tune_ss(args) -> int:
    cfg = _load(args)
    result = {str(seed): tune_ss(cfg, seed).to_dict() for seed in cfg.seeds}
    text = json.dumps(result, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


COMMANDS = {"train": cmd_train, "evaluate": cmd_evaluate, "sweep": cmd_sweep, "tune-ss": cmd_tune_ss}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ExperimentError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
