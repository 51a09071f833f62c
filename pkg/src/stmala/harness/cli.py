"""Command-line entry point: ``stmala {sample,oracle,compare,validate}``.

Exit status is 0 on success, 1 for configuration errors and 2 for
numerical failures.
"""
from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from ..oracle import activation_probs, enumerate_posterior, write_activation_csv
from ..rng import derive_seed
from ..samplers import NumericalError
from .config import ConfigError, ExperimentConfig, load_config

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2

log = logging.getLogger("stmala")


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.out is not None:
        changes["out"] = args.out
    if getattr(args, "replicates", None) is not None:
        changes["replicates"] = args.replicates
    return cfg.replace(**changes) if changes else cfg


def _print_summary(rows):
    print(f"{'sampler':<14}{'rep':>4}{'accept':>9}{'error':>10}{'mean|m|':>9}{'test_mse':>10}")
    for r in rows:
        err = "-" if r["final_error"] is None else f"{r['final_error']:.4f}"
        mse = "-" if r["test_mse"] is None else f"{r['test_mse']:.4f}"
        print(f"{r['sampler']:<14}{r['replicate']:>4}{r['acceptance_rate']:>9.3f}{err:>10}"
              f"{r['mean_active']:>9.2f}{mse:>10}")


def cmd_sample(args):
    from .experiment import run_experiment

    res = run_experiment(_config(args))
    if not args.quiet:
        _print_summary(res["summary"])
    return EXIT_OK


def cmd_compare(args):
    from .experiment import run_experiment

    cfg = _config(args)
    first = cfg.sampler if cfg.sampler != "rjmcmc" else "block_stmala"
    res = run_experiment(cfg, samplers=[first, "rjmcmc"])
    if not args.quiet:
        _print_summary(res["summary"])
        for s in (first, "rjmcmc"):
            errs = [r["final_error"] for r in res["summary"] if r["sampler"] == s]
            if errs and errs[0] is not None:
                print(f"median error {s}: {np.median(errs):.4f}")
    return EXIT_OK


def cmd_oracle(args):
    from pathlib import Path

    from .experiment import build_problem

    cfg = _config(args)
    prob = build_problem(cfg)
    tg = prob.target
    if not hasattr(tg, "log_prior_weight") or type(tg).__name__ == "RidgedExampleTarget":
        raise ConfigError("the oracle needs an L21 regression model")
    post = enumerate_posterior(prob.Y, prob.G, tau=tg.tau, lam=tg.lam, prior=tg.log_prior_weight,
                               mc_samples=cfg.oracle_mc_samples, seed=derive_seed(cfg.seed, 2),
                               prune_nats=cfg.oracle_prune_nats)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    post.to_csv(out / "oracle.csv")
    probs = activation_probs(post)
    write_activation_csv(out / "oracle_activation.csv", probs)
    if not args.quiet:
        for i, pr in enumerate(probs, 1):
            print(f"component {i:>3}: {pr:.6f}")
    return EXIT_OK


def cmd_validate(args):
    from .validate import run_all

    results = run_all(seed=args.seed or 0)
    ok = True
    for name, passed, detail in results:
        ok &= passed
        if not args.quiet:
            print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
    return EXIT_OK if ok else EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stmala", description="Shrinkage-thresholding MALA experiments")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config file (INI format)")
    common.add_argument("--seed", type=int, help="master seed, overrides the config")
    common.add_argument("--out", help="output directory, overrides the config")
    common.add_argument("--quiet", action="store_true", help="suppress console output")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, fn, hlp in (
        ("sample", cmd_sample, "run the configured sampler"),
        ("oracle", cmd_oracle, "enumerate the exact model posterior"),
        ("compare", cmd_compare, "STMALA vs reversible jump, replicated"),
        ("validate", cmd_validate, "run the numerical self-checks"),
    ):
        sp = sub.add_parser(name, parents=[common], help=hlp)
        if name in ("sample", "compare"):
            sp.add_argument("--replicates", type=int, help="number of chains per sampler")
        sp.set_defaults(func=fn)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
