"""Replicated sampler runs with CSV reports.

Random streams are keyed off the master seed: ``(0,)`` generates the data,
``(1, s, r)`` drives replicate ``r`` of sampler ``s`` and the oracle's Monte
Carlo uses ``derive_seed(seed, 2)``. Reruns with the same configuration
therefore write byte-identical CSV files, whether the replicates run in one
process or in a pool of ``workers``.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import logging
import subprocess
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..oracle import MAX_P, activation_error, activation_probs, enumerate_posterior
from ..proposal import ProposalParams
from ..rjmcmc import RjParams, run_rjmcmc
from ..rng import RNG_ALGORITHM, derive_seed, make_rng
from ..samplers import ChainConfig, run_chain
from ..sparse_state import read_matrix_csv
from ..targets import L21RegressionTarget, RidgedExampleTarget, SpikeSlabTarget
from .config import ExperimentConfig, dump_config
from .data import gen_design, gen_observations, gen_truth
from .diagnostics import error_curve, log_grid, test_mse

__all__ = ["Problem", "build_problem", "run_sampler", "run_experiment", "version_string"]

log = logging.getLogger(__name__)

SAMPLER_STREAM = {"stmala": 0, "block_stmala": 1, "rjmcmc": 2}


@dataclass
class Problem:
    Y: np.ndarray
    G: np.ndarray
    target: object
    X: Optional[np.ndarray] = None
    G_test: Optional[np.ndarray] = None
    Y_test: Optional[np.ndarray] = None


def _make_target(cfg: ExperimentConfig, Y, G):
    if cfg.model in ("toy_l21", "external_csv"):
        return L21RegressionTarget(Y, G, tau=cfg.tau, lam=cfg.lam, omega=cfg.omega)
    if cfg.model == "ridged":
        return RidgedExampleTarget(Y, G, tau=cfg.tau, lam=cfg.lam, v=cfg.v, omega=cfg.omega)
    return SpikeSlabTarget(Y, G, theta=cfg.theta, a=cfg.a, K=cfg.k,
                           omega_star=cfg.omega_star, slab_constant=cfg.slab_constant)


def build_problem(cfg: ExperimentConfig) -> Problem:
    """Simulate (or load) the data set described by ``cfg``."""
    if cfg.model == "external_csv":
        Y = read_matrix_csv(cfg.y_csv)
        G = read_matrix_csv(cfg.g_csv)
        X = read_matrix_csv(cfg.x_csv) if cfg.truth == "external_csv" else None
        return Problem(Y, G, _make_target(cfg, Y, G), X)

    rng = make_rng(cfg.seed, (0,))
    scale = np.sqrt(cfg.tau) if cfg.model != "spike_slab" else 1.0 / np.sqrt(cfg.theta)
    if cfg.truth == "external_csv":
        X = read_matrix_csv(cfg.x_csv)
        if X.shape != (cfg.p, cfg.t):
            raise ValueError(f"{cfg.x_csv}: expected a {cfg.p} x {cfg.t} matrix, got {X.shape}")
    else:
        X = np.repeat(gen_truth(cfg.truth, cfg.p, cfg.support), cfg.t, axis=1)
    G = gen_design(cfg.design, cfg.n, cfg.p, rng, cfg.rho)
    Y = gen_observations(G, X, scale, rng)
    G_test = Y_test = None
    if cfg.n_test > 0:
        G_test = gen_design(cfg.design, cfg.n_test, cfg.p, rng, cfg.rho)
        Y_test = gen_observations(G_test, X, scale, rng)
    return Problem(Y, G, _make_target(cfg, Y, G), X, G_test, Y_test)


def proposal_params(cfg: ExperimentConfig, target) -> ProposalParams:
    sigma = cfg.sigma if cfg.sigma is not None else target.default_sigma()
    return ProposalParams(sigma=sigma, gamma=cfg.gamma, kind=cfg.operator,
                          truncation=cfg.truncation, atom_method=cfg.atom_method)


def run_sampler(cfg: ExperimentConfig, target, sampler: str, replicate: int = 0):
    """One chain of ``sampler`` on ``target`` with the replicate's own stream."""
    stream = (1, SAMPLER_STREAM[sampler], replicate)
    if sampler == "rjmcmc":
        return run_rjmcmc(target, cfg.n_iter, RjParams(cfg.sigma_rj), burn_in=cfg.burn_in,
                          thin=cfg.thin, seed=cfg.seed, stream=stream, backend=cfg.backend)
    p = target.dims[0]
    block = None if sampler == "stmala" else min(cfg.block_size, p)
    chain = ChainConfig(n_iter=cfg.n_iter, params=proposal_params(cfg, target), burn_in=cfg.burn_in,
                        block_size=block, thin=cfg.thin, seed=cfg.seed, stream=stream)
    return run_chain(target, chain, backend=cfg.backend)


def version_string() -> str:
    from .. import __version__

    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent, capture_output=True, text=True, timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _write_rows(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else _fmt(v) for v in row])


def oracle_applies(cfg: ExperimentConfig, target) -> bool:
    p, t = target.dims
    return cfg.oracle and t == 1 and p <= MAX_P and type(target) is L21RegressionTarget


def _replicate_job(args) -> dict:
    """Run one chain, write its trace file and reduce it to report rows."""
    cfg, target, s, r, exact, grid, out, G_test, Y_test = args
    log.info("%s replicate %d/%d", s, r + 1, cfg.replicates)
    tr = run_sampler(cfg, target, s, r)
    path = None
    if cfg.save_traces:
        path = out / f"trace_{s}_r{r}.csv"
        tr.to_csv(path)
    err = activation_error(tr, exact) if exact is not None else None
    mse = test_mse(G_test, Y_test, tr.posterior_mean()) if G_test is not None else None
    row = dict(sampler=s, replicate=r, acceptance_rate=tr.acceptance_rate, final_error=err,
               mean_active=float(tr.n_active.mean()), test_mse=mse)
    curve = error_curve(tr, exact, grid) if exact is not None else np.full(len(grid), np.nan)
    csum = np.cumsum(tr.n_active)
    pos = np.searchsorted(tr.iterations, grid, side="right")
    rows = [[s, r, int(g), None if np.isnan(e) else e, None if k == 0 else csum[k - 1] / k]
            for g, e, k in zip(grid, curve, pos)]
    return {"summary": row, "curve": rows, "freq": tr.activation_frequencies(), "trace_path": path}


def run_experiment(cfg: ExperimentConfig, samplers: Optional[Sequence[str]] = None,
                   out=None) -> dict:
    """Run every sampler for ``cfg.replicates`` chains and write the reports.

    Returns a dict with the summary rows and the paths written.
    """
    samplers = list(samplers or [cfg.sampler])
    out = Path(out if out is not None else cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    prob = build_problem(cfg)
    target = prob.target
    p, t = target.dims

    exact = None
    files = {}
    if oracle_applies(cfg, target):
        post = enumerate_posterior(
            prob.Y, prob.G, tau=target.tau, lam=target.lam, prior=target.log_prior_weight,
            mc_samples=cfg.oracle_mc_samples, seed=derive_seed(cfg.seed, 2),
            prune_nats=cfg.oracle_prune_nats,
        )
        exact = activation_probs(post)
        files["oracle"] = out / "oracle.csv"
        post.to_csv(files["oracle"])

    grid = log_grid(cfg.n_iter)
    jobs = [(s, r) for s in samplers for r in range(cfg.replicates)]
    args = [(cfg, target, s, r, exact, grid, out, prob.G_test, prob.Y_test) for s, r in jobs]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.workers, len(jobs))) as pool:
            results = list(pool.map(_replicate_job, args))
    else:
        results = [_replicate_job(a) for a in args]

    # single-writer merge, always in (sampler, replicate) order
    summary, curves, act_rows = [], [], []
    for s in samplers:
        mine = [res for (js, _), res in zip(jobs, results) if js == s]
        for res in mine:
            summary.append(res["summary"])
            curves.extend(res["curve"])
            if res["trace_path"] is not None:
                files.setdefault("traces", []).append(res["trace_path"])
        est = np.mean([res["freq"] for res in mine], axis=0)
        for i in range(p):
            ex = None if exact is None else exact[i]
            act_rows.append([s, i + 1, est[i], ex, None if ex is None else abs(est[i] - ex)])

    files["activation"] = out / "activation.csv"
    _write_rows(files["activation"], ["sampler", "component", "estimated", "exact", "abs_error"], act_rows)
    files["error_curve"] = out / "error_curve.csv"
    _write_rows(files["error_curve"], ["sampler", "replicate", "iter", "activation_error", "mean_active"], curves)
    files["summary"] = out / "summary.csv"
    cols = ["sampler", "replicate", "acceptance_rate", "final_error", "mean_active", "test_mse"]
    _write_rows(files["summary"], cols, [[row[c] for c in cols] for row in summary])

    files["manifest"] = out / "manifest.json"
    manifest = {
        "config": dataclasses.asdict(cfg),
        "config_text": dump_config(cfg),
        "seed": cfg.seed,
        "samplers": samplers,
        "version": version_string(),
        "rng": RNG_ALGORITHM,
        "streams": {"data": [0], "chain": "[1, sampler, replicate]", "oracle": [2],
                    "sampler_ids": SAMPLER_STREAM},
        "oracle": exact is not None,
    }
    files["manifest"].write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return {"summary": summary, "files": files, "exact": exact, "problem": prob}
