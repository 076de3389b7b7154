"""Run the learned optimizer or a fixed-parameter baseline to a budget.

Every run shares one harness: initialise uniformly, then loop full
generations until the next one would exceed the evaluation budget or
the best error value drops to the tolerance.  The learned optimizer
re-uses the training-time featurisation and samples its parameters from
N(mu, sigma^2) each generation (a deterministic mode uses mu directly).

Baselines:

    de_rand1_fixed   DE/rand/1/bin, F = 0.5, CR = 0.8
    ctpb_fixed       current-to-pbest/1/bin, F = 0.5, CR = 0.9
    random_params    current-to-pbest/1/bin with per-individual
                     F ~ U(f_min, 1], CR ~ U[0, 1] resampled every
                     generation

``batch_experiment`` fans (algorithm, function, run) tasks over a
worker pool, but writes results in task order, so output files are
byte-identical for any worker count.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .benchfn import error_value
from .de_core import (
    ParamSheet,
    Population,
    binomial_crossover_batch,
    evolve,
    init_population,
    repair_bounds,
    select,
)
from .neural import ControllerWeights, forward_step, zero_state
from .policy import Action, PolicyConfig, sample_action
from .rng import stream
from .state_feat import HistRing, assemble_state

BASELINES = ("de_rand1_fixed", "ctpb_fixed", "random_params")
LEARNED = "lde"


@dataclass
class Termination:
    max_evals: int
    error_tol: float = 1e-8

    def __post_init__(self):
        if self.max_evals < 1:
            raise ValueError("max_evals must be positive")
        if self.error_tol < 0.0:
            raise ValueError("error_tol must be non-negative")


@dataclass
class RunConfig:
    pop_size: int = 20
    bins: int = 5
    window: int = 5
    sigma: float = 0.1
    p_best: float = 0.05
    f_min: float = 1e-3
    sample_actions: bool = True  # False: use the head means directly
    track_params: bool = False   # record per-tercile mean F / CR per generation

    def __post_init__(self):
        if self.pop_size < 4:
            raise ValueError("pop_size must be >= 4")
        if self.bins < 1 or self.window < 1:
            raise ValueError("bins and window must be >= 1")
        if not 0.0 < self.p_best <= 1.0:
            raise ValueError("p_best must lie in (0, 1]")
        PolicyConfig(sigma=self.sigma, f_min=self.f_min)


@dataclass
class RunResult:
    algorithm_id: str
    function_id: str
    seed: int                 # run index inside the batch's stream scheme
    best_error: float
    evals_used: int
    error_trace: list         # (evals, best_error), nonincreasing
    param_trace: Optional[list] = None  # (generation, tercile, mean_F, mean_CR)


def _tercile_rows(gen, order, sheet, out):
    groups = np.array_split(order, 3)
    for t, g in enumerate(groups):
        if len(g):
            out.append((gen, t, float(np.mean(sheet.F[g])), float(np.mean(sheet.CR[g]))))


def _drive(algorithm_id, objective, term: Termination, cfg: RunConfig, rng,
           gen_step, run_seed: int = 0) -> RunResult:
    """Shared budgeted loop; gen_step(pop, rng) -> (new_pop, sheet)."""
    if term.max_evals < cfg.pop_size:
        raise ValueError(
            f"budget {term.max_evals} cannot cover one evaluation of {cfg.pop_size} members"
        )
    pop = init_population(objective, cfg.pop_size, rng)
    evals = cfg.pop_size
    best = error_value(objective, float(pop.fitness.min()))
    trace = [(evals, best)]
    params = [] if cfg.track_params else None
    gen = 0
    while evals + cfg.pop_size <= term.max_evals and best > term.error_tol:
        order = np.argsort(pop.fitness, kind="stable")
        pop, sheet = gen_step(pop, rng)
        evals += cfg.pop_size
        gen += 1
        if params is not None:
            _tercile_rows(gen, order, sheet, params)
        b = error_value(objective, float(pop.fitness.min()))
        if b < best:
            best = b
            trace.append((evals, b))
    if trace[-1][0] != evals:
        trace.append((evals, best))
    return RunResult(algorithm_id, objective.id, run_seed, best, evals, trace, params)


def run_lde(w: ControllerWeights, objective, term: Termination, cfg: RunConfig,
            rng, run_seed: int = 0) -> RunResult:
    """Drive the learned controller on one function."""
    if w.actions != cfg.pop_size:
        raise ValueError(
            f"weights control {w.actions} individuals but cfg.pop_size is {cfg.pop_size}"
        )
    if w.input_size != cfg.pop_size + 2 * cfg.bins:
        raise ValueError(
            f"weights expect input {w.input_size}, featurisation yields "
            f"{cfg.pop_size + 2 * cfg.bins}"
        )
    pcfg = PolicyConfig(sigma=cfg.sigma, f_min=cfg.f_min)
    ring = HistRing(cfg.window)
    state = zero_state(w.hidden)

    def gen_step(pop, rng):
        nonlocal state
        feat = assemble_state(pop, ring, cfg.bins)
        mu, state, _ = forward_step(w, feat.as_vector, state)
        n = cfg.pop_size
        if cfg.sample_actions:
            action = sample_action(mu, pcfg, rng)
        else:
            action = Action(raw=mu, F=np.clip(mu[:n], cfg.f_min, 1.0),
                            CR=np.clip(mu[n:], 0.0, 1.0))
        sheet = action.sheet()
        return evolve(pop, objective, sheet, cfg.p_best, rng), sheet

    return _drive(LEARNED, objective, term, cfg, rng, gen_step, run_seed)


def _mutate_rand1(pop: Population, F: float, rng) -> np.ndarray:
    # v_i = x_r1 + F (x_r2 - x_r3), r1, r2, r3, i pairwise distinct
    N = pop.size
    if N < 4:
        raise ValueError(f"population must hold at least 4 members, got {N}")
    idx = np.arange(N)
    d1 = rng.integers(0, N - 1, size=N)
    r1 = d1 + (d1 >= idx)
    ex = np.sort(np.stack([idx, r1]), axis=0)
    d2 = rng.integers(0, N - 2, size=N)
    r2 = d2 + (d2 >= ex[0])
    r2 += r2 >= ex[1]
    ex = np.sort(np.stack([idx, r1, r2]), axis=0)
    d3 = rng.integers(0, N - 3, size=N)
    r3 = d3 + (d3 >= ex[0])
    r3 += r3 >= ex[1]
    r3 += r3 >= ex[2]
    X = pop.members
    return X[r1] + F * (X[r2] - X[r3])


def run_baseline(kind: str, objective, term: Termination, cfg: RunConfig,
                 rng, run_seed: int = 0) -> RunResult:
    """Drive one of the fixed-parameter baselines."""
    n = cfg.pop_size

    if kind == "de_rand1_fixed":
        sheet = ParamSheet(np.full(n, 0.5), np.full(n, 0.8))

        def gen_step(pop, rng):
            mutants = _mutate_rand1(pop, 0.5, rng)
            trials = binomial_crossover_batch(pop.members, mutants, sheet.CR, rng)
            trials = repair_bounds(trials, objective.bounds)
            return select(pop, trials, objective.evaluate_batch(trials)), sheet

    elif kind == "ctpb_fixed":
        sheet = ParamSheet(np.full(n, 0.5), np.full(n, 0.9))

        def gen_step(pop, rng):
            return evolve(pop, objective, sheet, cfg.p_best, rng), sheet

    elif kind == "random_params":

        def gen_step(pop, rng):
            sheet = ParamSheet(rng.uniform(cfg.f_min, 1.0, size=n),
                               rng.uniform(0.0, 1.0, size=n))
            return evolve(pop, objective, sheet, cfg.p_best, rng), sheet

    else:
        raise ValueError(f"unknown baseline {kind!r}; pick one of {BASELINES}")

    return _drive(kind, objective, term, cfg, rng, gen_step, run_seed)


def _run_task(payload):
    (alg, w, inst, term, cfg, master_seed, run_idx) = payload
    rng = stream(master_seed, "run", alg, inst.id, run_idx)
    if alg == LEARNED:
        return run_lde(w, inst, term, cfg, rng, run_seed=run_idx)
    return run_baseline(alg, inst, term, cfg, rng, run_seed=run_idx)


def _write_trace(out_dir: Path, res: RunResult) -> None:
    tdir = out_dir / "traces"
    tdir.mkdir(parents=True, exist_ok=True)
    stem = f"{res.algorithm_id}__{res.function_id}__{res.seed:02d}"
    with open(tdir / f"{stem}.csv", "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["evals", "best_error"])
        for evals, err in res.error_trace:
            wr.writerow([evals, repr(err)])
    if res.param_trace is not None:
        with open(tdir / f"{stem}__params.csv", "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["generation", "tercile", "mean_F", "mean_CR"])
            for gen, terc, mf, mcr in res.param_trace:
                wr.writerow([gen, terc, repr(mf), repr(mcr)])


def batch_experiment(algorithms, functions, runs: int, term: Termination,
                     cfg: RunConfig, master_seed: int,
                     weights: Optional[ControllerWeights] = None,
                     jobs: int = 1, out_dir=None) -> list:
    """Independent runs of each algorithm on each function.

    Results stream to ``out_dir/results.csv`` (plus per-run traces) in
    task order as they complete, so a crash preserves every finished
    row and re-runs are byte-identical regardless of ``jobs``.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    for alg in algorithms:
        if alg != LEARNED and alg not in BASELINES:
            raise ValueError(f"unknown algorithm {alg!r}")
        if alg == LEARNED and weights is None:
            raise ValueError("the learned optimizer needs weights")
    payloads = [
        (alg, weights if alg == LEARNED else None, fn, term, cfg, master_seed, r)
        for alg in algorithms for fn in functions for r in range(runs)
    ]

    out_path = Path(out_dir) if out_dir is not None else None
    results = []
    writer = None
    fh = None
    try:
        if out_path is not None:
            out_path.mkdir(parents=True, exist_ok=True)
            fh = open(out_path / "results.csv", "w", newline="")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["algorithm_id", "function_id", "seed", "best_error", "evals_used"])
        if jobs > 1:
            pool = ProcessPoolExecutor(max_workers=jobs)
            try:
                stream_iter = pool.map(_run_task, payloads, chunksize=1)
                for res in stream_iter:
                    results.append(res)
                    if writer is not None:
                        writer.writerow([res.algorithm_id, res.function_id, res.seed,
                                         repr(res.best_error), res.evals_used])
                        fh.flush()
                        _write_trace(out_path, res)
            finally:
                pool.shutdown()
        else:
            for payload in payloads:
                res = _run_task(payload)
                results.append(res)
                if writer is not None:
                    writer.writerow([res.algorithm_id, res.function_id, res.seed,
                                     repr(res.best_error), res.evals_used])
                    fh.flush()
                    _write_trace(out_path, res)
    finally:
        if fh is not None:
            fh.close()
    return results
