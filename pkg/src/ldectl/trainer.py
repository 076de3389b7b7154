"""Policy-gradient training of the controller over a function portfolio.

Each epoch draws one shared random population, evaluates it on every
training function, rolls out L trajectories per function from that
common start (fresh zero controller state each time), and applies a
single averaged REINFORCE ascent step: every trajectory's per-step
log-density gradients are scaled by its undiscounted return (optionally
minus the per-function mean return) and chained through the recurrence
by full backpropagation through time.

Randomness is addressed per purpose -- ("weights"), ("epoch", e,
"init"), ("epoch", e, "traj", k, l) -- so results are identical for any
worker count and training can resume from a checkpoint bit-exactly.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .benchfn import error_value
from .de_core import Population, evolve
from .errors import NumericFailure
from .neural import (
    FIELD_ORDER,
    ControllerWeights,
    backward_through_time,
    flatten_weights,
    forward_step,
    grad_norm,
    init_weights,
    sgd_ascent,
    weights_add_scaled,
    weights_zeros_like,
    zero_state,
)
from .policy import PolicyConfig, logprob_grad_mu, reward, sample_action, trajectory_return
from .rng import stream
from .state_feat import HistRing, assemble_state


@dataclass
class TrainConfig:
    epochs: int = 60
    rollouts: int = 10       # trajectories per function per epoch
    horizon: int = 30        # generations per trajectory
    pop_size: int = 20
    bins: int = 5
    window: int = 5
    hidden: int = 32
    alpha: float = 0.005
    sigma: float = 0.1
    p_best: float = 0.05
    f_min: float = 1e-3
    seed: int = 0
    baseline: bool = False   # subtract the per-function mean return
    n_functions: Optional[int] = None  # validated against the suite when set

    def __post_init__(self):
        if self.epochs < 0 or self.horizon < 0:
            raise ValueError("epochs and horizon must be non-negative")
        if self.rollouts < 1:
            raise ValueError("rollouts must be >= 1")
        if self.pop_size < 4:
            raise ValueError("pop_size must be >= 4")
        if self.bins < 1 or self.window < 1 or self.hidden < 1:
            raise ValueError("bins, window, and hidden must be >= 1")
        if self.alpha < 0.0:
            raise ValueError("alpha must be non-negative")
        if not 0.0 < self.p_best <= 1.0:
            raise ValueError("p_best must lie in (0, 1]")
        if self.n_functions is not None and self.n_functions < 1:
            raise ValueError("n_functions must be >= 1 when set")
        # PolicyConfig validates sigma and f_min
        self.policy()

    @property
    def input_size(self) -> int:
        return self.pop_size + 2 * self.bins

    def policy(self) -> PolicyConfig:
        return PolicyConfig(sigma=self.sigma, f_min=self.f_min)


@dataclass
class StepRecord:
    state: object
    tape: object
    action: object
    mu: np.ndarray
    reward: float


@dataclass
class Trajectory:
    function_id: str
    steps: list = field(default_factory=list)
    total_return: float = 0.0


def sample_trajectory(w: ControllerWeights, objective, pop0: Population,
                      cfg: TrainConfig, rng) -> Trajectory:
    """Roll the controller out for cfg.horizon generations from pop0."""
    pcfg = cfg.policy()
    ring = HistRing(cfg.window)
    state = zero_state(cfg.hidden)
    pop = pop0
    err_prev = error_value(objective, float(pop.fitness.min()))
    steps = []
    for _ in range(cfg.horizon):
        feat = assemble_state(pop, ring, cfg.bins)
        mu, state, tape = forward_step(w, feat.as_vector, state)
        action = sample_action(mu, pcfg, rng)
        pop = evolve(pop, objective, action.sheet(), cfg.p_best, rng)
        err_next = error_value(objective, float(pop.fitness.min()))
        steps.append(StepRecord(feat, tape, action, mu, reward(err_prev, err_next)))
        err_prev = err_next
    return Trajectory(
        function_id=objective.id,
        steps=steps,
        total_return=trajectory_return([s.reward for s in steps]),
    )


def epoch_gradient(w: ControllerWeights, trajectories, cfg: TrainConfig) -> ControllerWeights:
    """Average REINFORCE gradient over one epoch's trajectories.

    Reduction runs in list order, so the result does not depend on how
    the rollouts were scheduled.
    """
    if not trajectories:
        raise ValueError("epoch_gradient needs at least one trajectory")
    pcfg = cfg.policy()
    offsets = {}
    if cfg.baseline:
        by_fn = {}
        for tr in trajectories:
            by_fn.setdefault(tr.function_id, []).append(tr.total_return)
        offsets = {fid: float(np.mean(rs)) for fid, rs in by_fn.items()}
    acc = weights_zeros_like(w)
    for tr in trajectories:
        scale = tr.total_return - offsets.get(tr.function_id, 0.0)
        out_grads = [scale * logprob_grad_mu(s.action, s.mu, pcfg) for s in tr.steps]
        weights_add_scaled(acc, backward_through_time(w, [s.tape for s in tr.steps], out_grads), 1.0)
    for k in FIELD_ORDER:
        getattr(acc, k).__imul__(1.0 / len(trajectories))
    return acc


def _rollout_task(payload):
    w, inst, members, fitness, cfg, epoch, k, l = payload
    rng = stream(cfg.seed, "epoch", epoch, "traj", k, l)
    return sample_trajectory(w, inst, Population(members, fitness, 0), cfg, rng)


def train(functions, cfg: TrainConfig, jobs: int = 1,
          weights: Optional[ControllerWeights] = None, start_epoch: int = 0,
          on_epoch: Optional[Callable] = None):
    """Train the controller; returns (weights, log_rows).

    ``functions`` is the training portfolio (equal dim and bounds).  Log
    rows are dicts, one per (epoch, function).  ``weights``/``start_epoch``
    resume from a checkpoint; because every epoch's streams are derived
    from (seed, epoch), a resumed run reproduces the uninterrupted one.
    Diverging weights raise NumericFailure carrying the last good state.
    """
    if not functions:
        raise ValueError("training needs at least one function")
    if cfg.n_functions is not None and cfg.n_functions != len(functions):
        raise ValueError(
            f"config expects {cfg.n_functions} functions, suite has {len(functions)}"
        )
    dim = functions[0].dim
    bounds = functions[0].bounds
    for f in functions:
        if f.dim != dim or f.bounds != bounds:
            raise ValueError("training functions must share dim and bounds")
    if not 0 <= start_epoch <= cfg.epochs:
        raise ValueError(f"start_epoch {start_epoch} outside [0, {cfg.epochs}]")

    w = weights if weights is not None else init_weights(
        cfg.hidden, cfg.input_size, cfg.pop_size, stream(cfg.seed, "weights"))
    if w.actions != cfg.pop_size or w.input_size != cfg.input_size:
        raise ValueError("weights were built for different pop_size/bins")

    log_rows = []
    lo, hi = bounds
    pool = ProcessPoolExecutor(max_workers=jobs) if jobs > 1 else None
    try:
        for epoch in range(start_epoch, cfg.epochs):
            t0 = time.perf_counter()
            members = stream(cfg.seed, "epoch", epoch, "init").uniform(
                lo, hi, size=(cfg.pop_size, dim))
            payloads = []
            for k, f in enumerate(functions):
                fitness0 = f.evaluate_batch(members)  # one shared P0 eval per function
                payloads.extend(
                    (w, f, members, fitness0, cfg, epoch, k, l)
                    for l in range(cfg.rollouts)
                )
            if pool is not None:
                trajectories = list(pool.map(_rollout_task, payloads, chunksize=4))
            else:
                trajectories = [_rollout_task(p) for p in payloads]

            grad = epoch_gradient(w, trajectories, cfg)
            gnorm = grad_norm(grad)
            new_w = sgd_ascent(w, grad, cfg.alpha)
            if not np.all(np.isfinite(flatten_weights(new_w))):
                raise NumericFailure(
                    f"weights diverged at epoch {epoch}",
                    last_good={"weights": w, "epochs_done": epoch, "log_rows": log_rows},
                )
            w = new_w

            ms = (time.perf_counter() - t0) * 1000.0
            epoch_rows = []
            for k, f in enumerate(functions):
                rets = [tr.total_return
                        for tr in trajectories[k * cfg.rollouts:(k + 1) * cfg.rollouts]]
                epoch_rows.append({
                    "epoch": epoch,
                    "function_id": f.id,
                    "mean_return": float(np.mean(rets)),
                    "return_std": float(np.std(rets)),
                    "grad_norm": gnorm,
                    "wallclock_ms": ms,
                })
            log_rows.extend(epoch_rows)
            if on_epoch is not None:
                on_epoch(epoch, w, epoch_rows)
    finally:
        if pool is not None:
            pool.shutdown()
    return w, log_rows
