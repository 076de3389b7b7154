"""Gaussian action head over the controller outputs, and the reward.

Actions are raw draws from N(mu, sigma^2) in 2N dimensions; the first
half maps to scale factors (clipped into [f_min, 1]), the second half
to crossover rates (clipped into [0, 1]).  Log-density gradients always
use the raw, pre-clip sample.  The per-generation reward is the
relative drop of the population's best error value, which lands in
[0, 1] under elitist selection regardless of the function's scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .de_core import ParamSheet
from .errors import ConsistencyError


@dataclass
class PolicyConfig:
    sigma: float = 0.1
    f_min: float = 1e-3

    def __post_init__(self):
        if not self.sigma > 0.0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not 0.0 < self.f_min < 1.0:
            raise ValueError(f"f_min must lie in (0, 1), got {self.f_min}")


@dataclass
class Action:
    """One generation's sampled parameters."""

    raw: np.ndarray  # (2N,), pre-clip Gaussian sample
    F: np.ndarray    # (N,), raw[:N] clipped into [f_min, 1]
    CR: np.ndarray   # (N,), raw[N:] clipped into [0, 1]

    def sheet(self) -> ParamSheet:
        return ParamSheet(self.F, self.CR)


def sample_action(mu, cfg: PolicyConfig, rng) -> Action:
    """Draw raw ~ N(mu, sigma^2) and clip the two halves into range."""
    mu = np.asarray(mu, dtype=float)
    if mu.ndim != 1 or mu.size % 2 != 0 or mu.size == 0:
        raise ValueError(f"mu must be 1-D with even length, got shape {mu.shape}")
    n = mu.size // 2
    raw = rng.normal(mu, cfg.sigma)
    return Action(
        raw=raw,
        F=np.clip(raw[:n], cfg.f_min, 1.0),
        CR=np.clip(raw[n:], 0.0, 1.0),
    )


def logprob_grad_mu(action: Action, mu, cfg: PolicyConfig) -> np.ndarray:
    """Gradient of ln N(raw | mu, sigma^2) with respect to mu: (raw - mu) / sigma^2."""
    mu = np.asarray(mu, dtype=float)
    if mu.shape != action.raw.shape:
        raise ValueError("mu and action must have matching shape")
    return (action.raw - mu) / (cfg.sigma ** 2)


def reward(err_prev: float, err_next: float) -> float:
    """Relative best-error improvement; 0 when stalled or already at zero."""
    if err_next > err_prev + 1e-9:
        raise ConsistencyError(
            f"best error worsened from {err_prev} to {err_next}; selection is elitist"
        )
    r = (err_prev - err_next) / (err_prev + 1e-12)
    return max(0.0, r)


def trajectory_return(rewards) -> float:
    """Undiscounted sum of per-generation rewards."""
    return float(np.sum(np.asarray(rewards, dtype=float))) if len(rewards) else 0.0
