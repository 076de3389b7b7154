"""Population-state featurisation fed to the controller.

Per generation the controller sees the min-max normalised fitness
vector, its b-bin frequency histogram, and a moving average of the
histograms from the preceding g generations (zeros at the start, the
mean of whatever is available before the window fills).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np


def normalize_fitness(fitness) -> np.ndarray:
    """Min-max normalise onto [0, 1]; a flat population maps to all zeros."""
    f = np.asarray(fitness, dtype=float)
    if f.ndim != 1 or f.size == 0:
        raise ValueError("fitness must be a non-empty 1-D array")
    lo = f.min()
    span = f.max() - lo
    if span == 0.0:
        return np.zeros_like(f)
    return (f - lo) / span


def histogram(norm_fitness, bins: int) -> np.ndarray:
    """Equal-width frequency histogram over [0, 1], last bin right-inclusive."""
    v = np.asarray(norm_fitness, dtype=float)
    if bins < 1:
        raise ValueError(f"bins must be >= 1, got {bins}")
    idx = np.minimum((v * bins).astype(int), bins - 1)
    counts = np.bincount(idx, minlength=bins).astype(float)
    return counts / v.size


class HistRing:
    """Ring buffer holding the last g histograms."""

    def __init__(self, window: int):
        if window < 1:
            raise ValueError(f"window must be >= 1, got {window}")
        self.window = window
        self._buf = deque(maxlen=window)

    def __len__(self):
        return len(self._buf)

    def update_and_average(self, hist) -> np.ndarray:
        """Average of the buffered histograms, then push ``hist``.

        The average never includes the histogram being inserted: an empty
        buffer yields zeros, a partially filled one the mean of what is
        there.
        """
        hist = np.asarray(hist, dtype=float)
        if self._buf:
            avg = np.mean(np.stack(self._buf), axis=0)
        else:
            avg = np.zeros_like(hist)
        self._buf.append(hist.copy())
        return avg


@dataclass
class StateInput:
    """One generation's controller input."""

    norm_fitness: np.ndarray
    hist: np.ndarray
    hist_avg: np.ndarray

    @property
    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.norm_fitness, self.hist, self.hist_avg])


def assemble_state(pop, ring: HistRing, bins: int) -> StateInput:
    """Featurise a population and advance the histogram ring."""
    norm = normalize_fitness(pop.fitness)
    hist = histogram(norm, bins)
    return StateInput(norm_fitness=norm, hist=hist, hist_avg=ring.update_and_average(hist))
