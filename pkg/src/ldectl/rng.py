"""Deterministic random-stream splitting.

Every random draw in the package flows from one master seed through a
named stream.  A stream is addressed by a path of labels, e.g.

    stream(seed, "suite")                  instance generation
    stream(seed, "weights")                controller initialisation
    stream(seed, "epoch", e, "init")       shared population for epoch e
    stream(seed, "epoch", e, "traj", k, l) rollout l on function k in epoch e
    stream(seed, "run", alg, fn, r)        independent run r of alg on fn

Labels are hashed to 32-bit words and fed to numpy's SeedSequence as a
spawn key, so streams are independent, reproducible, and do not depend
on the order in which they are created.  That last property is what
makes worker-pool scheduling irrelevant to the results.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _label_word(label) -> int:
    if isinstance(label, (int, np.integer)):
        if label < 0:
            raise ValueError(f"stream labels must be non-negative, got {label}")
        return int(label)
    digest = hashlib.sha256(str(label).encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little")


def stream(master_seed: int, *path) -> np.random.Generator:
    """Return the generator for the stream addressed by ``path``."""
    key = tuple(_label_word(p) for p in path)
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=key))
