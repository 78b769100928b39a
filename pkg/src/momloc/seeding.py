"""Deterministic RNG derivation.

Every random draw in the package flows through a Generator derived from an
integer key tuple, so datasets, batches, and training runs are pure
functions of their seeds regardless of evaluation order.
"""

from __future__ import annotations

import numpy as np


def derive_rng(*key: int) -> np.random.Generator:
    """Generator seeded by an integer key tuple, stable across processes."""
    if not key:
        raise ValueError("need at least one key component")
    if not all(isinstance(k, (int, np.integer)) for k in key):
        raise TypeError(f"key components must be integers, got {key!r}")
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in key]))
