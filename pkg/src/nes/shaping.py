"""Rank-based fitness shaping.

Raw fitness values are replaced by fixed utilities that depend only on each
sample's rank in its batch, which makes the search invariant under any strictly
increasing transformation of the objective.
"""

import math

import numpy as np
from scipy.stats import rankdata

__all__ = ["InvalidFitnessError", "default_utilities", "shape", "success_utilities"]


class InvalidFitnessError(ValueError):
    """A fitness value is NaN and cannot be ranked."""


def default_utilities(lam):
    """Zero-sum utilities ``u_1 >= ... >= u_lam`` for a population of size ``lam``.

    ``u_k = max(0, ln(lam/2 + 1) - ln k) / sum_j max(0, ln(lam/2 + 1) - ln j) - 1/lam``
    """
    lam = int(lam)
    if lam < 2:
        raise ValueError(f"population size must be >= 2, got {lam}")
    k = np.arange(1, lam + 1)
    raw = np.maximum(0.0, math.log(lam / 2.0 + 1.0) - np.log(k))
    return raw / raw.sum() - 1.0 / lam


def shape(fitnesses, utilities=None, maximize=True):
    """Assign utilities to samples by rank, returned in the original sample order.

    The best sample receives ``utilities[0]``. Tied samples share the mean of the
    utilities of the rank slots they occupy, so the total is preserved.
    """
    f = np.asarray(fitnesses, dtype=float)
    if f.ndim != 1:
        raise ValueError("fitnesses must be a vector")
    if np.any(np.isnan(f)):
        raise InvalidFitnessError("cannot rank NaN fitness values")
    u = default_utilities(f.size) if utilities is None else np.asarray(utilities, dtype=float)
    if u.shape != f.shape:
        raise ValueError(f"got {u.size} utilities for {f.size} fitness values")
    key = -f if maximize else f
    # 0-based slot of each sample, best first
    slot = np.argsort(key, kind="stable")
    out = np.empty_like(u)
    out[slot] = u
    if np.unique(key).size < key.size:
        groups = rankdata(key, method="dense")
        sums = np.bincount(groups, weights=out)
        counts = np.bincount(groups)
        out = sums[groups] / counts[groups]
    return out


def success_utilities(improved):
    """Utilities ``(parent, offspring)`` for (1+1) selection."""
    return (-4.0, 1.0) if improved else (0.8, 0.0)
