"""Sample reuse and online learning-rate control.

* :func:`importance_mixing` recycles the previous generation's evaluated samples
  while keeping the new batch distributed exactly according to the new search
  distribution.
* :func:`weighted_mann_whitney` is the Mann-Whitney U test with per-sample
  weights interpreted as fractional multiplicities.
* :func:`adaptation_sampling_update` uses that test on importance-reweighted
  samples to decide whether a larger learning rate would have produced better
  samples.
"""

from dataclasses import dataclass
import enum
import math

import numpy as np
from scipy.special import ndtr
from scipy.stats import rankdata

from .distributions import FullGaussianState, SeparableState, sample_full, sample_separable

__all__ = [
    "MixingStall",
    "MixingOutcome",
    "importance_mixing",
    "Decision",
    "MannWhitneyResult",
    "weighted_mann_whitney",
    "adaptation_confidence",
    "adaptation_sampling_update",
]


class MixingStall(RuntimeError):
    """Reverse rejection sampling exceeded its draw cap."""


@dataclass(frozen=True, eq=False)
class MixingOutcome:
    Z: np.ndarray
    X: np.ndarray
    fitness: np.ndarray
    fresh_count: int


def _draw(state, rng, n):
    if isinstance(state, FullGaussianState):
        return sample_full(state, rng, n)
    if isinstance(state, SeparableState):
        return sample_separable(state, rng, n)
    raise TypeError(f"importance mixing does not support {type(state).__name__}")


def importance_mixing(old_X, old_fitness, old_state, new_state, alpha, rng, evaluate,
                      popsize=None, max_draws=10**6):
    """Build a batch for ``new_state`` reusing samples drawn from ``old_state``.

    Old samples are kept with probability ``min(1, (1 - alpha) p_new / p_old)``;
    fresh samples from ``new_state`` are then accepted with probability
    ``max(alpha, 1 - p_old / p_new)`` until the batch is full. Only fresh
    samples are passed to ``evaluate``. Density ratios are formed in log space.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    old_X = np.atleast_2d(np.asarray(old_X, dtype=float))
    old_fitness = np.asarray(old_fitness, dtype=float)
    popsize = old_X.shape[0] if popsize is None else int(popsize)

    if alpha < 1.0:
        log_ratio = new_state.log_density(old_X) - old_state.log_density(old_X)
        log_accept = np.minimum(0.0, math.log1p(-alpha) + log_ratio)
        keep = np.log(rng.random(old_X.shape[0])) < log_accept
        keep_idx = np.flatnonzero(keep)[:popsize]
    else:
        keep_idx = np.empty(0, dtype=int)
    kept_X = old_X[keep_idx]
    kept_f = old_fitness[keep_idx]

    needed = popsize - kept_X.shape[0]
    fresh_Z, fresh_X = [], []
    drawn = 0
    while needed > 0:
        if drawn >= max_draws:
            raise MixingStall(f"only accepted {len(fresh_X)} fresh samples in {drawn} draws")
        Zc, Xc = _draw(new_state, rng, max(needed, 1))
        drawn += Xc.shape[0]
        log_ratio = old_state.log_density(Xc) - new_state.log_density(Xc)
        p_accept = np.maximum(alpha, -np.expm1(np.minimum(log_ratio, 0.0)))
        accept = rng.random(Xc.shape[0]) < p_accept
        for i in np.flatnonzero(accept)[:needed]:
            fresh_Z.append(Zc[i])
            fresh_X.append(Xc[i])
        needed = popsize - kept_X.shape[0] - len(fresh_X)

    d = old_X.shape[1]
    fresh_Z = np.array(fresh_Z).reshape(-1, d)
    fresh_X = np.array(fresh_X).reshape(-1, d)
    fresh_f = np.asarray(evaluate(fresh_X), dtype=float) if fresh_X.shape[0] else np.empty(0)
    return MixingOutcome(
        Z=np.vstack([new_state.to_natural(kept_X).reshape(-1, d), fresh_Z]),
        X=np.vstack([kept_X, fresh_X]),
        fitness=np.concatenate([kept_f, fresh_f]),
        fresh_count=fresh_X.shape[0],
    )


class Decision(str, enum.Enum):
    FIRST_LARGER = "first-larger"
    SECOND_LARGER = "second-larger"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class MannWhitneyResult:
    U: float
    mean: float
    std: float
    cdf: float
    decision: Decision


def _weights(w, n, name):
    w = np.ones(n) if w is None else np.asarray(w, dtype=float)
    if w.shape != (n,):
        raise ValueError(f"{name} must have one weight per value")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError(f"{name} must be finite and non-negative")
    if w.sum() <= 0:
        raise ValueError(f"{name} has zero total weight")
    return w


def weighted_mann_whitney(values, values2, rho, weights=None, weights2=None):
    """Weighted Mann-Whitney U test of ``values`` against ``values2``.

    ``U = sum_{s_i > s'_j} w_i w'_j + 1/2 sum_{s_i = s'_j} w_i w'_j`` is compared,
    through the normal approximation, against ``mu = m m' / 2`` and
    ``sigma = sqrt(m m' (m + m' + 1) / 12)`` where ``m``, ``m'`` are total weights.
    The first set is declared larger when ``Phi(z) > 1 - rho`` and the second
    when ``Phi(z) < rho``.
    """
    s = np.asarray(values, dtype=float).ravel()
    s2 = np.asarray(values2, dtype=float).ravel()
    if s.size == 0 or s2.size == 0:
        raise ValueError("both samples must be non-empty")
    if not 0.0 < rho < 0.5:
        raise ValueError(f"rho must lie in (0, 1/2), got {rho}")
    w = _weights(weights, s.size, "weights")
    w2 = _weights(weights2, s2.size, "weights2")

    diff = s[:, None] - s2[None, :]
    pair = w[:, None] * w2[None, :]
    U = float(np.sum(pair[diff > 0]) + 0.5 * np.sum(pair[diff == 0]))
    m, m2 = w.sum(), w2.sum()
    mean = 0.5 * m * m2
    std = math.sqrt(m) * math.sqrt(m2) * math.sqrt((m + m2 + 1.0) / 12.0)
    cdf = float(ndtr((U - mean) / std))
    if cdf > 1.0 - rho:
        decision = Decision.FIRST_LARGER
    elif cdf < rho:
        decision = Decision.SECOND_LARGER
    else:
        decision = Decision.INCONCLUSIVE
    return MannWhitneyResult(U, mean, std, cdf, decision)


def adaptation_confidence(d):
    return 0.5 - 1.0 / (3.0 * (d + 1))


def adaptation_sampling_update(eta, eta_init, X, fitness, state, hypothetical_state, d,
                               maximize=True, c_plus=1.1, eta_max=1.0):
    """Adapt a learning rate by virtual comparison with ``hypothetical_state``.

    ``X`` was drawn from ``state``; ``hypothetical_state`` is where the previous
    update would have led with a 1.5 times larger learning rate. Samples keep
    their rank as quality; the hypothetical side reweights them by
    ``p_hyp(x) / p(x)``. If it is significantly better, ``eta`` grows by
    ``c_plus`` (capped at ``eta_max``); otherwise it relaxes towards ``eta_init``.

    Returns ``(new_eta, decision)``.
    """
    f = np.asarray(fitness, dtype=float)
    quality = rankdata(f if maximize else -f)
    log_w = hypothetical_state.log_density(X) - state.log_density(X)
    w2 = np.exp(np.clip(log_w, -300.0, 300.0))
    decision = Decision.INCONCLUSIVE
    if np.all(np.isfinite(w2)) and w2.sum() > 1e-12:
        decision = weighted_mann_whitney(
            quality, quality, adaptation_confidence(d), weights2=w2
        ).decision
    if decision is Decision.SECOND_LARGER:
        return min(eta_max, c_plus * eta), decision
    return 0.9 * eta + 0.1 * eta_init, decision
