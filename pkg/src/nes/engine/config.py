"""Hyperparameters and their dimension-dependent defaults."""

from dataclasses import dataclass, replace
import math
from typing import Callable, Optional

__all__ = [
    "default_population_size",
    "default_eta_sigma",
    "default_eta_sbar",
    "AlgorithmConfig",
]


def default_population_size(d):
    return 4 + int(math.floor(3.0 * math.log(d)))


def default_eta_sigma(d):
    """Shared step-size / shape learning rate of xNES (also used by the hill-climbers)."""
    return (9.0 + 3.0 * math.log(d)) / (5.0 * d * math.sqrt(d))


def default_eta_sbar(d):
    """SNES learning rate for the per-coordinate standard deviations."""
    return (3.0 + math.log(d)) / (5.0 * math.sqrt(d))


@dataclass(frozen=True)
class AlgorithmConfig:
    """Settings for one optimization run.

    Unset (``None``) learning rates and population size are filled in from the
    dimension-dependent defaults by :meth:`resolved`.

    ``target`` is an objective value in the objective's own orientation: a
    minimization run stops once ``f(x) <= target``.
    """

    popsize: Optional[int] = None
    eta_mu: float = 1.0
    eta_sigma: Optional[float] = None
    eta_B: Optional[float] = None
    eta_sbar: Optional[float] = None
    utilities: Optional[Callable[[int], "object"]] = None
    target: Optional[float] = None
    max_evals: int = 100_000
    importance_mixing: bool = False
    alpha: float = 0.1
    adaptation_sampling: bool = False
    nan_policy: str = "worst"
    sigma_bounds: tuple = (1e-20, 1e20)

    def resolved(self, d, algorithm="xnes"):
        popsize = self.popsize
        if popsize is None:
            if algorithm in HILL_CLIMBERS:
                popsize = 1
            elif algorithm == "cnes":
                # the empirical Fisher matrix over (mu, A) needs more samples than parameters
                popsize = default_population_size(d) + d + d * d
            else:
                popsize = default_population_size(d)
        eta_sigma = default_eta_sigma(d) if self.eta_sigma is None else self.eta_sigma
        eta_B = eta_sigma if self.eta_B is None else self.eta_B
        eta_sbar = default_eta_sbar(d) if self.eta_sbar is None else self.eta_sbar
        cfg = replace(self, popsize=int(popsize), eta_sigma=eta_sigma, eta_B=eta_B,
                      eta_sbar=eta_sbar)
        cfg.validate(algorithm)
        return cfg

    def validate(self, algorithm="xnes"):
        if self.popsize is not None:
            if self.popsize < 1:
                raise ValueError("popsize must be >= 1")
            if self.popsize == 1 and algorithm not in HILL_CLIMBERS:
                raise ValueError(f"{algorithm} needs a population of at least 2")
        for name in ("eta_mu", "eta_sigma", "eta_B", "eta_sbar"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ValueError(f"{name} must be positive, got {value}")
        if self.max_evals < 0:
            raise ValueError("max_evals must be non-negative")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.nan_policy not in ("worst", "abort", "resample"):
            raise ValueError(f"unknown nan_policy {self.nan_policy!r}")


HILL_CLIMBERS = frozenset({"xnes-1+1", "snes-1+1", "radial-1+1", "cauchy-1+1"})
