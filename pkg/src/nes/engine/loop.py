"""Generation loop, evaluation bookkeeping and termination handling."""

from dataclasses import dataclass, field
import logging
import math
from typing import Callable, List, Optional

import numpy as np

from ..adaptation import MixingStall, adaptation_sampling_update, importance_mixing
from ..distributions import (
    CauchyState,
    DistributionCollapse,
    FullGaussianState,
    SeparableState,
    sample_cauchy,
    sample_full,
    sample_separable,
)
from ..shaping import default_utilities, shape
from .config import HILL_CLIMBERS, AlgorithmConfig
from . import steps

__all__ = [
    "ALGORITHMS",
    "NonFiniteFitnessError",
    "GaussianFactor",
    "GenerationRecord",
    "RunResult",
    "make_strategy",
    "run",
]

log = logging.getLogger(__name__)

TERMINATIONS = ("target-hit", "budget", "collapse", "divergence", "error")


class NonFiniteFitnessError(ArithmeticError):
    pass


class _BudgetExhausted(Exception):
    pass


class _TargetHit(Exception):
    pass


class _Diverged(Exception):
    pass


@dataclass(frozen=True, eq=False)
class GaussianFactor:
    """Gaussian ``N(mu, A^T A)`` in the raw parametrization used by the plain and canonical variants."""

    mu: np.ndarray
    A: np.ndarray

    @property
    def dim(self):
        return self.mu.size

    @property
    def sigma(self):
        logdet = np.linalg.slogdet(self.A)[1]
        return float(np.exp(logdet / self.dim))


@dataclass(frozen=True, eq=False)
class GenerationRecord:
    generation: int
    evaluations: int
    best_fitness: float
    fresh: int
    state: object
    eta: Optional[float] = None


@dataclass(eq=False)
class RunResult:
    algorithm: str
    termination: str
    best_x: Optional[np.ndarray]
    best_fitness: float
    evaluations: int
    generations: int
    final_state: object
    trace: List[GenerationRecord] = field(default_factory=list)
    message: str = ""
    runs: list = field(default_factory=list)  # sub-runs when produced by the restart scheduler

    @property
    def success(self):
        return self.termination == "target-hit"


class _Evaluator:
    """Counts objective calls, tracks the best point and enforces budget and target.

    Returned fitness values are oriented for maximization.
    """

    def __init__(self, objective, minimize, max_evals, target, nan_policy):
        self.objective = objective
        self.sign = -1.0 if minimize else 1.0
        self.minimize = minimize
        self.max_evals = max_evals
        self.target = target
        self.nan_policy = nan_policy
        self.count = 0
        self.best_x = None
        self.best_f = math.inf if minimize else -math.inf
        self._warned = False

    def _call(self, x):
        if self.count >= self.max_evals:
            raise _BudgetExhausted
        self.count += 1
        return float(self.objective(x))

    def one(self, x):
        x = np.asarray(x, dtype=float)
        v = self._call(x)
        if math.isnan(v):
            if self.nan_policy == "abort":
                raise NonFiniteFitnessError(f"objective returned NaN at evaluation {self.count}")
            if self.nan_policy == "resample":
                v = self._call(x)
            if math.isnan(v):
                if not self._warned:
                    log.warning("objective returned NaN; treating it as the worst fitness")
                    self._warned = True
                return -math.inf
        if (v < self.best_f) if self.minimize else (v > self.best_f):
            self.best_f = v
            self.best_x = x.copy()
        if self.target is not None:
            if (v <= self.target) if self.minimize else (v >= self.target):
                raise _TargetHit
        return self.sign * v

    def __call__(self, X):
        X = np.atleast_2d(X)
        return np.array([self.one(x) for x in X])


class _Strategy:
    eta = None

    def __init__(self, x0, sigma0, cfg, shape_matrix):
        self.cfg = cfg
        self.d = x0.size
        self.sigma0 = float(sigma0)

    def check_scale(self):
        lo, hi = self.cfg.sigma_bounds
        s = self.scale()
        if not math.isfinite(s) or s > hi * self.sigma0:
            raise _Diverged(f"scale {s:.3e} exceeded the upper bound")
        if s < lo * self.sigma0:
            raise DistributionCollapse(f"scale {s:.3e} fell below the lower bound")

    def scale(self):
        return self.state.sigma


class _PopulationStrategy(_Strategy):
    """Shared batch handling for xNES and SNES: optional importance mixing and adaptation sampling."""

    def __init__(self, x0, sigma0, cfg, shape_matrix):
        super().__init__(x0, sigma0, cfg, shape_matrix)
        self.utilities = (cfg.utilities or default_utilities)(cfg.popsize)
        self.previous = None  # (state, X, internal fitness, Z, u) of the last generation
        self.eta = self.eta_init = self.base_eta()

    def sample(self, rng, n):
        raise NotImplementedError

    def update(self, state, Z, u, eta):
        raise NotImplementedError

    def base_eta(self):
        raise NotImplementedError

    def generation(self, evaluate, rng):
        cfg = self.cfg
        fresh = None
        if cfg.importance_mixing and self.previous is not None:
            old_state, old_X, old_f = self.previous[:3]
            try:
                out = importance_mixing(old_X, old_f, old_state, self.state, cfg.alpha, rng,
                                        evaluate, popsize=cfg.popsize)
                Z, X, f, fresh = out.Z, out.X, out.fitness, out.fresh_count
            except MixingStall:
                log.warning("importance mixing stalled; resampling the full batch")
        if fresh is None:
            Z, X = self.sample(rng, cfg.popsize)
            f = evaluate(X)
            fresh = X.shape[0]

        if cfg.adaptation_sampling and self.previous is not None:
            prev_state, _, _, prev_Z, prev_u = self.previous
            hypothetical = self.update(prev_state, prev_Z, prev_u, 1.5 * self.eta)
            self.eta, _ = adaptation_sampling_update(
                self.eta, self.eta_init, X, f, self.state, hypothetical, self.d
            )

        u = shape(f, self.utilities)
        new_state = self.update(self.state, Z, u, self.eta)
        self.previous = (self.state, X, f, Z, u)
        self.state = new_state
        return fresh


class _XNES(_PopulationStrategy):
    def __init__(self, x0, sigma0, cfg, shape_matrix):
        super().__init__(x0, sigma0, cfg, shape_matrix)
        if shape_matrix is None:
            self.state = FullGaussianState.isotropic(x0, sigma0)
        else:
            self.state = FullGaussianState.from_factor(x0, sigma0 * np.asarray(shape_matrix, float))
            self.sigma0 = self.state.sigma

    def base_eta(self):
        return self.cfg.eta_sigma

    def sample(self, rng, n):
        return sample_full(self.state, rng, n)

    def update(self, state, Z, u, eta):
        # only the step-size rate is adapted; the shape rate stays fixed
        return steps.xnes_step(state, Z, u, self.cfg.eta_mu, eta, self.cfg.eta_B)


class _SNES(_PopulationStrategy):
    def __init__(self, x0, sigma0, cfg, shape_matrix):
        super().__init__(x0, sigma0, cfg, shape_matrix)
        sbar = np.full(x0.size, float(sigma0)) if shape_matrix is None else (
            float(sigma0) * np.asarray(shape_matrix, float))
        self.state = SeparableState(x0, sbar)
        self.sigma0 = self.state.sigma

    def base_eta(self):
        return self.cfg.eta_sbar

    def sample(self, rng, n):
        return sample_separable(self.state, rng, n)

    def update(self, state, Z, u, eta):
        return steps.snes_step(state, Z, u, self.cfg.eta_mu, eta)

    def check_scale(self):
        lo, hi = self.cfg.sigma_bounds
        s = self.state.sbar
        if not np.all(np.isfinite(s)) or s.max() > hi * self.sigma0:
            raise _Diverged("a standard deviation exceeded the upper bound")
        if s.min() < lo * self.sigma0:
            raise DistributionCollapse("a standard deviation fell below the lower bound")


class _Plain(_Strategy):
    """Vanilla search gradients on raw fitness values (no shaping)."""

    def __init__(self, x0, sigma0, cfg, shape_matrix):
        super().__init__(x0, sigma0, cfg, shape_matrix)
        A = np.eye(x0.size) if shape_matrix is None else np.asarray(shape_matrix, float)
        self.state = GaussianFactor(x0.copy(), float(sigma0) * A)
        self.eta = cfg.eta_sigma

    def draw(self, rng):
        Z = rng.standard_normal((self.cfg.popsize, self.d))
        return self.state.mu + Z @ self.state.A

    def generation(self, evaluate, rng):
        X = self.draw(rng)
        f = evaluate(X)
        if not np.all(np.isfinite(f)):
            raise _Diverged("non-finite fitness in the plain gradient")
        mu, A = steps.plain_gradient_step(self.state.mu, self.state.A, X, f, self.eta)
        self.set_state(mu, A)
        return X.shape[0]

    def set_state(self, mu, A):
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(A))):
            raise _Diverged("parameters became non-finite")
        self.state = GaussianFactor(mu, A)


class _Canonical(_Plain):
    """Natural gradient with an empirical Fisher matrix over ``(mu, A)``, using shaped utilities."""

    def __init__(self, x0, sigma0, cfg, shape_matrix):
        super().__init__(x0, sigma0, cfg, shape_matrix)
        self.utilities = (cfg.utilities or default_utilities)(cfg.popsize)

    def generation(self, evaluate, rng):
        X = self.draw(rng)
        f = evaluate(X)
        mu, A = self.state.mu, self.state.A
        G = steps.plain_log_derivs(mu, A, X)
        theta = np.concatenate([mu, A.ravel()])
        theta = steps.canonical_nes_step(theta, G, shape(f, self.utilities), self.eta,
                                         average=False)
        self.set_state(theta[: self.d], theta[self.d:].reshape(self.d, self.d))
        return X.shape[0]


class _XNESHill(_Strategy):
    def __init__(self, x0, sigma0, cfg, shape_matrix):
        super().__init__(x0, sigma0, cfg, shape_matrix)
        if shape_matrix is None:
            self.state = FullGaussianState.isotropic(x0, sigma0)
        else:
            self.state = FullGaussianState.from_factor(x0, sigma0 * np.asarray(shape_matrix, float))
            self.sigma0 = self.state.sigma
        self.f_best = -math.inf
        self.eta = cfg.eta_sigma

    def generation(self, evaluate, rng):
        Z, X = sample_full(self.state, rng, 1)
        f = evaluate.one(X[0])
        self.state, self.f_best, _ = steps.xnes_hillclimber_step(
            self.state, Z[0], X[0], f, self.f_best, self.eta)
        return 1


class _SNESHill(_Strategy):
    def __init__(self, x0, sigma0, cfg, shape_matrix):
        super().__init__(x0, sigma0, cfg, shape_matrix)
        sbar = np.full(x0.size, float(sigma0)) if shape_matrix is None else (
            float(sigma0) * np.asarray(shape_matrix, float))
        self.state = SeparableState(x0, sbar)
        self.sigma0 = self.state.sigma
        self.f_best = -math.inf
        self.eta = cfg.eta_sbar

    def generation(self, evaluate, rng):
        Z, X = sample_separable(self.state, rng, 1)
        f = evaluate.one(X[0])
        self.state, self.f_best, _ = steps.snes_hillclimber_step(
            self.state, Z[0], X[0], f, self.f_best, self.eta)
        return 1


class _RadialHill(_Strategy):
    def __init__(self, x0, sigma0, cfg, shape_matrix):
        super().__init__(x0, sigma0, cfg, shape_matrix)
        self.state = FullGaussianState.isotropic(x0, sigma0)
        self.f_best = None
        self.eta = cfg.eta_sigma

    def generation(self, evaluate, rng):
        if self.f_best is None:
            self.f_best = evaluate.one(self.state.mu)
            return 1
        Z, X = sample_full(self.state, rng, 1)
        f = evaluate.one(X[0])
        mu, sigma, self.f_best = steps.radial_hillclimber_step(
            self.state.mu, self.state.sigma, X[0], f, self.f_best, self.eta)
        self.state = FullGaussianState.isotropic(mu, sigma)
        return 1


class _CauchyHill(_Strategy):
    def __init__(self, x0, sigma0, cfg, shape_matrix):
        super().__init__(x0, sigma0, cfg, shape_matrix)
        A = np.eye(x0.size) if shape_matrix is None else np.asarray(shape_matrix, float)
        self.state = CauchyState(x0, float(sigma0) * A)
        self.sigma0 = self.state.sigma
        self.f_best = -math.inf
        self.eta = cfg.eta_sigma

    def generation(self, evaluate, rng):
        z, x = sample_cauchy(self.state, rng)
        f = evaluate.one(x)
        self.state, self.f_best, _ = steps.cauchy_hillclimber_step(
            self.state, z, x, f, self.f_best, self.eta)
        return 1


ALGORITHMS = {
    "xnes": _XNES,
    "snes": _SNES,
    "plain": _Plain,
    "cnes": _Canonical,
    "xnes-1+1": _XNESHill,
    "snes-1+1": _SNESHill,
    "radial-1+1": _RadialHill,
    "cauchy-1+1": _CauchyHill,
}
assert HILL_CLIMBERS <= set(ALGORITHMS)


def make_strategy(algorithm, x0, sigma0=1.0, config=None, shape=None):
    """Instantiate the stateful optimizer behind ``run`` (mostly useful for testing)."""
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}; choose from {sorted(ALGORITHMS)}")
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.size < 1:
        raise ValueError("x0 must not be empty")
    if not sigma0 > 0:
        raise ValueError("sigma0 must be positive")
    cfg = (config or AlgorithmConfig()).resolved(x0.size, algorithm)
    return ALGORITHMS[algorithm](x0, sigma0, cfg, shape)


def run(algorithm: str, objective: Callable, config: Optional[AlgorithmConfig] = None,
        rng=None, *, x0, sigma0: float = 1.0, shape=None, minimize: bool = True,
        keep_trace: bool = True) -> RunResult:
    """Optimize ``objective`` until the target is hit, the budget is spent or the search degenerates.

    ``rng`` may be a ``numpy.random.Generator``, an integer seed or ``None``.
    ``shape`` optionally sets the initial transformation (``A = sigma0 * shape``).
    """
    strategy = make_strategy(algorithm, x0, sigma0, config, shape)
    cfg = strategy.cfg
    rng = np.random.default_rng(rng)
    ev = _Evaluator(objective, minimize, cfg.max_evals, cfg.target, cfg.nan_policy)
    trace = []
    termination, message = None, ""
    gen = 0
    while termination is None:
        try:
            fresh = strategy.generation(ev, rng)
            gen += 1
            strategy.check_scale()
        except _TargetHit:
            termination = "target-hit"
        except _BudgetExhausted:
            termination = "budget"
        except DistributionCollapse as exc:
            termination, message = "collapse", str(exc)
        except _Diverged as exc:
            termination, message = "divergence", str(exc)
        except NonFiniteFitnessError as exc:
            termination, message = "error", str(exc)
        if termination is None:
            if keep_trace:
                trace.append(GenerationRecord(gen, ev.count, ev.best_f, fresh,
                                              strategy.state, strategy.eta))
            if ev.count >= cfg.max_evals:
                termination = "budget"
    trace.append(GenerationRecord(gen, ev.count, ev.best_f, 0, strategy.state, strategy.eta))
    return RunResult(
        algorithm=algorithm,
        termination=termination,
        best_x=ev.best_x,
        best_fitness=ev.best_f,
        evaluations=ev.count,
        generations=gen,
        final_state=strategy.state,
        trace=trace,
        message=message,
    )
