"""Test objectives: unimodal standards, double-funnel Rosenbrock, random-basin and Lennard-Jones."""

from dataclasses import dataclass, field
import math
import random
from typing import Callable, Optional

import numpy as np

__all__ = [
    "Objective",
    "sphere",
    "ellipsoid",
    "rotated_ellipsoid",
    "cigar",
    "tablet",
    "rosenbrock",
    "f_2rosen",
    "random_rotation",
    "stable_hash",
    "RandomBasinInstance",
    "f_rb",
    "lennard_jones",
    "standard_suite",
    "make_objective",
    "OBJECTIVES",
]

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True, eq=False)
class Objective:
    """A named callable objective with an optional known optimum."""

    name: str
    dim: int
    fn: Callable[[np.ndarray], float]
    optimum_value: Optional[float] = None
    optimum: Optional[np.ndarray] = None
    minimize: bool = True
    meta: dict = field(default_factory=dict)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"{self.name} expects a vector of length {self.dim}, got {x.shape}")
        return float(self.fn(x))


def _x(x):
    return np.asarray(x, dtype=float)


def sphere(x):
    x = _x(x)
    return float(x @ x)


def _ellipsoid_weights(d, condition=1e6):
    if d == 1:
        return np.ones(1)
    return condition ** (np.arange(d) / (d - 1))


def ellipsoid(x, condition=1e6):
    """Separable ellipsoid ``sum 10^(6(i-1)/(d-1)) x_i^2``."""
    x = _x(x)
    return float(_ellipsoid_weights(x.size, condition) @ (x * x))


def rotated_ellipsoid(x, rotation, condition=1e6):
    return ellipsoid(np.asarray(rotation) @ _x(x), condition)


def cigar(x, condition=1e6):
    x = _x(x)
    return float(x[0] ** 2 + condition * (x[1:] @ x[1:]))


def tablet(x, condition=1e6):
    x = _x(x)
    return float(condition * x[0] ** 2 + x[1:] @ x[1:])


def rosenbrock(x):
    x = _x(x)
    if x.size < 2:
        raise ValueError("rosenbrock needs d >= 2")
    a, b = x[:-1], x[1:]
    return float(np.sum(100.0 * (b - a * a) ** 2 + (1.0 - a) ** 2))


def f_2rosen(x):
    """Double-funnel Rosenbrock: global optimum 0 at ``-11``, local optimum 5 at ``14``."""
    x = _x(x)
    return min(rosenbrock(-x - 10.0), 5.0 + rosenbrock((x - 10.0) / 4.0))


def random_rotation(d, seed):
    """Seeded orthonormal matrix: QR of a Gaussian matrix with ``diag(R) > 0``."""
    G = np.random.default_rng(seed).standard_normal((d, d))
    Q, R = np.linalg.qr(G)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def _mix64(z):
    # splitmix64 finalizer
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK64
    return z ^ (z >> 31)


def stable_hash(values, seed=0):
    """Process-independent 64-bit hash of an integer tuple.

    Each component (as a 64-bit two's-complement word) is xored into the state,
    which is then advanced by the splitmix64 increment and finalizer.
    """
    h = _mix64((int(seed) + 0x9E3779B97F4A7C15) & _MASK64)
    for v in values:
        h = _mix64((h ^ (int(v) & _MASK64)) + 0x9E3779B97F4A7C15 & _MASK64)
    return h


@dataclass(frozen=True, eq=False)
class RandomBasinInstance:
    dim: int
    seed: int
    rotation: np.ndarray

    @classmethod
    def create(cls, dim, seed, rotate=True):
        R = random_rotation(dim, seed) if rotate else np.eye(dim)
        return cls(int(dim), int(seed), R)

    def r(self, cell):
        """Uniform value in ``[0, 1)`` attached to an integer tuple (Mersenne twister seeded by its hash)."""
        return random.Random(stable_hash(cell, self.seed)).random()


def f_rb(x, instance):
    """Random-basin function; ``x`` is rotated by the instance matrix first."""
    y = instance.rotation @ _x(x)
    d = y.size
    cell = np.floor(y)
    coarse = instance.r(tuple(int(v) for v in np.floor(y / 10.0)))
    fine = instance.r(tuple(int(v) for v in cell))
    # sin^2 has period 1; the fractional part makes integer points exactly zero
    s2 = np.sin(np.pi * (y - cell)) ** 2
    prod = float(np.prod(s2 ** (1.0 / (20.0 * d))))
    return 1.0 - 0.9 * coarse - 0.1 * fine * prod


def lennard_jones(positions):
    """Lennard-Jones cluster energy ``sum_{i<j} r^-12 - r^-6``.

    Accepts an ``N x 3`` array or a flat vector of length ``3N``. Coincident
    atoms (distance below 1e-12) yield the sentinel 1e30.
    """
    P = np.asarray(positions, dtype=float).reshape(-1, 3)
    if P.shape[0] < 2:
        raise ValueError("need at least two atoms")
    diff = P[:, None, :] - P[None, :, :]
    iu = np.triu_indices(P.shape[0], k=1)
    r2 = np.sum(diff * diff, axis=-1)[iu]
    if np.any(r2 < 1e-24) or not np.all(np.isfinite(r2)):
        return 1e30
    inv6 = 1.0 / r2**3
    return float(np.sum(inv6 * inv6 - inv6))


def _lj_optimum(n):
    return {2: -1.0 / 4.0, 3: -3.0 / 4.0, 4: -6.0 / 4.0}.get(n)


def standard_suite(name, d, instance_seed=None):
    """Unimodal objective with optimum shifted to ``U[-4, 4]^d`` (and rotated if applicable).

    ``instance_seed=None`` gives the untransformed function with optimum at 0.
    """
    bases = {
        "sphere": (sphere, False),
        "ellipsoid": (ellipsoid, False),
        "rotated-ellipsoid": (ellipsoid, True),
        "cigar": (cigar, False),
        "tablet": (tablet, False),
    }
    if name not in bases:
        raise ValueError(f"unknown suite objective {name!r}; choose from {sorted(bases)}")
    d = int(d)
    if d < 1:
        raise ValueError("d must be >= 1")
    base, rotated = bases[name]
    if instance_seed is None:
        shift = np.zeros(d)
        R = random_rotation(d, 0) if rotated else None
    else:
        ss = np.random.SeedSequence(int(instance_seed))
        shift = np.random.default_rng(ss).uniform(-4.0, 4.0, d)
        R = random_rotation(d, ss.spawn(1)[0]) if rotated else None

    if R is None:
        fn = lambda x: base(x - shift)
    else:
        fn = lambda x: base(R @ (x - shift))
    return Objective(name, d, fn, 0.0, shift, meta={"rotation": R, "shift": shift})


OBJECTIVES = ("sphere", "ellipsoid", "rotated-ellipsoid", "cigar", "tablet", "rosenbrock",
              "f2rosen", "random-basin", "lennard-jones")


def make_objective(name, d, instance_seed=None):
    """Look up any shipped objective by name; ``lennard-jones`` takes ``d = 3N``."""
    if name in ("sphere", "ellipsoid", "rotated-ellipsoid", "cigar", "tablet"):
        return standard_suite(name, d, instance_seed)
    if name == "rosenbrock":
        return Objective(name, d, rosenbrock, 0.0, np.ones(d))
    if name == "f2rosen":
        return Objective(name, d, f_2rosen, 0.0, np.full(d, -11.0))
    if name == "random-basin":
        inst = RandomBasinInstance.create(d, 0 if instance_seed is None else instance_seed)
        return Objective(name, d, lambda x: f_rb(x, inst), meta={"instance": inst})
    if name == "lennard-jones":
        if d % 3 or d < 6:
            raise ValueError("lennard-jones needs d = 3N with N >= 2")
        return Objective(name, d, lennard_jones, _lj_optimum(d // 3))
    raise ValueError(f"unknown objective {name!r}; choose from {list(OBJECTIVES)}")
