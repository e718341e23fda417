"""Search distributions: sampling, log-densities and natural-coordinate log-derivatives.

Every family here is written in *natural coordinates*: the current distribution
is the standard one (zero mean, identity shape), a candidate is parameterized by
a center offset ``delta`` and a symmetric matrix ``M``, and the updated
transformation is ``A_new = exp(M / 2) @ A``.  With ``x = mu + A^T z`` this gives

    log pi(x | delta, M) = -log|det A| - tr(M) / 2 + log q(|exp(-M/2) (z - delta)|^2)

for a radial density ``q`` of the squared norm, and the log-derivatives at
``(delta, M) = (0, 0)`` are the quantities returned by the ``*_log_derivs``
functions below.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy.special import gammaln

__all__ = [
    "DistributionCollapse",
    "DegenerateDensityError",
    "SingularFisherError",
    "FullGaussianState",
    "SeparableState",
    "CauchyState",
    "NaturalGradientPair",
    "row_transform",
    "sample_full",
    "sample_separable",
    "sample_cauchy",
    "gaussian_natural_log_derivs",
    "separable_log_derivs",
    "RadialFamily",
    "GaussianRadial",
    "CauchyRadial",
    "ScaledGaussianRadial",
    "radial_log_derivs",
    "cauchy_log_derivs",
    "radius_density",
    "radius_pdf",
    "orthonormal_coordinates",
    "woodbury_natural_gradient",
]

_TINY = 1e-300
_LOG_2PI = math.log(2.0 * math.pi)


class DistributionCollapse(ArithmeticError):
    """The search distribution degenerated (scale underflow or singular shape)."""


class DegenerateDensityError(ArithmeticError):
    """A radial density evaluated to zero where a log-derivative was requested."""


class SingularFisherError(np.linalg.LinAlgError):
    """The Fisher block to be inverted is numerically singular."""


def _vec(x, name):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"{name} must be a vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} has non-finite entries")
    return x


@dataclass(frozen=True, eq=False)
class FullGaussianState:
    """Multinormal search distribution ``N(mu, sigma^2 B^T B)``.

    ``B`` is kept at unit absolute determinant so that ``sigma`` alone carries
    the scale. Samples are ``x = mu + sigma * B^T z`` with ``z ~ N(0, I)``.
    """

    mu: np.ndarray
    sigma: float
    B: np.ndarray

    def __post_init__(self):
        mu = _vec(self.mu, "mu")
        B = np.asarray(self.B, dtype=float)
        if B.shape != (mu.size, mu.size):
            raise ValueError(f"B must be {mu.size}x{mu.size}, got {B.shape}")
        if not np.all(np.isfinite(B)):
            raise DistributionCollapse("shape matrix has non-finite entries")
        sigma = float(self.sigma)
        if not math.isfinite(sigma):
            raise DistributionCollapse(f"step size is not finite: {sigma}")
        if sigma < _TINY:
            raise DistributionCollapse(f"step size underflow: {sigma:.3e}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "B", B)

    @classmethod
    def from_factor(cls, mu, A):
        """Split a transformation ``A`` (with ``cov = A^T A``) into ``sigma * B``."""
        A = np.asarray(A, dtype=float)
        d = A.shape[0]
        sign, logdet = np.linalg.slogdet(A)
        if sign == 0 or not math.isfinite(logdet):
            raise DistributionCollapse("transformation matrix is singular")
        sigma = math.exp(logdet / d)
        return cls(mu, sigma, A / sigma)

    @classmethod
    def isotropic(cls, mu, sigma=1.0):
        mu = np.asarray(mu, dtype=float)
        return cls(mu, sigma, np.eye(mu.size))

    @property
    def dim(self):
        return self.mu.size

    @property
    def A(self):
        return self.sigma * self.B

    @property
    def cov(self):
        return self.sigma**2 * (self.B.T @ self.B)

    def to_natural(self, X):
        """Map search points (rows of ``X``) to standard-normal coordinates."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        # x = mu + A^T z  <=>  row form  x = mu + z A
        return np.linalg.solve(self.A.T, (X - self.mu).T).T

    def log_density(self, X):
        Z = self.to_natural(X)
        logdet = self.dim * math.log(self.sigma) + np.linalg.slogdet(self.B)[1]
        return -0.5 * self.dim * _LOG_2PI - logdet - 0.5 * np.sum(Z * Z, axis=1)


@dataclass(frozen=True, eq=False)
class SeparableState:
    """Axis-aligned Gaussian with per-coordinate standard deviations ``sbar``."""

    mu: np.ndarray
    sbar: np.ndarray

    def __post_init__(self):
        mu = _vec(self.mu, "mu")
        sbar = np.asarray(self.sbar, dtype=float)
        if sbar.shape != mu.shape:
            raise ValueError("sbar must have the same shape as mu")
        if not np.all(np.isfinite(sbar)):
            raise DistributionCollapse("standard deviations are not finite")
        if np.any(sbar < _TINY):
            raise DistributionCollapse(f"standard deviation underflow: {sbar.min():.3e}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sbar", sbar)

    @property
    def dim(self):
        return self.mu.size

    @property
    def sigma(self):
        """Geometric mean of the standard deviations (the overall scale)."""
        return float(np.exp(np.mean(np.log(self.sbar))))

    def to_natural(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return (X - self.mu) / self.sbar

    def log_density(self, X):
        Z = self.to_natural(X)
        return (
            -0.5 * self.dim * _LOG_2PI
            - np.sum(np.log(self.sbar))
            - 0.5 * np.sum(Z * Z, axis=1)
        )


@dataclass(frozen=True, eq=False)
class CauchyState:
    """Multivariate Cauchy distribution ``x = mu + A^T z``."""

    mu: np.ndarray
    A: np.ndarray

    def __post_init__(self):
        mu = _vec(self.mu, "mu")
        A = np.asarray(self.A, dtype=float)
        if A.shape != (mu.size, mu.size):
            raise ValueError(f"A must be {mu.size}x{mu.size}, got {A.shape}")
        if not np.all(np.isfinite(A)):
            raise DistributionCollapse("transformation has non-finite entries")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "A", A)
        if self.log_scale * mu.size < math.log(_TINY):
            raise DistributionCollapse("transformation determinant underflow")

    @property
    def dim(self):
        return self.mu.size

    @property
    def log_scale(self):
        """``log |det A| / d``, cached since the state is immutable."""
        cached = self.__dict__.get("_log_scale")
        if cached is None:
            sign, logdet = np.linalg.slogdet(self.A)
            cached = logdet / self.dim if sign != 0 else -math.inf
            object.__setattr__(self, "_log_scale", cached)
        return cached

    @property
    def sigma(self):
        return math.exp(self.log_scale)

    def to_natural(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.linalg.solve(self.A.T, (X - self.mu).T).T

    def log_density(self, X):
        Z = self.to_natural(X)
        family = CauchyRadial(self.dim)
        return family.log_q(np.sum(Z * Z, axis=1)) - np.linalg.slogdet(self.A)[1]


@dataclass(frozen=True, eq=False)
class NaturalGradientPair:
    """Log-derivatives w.r.t. the center (``g_delta``), shape (``g_M``) and radial parameters."""

    g_delta: np.ndarray
    g_M: np.ndarray
    g_tau: np.ndarray = None

    def as_vector(self):
        """Coordinates in the basis in which the Gaussian Fisher matrix is the identity."""
        v = orthonormal_coordinates(self.g_delta, self.g_M)
        if self.g_tau is not None:
            v = np.concatenate([v, np.atleast_1d(self.g_tau)])
        return v


def orthonormal_coordinates(g_delta, g_M):
    """Flatten ``(g_delta, g_M)`` in an orthonormal basis of ``R^d x S_d``.

    The basis of ``S_d`` is ``{sqrt(2) E_ii} U {E_ij + E_ji, i < j}``, orthonormal
    under ``<X, Y> = tr(XY) / 2``. Under this inner product the Fisher matrix of
    the Gaussian family at the natural-coordinate origin is exactly the identity
    (under the plain Frobenius product the shape block would be ``I / 2``).
    """
    g_M = np.asarray(g_M, dtype=float)
    d = g_M.shape[0]
    iu = np.triu_indices(d, k=1)
    return np.concatenate(
        [np.asarray(g_delta, dtype=float), math.sqrt(2.0) * np.diag(g_M), 2.0 * g_M[iu]]
    )


def row_transform(Z, M):
    """``Z @ M`` summed in the same order for every output column.

    BLAS kernels may round differently depending on a column's position, which
    would make trajectories depend on the coordinate labelling. Reducing an
    explicit product keeps signed-permutation changes of basis exact.
    """
    Z = np.asarray(Z, dtype=float)
    M = np.asarray(M, dtype=float)
    return np.sum(Z[..., :, None] * M, axis=-2)


def sample_full(state, rng, n):
    """Draw ``n`` samples; returns ``(Z, X)`` with rows ``x_k = mu + sigma B^T z_k``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    Z = rng.standard_normal((n, state.dim))
    X = state.mu + state.sigma * row_transform(Z, state.B)
    return Z, X


def sample_separable(state, rng, n):
    if n < 1:
        raise ValueError("n must be >= 1")
    Z = rng.standard_normal((n, state.dim))
    return Z, state.mu + state.sbar * Z


def sample_cauchy(state, rng):
    """One multivariate Cauchy draw; returns ``(z, x)`` with ``x = A^T z + mu``.

    ``z = s / |n|`` with ``s ~ N(0, I)`` and scalar ``n ~ N(0, 1)`` has exactly the
    density ``Gamma((d+1)/2) / pi^((d+1)/2) * (|z|^2 + 1)^(-(d+1)/2)``.
    """
    s = rng.standard_normal(state.dim)
    n = abs(rng.standard_normal())
    while n == 0.0:
        n = abs(rng.standard_normal())
    z = s / n
    return z, state.mu + z @ state.A


def gaussian_natural_log_derivs(z):
    z = _vec(z, "z")
    return NaturalGradientPair(z.copy(), 0.5 * (np.outer(z, z) - np.eye(z.size)))


def separable_log_derivs(z):
    """Per-coordinate log-derivatives w.r.t. the center offset and the log standard deviation."""
    z = _vec(z, "z")
    return z.copy(), z * z - 1.0


class RadialFamily:
    """Rotationally symmetric density ``Q(z) = q(|z|^2)`` on ``R^dim``.

    Subclasses implement ``log_q`` and ``dlog_q`` (the derivative of ``log q``
    w.r.t. the squared radius). Families with shape parameters ``tau`` also set
    ``n_tau`` and implement ``grad_tau_log_q``.
    """

    n_tau = 0

    def __init__(self, dim):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = int(dim)

    def log_q(self, r2):
        raise NotImplementedError

    def dlog_q(self, r2):
        raise NotImplementedError

    def q(self, r2):
        return np.exp(self.log_q(r2))

    def dq(self, r2):
        """Derivative of ``q`` w.r.t. the squared radius."""
        return self.q(r2) * self.dlog_q(r2)

    def grad_tau_log_q(self, r2):
        return None


class GaussianRadial(RadialFamily):
    def log_q(self, r2):
        return -0.5 * self.dim * _LOG_2PI - 0.5 * np.asarray(r2, dtype=float)

    def dlog_q(self, r2):
        return np.full_like(np.asarray(r2, dtype=float), -0.5)


class CauchyRadial(RadialFamily):
    def __init__(self, dim):
        super().__init__(dim)
        k = 0.5 * (self.dim + 1)
        self._log_norm = gammaln(k) - k * math.log(math.pi)

    def log_q(self, r2):
        return self._log_norm - 0.5 * (self.dim + 1) * np.log1p(np.asarray(r2, dtype=float))

    def dlog_q(self, r2):
        return -0.5 * (self.dim + 1) / (1.0 + np.asarray(r2, dtype=float))


class ScaledGaussianRadial(RadialFamily):
    """Isotropic Gaussian with variance ``tau``; a one-parameter radial family."""

    n_tau = 1

    def __init__(self, dim, tau=1.0):
        super().__init__(dim)
        if tau <= 0:
            raise ValueError("tau must be positive")
        self.tau = float(tau)

    def log_q(self, r2):
        r2 = np.asarray(r2, dtype=float)
        return -0.5 * self.dim * (_LOG_2PI + math.log(self.tau)) - r2 / (2.0 * self.tau)

    def dlog_q(self, r2):
        return np.full_like(np.asarray(r2, dtype=float), -0.5 / self.tau)

    def grad_tau_log_q(self, r2):
        r2 = np.asarray(r2, dtype=float)
        return np.atleast_1d(-0.5 * self.dim / self.tau + r2 / (2.0 * self.tau**2))


def radial_log_derivs(family, z):
    """Log-derivatives ``(g_delta, g_M, g_tau)`` of a radial family at the natural origin."""
    z = _vec(z, "z")
    r2 = float(z @ z)
    if not np.isfinite(family.log_q(r2)) or family.q(r2) <= 0.0:
        raise DegenerateDensityError(f"density vanishes at |z|^2 = {r2:.3e}")
    ratio = float(family.dlog_q(r2))  # q'/q
    g_delta = -2.0 * ratio * z
    g_M = -0.5 * np.eye(z.size) - ratio * np.outer(z, z)
    g_tau = None
    if family.n_tau:
        g_tau = np.atleast_1d(np.asarray(family.grad_tau_log_q(r2), dtype=float))
    return NaturalGradientPair(g_delta, g_M, g_tau)


def cauchy_log_derivs(z):
    z = _vec(z, "z")
    s = (z.size + 1) / (float(z @ z) + 1.0)
    return NaturalGradientPair(s * z, 0.5 * s * np.outer(z, z) - 0.5 * np.eye(z.size))


def radius_density(family, r2, d=None):
    """Density of the squared radius ``|z|^2`` when ``z`` has density ``q(|z|^2)``.

    Equals ``pi^(d/2) / Gamma(d/2) * (r^2)^(d/2 - 1) * q(r^2)``; for the Gaussian
    family this is the chi-square density with ``d`` degrees of freedom.
    """
    d = family.dim if d is None else int(d)
    r2 = np.asarray(r2, dtype=float)
    if np.any(r2 < 0):
        raise ValueError("squared radius must be non-negative")
    log_c = 0.5 * d * math.log(math.pi) - gammaln(0.5 * d)
    with np.errstate(divide="ignore"):
        out = np.exp(log_c + family.log_q(r2)) * r2 ** (0.5 * d - 1.0)
    return out


def radius_pdf(family, r, d=None):
    """Density of the radius ``|z|``: ``2 pi^(d/2) / Gamma(d/2) * r^(d-1) * q(r^2)``."""
    d = family.dim if d is None else int(d)
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("radius must be non-negative")
    log_c = math.log(2.0) + 0.5 * d * math.log(math.pi) - gammaln(0.5 * d)
    return np.exp(log_c + family.log_q(r * r)) * r ** (d - 1.0)


def woodbury_natural_gradient(v, c, g):
    """Solve ``F x = g`` for ``F = [[I, v], [v^T, c]]`` via the Schur complement.

    ``v`` has shape ``(m - k, k)`` and ``c`` shape ``(k, k)``; ``g`` is split into
    its leading ``m - k`` (center and shape) and trailing ``k`` (radial) entries.
    Cost is ``O(k^3 + m k)``.
    """
    g = np.asarray(g, dtype=float)
    c = np.atleast_2d(np.asarray(c, dtype=float)) if np.size(c) else np.zeros((0, 0))
    k = c.shape[0]
    if k == 0:
        return g.copy()
    v = np.asarray(v, dtype=float).reshape(g.size - k, k)
    g1, g_tau = g[:-k], g[-k:]
    schur = c - v.T @ v
    if not np.all(np.isfinite(schur)) or np.linalg.cond(schur) > 1e12:
        raise SingularFisherError("Schur complement c - v^T v is numerically singular")
    h = np.linalg.solve(schur, v.T @ g1 - g_tau)
    return np.concatenate([g1 + v @ h, -h])
