"""Single-generation parameter updates of the NES family.

All functions are pure: they take a distribution state plus an evaluated batch
and return the new state. Fitness is always maximized here.
"""

import logging
import math

import numpy as np

from ..distributions import (
    CauchyState,
    DistributionCollapse,
    FullGaussianState,
    SeparableState,
    row_transform,
)
from ..shaping import success_utilities
from ..symmat import sym_eigen, sym_exp

__all__ = [
    "SingularCovarianceError",
    "plain_log_derivs",
    "plain_gradient_step",
    "canonical_nes_step",
    "xnes_gradients",
    "xnes_step",
    "snes_step",
    "xnes_hillclimber_step",
    "snes_hillclimber_step",
    "radial_hillclimber_step",
    "cauchy_hillclimber_step",
]

log = logging.getLogger(__name__)


class SingularCovarianceError(DistributionCollapse):
    pass


def _scaled_left_exp(sigma, B, H):
    """Return ``(sigma', B')`` with ``sigma' B' = exp(H) sigma B`` and ``det B'`` preserved.

    The determinant of ``exp(H)`` is taken from its eigenvalues and moved into
    the scalar step size, so ``B`` keeps its unit determinant.
    """
    U, lam = sym_eigen(H)
    E = (U * np.exp(lam)) @ U.T
    E = 0.5 * (E + E.T)
    c = float(np.mean(lam))
    return sigma * math.exp(c), row_transform(E, B) * math.exp(-c)


def _covariance_inverse(A):
    cov = A.T @ A
    try:
        cond = np.linalg.cond(cov)
    except np.linalg.LinAlgError:
        cond = np.inf
    if not np.isfinite(cond) or cond > 1e15:
        raise SingularCovarianceError("covariance matrix is singular")
    return np.linalg.inv(cov)


def plain_log_derivs(mu, A, X):
    """Log-derivatives of ``N(mu, A^T A)`` w.r.t. ``(mu, A)``, one row per sample.

    Row layout is ``[d mean entries, d*d entries of A in row-major order]``.
    """
    A = np.asarray(A, dtype=float)
    d = A.shape[0]
    inv = _covariance_inverse(A)
    Y = (np.atleast_2d(X) - mu) @ inv  # rows: Sigma^-1 (x - mu)
    # grad_Sigma = (y y^T - Sigma^-1) / 2, symmetric; grad_A = A (G + G^T) = A (y y^T - Sigma^-1)
    G = Y[:, :, None] * Y[:, None, :] - inv
    gA = np.einsum("ij,njk->nik", A, G)
    return np.hstack([Y, gA.reshape(-1, d * d)])


def plain_gradient_step(mu, A, X, fitness, eta):
    """Vanilla search-gradient ascent on ``(mu, A)`` with ``cov = A^T A``.

    The gradient is the Monte Carlo average of ``f(x_k) grad log pi(x_k)``.
    """
    mu = np.asarray(mu, dtype=float)
    A = np.asarray(A, dtype=float)
    d = mu.size
    f = np.asarray(fitness, dtype=float)
    g = (f @ plain_log_derivs(mu, A, X)) / f.size
    return mu + eta * g[:d], A + eta * g[d:].reshape(d, d)


def canonical_nes_step(theta, grads, weights, eta, average=True):
    """Natural-gradient step with a Fisher matrix estimated from the batch.

    ``grads`` holds one log-derivative row per sample. The Fisher estimate is
    damped by ``eps * I`` with ``eps = 1e-8 tr(F) / m``, escalated by factors of
    ten until a Cholesky factorization succeeds; if none does the plain
    gradient is used.
    """
    theta = np.asarray(theta, dtype=float)
    G = np.atleast_2d(np.asarray(grads, dtype=float))
    w = np.asarray(weights, dtype=float)
    n, m = G.shape
    grad = w @ G
    if average:
        grad = grad / n
    if not np.any(grad):
        return theta.copy()
    F = G.T @ G / n
    scale = np.trace(F) / m
    eps = 1e-8 * scale if scale > 0 else 1e-8
    for _ in range(20):
        try:
            L = np.linalg.cholesky(F + eps * np.eye(m))
        except np.linalg.LinAlgError:
            eps *= 10.0
            continue
        step = np.linalg.solve(L.T, np.linalg.solve(L, grad))
        if np.all(np.isfinite(step)):
            return theta + eta * step
        eps *= 10.0
    log.warning("Fisher matrix not invertible after damping; using the plain gradient")
    return theta + eta * grad


def xnes_gradients(Z, u):
    """Natural gradients ``(sum u_k z_k, sum u_k (z_k z_k^T - I))``."""
    Z = np.atleast_2d(Z)
    u = np.asarray(u, dtype=float)
    g_delta = u @ Z
    g_M = (Z.T * u) @ Z - u.sum() * np.eye(Z.shape[1])
    return g_delta, g_M


def xnes_step(state, Z, u, eta_mu, eta_sigma, eta_B):
    """One xNES update from standard-normal draws ``Z`` and their utilities ``u``.

    ``mu += eta_mu sigma B^T g_delta``; the step size moves with the trace part
    of the shape gradient and ``B`` is multiplied from the left by the
    exponential of its traceless part.
    """
    d = state.dim
    g_delta, g_M = xnes_gradients(Z, u)
    g_sigma = np.trace(g_M) / d
    g_B = g_M - g_sigma * np.eye(d)
    mu = state.mu + eta_mu * state.sigma * row_transform(g_delta, state.B)
    sigma, B = _scaled_left_exp(state.sigma, state.B, 0.5 * eta_B * g_B)
    sigma *= math.exp(0.5 * eta_sigma * g_sigma)
    return FullGaussianState(mu, sigma, B)


def snes_step(state, Z, u, eta_mu, eta_sbar):
    Z = np.atleast_2d(Z)
    u = np.asarray(u, dtype=float)
    g_mu = u @ Z
    g_s = u @ (Z * Z - 1.0)
    return SeparableState(
        state.mu + eta_mu * state.sbar * g_mu,
        state.sbar * np.exp(0.5 * eta_sbar * g_s),
    )


def xnes_hillclimber_step(state, z, x, fitness, f_max, eta):
    """(1+1) update of a full Gaussian; returns ``(state, f_max, improved)``.

    Shape gradient ``-u_1/2 I + u_2/4 (z z^T - I)`` with success-based utilities.
    """
    improved = fitness > f_max
    u1, u2 = success_utilities(improved)
    z = np.asarray(z, dtype=float)
    d = z.size
    g_M = -0.5 * u1 * np.eye(d) + 0.25 * u2 * (np.outer(z, z) - np.eye(d))
    sigma, B = _scaled_left_exp(state.sigma, state.B, 0.5 * eta * g_M)
    mu = np.asarray(x, dtype=float) if improved else state.mu
    return FullGaussianState(mu, sigma, B), (fitness if improved else f_max), improved


def snes_hillclimber_step(state, z, x, fitness, f_best, eta):
    """(1+1) update of a separable Gaussian, coordinate-wise analogue of the full version."""
    improved = fitness > f_best
    u1, u2 = success_utilities(improved)
    z = np.asarray(z, dtype=float)
    g = -0.5 * u1 + 0.25 * u2 * (z * z - 1.0)
    mu = np.asarray(x, dtype=float) if improved else state.mu
    new = SeparableState(mu, state.sbar * np.exp(0.5 * eta * g))
    return new, (fitness if improved else f_best), improved


def radial_hillclimber_step(mu, sigma, x, fitness, f_best, eta_sigma):
    """(1+1) step with an isotropic Gaussian: grow by ``exp(5 eta)`` on success, else shrink by ``exp(-eta)``."""
    if fitness > f_best:
        return np.asarray(x, dtype=float), sigma * math.exp(5.0 * eta_sigma), fitness
    return mu, sigma * math.exp(-eta_sigma), f_best


def cauchy_hillclimber_step(state, z, x, fitness, f_best, eta_A):
    """(1+1) update of a multivariate Cauchy distribution; returns ``(state, f_best, improved)``."""
    improved = fitness > f_best
    u1, u2 = success_utilities(improved)
    z = np.asarray(z, dtype=float)
    d = z.size
    eye = np.eye(d)
    parent = -0.5 * eye
    offspring = 0.5 * ((d + 1) / (float(z @ z) + 1.0) * np.outer(z, z) - eye)
    g_M = 0.5 * (u1 * parent + u2 * offspring)
    A = sym_exp(0.5 * eta_A * g_M) @ state.A
    mu = np.asarray(x, dtype=float) if improved else state.mu
    return CauchyState(mu, A), (fitness if improved else f_best), improved
