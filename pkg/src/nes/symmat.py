"""Functions of symmetric matrices computed through an eigendecomposition.

A symmetric matrix ``M = U diag(lam) U^T`` has ``f(M) = U diag(f(lam)) U^T`` for
any scalar function ``f``. This gives the matrix exponential (which maps every
symmetric matrix to a positive definite one), its inverse the logarithm, and
real powers of positive definite matrices.

Inputs are symmetrized as ``(S + S^T) / 2`` before use so that round-off from
gradient assembly upstream never leaks an antisymmetric part into the result.
"""

import numpy as np

__all__ = [
    "DomainError",
    "symmetrize",
    "sym_eigen",
    "sym_fn",
    "sym_exp",
    "sym_log",
    "sym_pow",
]


class DomainError(ValueError):
    """Raised when a matrix function is applied outside its domain."""


def symmetrize(s):
    s = np.asarray(s, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {s.shape}")
    if not np.all(np.isfinite(s)):
        raise ValueError("matrix has non-finite entries")
    return 0.5 * (s + s.T)


def sym_eigen(s):
    """Eigendecomposition of a symmetric matrix.

    Returns ``(U, lam)`` with ``U`` orthogonal and ``S = U diag(lam) U^T``.
    The order of the eigenvalues is unspecified.
    """
    lam, u = np.linalg.eigh(symmetrize(s))
    return u, lam


def sym_fn(s, fn):
    """Apply the scalar function ``fn`` to the eigenvalues of ``s``."""
    u, lam = sym_eigen(s)
    out = (u * fn(lam)) @ u.T
    return 0.5 * (out + out.T)


def sym_exp(m):
    """Matrix exponential of a symmetric matrix (always positive definite)."""
    return sym_fn(m, np.exp)


def _check_spd(lam):
    if np.any(lam <= 0.0):
        raise DomainError(
            f"matrix is not positive definite (smallest eigenvalue {lam.min():.3e})"
        )


def sym_log(p):
    """Matrix logarithm of a symmetric positive definite matrix."""
    u, lam = sym_eigen(p)
    _check_spd(lam)
    out = (u * np.log(lam)) @ u.T
    return 0.5 * (out + out.T)


def sym_pow(p, c):
    """Real power ``P^c = exp(c log P)`` of a symmetric positive definite matrix."""
    u, lam = sym_eigen(p)
    _check_spd(lam)
    out = (u * lam ** float(c)) @ u.T
    return 0.5 * (out + out.T)
