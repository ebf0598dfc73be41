"""Small dense linear-algebra helpers used across the package."""

import numpy as np
from scipy import linalg

from .errors import NumericalError, RankDeficiencyError

PIVOT_TOL = 1e-12


def spd_cholesky(mat, tol=PIVOT_TOL):
    """Lower Cholesky factor of a symmetric positive definite matrix.

    Raises RankDeficiencyError when a squared pivot falls below
    ``tol`` times the largest diagonal entry.
    """
    mat = np.asarray(mat, dtype=float)
    if mat.size == 0:
        return mat.copy()
    try:
        chol = linalg.cholesky(mat, lower=True, check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        raise RankDeficiencyError(f"matrix is not positive definite: {exc}") from exc
    scale = max(float(np.max(np.abs(np.diag(mat)))), 1.0e-300)
    if np.min(np.diag(chol)) ** 2 < tol * scale:
        raise RankDeficiencyError("matrix is singular within pivot tolerance")
    return chol


def spd_solve(mat, rhs, tol=PIVOT_TOL):
    chol = spd_cholesky(mat, tol)
    return linalg.cho_solve((chol, True), rhs)


def mvn_from_precision(precision, rhs, rng, scale=1.0):
    """Draw x ~ N(P^-1 rhs, scale * P^-1) using one Cholesky of P."""
    chol = spd_cholesky(precision)
    mean = linalg.cho_solve((chol, True), rhs)
    z = rng.standard_normal(mean.shape)
    noise = linalg.solve_triangular(chol.T, z, lower=False)
    return mean + np.sqrt(scale) * noise


def check_spd(mat, name="matrix"):
    mat = np.asarray(mat, dtype=float)
    if not np.allclose(mat, mat.T, atol=1e-12):
        raise NumericalError(f"{name} is not symmetric")
    try:
        linalg.cholesky(mat, lower=True)
    except linalg.LinAlgError as exc:
        raise NumericalError(f"{name} is not positive definite") from exc
    return mat


def inv_wishart_draw(df, scale, rng):
    """One inverse-Wishart draw with mean ``scale / (df - p - 1)``.

    Bartlett construction: with ``scale = C C'`` and ``A`` the Bartlett
    factor of a standard Wishart, the draw is ``C A'^-1 A^-1 C'``.
    """
    scale = np.asarray(scale, dtype=float)
    p = scale.shape[0]
    if df <= p - 1:
        raise NumericalError(f"inverse Wishart needs df > {p - 1}, got {df}")
    C = spd_cholesky(scale)
    A = np.zeros((p, p))
    A[np.diag_indices(p)] = np.sqrt(rng.chisquare(df - np.arange(p)))
    low = np.tril_indices(p, -1)
    A[low] = rng.standard_normal(len(low[0]))
    M = C @ linalg.solve_triangular(A, np.eye(p), lower=True).T
    return M @ M.T
