"""Single-trait, multiple-trait and Cholesky-reparameterized models."""

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ValidationError
from .linalg import spd_solve


@dataclass
class CholeskyStructure:
    """``L Sigma_o L' = D`` for the trait order ``order`` (root first).

    ``L`` is unit lower triangular in that order; ``b[(j, jp)]`` is the
    partial regression of trait ``j`` on trait ``jp`` (original indices),
    i.e. minus the corresponding entry of ``L``.
    """

    order: tuple
    L: np.ndarray
    D: np.ndarray
    b: dict

    @property
    def structural(self):
        """Unit upper triangular matrix in original trait order (rows carry -b)."""
        k = len(self.order)
        M = np.eye(k)
        for (j, jp), v in self.b.items():
            M[j, jp] = -v
        return M

    def reconstruct(self):
        """Sigma in original order from L and D."""
        Linv = np.linalg.inv(self.L)
        S_o = Linv @ np.diag(self.D) @ Linv.T
        back = np.argsort(self.order)
        return S_o[np.ix_(back, back)]


def cholesky_reparameterize(sigma, order=None):
    """Modified Cholesky decomposition of an SPD covariance matrix.

    The default order puts the last trait first (y4, y3, y2, y1), so DMI
    is regressed on all sinks.
    """
    sigma = np.asarray(sigma, dtype=float)
    k = sigma.shape[0]
    order = tuple(range(k - 1, -1, -1)) if order is None else tuple(order)
    if sorted(order) != list(range(k)):
        raise ValidationError("order must be a permutation of trait indices")
    S_o = sigma[np.ix_(order, order)]
    try:
        C = np.linalg.cholesky(S_o)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("covariance matrix is not positive definite") from exc
    cd = np.diag(C)
    unit = C / cd
    L = np.linalg.inv(unit)
    L[np.triu_indices(k, 1)] = 0.0
    np.fill_diagonal(L, 1.0)
    b = {}
    for i in range(k):
        for ip in range(i):
            b[(order[i], order[ip])] = -L[i, ip]
    return CholeskyStructure(order, L, cd**2, b)


def recursive_residuals(Y, chol):
    """Reparameterized variables ``y_j - sum b_jj' y_j'`` in original order."""
    return np.asarray(Y, dtype=float) @ chol.structural.T


def eq20_system(Y, W, sigma2_e, lambda_mean, lambda_var):
    """Assemble the blocked system for all coefficients of a fully recursive model.

    Equation ``j`` has parents ``j+1..k-1``.  Every block is scaled by
    ``sigma2_e[0] / sigma2_e[j]`` so the system shares the first
    equation's residual variance; the conditional covariance is
    ``sigma2_e[0] * M^-1``.  Rows run from the last free equation up to
    the first (b34; b23, b24; b12, b13, b14 for four traits).

    Returns ``(M, rhs, labels)`` with labels ``(j, jp)``.
    """
    Y = np.asarray(Y, dtype=float)
    W = np.asarray(W, dtype=float)
    k = Y.shape[1]
    s1 = sigma2_e[0]
    blocks, rhs, labels = [], [], []
    for j in range(k - 2, -1, -1):
        P = Y[:, j + 1 :]
        c = s1 / sigma2_e[j]
        blocks.append(c * (P.T @ P) + s1 / lambda_var * np.eye(P.shape[1]))
        rhs.append(c * (P.T @ W[:, j]) + s1 * lambda_mean / lambda_var)
        labels += [(j, jp) for jp in range(j + 1, k)]
    size = len(labels)
    M = np.zeros((size, size))
    at = 0
    for B in blocks:
        m = B.shape[0]
        M[at : at + m, at : at + m] = B
        at += m
    return M, np.concatenate(rhs), labels


def eq20_conditional_means(Y, W, sigma2_e, lambda_mean, lambda_var):
    M, rhs, labels = eq20_system(Y, W, sigma2_e, lambda_mean, lambda_var)
    return dict(zip(labels, spd_solve(M, rhs)))


def chol_conditional_means(sampler, state):
    """Conditional means of every free coefficient of a fully recursive sampler.

    Each equation goes through ``GibbsSampler.lambda_conditional``, the
    same code path that serves the structural coefficients of the
    recursive model.
    """
    out = {}
    for row in sorted(sampler.parents, reverse=True):
        mean, _ = sampler.lambda_conditional(state, row)
        for jp, v in zip(sampler.parents[row], mean):
            out[(row, jp)] = v
    return out


def genetic_partial_regression(G):
    """``G22^-1 g12`` for DMI (index 0) on the sinks."""
    G = np.asarray(G, dtype=float)
    b = spd_solve(G[1:, 1:], G[1:, 0])
    return b


def _fit(family, spec, records, pedigree, **changes):
    from dataclasses import replace

    from .workflow import fit_model

    return fit_model(replace(spec, family=family, **changes), records, pedigree)


def run_st(spec, records, pedigree, trait=None):
    """Single-trait animal model on one trait (``spec.trait`` by default)."""
    return _fit("st", spec, records, pedigree, trait=trait or spec.trait)


def run_mt(spec, records, pedigree):
    """Unstructured multiple-trait animal model on DMI and the sinks."""
    return _fit("mt", spec, records, pedigree)


def run_mt_chol(spec, records, pedigree):
    """Fully recursive (Cholesky-reparameterized) multiple-trait model."""
    return _fit("mt_chol", spec, records, pedigree)
