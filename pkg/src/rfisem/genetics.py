"""Genetic parameters on the RFI and DMI scales.

Covariances in the recursive model are specified between RFI and the
energy sinks.  The DMI-scale matrix is ``Lambda^-1 M Lambda'^-1``; with
the RFI-sink covariances fixed at zero its leading entry is
``m_11 + Delta`` where ``Delta = lambda' M_sinks lambda``.
"""

import numpy as np

from .errors import DegenerateInputError, ValidationError
from .gibbs import StructuralMatrix


def _lam(lam):
    return lam.lam if isinstance(lam, StructuralMatrix) else np.asarray(lam, dtype=float)


def transform_covariance(lam, M):
    """Dense triple product ``Lambda^-1 M Lambda'^-1``."""
    lam = _lam(lam)
    M = np.asarray(M, dtype=float)
    if M.shape != (lam.size + 1, lam.size + 1):
        raise ValidationError(f"covariance shape {M.shape} does not match {lam.size} structural coefficients")
    Linv = StructuralMatrix(lam).inverse()
    return Linv @ M @ Linv.T


def delta_term(lam, sink_block):
    """``sum_t lam_t^2 s_tt + sum_t lam_t sum_{u != t} lam_u s_ut``."""
    lam = _lam(lam)
    S = np.asarray(sink_block, dtype=float)
    diag = np.sum(lam**2 * np.diag(S))
    off = 0.0
    for t in range(lam.size):
        off += lam[t] * sum(lam[u] * S[u, t] for u in range(lam.size) if u != t)
    return diag + off


def transform_covariance_closed_form(lam, M):
    """Entry-wise form of the transform for an M with zero RFI-sink covariances."""
    lam = _lam(lam)
    M = np.asarray(M, dtype=float)
    k = lam.size + 1
    S = M[1:, 1:]
    out = np.empty((k, k))
    out[1:, 1:] = S
    out[0, 0] = M[0, 0] + delta_term(lam, S)
    for tp in range(1, k):
        t0 = tp - 1
        val = lam[t0] * S[t0, t0] + sum(lam[t] * S[t, t0] for t in range(k - 1) if t != t0)
        out[0, tp] = out[tp, 0] = val
    return out


def heritability_rfi(var_a, var_e):
    if var_a < 0 or var_e < 0:
        raise ValidationError("variances must be nonnegative")
    if var_a + var_e == 0:
        raise DegenerateInputError("heritability undefined when both variances are zero")
    return var_a / (var_a + var_e)


def heritability_dmi(var_a, var_e, delta_a, delta_e):
    num = var_a + delta_a
    den = num + var_e + delta_e
    if num < 0 or den <= 0:
        raise DegenerateInputError("heritability undefined for these components")
    return num / den


def genetic_correlation_dmi_sink(lam, G0_sink, var_a1, t):
    """Genetic correlation between DMI and sink ``t`` (1-based position among sinks)."""
    lam = _lam(lam)
    S = np.asarray(G0_sink, dtype=float)
    t0 = t - 1
    if S[t0, t0] <= 0:
        raise DegenerateInputError("zero sink genetic variance")
    cov = lam[t0] * S[t0, t0] + sum(lam[u] * S[u, t0] for u in range(lam.size) if u != t0)
    var_dmi = var_a1 + delta_term(lam, S)
    return cov / np.sqrt(var_dmi * S[t0, t0])


def correlation_matrix(C):
    sd = np.sqrt(np.diag(C))
    return C / np.outer(sd, sd)
