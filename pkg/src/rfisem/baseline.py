"""Least-squares baselines for RFI.

Stage one regresses DMI on the energy sinks without an intercept
(standardized data are centered); its residuals are RFI phenotypes.
Stage two fits those residuals with the single-trait animal model.
"""

from dataclasses import dataclass

import numpy as np

from .data import TRAITS, trait_matrix
from .errors import NumericalError, RankDeficiencyError, ValidationError
from .linalg import spd_solve


@dataclass
class RegressionFit:
    terms: tuple
    coefficients: np.ndarray
    se: np.ndarray
    residuals: np.ndarray
    animal_ids: tuple = ()


def _split(data, sink_indices):
    if isinstance(data, np.ndarray):
        Y, ids = data, ()
    else:
        Y, ids = trait_matrix(data), tuple(r.animal_id for r in data)
    return Y[:, 0], Y[:, list(sink_indices)], ids


def fit_stage1(data, sink_indices=(1, 2, 3)):
    """OLS of DMI on the sinks; residuals are the RFI phenotypes.

    ``data`` is a list of standardized records or an ``n x k`` array.
    Standard errors are the classical OLS ones (NaN with no residual df).
    """
    y, S, ids = _split(data, sink_indices)
    n, m = S.shape
    if n < m:
        raise RankDeficiencyError("fewer observations than energy sinks")
    cross = S.T @ S
    b = spd_solve(cross, S.T @ y)
    resid = y - S @ b
    df = n - m
    if df > 0:
        s2 = resid @ resid / df
        se = np.sqrt(s2 * np.diag(np.linalg.inv(cross)))
    else:
        se = np.full(m, np.nan)
    terms = tuple(TRAITS[i] for i in sink_indices)
    return RegressionFit(terms, b, se, resid, ids)


def ls_partial_regression(w, sinks):
    """Least-squares partial regression of location-adjusted DMI on sinks."""
    sinks = np.asarray(sinks, dtype=float)
    w = np.asarray(w, dtype=float)
    return spd_solve(sinks.T @ sinks, sinks.T @ w)


def phenotypic_partial_regression(c12, V22):
    """Partial regression ``V22^-1 c12`` from phenotypic (co)variances."""
    V22 = np.asarray(V22, dtype=float)
    c12 = np.asarray(c12, dtype=float)
    if not np.allclose(V22, V22.T, atol=1e-12):
        raise ValidationError("V22 must be symmetric")
    try:
        return spd_solve(V22, c12)
    except RankDeficiencyError as exc:
        raise NumericalError(f"V22 is not positive definite: {exc}") from exc


def fit_stage2(residuals, records, pedigree, spec):
    """Single-trait animal model on stage-one residuals.

    ``records`` supplies the design (DIM, test week, animal) in the same
    row order as ``residuals``; effects follow ``spec``.
    """
    from .workflow import fit_single_trait

    residuals = np.asarray(residuals, dtype=float)
    if residuals.shape != (len(records),):
        raise ValidationError("one residual per record expected")
    return fit_single_trait(residuals, records, pedigree, spec, label="rfi")


__all__ = [
    "RegressionFit",
    "fit_stage1",
    "fit_stage2",
    "ls_partial_regression",
    "phenotypic_partial_regression",
]
