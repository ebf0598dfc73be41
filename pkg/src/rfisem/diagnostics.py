"""Convergence and comparison statistics."""

import numpy as np
from scipy.stats import rankdata

from .errors import DegenerateInputError, ValidationError


def shrink_factor(chains):
    """Gelman-Rubin shrink factor of ``m`` equal-length chains.

    ``W`` is the mean within-chain variance and ``B`` is ``L`` times the
    variance of the chain means, both with the ``n - 1`` denominator.
    """
    x = np.asarray(chains, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2 or x.shape[1] < 2:
        raise ValidationError("need at least 2 chains of length >= 2")
    L = x.shape[1]
    W = x.var(axis=1, ddof=1).mean()
    if not W > 0:
        raise DegenerateInputError("within-chain variance is zero")
    B = L * x.mean(axis=1).var(ddof=1)
    return float(np.sqrt(((L - 1) / L * W + B / L) / W))


def shrink_trajectory(chains, stride=50):
    """Shrink factor on prefixes of length stride, 2*stride, ...; list of (iteration, sf)."""
    x = np.asarray(chains, dtype=float)
    out = []
    for t in range(stride, x.shape[1] + 1, stride):
        try:
            out.append((t, shrink_factor(x[:, :t])))
        except DegenerateInputError:
            out.append((t, float("nan")))
    return out


def spearman(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or x.size < 2:
        raise ValidationError("spearman needs two equal-length vectors of length >= 2")
    rx, ry = rankdata(x), rankdata(y)
    if np.ptp(rx) == 0 or np.ptp(ry) == 0:
        raise DegenerateInputError("correlation undefined for a constant vector")
    return float(np.corrcoef(rx, ry)[0, 1])


def summarize(samples):
    s = np.asarray(samples, dtype=float).ravel()
    if s.size < 2:
        raise ValidationError("summary needs at least 2 samples")
    q = np.quantile(s, [0.025, 0.5, 0.975])
    return {
        "mean": float(s.mean()),
        "sd": float(s.std(ddof=1)),
        "q025": float(q[0]),
        "q50": float(q[1]),
        "q975": float(q[2]),
    }
