"""Synthetic pedigrees and phenotypes under the recursive generative model.

Sinks are generated from their own mixed models, then DMI is assembled as
``lambda' sinks + RFI`` where RFI carries its own genetic, residual and
contemporary-group terms that are independent of the sinks.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import DIM_LEVELS, TRAITS, PhenotypeRecord, StandardizationInfo
from .errors import ValidationError
from .pedigree import Pedigree, inbreeding_coefficients

PAPER_MEANS = (28.9, 113.8, 21.1, 0.47)
PAPER_SDS = (3.81, 6.71, 2.18, 0.22)
PAPER_LAMBDA = (0.351, 0.514, 0.117)
SINK_HERITABILITY = (0.589, 0.190, 0.002)
SINK_GENETIC_CORR = ((0, 1, 0.145), (0, 2, 0.184), (1, 2, -0.089))
SINK_PHENOTYPIC_CORR = ((0, 1, 0.132), (0, 2, 0.193), (1, 2, -0.036))
DMI_SINK_CORR = (0.441, 0.556, 0.166)
RFI_HERITABILITY = 0.240
N_TEST_WEEKS = 143


def psd_root(M, name="covariance"):
    """A matrix C with C C' = M for symmetric PSD M (zero matrices allowed)."""
    M = np.asarray(M, dtype=float)
    vals, vecs = np.linalg.eigh((M + M.T) / 2)
    if vals.size and vals.min() < -1e-10 * max(1.0, abs(vals).max()):
        raise ValidationError(f"{name} is not positive semidefinite (min eigenvalue {vals.min():.3g})")
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


@dataclass
class GroundTruth:
    """Generating parameters in RFI-plus-sinks space (index 0 is RFI)."""

    lam: np.ndarray
    G0: np.ndarray
    R0: np.ndarray
    tw_var: np.ndarray
    dim_effects: np.ndarray = None  # n_dim x k, zero by default
    means: tuple = PAPER_MEANS
    sds: tuple = PAPER_SDS

    def __post_init__(self):
        self.lam = np.asarray(self.lam, dtype=float)
        self.G0 = np.asarray(self.G0, dtype=float)
        self.R0 = np.asarray(self.R0, dtype=float)
        self.tw_var = np.asarray(self.tw_var, dtype=float)
        k = self.lam.size + 1
        if self.dim_effects is None:
            self.dim_effects = np.zeros((len(DIM_LEVELS), k))
        self.dim_effects = np.asarray(self.dim_effects, dtype=float)
        for name, M in (("G0", self.G0), ("R0", self.R0)):
            if M.shape != (k, k):
                raise ValidationError(f"{name} must be {k}x{k}")
            if np.any(M[0, 1:] != 0) or np.any(M[1:, 0] != 0):
                raise ValidationError(f"{name} must have zero RFI-sink covariances")
            psd_root(M, name)
        if np.any(self.tw_var < 0):
            raise ValidationError("test-week variances must be nonnegative")

    @property
    def k(self):
        return self.lam.size + 1

    def structural_inverse(self):
        M = np.eye(self.k)
        M[0, 1:] = self.lam
        return M

    def implied_phenotypic_covariance(self):
        """DMI-scale phenotypic covariance (genetic + residual + test week)."""
        Li = self.structural_inverse()
        return Li @ (self.G0 + self.R0 + np.diag(self.tw_var)) @ Li.T

    def implied_phenotypic_correlation(self):
        P = self.implied_phenotypic_covariance()
        sd = np.sqrt(np.diag(P))
        return P / np.outer(sd, sd)

    def to_dict(self):
        return {
            "lambda": self.lam.tolist(),
            "G0": self.G0.tolist(),
            "R0": self.R0.tolist(),
            "tw_var": self.tw_var.tolist(),
            "dim_effects": self.dim_effects.tolist(),
            "means": list(self.means),
            "sds": list(self.sds),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            lam=d["lambda"],
            G0=d["G0"],
            R0=d["R0"],
            tw_var=d["tw_var"],
            dim_effects=d.get("dim_effects"),
            means=tuple(d.get("means", PAPER_MEANS)),
            sds=tuple(d.get("sds", PAPER_SDS)),
        )

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def paper_replica_truth(test_week=True, tw_share=0.05):
    """Truth calibrated to the published replica targets.

    Sink phenotypic variances are 1.  Genetic parts come from the sink
    heritabilities and genetic correlations; residual parts are what is
    left after the test-week share.  RFI variance makes DMI variance 1
    and is split by the RFI heritability.
    """
    h = np.array(SINK_HERITABILITY)
    m = h.size
    rg = np.eye(m)
    rp = np.eye(m)
    for i, j, r in SINK_GENETIC_CORR:
        rg[i, j] = rg[j, i] = r
    for i, j, r in SINK_PHENOTYPIC_CORR:
        rp[i, j] = rp[j, i] = r
    tw = tw_share if test_week else 0.0
    G_s = rg * np.sqrt(np.outer(h, h))
    R_s = rp - G_s - tw * np.eye(m)
    lam = np.array(PAPER_LAMBDA)
    var_rfi = 1.0 - lam @ rp @ lam
    G0 = np.zeros((m + 1, m + 1))
    R0 = np.zeros((m + 1, m + 1))
    G0[0, 0] = RFI_HERITABILITY * var_rfi
    R0[0, 0] = (1.0 - RFI_HERITABILITY) * var_rfi - tw
    G0[1:, 1:] = G_s
    R0[1:, 1:] = R_s
    return GroundTruth(lam=lam, G0=G0, R0=R0, tw_var=np.full(m + 1, tw))


def simulate_pedigree(n_sires, n_dams, n_offspring, seed):
    """Founder sires and dams, offspring with uniformly random parents."""
    if n_sires < 1 or n_dams < 1:
        raise ValidationError("need at least one sire and one dam")
    if n_offspring < 0:
        raise ValidationError("n_offspring must be nonnegative")
    rng = np.random.default_rng(seed)
    entries = [(i, 0, 0) for i in range(1, n_sires + n_dams + 1)]
    sires = rng.integers(1, n_sires + 1, n_offspring)
    dams = rng.integers(n_sires + 1, n_sires + n_dams + 1, n_offspring)
    first = n_sires + n_dams + 1
    entries += [(first + i, int(s), int(d)) for i, (s, d) in enumerate(zip(sires, dams))]
    return Pedigree(tuple(entries))


def simulate_genetic_values(ped, G, rng):
    """Draw genetic values with covariance ``G (x) A`` by Mendelian sampling."""
    root = psd_root(G, "genetic covariance")
    k = root.shape[0]
    sires, dams = ped.parent_indices()
    F = inbreeding_coefficients(ped)
    q = len(ped)
    z = rng.standard_normal((q, k)) @ root.T
    a = np.zeros((q, k))
    for j in range(q):
        s, d = sires[j], dams[j]
        if s >= 0 and d >= 0:
            a[j] = 0.5 * (a[s] + a[d]) + np.sqrt(0.5 - 0.25 * (F[s] + F[d])) * z[j]
        elif s >= 0 or d >= 0:
            p = s if s >= 0 else d
            a[j] = 0.5 * a[p] + np.sqrt(0.75 - 0.25 * F[p]) * z[j]
        else:
            a[j] = z[j]
    return a


def match_moments(Y, target_corr):
    """Linear map giving Y sample mean 0 and sample correlation ``target_corr``.

    Sinks are whitened among themselves first and DMI last, so sink
    columns never mix with DMI.
    """
    Y = np.asarray(Y, dtype=float)
    k = Y.shape[1]
    order = list(range(1, k)) + [0]
    back = np.argsort(order)
    Yc = Y[:, order] - Y[:, order].mean(axis=0)
    S = np.cov(Yc, rowvar=False)
    C_s = np.linalg.cholesky(S)
    C_t = np.linalg.cholesky(np.asarray(target_corr)[np.ix_(order, order)])
    W = np.linalg.solve(C_s, Yc.T).T @ C_t.T
    return W[:, back]


@dataclass
class Simulation:
    records: list
    pedigree: Pedigree
    truth: GroundTruth
    genetic_values: np.ndarray  # q x k in RFI-plus-sinks space
    standardized: np.ndarray = field(repr=False, default=None)


def simulate_phenotypes(
    ped,
    truth,
    seed,
    phenotyped=None,
    dim_levels=DIM_LEVELS,
    n_test_weeks=N_TEST_WEEKS,
    match=False,
    raw=True,
):
    """Phenotype records for ``phenotyped`` animals (default: non-founders)."""
    rng = np.random.default_rng(seed)
    if phenotyped is None:
        phenotyped = [a for a, s, d in ped.entries if s != 0 or d != 0]
    pos = ped.index()
    rec = np.array([pos[a] for a in phenotyped], dtype=int)
    n, k = rec.size, truth.k
    if n == 0:
        raise ValidationError("no phenotyped animals to simulate")
    a = simulate_genetic_values(ped, truth.G0, rng)
    e = rng.standard_normal((n, k)) @ psd_root(truth.R0, "R0").T
    dim_idx = rng.integers(0, len(dim_levels), n)
    # balanced so every week is observed once n >= n_test_weeks
    tw_idx = rng.permutation(np.arange(n) % n_test_weeks)
    tw_eff = rng.standard_normal((n_test_weeks, k)) * np.sqrt(truth.tw_var)
    ystar = truth.dim_effects[dim_idx] + tw_eff[tw_idx] + a[rec] + e
    Y = ystar.copy()
    Y[:, 0] = ystar[:, 0] + ystar[:, 1:] @ truth.lam
    if match:
        Y = match_moments(Y, truth.implied_phenotypic_correlation())
    out = StandardizationInfo(truth.means, truth.sds).to_raw(Y) if raw else Y
    records = [
        PhenotypeRecord(int(phenotyped[i]), int(dim_levels[dim_idx[i]]), int(tw_idx[i] + 1), tuple(float(v) for v in out[i]))
        for i in range(n)
    ]
    return Simulation(records=records, pedigree=ped, truth=truth, genetic_values=a, standardized=Y)


def paper_replica(seed=2021, test_week=True, match=True):
    """645 cows from 125 sires and 477 dams with moment-matched phenotypes."""
    ped = simulate_pedigree(125, 477, 645, seed)
    return simulate_phenotypes(ped, paper_replica_truth(test_week), seed + 1, match=match)


__all__ = [
    "GroundTruth",
    "Simulation",
    "TRAITS",
    "match_moments",
    "paper_replica",
    "paper_replica_truth",
    "psd_root",
    "simulate_genetic_values",
    "simulate_pedigree",
    "simulate_phenotypes",
]
