"""One test per acceptance criterion, at the stated tolerance.

Run ``pytest tests/test_acceptance.py -v``; the terminal summary prints one
PASS/FAIL line per criterion.  Criteria that cannot be met on the replica
are kept at full strength and marked as expected failures; the reasons are
recorded in the decisions ledger.
"""

import time

import numpy as np
import pytest
from _geweke import geweke_z, small_sampler
from test_pedigree import random_pedigree, recursive_A

from rfisem.baseline import fit_stage1, ls_partial_regression, phenotypic_partial_regression
from rfisem.data import ModelSpec, Priors, build_design, standardize, trait_matrix
from rfisem.diagnostics import shrink_factor, spearman
from rfisem.genetics import (
    correlation_matrix,
    genetic_correlation_dmi_sink,
    transform_covariance,
    transform_covariance_closed_form,
)
from rfisem.gibbs import GibbsSampler, _streams
from rfisem.models import cholesky_reparameterize, eq20_conditional_means, recursive_residuals
from rfisem.pedigree import Pedigree, build_A, build_A_inverse
from rfisem.simulate import (
    DMI_SINK_CORR,
    SINK_PHENOTYPIC_CORR,
    paper_replica_truth,
    simulate_pedigree,
    simulate_phenotypes,
)
from rfisem.workflow import mt_chol_structure, rsem_structure

acceptance = pytest.mark.acceptance
SINKS = ("mbw", "milkne", "dbw")
BUDGET = 300.0  # seconds, 30 chains x 2200 iterations


def _warm(sampler, sweeps=10, seed=0):
    init, rngs = _streams(seed, len(sampler.groups))
    state = sampler.initial_state(init)
    for _ in range(sweeps):
        sampler.sweep(state, rngs)
    return state


@acceptance(1, "phenotypic partial regression from published correlations")
def test_criterion_1():
    V = np.eye(3)
    for i, j, r in SINK_PHENOTYPIC_CORR:
        V[i, j] = V[j, i] = r
    b = phenotypic_partial_regression(DMI_SINK_CORR, V)
    assert np.abs(b - [0.351, 0.514, 0.117]).max() <= 0.005
    reps = 1000
    t0 = time.perf_counter()
    for _ in range(reps):
        phenotypic_partial_regression(DMI_SINK_CORR, V)
    assert (time.perf_counter() - t0) / reps < 1e-3


@acceptance(2, "structural conditional mean at flat prior equals least squares")
def test_criterion_2():
    ped = simulate_pedigree(10, 30, 150, 17)
    sim = simulate_phenotypes(ped, paper_replica_truth(), 18, n_test_weeks=10)
    std, _ = standardize(sim.records)
    t0 = time.perf_counter()
    spec = ModelSpec(family="rsem3", priors=Priors(lambda_var=1e12))
    sampler = GibbsSampler(trait_matrix(std), build_design(std, spec, ped), rsem_structure(SINKS), spec.priors)
    state = _warm(sampler)
    mean, _ = sampler.lambda_conditional(state, 0)
    w = sampler.Y[:, 0] - sampler.location(state)[:, 0]
    ls = ls_partial_regression(w, sampler.Y[:, 1:])
    elapsed = time.perf_counter() - t0
    assert np.abs(mean - ls).max() <= 1e-8 * np.abs(ls).max()
    assert elapsed < 1.0


@acceptance(3, "fully recursive first block equals the structural coefficient conditional")
def test_criterion_3(replica):
    std, _ = standardize(replica.records)
    spec = ModelSpec(family="mt_chol")
    design = build_design(std, spec, replica.pedigree)
    Y = trait_matrix(std)
    chol = GibbsSampler(Y, design, mt_chol_structure(("dmi",) + SINKS), spec.priors)
    rsem = GibbsSampler(Y, design, rsem_structure(SINKS), spec.priors)
    state = _warm(chol, sweeps=5)
    t0 = time.perf_counter()
    W = Y - chol.location(state)
    means = eq20_conditional_means(Y, W, np.diag(state.R), spec.priors.lambda_mean, spec.priors.lambda_var)
    lam, _ = rsem.lambda_conditional(state, 0)
    elapsed = time.perf_counter() - t0
    b1 = np.array([means[(0, j)] for j in (1, 2, 3)])
    assert np.abs(b1 - lam).max() <= 1e-12
    assert elapsed < 1.0


@acceptance(4, "stage-1 RFI phenotypes are orthogonal to every sink")
def test_criterion_4(replica):
    std, _ = standardize(replica.records)
    t0 = time.perf_counter()
    fit = fit_stage1(std)
    Y = trait_matrix(std)
    r = [abs(np.corrcoef(fit.residuals, Y[:, j])[0, 1]) for j in (1, 2, 3)]
    assert time.perf_counter() - t0 < 1.0
    assert max(r) < 1e-10


@acceptance(5, "Cholesky-reparameterized variables are uncorrelated")
def test_criterion_5(replica):
    t0 = time.perf_counter()
    Y = replica.standardized
    chol = cholesky_reparameterize(np.cov(Y, rowvar=False))
    C = np.cov(recursive_residuals(Y, chol), rowvar=False)
    assert time.perf_counter() - t0 < 1.0
    assert np.abs(C - np.diag(np.diag(C))).max() < 1e-10


@acceptance(6, "replica RSEM1 structural coefficients")
def test_criterion_6(replica_fits):
    fit = replica_fits.get("rsem1")
    p = fit.summary["parameters"]
    for name, target in zip(SINKS, (0.351, 0.514, 0.117)):
        s = p[f"lambda.{name}"]
        assert abs(s["mean"] - target) <= 0.03, name
        assert 0.02 < s["sd"] < 0.05, name
    assert replica_fits.seconds[("rsem1",)] < BUDGET


@acceptance(7, "replica RSEM3 heritabilities and DMI-RFI genetic correlation")
@pytest.mark.xfail(strict=True, reason="published sink parameters imply DMI h2 near 0.27, not 0.40")
def test_criterion_7(replica_fits):
    fit = replica_fits.get("rsem3")
    h2 = {k: v["mean"] for k, v in fit.summary["heritability"].items()}
    rg = fit.summary["genetic_correlation"]["dmi_rfi"]["mean"]
    assert replica_fits.seconds[("rsem3",)] < BUDGET
    misses = []
    for name, target in (("mbw", 0.589), ("milkne", 0.190), ("rfi", 0.240), ("dmi", 0.400)):
        if abs(h2[name] - target) > 0.10:
            misses.append(f"h2 {name} {h2[name]:.3f} vs {target}")
    if h2["dbw"] > 0.05:
        misses.append(f"h2 dbw {h2['dbw']:.3f} > 0.05")
    if abs(rg - 0.717) > 0.10:
        misses.append(f"rg dmi_rfi {rg:.3f} vs 0.717")
    assert not misses, "; ".join(misses)


def _rfi_values(replica_fits, family):
    fit = replica_fits.get(family)
    return fit.genetic_values("rfi"), fit.animal_ids


@acceptance(8, "genetic value rankings: RSEM3 vs LR3 and RSEM3 vs MT")
def test_criterion_8_lr3(replica_fits):
    a, ids_a = _rfi_values(replica_fits, "rsem3")
    b, ids_b = _rfi_values(replica_fits, "lr3")
    assert ids_a == ids_b
    assert spearman(a, b) >= 0.99


@acceptance(8, "genetic value rankings: RSEM3 vs LR3 and RSEM3 vs MT")
@pytest.mark.xfail(strict=True, reason="unstructured MT G does not converge on 645 records; see ledger")
def test_criterion_8_mt(replica_fits):
    a, ids_a = _rfi_values(replica_fits, "rsem3")
    b, ids_b = _rfi_values(replica_fits, "mt")
    assert ids_a == ids_b
    rho = spearman(a, b)
    assert rho >= 0.95, f"spearman {rho:.3f}"


@acceptance(9, "shrink factor of every structural coefficient below 1.1 by iteration 500")
def test_criterion_9(replica_fits):
    fit = replica_fits.get("rsem3")
    assert fit.summary["n_chains"] == 30
    for name in SINKS:
        x = fit.parallel.traces(f"lambda.{name}")
        assert x.shape[0] == 30 and x.shape[1] >= 500
        assert shrink_factor(x[:, :500]) < 1.1, name


@acceptance(10, "closed-form covariance transform and DMI-sink genetic correlation")
def test_criterion_10():
    rng = np.random.default_rng(10)
    for _ in range(1000):
        m = int(rng.integers(1, 6))
        lam = rng.normal(0, 1, m)
        B = rng.standard_normal((m, m))
        M = np.zeros((m + 1, m + 1))
        M[0, 0] = rng.uniform(0.05, 2.0)
        M[1:, 1:] = B @ B.T + 0.05 * np.eye(m)
        dense = transform_covariance(lam, M)
        closed = transform_covariance_closed_form(lam, M)
        scale = max(1.0, np.abs(dense).max())
        assert np.abs(dense - closed).max() <= 1e-12 * scale
        C = correlation_matrix(dense)
        for t in range(1, m + 1):
            r = genetic_correlation_dmi_sink(lam, M[1:, 1:], M[0, 0], t)
            assert abs(r - C[0, t]) <= 1e-12


@acceptance(11, "successive-conditional test of the sampler on a 20-animal instance")
def test_criterion_11():
    z = geweke_z(small_sampler(), 10_000, 2021)
    assert np.abs(z).max() < 4, np.round(z, 2)


@acceptance(12, "relationship matrix oracle and inverse on the replica pedigree")
def test_criterion_12(replica):
    rng = np.random.default_rng(12)
    for _ in range(50):
        entries = random_pedigree(rng, 20)
        A = build_A(Pedigree(tuple(entries))).values
        assert np.abs(A - recursive_A(entries)).max() < 1e-12
    ped = replica.pedigree
    assert len(ped) == 1247
    A = build_A(ped).values
    Ainv = build_A_inverse(ped)
    assert np.abs(Ainv @ A - np.eye(len(ped))).max() < 1e-8
