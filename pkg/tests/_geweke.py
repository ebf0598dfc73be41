"""Successive-conditional versus marginal-conditional simulation of the joint model.

Both simulators target p(theta, y).  The first draws theta from the prior
and y given theta independently; the second alternates one Gibbs sweep of
theta given y with a fresh y given theta.  Any error in a conditional moves
the second away from the prior marginals.
"""

import numpy as np

from rfisem.data import ModelSpec, Priors, build_design
from rfisem.gibbs import GibbsSampler, _streams
from rfisem.simulate import paper_replica_truth, simulate_pedigree, simulate_phenotypes
from rfisem.workflow import mt_structure, rsem_structure

PROPER = Priors(
    lambda_var=0.25, beta_var=1.0, intercept_var=1.0, var_df=6.0, var_scale=0.5, iw_df_extra=6.0, iw_scale=2.5
)


def small_sampler(family="rsem3", priors=PROPER):
    """20-animal instance, every animal phenotyped, four test weeks, two DIM classes."""
    ped = simulate_pedigree(4, 6, 10, 3)
    assert len(ped) == 20
    sim = simulate_phenotypes(ped, paper_replica_truth(), 4, phenotyped=list(ped.ids), n_test_weeks=4, dim_levels=(1, 2))
    spec = ModelSpec(family=family, priors=priors)
    design = build_design(sim.records, spec, ped)
    if family == "mt":
        structure = mt_structure(("dmi", "mbw", "milkne", "dbw"))
    else:
        structure = rsem_structure(("mbw", "milkne", "dbw"))
    return GibbsSampler(sim.standardized, design, structure, priors)


def statistics(state):
    """Monitored functions; variances enter on the log scale to keep moments finite."""
    G, R = state.G, state.R
    coef = np.concatenate([state.coef[r] for r in sorted(state.coef)]) if state.coef else np.empty(0)
    return np.r_[
        coef,
        coef**2,
        np.log(np.diag(G)),
        np.log(np.diag(R)),
        G[1, 2] / np.sqrt(G[1, 1] * G[2, 2]),
        R[1, 2] / np.sqrt(R[1, 1] * R[2, 2]),
        np.log(state.tw_var),
        state.beta[0],
        state.a_rec[0],
    ]


def geweke_z(sampler, n_cycles, seed, n_batches=50):
    """z-scores of the mean difference for every monitored statistic."""
    rng = np.random.default_rng(seed)
    marginal = np.array([statistics(sampler.prior_state(rng)) for _ in range(n_cycles)])
    _, rngs = _streams(seed + 1, len(sampler.groups))
    state = sampler.prior_state(rng)
    sampler.set_response(sampler.simulate_response(state, rng))
    successive = np.empty_like(marginal)
    for i in range(n_cycles):
        sampler.sweep(state, rngs)
        sampler.set_response(sampler.simulate_response(state, rng))
        successive[i] = statistics(state)
    # batch means absorb the autocorrelation of the Gibbs chain
    bm = successive.reshape(n_batches, -1, successive.shape[1]).mean(axis=1)
    var_s = bm.var(axis=0, ddof=1) / n_batches
    var_m = marginal.var(axis=0, ddof=1) / n_cycles
    return (successive.mean(axis=0) - marginal.mean(axis=0)) / np.sqrt(var_s + var_m)
