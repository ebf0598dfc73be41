"""Fit model families end to end: design, sampler problem, derived quantities, summaries.

Equation spaces differ by family.  Recursive models work with
(RFI, sinks); multiple-trait models with (DMI, sinks); the Cholesky
model with reparameterized variables.  Each family supplies a derive
function returning scalar genetic parameters per saved state and a
linear map taking genetic values to reported traits.
"""

from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .baseline import fit_stage1
from .data import TRAITS, build_design, standardize, trait_matrix
from .diagnostics import summarize
from .errors import DegenerateInputError, ValidationError
from .genetics import delta_term
from .gibbs import ModelProblem, ModelStructure, run_parallel
from .linalg import spd_solve
from .models import genetic_partial_regression

RECURSIVE = ("rsem1", "rsem2", "rsem3")
ONE_STEP = ("lr2", "lr3")


# ----------------------------------------------------------------------
# structures


def rsem_structure(sink_names):
    labels = ("rfi",) + tuple(sink_names)
    m = len(sink_names)
    return ModelStructure(labels, ((0,), tuple(range(1, m + 1))), ((0, tuple(range(1, m + 1))),))


def mt_structure(labels):
    return ModelStructure(tuple(labels), (tuple(range(len(labels))),))


def mt_chol_structure(labels):
    k = len(labels)
    parents = tuple((j, tuple(range(j + 1, k))) for j in range(k - 1))
    return ModelStructure(tuple(labels), tuple((j,) for j in range(k)), parents, coef_prefix="b")


def single_structure(label):
    return ModelStructure((label,), ((0,),))


# ----------------------------------------------------------------------
# derived quantities (top level so problems pickle)


def _h2(a, e):
    return a / (a + e) if a + e > 0 else np.nan


def _corr(c, va, vb):
    return c / np.sqrt(va * vb) if va > 0 and vb > 0 else np.nan


def derive_single(label, state):
    G, R, tw = state.G[0, 0], state.R[0, 0], state.tw_var[0]
    return {f"heritability.{label}": _h2(G, R), f"heritability_with_tw.{label}": _h2(G, R + tw)}


def derive_one_step(label, covariate_names, n_fixed, state):
    out = derive_single(label, state)
    for j, name in enumerate(covariate_names):
        out[f"b.{name}"] = state.beta[n_fixed + j, 0]
    return out


def derive_rsem(sink_names, state):
    """Heritabilities and genetic correlations from one recursive-model state."""
    lam, G, R, tw = state.coef[0], state.G, state.R, state.tw_var
    m = len(sink_names)
    Gs, Rs = G[1:, 1:], R[1:, 1:]
    da, de, dtw = delta_term(lam, Gs), delta_term(lam, Rs), delta_term(lam, np.diag(tw[1:]))
    a1, e1, t1 = G[0, 0], R[0, 0], tw[0]
    out = {
        "heritability.dmi": _h2(a1 + da, e1 + de),
        "heritability.rfi": _h2(a1, e1),
        "heritability_with_tw.dmi": _h2(a1 + da, e1 + de + t1 + dtw),
        "heritability_with_tw.rfi": _h2(a1, e1 + t1),
    }
    for t, name in enumerate(sink_names, start=1):
        out[f"heritability.{name}"] = _h2(G[t, t], R[t, t])
        out[f"heritability_with_tw.{name}"] = _h2(G[t, t], R[t, t] + tw[t])
    va_dmi = a1 + da
    cov_dmi_sink = Gs @ lam
    for t, name in enumerate(sink_names):
        out[f"genetic_correlation.dmi_{name}"] = _corr(cov_dmi_sink[t], va_dmi, Gs[t, t])
    out["genetic_correlation.dmi_rfi"] = _corr(a1, va_dmi, a1)
    for t in range(m):
        for u in range(t + 1, m):
            out[f"genetic_correlation.{sink_names[t]}_{sink_names[u]}"] = _corr(Gs[t, u], Gs[t, t], Gs[u, u])
    return out


def _mt_quantities(labels, G, R, TW, per_sample_genetic):
    """Parameters of a (DMI, sinks) covariance triple, including implied RFI."""
    k = len(labels)
    out = {}
    for j, name in enumerate(labels):
        out[f"heritability.{name}"] = _h2(G[j, j], R[j, j])
        out[f"heritability_with_tw.{name}"] = _h2(G[j, j], R[j, j] + TW[j, j])
    for i in range(k):
        for j in range(i + 1, k):
            out[f"genetic_correlation.{labels[i]}_{labels[j]}"] = _corr(G[i, j], G[i, i], G[j, j])
    P = G + R + TW
    b = spd_solve(P[1:, 1:], P[1:, 0])
    w = np.concatenate([[1.0], -b])
    va, ve, vt = w @ G @ w, w @ R @ w, w @ TW @ w
    out["heritability.rfi"] = _h2(va, ve)
    out["heritability_with_tw.rfi"] = _h2(va, ve + vt)
    out["genetic_correlation.dmi_rfi"] = _corr(G[0] @ w, G[0, 0], va)
    for name, v in zip(labels[1:], b):
        out[f"partial_regression.phenotypic.{name}"] = v
    if per_sample_genetic:
        for name, v in zip(labels[1:], genetic_partial_regression(G)):
            out[f"partial_regression.genetic.{name}"] = v
    return out


def derive_mt(labels, per_sample_genetic, state):
    return _mt_quantities(labels, state.G, state.R, np.diag(state.tw_var), per_sample_genetic)


def chol_inverse(state, k):
    S = np.eye(k)
    for row, c in state.coef.items():
        S[row, row + 1 :] = -c
    return np.linalg.inv(S)


def derive_mt_chol(labels, per_sample_genetic, state):
    k = len(labels)
    Si = chol_inverse(state, k)
    G, R, TW = (Si @ M @ Si.T for M in (state.G, state.R, np.diag(state.tw_var)))
    return _mt_quantities(labels, G, R, TW, per_sample_genetic)


def gv_identity(k, state):
    return np.eye(k)


def gv_rsem(state):
    """(RFI, sinks) -> (RFI, sinks, DMI)."""
    lam = state.coef[0]
    k = lam.size + 1
    return np.vstack([np.eye(k), np.concatenate([[1.0], lam])])


def _rfi_row(G, R, TW):
    P = G + R + TW
    return np.concatenate([[1.0], -spd_solve(P[1:, 1:], P[1:, 0])])


def gv_mt(state):
    """(DMI, sinks) -> (DMI, sinks, RFI) with RFI from phenotypic partial regressions."""
    k = state.G.shape[0]
    row = _rfi_row(state.G, state.R, np.diag(state.tw_var))
    return np.vstack([np.eye(k), row])


def gv_mt_chol(state):
    k = state.G.shape[0]
    Si = chol_inverse(state, k)
    G, R, TW = (Si @ M @ Si.T for M in (state.G, state.R, np.diag(state.tw_var)))
    return np.vstack([Si, _rfi_row(G, R, TW) @ Si])


# ----------------------------------------------------------------------
# results


@dataclass
class FitResult:
    """Outcome of one model fit.

    ``gv`` holds posterior mean genetic values (pedigree animals x
    ``gv_labels``); ``parallel`` the raw chains (None for LR1).
    """

    spec: object
    summary: dict
    animal_ids: tuple = ()
    gv: np.ndarray = None
    gv_labels: tuple = ()
    parallel: object = None
    stage1: object = None
    trace_names: tuple = field(default=())

    def genetic_values(self, label):
        if self.gv is None or label not in self.gv_labels:
            raise ValidationError(f"no genetic values for {label!r}")
        return self.gv[:, self.gv_labels.index(label)]


def _nested(summaries):
    """Fold ``heritability.x``-style names into nested mean/SD sections."""
    out = {}
    for name, s in summaries.items():
        parts = name.split(".")
        if parts[0] not in ("heritability", "heritability_with_tw", "genetic_correlation", "partial_regression", "b"):
            continue
        node = out.setdefault(parts[0], {})
        for p in parts[1:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = {"mean": s["mean"], "sd": s["sd"]}
    return out


def summarize_parallel(spec, par, gv_labels=()):
    if not par.chains:
        raise DegenerateInputError("every chain failed: " + "; ".join(par.failures.values()))
    names = par.chains[0].names
    params = {}
    for name in names:
        s = par.pooled(name)
        if s.size >= 2 and np.all(np.isfinite(s)):
            params[name] = summarize(s)
    summary = {
        "family": spec.family,
        "n_chains": len(par.chains),
        "n_saved_per_chain": int(par.chains[0].saved_iters.size),
        "failed_chains": {str(c): e for c, e in par.failures.items()},
        "parameters": params,
    }
    summary.update(_nested(params))
    return summary


def _posterior_mean_matrix(params, labels, kind):
    k = len(labels)
    M = np.zeros((k, k))
    for i in range(k):
        for j in range(i, k):
            key = f"var_{kind}.{labels[i]}" if i == j else f"cov_{kind}.{labels[i]}_{labels[j]}"
            if key not in params:
                return None
            M[i, j] = M[j, i] = params[key]["mean"]
    return M


def _prepare(spec, records, pedigree):
    """Standardize, build the design and select the response columns."""
    std, _ = standardize(records)
    design = build_design(std, spec, pedigree)
    return design, trait_matrix(std)


def _run(spec, problem, gv_labels):
    par = run_parallel(problem, spec.mcmc)
    summary = summarize_parallel(spec, par, gv_labels)
    return par, summary


def fit_single_trait(y, records, pedigree, spec, label="rfi"):
    """Single-trait animal model on an arbitrary response aligned with ``records``."""
    design = build_design(records, spec, pedigree)
    derive = partial(derive_single, label) if design.animal is not None else None
    problem = ModelProblem(np.asarray(y, dtype=float)[:, None], design, single_structure(label), spec.priors, derive)
    par, summary = _run(spec, problem, (label,))
    return _result(spec, summary, design, par, (label,))


def _result(spec, summary, design, par, gv_labels, stage1=None):
    an = design.animal
    gv = None
    if an is not None and par.chains:
        gv = np.mean([c.gv_mean for c in par.chains], axis=0)
    return FitResult(
        spec=spec,
        summary=summary,
        animal_ids=tuple(an.ids) if an is not None else (),
        gv=gv,
        gv_labels=tuple(gv_labels),
        parallel=par,
        stage1=stage1,
        trace_names=par.chains[0].trace_names if par.chains else (),
    )


def fit_model(spec, records, pedigree=None):
    """Fit one model family; records may be on the raw or standardized scale."""
    fam = spec.family
    sinks = list(spec.sink_indices)
    sink_names = tuple(TRAITS[i] for i in sinks)
    if fam == "lr1":
        std, _ = standardize(records)
        fit = fit_stage1(std, spec.sink_indices)
        summary = {
            "family": fam,
            "coefficients": {t: {"estimate": float(b), "se": float(s)} for t, b, s in zip(fit.terms, fit.coefficients, fit.se)},
        }
        return FitResult(spec=spec, summary=summary, stage1=fit)

    design, Y = _prepare(spec, records, pedigree)
    pr = spec.priors
    if fam in RECURSIVE:
        structure = rsem_structure(sink_names)
        Yf = Y[:, [0] + sinks]
        derive = partial(derive_rsem, sink_names) if design.animal is not None else None
        gv_transform = gv_rsem
        gv_labels = ("rfi",) + sink_names + ("dmi",)
    elif fam in ONE_STEP:
        structure = single_structure("rfi")
        n_fixed = design.p
        design = design.with_covariates(Y[:, sinks], [f"b.{n}" for n in sink_names], pr)
        Yf = Y[:, [0]]
        derive = partial(derive_one_step, "rfi", sink_names, n_fixed)
        gv_transform = partial(gv_identity, 1)
        gv_labels = ("rfi",)
    elif fam == "st":
        j = TRAITS.index(spec.trait)
        structure = single_structure(spec.trait)
        Yf = Y[:, [j]]
        derive = partial(derive_single, spec.trait)
        gv_transform = partial(gv_identity, 1)
        gv_labels = (spec.trait,)
    elif fam == "mt":
        labels = ("dmi",) + sink_names
        structure = mt_structure(labels)
        Yf = Y[:, [0] + sinks]
        derive = partial(derive_mt, labels, spec.per_sample_partial_regression)
        gv_transform = gv_mt
        gv_labels = labels + ("rfi",)
    else:
        labels = ("dmi",) + sink_names
        structure = mt_chol_structure(labels)
        Yf = Y[:, [0] + sinks]
        derive = partial(derive_mt_chol, labels, spec.per_sample_partial_regression)
        gv_transform = gv_mt_chol
        gv_labels = labels + ("rfi",)
    if design.animal is None and fam not in RECURSIVE:
        derive = None
    problem = ModelProblem(Yf, design, structure, pr, derive, gv_transform if design.animal is not None else None)
    par, summary = _run(spec, problem, gv_labels)
    if fam in ("mt", "mt_chol") and design.animal is not None:
        _add_genetic_regression(summary, structure, sink_names, fam)
    return _result(spec, summary, design, par, gv_labels)


def _add_genetic_regression(summary, structure, sink_names, fam):
    """Genetic partial regressions from the posterior mean G on the trait scale."""
    params = summary["parameters"]
    labels = structure.labels
    if fam == "mt":
        G = _posterior_mean_matrix(params, labels, "a")
    else:
        k = len(labels)
        S = np.eye(k)
        for row in range(k - 1):
            for jp in range(row + 1, k):
                S[row, jp] = -params[structure.coef_name(row, jp)]["mean"]
        D = np.diag([params[f"var_a.{lb}"]["mean"] for lb in labels])
        Si = np.linalg.inv(S)
        G = Si @ D @ Si.T
    if G is None:
        return
    b = genetic_partial_regression(G)
    section = summary.setdefault("partial_regression", {}).setdefault("genetic_from_mean_G", {})
    for name, v in zip(sink_names, b):
        section[name] = float(v)


__all__ = [
    "FitResult",
    "fit_model",
    "fit_single_trait",
    "mt_chol_structure",
    "mt_structure",
    "rsem_structure",
    "single_structure",
    "summarize_parallel",
]
