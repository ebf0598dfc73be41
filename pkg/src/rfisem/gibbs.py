"""Gibbs sampler for recursive and multiple-trait animal models.

The sampler works on an ``n x k`` response matrix ``Y``.  A
``ModelStructure`` says which equations carry structural coefficients on
other phenotypes (the recursive part) and how equations are grouped into
blocks with unstructured genetic and residual covariances.  Across groups
the covariances are zero, so each group is sampled with its own random
stream and never reads another group's parameters.

Genetic values are handled in the eigenbasis of ``L' Z' Z L`` where
``A = L L'``.  Writing ``a = L U eta`` makes the prior on ``eta`` iid
``N(0, G)`` per coordinate and the likelihood diagonal, so the whole
genetic block of a group is drawn exactly with two matrix products per
iteration.  Coordinates outside the data span (``eta_null``) only ever
see the prior.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import NumericalError, RankDeficiencyError, ValidationError
from .linalg import inv_wishart_draw, mvn_from_precision, spd_cholesky
from .pedigree import build_A

log = logging.getLogger(__name__)


@dataclass
class AnimalEffects:
    ids: tuple
    rec_index: np.ndarray  # pedigree position of each record's animal
    L: np.ndarray  # lower Cholesky factor of A
    V: np.ndarray  # q x r right singular vectors of Z L
    s: np.ndarray  # r nonzero eigenvalues of L'Z'ZL
    Tp: np.ndarray  # n x r, equals Z L V

    @property
    def q(self):
        return self.L.shape[0]

    @property
    def r(self):
        return self.s.shape[0]

    @classmethod
    def from_pedigree(cls, pedigree, record_ids):
        pos = pedigree.index()
        missing = sorted({a for a in record_ids if a not in pos})
        if missing:
            raise ValidationError(f"{len(missing)} phenotyped animal(s) missing from pedigree, e.g. {missing[:5]}")
        A = build_A(pedigree).values
        return cls.from_matrix(pedigree.ids, A, np.array([pos[a] for a in record_ids], dtype=int))

    @classmethod
    def from_matrix(cls, ids, A, rec_index):
        try:
            L = linalg.cholesky(A, lower=True)
        except linalg.LinAlgError as exc:
            raise NumericalError("relationship matrix is not positive definite") from exc
        B = L[rec_index]
        W, sv, Vt = linalg.svd(B, full_matrices=False)
        r = int(np.sum(sv > sv.max() * 1e-10)) if sv.size else 0
        return cls(
            ids=tuple(ids),
            rec_index=np.asarray(rec_index),
            L=L,
            V=np.ascontiguousarray(Vt[:r].T),
            s=sv[:r] ** 2,
            Tp=np.ascontiguousarray(W[:, :r] * sv[:r]),
        )

    def genetic_values(self, eta):
        """Genetic values of every pedigree animal from data-span coordinates.

        Exact for posterior means, since the null-space coordinates have
        mean zero.
        """
        return self.L @ (self.V @ eta)


@dataclass(frozen=True)
class ModelStructure:
    """Equation labels, covariance groups and free structural rows.

    ``parents`` pairs an equation index with the indices of phenotypes
    that enter it recursively.  Parents must have larger indices, so the
    structural matrix is unit upper triangular with determinant one.
    """

    labels: tuple
    groups: tuple
    parents: tuple = ()
    coef_prefix: str = "lambda"

    def __post_init__(self):
        k = len(self.labels)
        flat = sorted(i for g in self.groups for i in g)
        if flat != list(range(k)):
            raise ValidationError("groups must partition the equations")
        for row, parents in self.parents:
            if any(p <= row or p >= k for p in parents):
                raise ValidationError("structural parents must come later in trait order")
            if len(self.group_of(row)) != 1:
                raise ValidationError("an equation with structural coefficients must be its own group")

    @property
    def k(self):
        return len(self.labels)

    def group_of(self, row):
        for g in self.groups:
            if row in g:
                return g
        raise KeyError(row)

    def group_index(self, row):
        for i, g in enumerate(self.groups):
            if row in g:
                return i
        raise KeyError(row)

    @property
    def parent_map(self):
        return {row: tuple(p) for row, p in self.parents}

    def coef_name(self, row, parent):
        if self.coef_prefix == "lambda":
            return f"lambda.{self.labels[parent]}"
        return f"{self.coef_prefix}.{self.labels[row]}_{self.labels[parent]}"


class StructuralMatrix:
    """Unit triangular structural matrix with one nontrivial row."""

    def __init__(self, lam):
        self.lam = np.asarray(lam, dtype=float)

    @property
    def k(self):
        return self.lam.size + 1

    @property
    def matrix(self):
        M = np.eye(self.k)
        M[0, 1:] = -self.lam
        return M

    def inverse(self):
        M = np.eye(self.k)
        M[0, 1:] = self.lam
        return M

    @property
    def determinant(self):
        return 1.0


def structural_conditional(sinks, w, sigma2_e, lambda_mean, lambda_var, cross=None):
    """Conditional mean and covariance of structural coefficients.

    ``(S'S + c I)^-1 (S'w + c lambda_mean)`` with ``c = sigma2_e / lambda_var``
    and covariance ``sigma2_e (S'S + c I)^-1``.
    """
    sinks = np.asarray(sinks, dtype=float)
    if cross is None:
        cross = sinks.T @ sinks
    ridge = sigma2_e / lambda_var
    coef = cross + ridge * np.eye(cross.shape[0])
    rhs = sinks.T @ w + ridge * lambda_mean
    chol = spd_cholesky(coef)
    mean = linalg.cho_solve((chol, True), rhs)
    cov = sigma2_e * linalg.cho_solve((chol, True), np.eye(cross.shape[0]))
    return mean, cov


@dataclass
class ChainState:
    coef: dict
    beta: np.ndarray  # p x k
    tw: np.ndarray  # n_tw x k
    eta: np.ndarray  # r x k
    eta_null: np.ndarray  # (q - r) x k
    a_rec: np.ndarray  # n x k genetic values of the records
    G: np.ndarray
    R: np.ndarray
    tw_var: np.ndarray
    iteration: int = 0

    @property
    def lam(self):
        return self.coef[0]

    def copy(self):
        return ChainState(
            coef={r: c.copy() for r, c in self.coef.items()},
            beta=self.beta.copy(),
            tw=self.tw.copy(),
            eta=self.eta.copy(),
            eta_null=self.eta_null.copy(),
            a_rec=self.a_rec.copy(),
            G=self.G.copy(),
            R=self.R.copy(),
            tw_var=self.tw_var.copy(),
            iteration=self.iteration,
        )


class GibbsSampler:
    """One sweep: structural rows, then locations per group, then variances."""

    def __init__(self, Y, design, structure, priors):
        Y = np.asarray(Y, dtype=float)
        if Y.ndim == 1:
            Y = Y[:, None]
        if Y.shape != (design.n, structure.k):
            raise ValidationError(f"response shape {Y.shape} does not match design ({design.n}, {structure.k})")
        self.design = design
        self.structure = structure
        self.priors = priors
        self.XtX = design.X.T @ design.X
        self.has_tw = design.tw_index is not None
        self.has_animal = design.animal is not None
        if self.has_tw:
            self.Ztw = design.incidence["test_week"]
            self.tw_counts = self.Ztw.sum(axis=0)
        self.groups = [np.array(g, dtype=int) for g in structure.groups]
        self.parents = structure.parent_map
        self._floor_warned = set()
        self.trace_names, self._trace_spec = self._trace_layout()
        self.set_response(Y)

    # ------------------------------------------------------------------
    def set_response(self, Y):
        self.Y = np.ascontiguousarray(np.asarray(Y, dtype=float).reshape(self.design.n, self.structure.k))
        self.cross = {row: self.Y[:, list(p)].T @ self.Y[:, list(p)] for row, p in self.parents.items()}

    def working_response(self, state):
        Ystar = self.Y.copy()
        for row, p in self.parents.items():
            Ystar[:, row] -= self.Y[:, list(p)] @ state.coef[row]
        return Ystar

    def fixed_part(self, state):
        return self.design.X @ state.beta

    def tw_part(self, state):
        if not self.has_tw:
            return np.zeros((self.design.n, self.structure.k))
        return state.tw[self.design.tw_index]

    def location(self, state):
        return self.fixed_part(state) + self.tw_part(state) + state.a_rec

    def _fixed_cols(self, state, idx):
        return self.design.X @ state.beta[:, idx]

    def _tw_cols(self, state, idx):
        if not self.has_tw:
            return 0.0
        return state.tw[:, idx][self.design.tw_index]

    # ------------------------------------------------------------------
    def lambda_conditional(self, state, row=0):
        """Mean and covariance of the structural coefficients of one equation."""
        p = list(self.parents[row])
        w = self.Y[:, row] - self.location(state)[:, row]
        pr = self.priors
        return structural_conditional(
            self.Y[:, p], w, state.R[row, row], pr.lambda_mean, pr.lambda_var, cross=self.cross[row]
        )

    def sample_structural(self, state, row, rng):
        p = list(self.parents[row])
        w = self.Y[:, row] - self.location(state)[:, row]
        sig = state.R[row, row]
        ridge = sig / self.priors.lambda_var
        coef = self.cross[row] + ridge * np.eye(len(p))
        rhs = self.Y[:, p].T @ w + ridge * self.priors.lambda_mean
        try:
            state.coef[row] = mvn_from_precision(coef, rhs, rng, scale=sig)
        except RankDeficiencyError as exc:
            raise NumericalError(str(exc), state.iteration, f"structural row {row}") from exc
        return state.coef[row]

    def sample_lambda(self, state, rng):
        return self.sample_structural(state, 0, rng)

    # ------------------------------------------------------------------
    def sample_location(self, state, gi, Ystar, rng, animal=True):
        idx = self.groups[gi]
        try:
            self._sample_fixed(state, idx, Ystar, rng)
            if self.has_tw:
                self._sample_test_week(state, idx, Ystar, rng)
            if animal and self.has_animal:
                self._sample_animal(state, idx, Ystar, rng)
        except (RankDeficiencyError, np.linalg.LinAlgError) as exc:
            raise NumericalError(str(exc), state.iteration, f"locations of group {gi}") from exc

    def _sample_fixed(self, state, idx, Ystar, rng):
        d = self.design
        if d.p == 0:
            return
        resid = Ystar[:, idx] - self._tw_cols(state, idx) - state.a_rec[:, idx]
        Rinv = np.linalg.inv(state.R[np.ix_(idx, idx)])
        kg = idx.size
        prec = np.kron(Rinv, self.XtX) + np.diag(np.tile(d.prior_precision, kg))
        rhs = (d.X.T @ resid @ Rinv).ravel(order="F") + np.tile(d.prior_precision * d.prior_mean, kg)
        draw = mvn_from_precision(prec, rhs, rng)
        state.beta[:, idx] = draw.reshape(d.p, kg, order="F")

    def _sample_test_week(self, state, idx, Ystar, rng):
        resid = Ystar[:, idx] - self._fixed_cols(state, idx) - state.a_rec[:, idx]
        sums = self.Ztw.T @ resid
        n_lv = sums.shape[0]
        v = state.tw_var[idx]
        if idx.size == 1:
            r = state.R[idx[0], idx[0]]
            prec = self.tw_counts / r + 1.0 / v[0]
            mean = sums[:, 0] / r / prec
            state.tw[:, idx[0]] = mean + rng.standard_normal(n_lv) / np.sqrt(prec)
            return
        Rinv = np.linalg.inv(state.R[np.ix_(idx, idx)])
        prec = self.tw_counts[:, None, None] * Rinv + np.diag(1.0 / v)
        rhs = sums @ Rinv
        chol = np.linalg.cholesky(prec)
        mean = np.linalg.solve(prec, rhs[..., None])[..., 0]
        z = rng.standard_normal((n_lv, idx.size))
        noise = np.linalg.solve(np.swapaxes(chol, 1, 2), z[..., None])[..., 0]
        state.tw[:, idx] = mean + noise

    def animal_conditional_mean(self, state, gi, Ystar=None):
        """Conditional mean of the group's record genetic values (no draw)."""
        idx = self.groups[gi]
        if Ystar is None:
            Ystar = self.working_response(state)
        an = self.design.animal
        resid = Ystar[:, idx] - self._fixed_cols(state, idx) - self._tw_cols(state, idx)
        K, denom, rhs, _ = self._animal_system(state, idx, an, an.Tp.T @ resid)
        eta = ((rhs @ K) / denom) @ K.T
        return eta, an.Tp @ eta

    def _animal_system(self, state, idx, an, projected):
        """Whitened system for the group; ``projected`` is ``Tp' resid``."""
        Rinv = np.linalg.inv(state.R[np.ix_(idx, idx)])
        C = spd_cholesky(state.G[np.ix_(idx, idx)])
        D, Q = np.linalg.eigh(C.T @ Rinv @ C)
        K = C @ Q
        denom = an.s[:, None] * D[None, :] + 1.0
        return K, denom, projected @ Rinv, C

    def _animal_draw(self, state, idx, an, projected, rng):
        K, denom, rhs, C = self._animal_system(state, idx, an, projected)
        z = rng.standard_normal(denom.shape)
        xi = (rhs @ K) / denom + z / np.sqrt(denom)
        state.eta[:, idx] = xi @ K.T
        state.eta_null[:, idx] = rng.standard_normal((an.q - an.r, idx.size)) @ C.T

    def _sample_animal(self, state, idx, Ystar, rng):
        an = self.design.animal
        resid = Ystar[:, idx] - self._fixed_cols(state, idx) - self._tw_cols(state, idx)
        self._animal_draw(state, idx, an, an.Tp.T @ resid, rng)
        state.a_rec[:, idx] = an.Tp @ state.eta[:, idx]

    def _sample_animals(self, state, Ystar, rngs):
        # groups are independent given locations, so one pass over Tp serves all
        an = self.design.animal
        projected = an.Tp.T @ (Ystar - self.fixed_part(state) - self.tw_part(state))
        for gi, idx in enumerate(self.groups):
            try:
                self._animal_draw(state, idx, an, projected[:, idx], rngs[gi])
            except (RankDeficiencyError, np.linalg.LinAlgError) as exc:
                raise NumericalError(str(exc), state.iteration, f"locations of group {gi}") from exc
        state.a_rec = an.Tp @ state.eta

    # ------------------------------------------------------------------
    def sample_variances(self, state, gi, Ystar, rng):
        idx = self.groups[gi]
        pr = self.priors
        ix = np.ix_(idx, idx)
        if self.has_animal:
            S = state.eta[:, idx].T @ state.eta[:, idx] + state.eta_null[:, idx].T @ state.eta_null[:, idx]
            state.G[ix] = self._draw_cov(S, self.design.animal.q, rng, state, f"genetic {gi}")
        E = Ystar[:, idx] - self._fixed_cols(state, idx) - self._tw_cols(state, idx) - state.a_rec[:, idx]
        state.R[ix] = self._draw_cov(E.T @ E, self.design.n, rng, state, f"residual {gi}")
        if self.has_tw:
            for j in idx:
                ss = np.array([[state.tw[:, j] @ state.tw[:, j]]])
                state.tw_var[j] = self._draw_cov(ss, self.design.n_tw, rng, state, f"test week {j}")[0, 0]

    def _draw_cov(self, S, m, rng, state, block):
        pr = self.priors
        dim = S.shape[0]
        if dim == 1:
            df = pr.var_df + m
            if df <= 0:
                raise NumericalError("non-positive posterior degrees of freedom", state.iteration, block)
            scale = S[0, 0] + pr.var_df * pr.var_scale
            draw = np.array([[max(scale, 0.0) / rng.chisquare(df)]])
        else:
            df = dim + pr.iw_df_extra + m
            draw = inv_wishart_draw(df, pr.iw_scale * np.eye(dim) + S, rng)
        return self._apply_floor(draw, block)

    def _apply_floor(self, mat, block):
        floor = self.priors.floor
        vals, vecs = np.linalg.eigh(mat)
        if vals.min() >= floor:
            return mat
        if block not in self._floor_warned:
            log.warning("variance draw below floor %g in %s block; clamped", floor, block)
            self._floor_warned.add(block)
        if mat.shape[0] == 1:
            return np.array([[floor]])
        return (vecs * np.maximum(vals, floor)) @ vecs.T

    # ------------------------------------------------------------------
    def sweep(self, state, rngs):
        for row in sorted(self.parents, reverse=True):
            self.sample_structural(state, row, rngs[self.structure.group_index(row)])
        Ystar = self.working_response(state)
        for gi in range(len(self.groups)):
            self.sample_location(state, gi, Ystar, rngs[gi], animal=False)
        if self.has_animal:
            self._sample_animals(state, Ystar, rngs)
        for gi in range(len(self.groups)):
            self.sample_variances(state, gi, Ystar, rngs[gi])
        state.iteration += 1
        return state

    def initial_state(self, rng):
        """Random start: coefficients U(-1, 1), variances U(0.1, 1), locations zero."""
        d, k = self.design, self.structure.k
        an = d.animal
        r = an.r if an is not None else 0
        q = an.q if an is not None else 0
        G = np.zeros((k, k))
        if an is not None:
            G[np.diag_indices(k)] = rng.uniform(0.1, 1.0, k)
        R = np.diag(rng.uniform(0.1, 1.0, k))
        tw_var = rng.uniform(0.1, 1.0, k) if self.has_tw else np.zeros(k)
        coef = {row: rng.uniform(-1.0, 1.0, len(p)) for row, p in sorted(self.parents.items())}
        return ChainState(
            coef=coef,
            beta=np.zeros((d.p, k)),
            tw=np.zeros((d.n_tw, k)),
            eta=np.zeros((r, k)),
            eta_null=np.zeros((q - r, k)),
            a_rec=np.zeros((d.n, k)),
            G=G,
            R=R,
            tw_var=tw_var,
        )

    def prior_state(self, rng):
        """Draw every parameter from its prior (all priors must be proper)."""
        pr, d, k = self.priors, self.design, self.structure.k
        if not pr.var_df > 0 or not pr.var_scale > 0:
            raise ValidationError("prior simulation needs proper variance priors")
        if np.any(d.prior_precision <= 0):
            raise ValidationError("prior simulation needs proper fixed-effect priors")
        state = self.initial_state(np.random.default_rng(0))
        for row, p in sorted(self.parents.items()):
            state.coef[row] = pr.lambda_mean + math.sqrt(pr.lambda_var) * rng.standard_normal(len(p))
        for g in self.groups:
            ix = np.ix_(g, g)
            dim = g.size
            if dim == 1:
                draw = np.array([[pr.var_df * pr.var_scale / rng.chisquare(pr.var_df)]])
                R = draw
                G = np.array([[pr.var_df * pr.var_scale / rng.chisquare(pr.var_df)]])
            else:
                df = dim + pr.iw_df_extra
                R = inv_wishart_draw(df, pr.iw_scale * np.eye(dim), rng)
                G = inv_wishart_draw(df, pr.iw_scale * np.eye(dim), rng)
            state.R[ix] = R
            if d.animal is not None:
                state.G[ix] = G
        sd = 1.0 / np.sqrt(d.prior_precision)
        state.beta = d.prior_mean[:, None] + sd[:, None] * rng.standard_normal((d.p, k))
        if self.has_tw:
            state.tw_var = np.array([pr.var_df * pr.var_scale / rng.chisquare(pr.var_df) for _ in range(k)])
            state.tw = rng.standard_normal((d.n_tw, k)) * np.sqrt(state.tw_var)
        if d.animal is not None:
            an = d.animal
            C = np.linalg.cholesky(state.G)
            state.eta = rng.standard_normal((an.r, k)) @ C.T
            state.eta_null = rng.standard_normal((an.q - an.r, k)) @ C.T
            state.a_rec = an.Tp @ state.eta
        return state

    def simulate_response(self, state, rng):
        """Draw Y given all parameters, solving the recursion bottom-up."""
        n, k = self.design.n, self.structure.k
        E = rng.standard_normal((n, k)) @ np.linalg.cholesky(state.R).T
        Y = self.location(state) + E
        for row in sorted(self.parents, reverse=True):
            Y[:, row] += Y[:, list(self.parents[row])] @ state.coef[row]
        return Y

    # ------------------------------------------------------------------
    def _trace_layout(self):
        st = self.structure
        names, spec = [], []
        for row, p in sorted(self.parents.items()):
            for j, par in enumerate(p):
                names.append(st.coef_name(row, par))
                spec.append(("coef", row, j))
        for g in self.groups:
            for kind, flag in (("a", self.has_animal), ("e", True)):
                if not flag:
                    continue
                for ii, i in enumerate(g):
                    for j in g[ii:]:
                        if i == j:
                            names.append(f"var_{kind}.{st.labels[i]}")
                        else:
                            names.append(f"cov_{kind}.{st.labels[i]}_{st.labels[j]}")
                        spec.append((kind, i, j))
            if self.has_tw:
                for i in g:
                    names.append(f"var_tw.{st.labels[i]}")
                    spec.append(("tw", i, i))
        return tuple(names), tuple(spec)

    def trace_values(self, state):
        out = np.empty(len(self._trace_spec))
        for n, (kind, i, j) in enumerate(self._trace_spec):
            if kind == "coef":
                out[n] = state.coef[i][j]
            elif kind == "a":
                out[n] = state.G[i, j]
            elif kind == "e":
                out[n] = state.R[i, j]
            else:
                out[n] = state.tw_var[i]
        return out


@dataclass
class ModelProblem:
    """Everything a worker needs to run one chain; must be picklable."""

    Y: np.ndarray
    design: object
    structure: ModelStructure
    priors: object
    derive: object = None  # callable(state) -> dict of derived scalars
    gv_transform: object = None  # callable(state) -> matrix mapping equations to reported traits

    def sampler(self):
        return GibbsSampler(self.Y, self.design, self.structure, self.priors)


@dataclass
class ChainResult:
    seed: int
    trace_names: tuple
    trace: np.ndarray  # chain_length x n_trace, every iteration
    saved_iters: np.ndarray  # 1-based iteration numbers kept
    derived_names: tuple
    derived: np.ndarray  # n_saved x n_derived
    eta_mean: np.ndarray = None
    gv_mean: np.ndarray = None  # q x k posterior mean genetic values
    states: list = field(default_factory=list)

    def saved(self, name):
        if name in self.derived_names:
            return self.derived[:, self.derived_names.index(name)]
        return self.trace[self.saved_iters - 1, self.trace_names.index(name)]

    @property
    def names(self):
        return self.trace_names + tuple(n for n in self.derived_names if n not in self.trace_names)


def _streams(seed, n_groups):
    children = np.random.SeedSequence(seed).spawn(n_groups + 1)
    return np.random.default_rng(children[0]), [np.random.default_rng(c) for c in children[1:]]


def run_chain(problem, mcmc, seed, keep_states=False):
    """Run one chain; deterministic given ``seed``.

    Every iteration's scalar parameters go into ``trace``; derived
    quantities and genetic-value averages use only post-burn-in,
    thinned iterations.
    """
    sampler = problem.sampler()
    init_rng, rngs = _streams(seed, len(sampler.groups))
    state = sampler.initial_state(init_rng)
    L = mcmc.chain_length
    trace = np.empty((L, len(sampler.trace_names)))
    saved_iters = np.arange(mcmc.burn_in + mcmc.thin, L + 1, mcmc.thin)
    saved_set = set(saved_iters.tolist())
    derived_rows, derived_names = [], ()
    eta_sum = None
    states = []
    for it in range(1, L + 1):
        sampler.sweep(state, rngs)
        trace[it - 1] = sampler.trace_values(state)
        if it in saved_set:
            eta = state.eta if problem.gv_transform is None else state.eta @ problem.gv_transform(state).T
            eta_sum = eta if eta_sum is None else eta_sum + eta
            if problem.derive is not None:
                d = problem.derive(state)
                derived_names = tuple(d)
                derived_rows.append([d[n] for n in derived_names])
            if keep_states:
                states.append(state.copy())
    n_saved = len(saved_iters)
    derived = np.array(derived_rows, dtype=float).reshape(n_saved, len(derived_names))
    eta_mean = eta_sum / n_saved
    an = problem.design.animal
    gv = an.genetic_values(eta_mean) if an is not None else None
    return ChainResult(
        seed=seed,
        trace_names=sampler.trace_names,
        trace=trace,
        saved_iters=saved_iters,
        derived_names=derived_names,
        derived=derived,
        eta_mean=eta_mean,
        gv_mean=gv,
        states=states,
    )


@dataclass
class ParallelResult:
    chains: list
    failures: dict

    def pooled(self, name):
        return np.concatenate([c.saved(name) for c in self.chains])

    def traces(self, name):
        """chains x iterations array of one traced parameter."""
        i = self.chains[0].trace_names.index(name)
        return np.stack([c.trace[:, i] for c in self.chains])

    @property
    def gv_mean(self):
        gvs = [c.gv_mean for c in self.chains if c.gv_mean is not None]
        return np.mean(gvs, axis=0) if gvs else None

    @property
    def eta_mean(self):
        return np.mean([c.eta_mean for c in self.chains], axis=0)


def _run_one(args):
    problem, mcmc, seed = args
    try:
        return seed, run_chain(problem, mcmc, seed), None
    except Exception as exc:  # reported per chain
        return seed, None, f"{type(exc).__name__}: {exc}"


def run_parallel(problem, mcmc):
    """Chain ``c`` uses seed ``base_seed + c``; output is independent of scheduling."""
    seeds = [mcmc.base_seed + c for c in range(mcmc.n_chains)]
    jobs = [(problem, mcmc, s) for s in seeds]
    workers = min(mcmc.workers or 1, len(seeds))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    chains, failures = [], {}
    for c, (seed, res, err) in enumerate(results):
        if err is None:
            chains.append(res)
        else:
            log.error("chain %d (seed %d) failed: %s", c, seed, err)
            failures[c] = err
    return ParallelResult(chains, failures)
