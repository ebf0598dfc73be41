"""Phenotype records, standardization, model settings and design structure."""

import csv
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DegenerateInputError, ValidationError

TRAITS = ("dmi", "mbw", "milkne", "dbw")
PHENOTYPE_HEADER = ("animal", "dim", "test_week") + TRAITS
DIM_LEVELS = (71, 72, 73, 74, 75, 76, 77)

FAMILIES = ("lr1", "lr2", "lr3", "rsem1", "rsem2", "rsem3", "st", "mt", "mt_chol")

_DEFAULT_EFFECTS = {
    "lr1": ((), ()),
    "rsem1": ((), ()),
    "lr2": (("intercept", "dim_class"), ("animal",)),
    "rsem2": (("intercept", "dim_class"), ("animal",)),
    "lr3": (("intercept", "dim_class"), ("test_week", "animal")),
    "rsem3": (("intercept", "dim_class"), ("test_week", "animal")),
    "st": (("intercept", "dim_class"), ("test_week", "animal")),
    "mt": (("intercept", "dim_class"), ("test_week", "animal")),
    "mt_chol": (("intercept", "dim_class"), ("test_week", "animal")),
}


@dataclass(frozen=True)
class PhenotypeRecord:
    animal_id: int
    dim_class: int
    test_week: int
    traits: tuple


@dataclass(frozen=True)
class StandardizationInfo:
    means: tuple
    sds: tuple

    def __post_init__(self):
        if any(not sd > 0 for sd in self.sds):
            raise DegenerateInputError("standard deviations must be strictly positive")

    def to_raw(self, values):
        return np.asarray(values) * np.asarray(self.sds) + np.asarray(self.means)


def trait_matrix(records):
    return np.array([r.traits for r in records], dtype=float)


def ingest_phenotypes(path, dim_levels=None, test_week_levels=None):
    """Read a phenotype CSV; any missing or malformed cell is an error.

    Rows are numbered from 1 for the first data line.
    """
    path = Path(path)
    with path.open(newline="") as handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        missing = [c for c in PHENOTYPE_HEADER if c not in header]
        if missing:
            raise ValidationError(f"{path}: missing column(s) {', '.join(missing)}")
        records = []
        for row_no, row in enumerate(reader, start=1):
            records.append(_parse_row(row, row_no, dim_levels, test_week_levels))
    return records


def _parse_row(row, row_no, dim_levels, test_week_levels):
    def cell(col, cast):
        raw = (row.get(col) or "").strip()
        if raw == "":
            raise ValidationError(f"row {row_no}, column {col}: missing value")
        try:
            value = cast(raw)
        except ValueError:
            raise ValidationError(f"row {row_no}, column {col}: cannot parse {raw!r}") from None
        if cast is float and not math.isfinite(value):
            raise ValidationError(f"row {row_no}, column {col}: non-finite value")
        return value

    animal = cell("animal", int)
    dim = cell("dim", int)
    week = cell("test_week", int)
    if dim_levels is not None and dim not in dim_levels:
        raise ValidationError(f"row {row_no}, column dim: unknown level {dim}")
    if test_week_levels is not None and week not in test_week_levels:
        raise ValidationError(f"row {row_no}, column test_week: unknown level {week}")
    traits = tuple(cell(t, float) for t in TRAITS)
    return PhenotypeRecord(animal, dim, week, traits)


def write_phenotypes(records, path):
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(PHENOTYPE_HEADER)
        for r in records:
            writer.writerow([r.animal_id, r.dim_class, r.test_week] + [repr(float(v)) for v in r.traits])


def standardize(records):
    """Center each trait and scale to unit sample SD (n - 1 denominator)."""
    if len(records) < 2:
        raise DegenerateInputError("standardization needs at least 2 records")
    Y = trait_matrix(records)
    means = Y.mean(axis=0)
    sds = Y.std(axis=0, ddof=1)
    for name, sd in zip(TRAITS, sds):
        if not sd > 0:
            raise DegenerateInputError(f"trait {name} has zero variance")
    Z = (Y - means) / sds
    out = [replace(r, traits=tuple(z)) for r, z in zip(records, Z)]
    return out, StandardizationInfo(tuple(means), tuple(sds))


@dataclass
class Priors:
    """Hyperparameters.  Defaults are effectively flat."""

    lambda_mean: float = 0.0  # prior mean of every structural coefficient
    lambda_var: float = 1e6
    beta_mean: float = 0.0
    beta_var: float = 1e6
    intercept_var: float = math.inf  # flat on the overall mean
    var_df: float = -2.0  # scaled inverse chi-square, scalar components
    var_scale: float = 0.0
    iw_df_extra: float = 2.0  # inverse Wishart df = dimension + this
    iw_scale: float = 0.01
    floor: float = 1e-8

    def __post_init__(self):
        if not (self.lambda_var > 0 and self.beta_var > 0 and self.intercept_var > 0):
            raise ValidationError("prior variances must be positive")


@dataclass
class McmcSettings:
    n_chains: int = 30
    chain_length: int = 2200
    burn_in: int = 1000
    thin: int = 2
    base_seed: int = 1000
    workers: int = 1

    def __post_init__(self):
        if self.chain_length < 1 or not 0 <= self.burn_in < self.chain_length:
            raise ValidationError("burn_in must satisfy 0 <= burn_in < chain_length")
        if self.thin < 1:
            raise ValidationError("thin must be >= 1")
        if self.n_chains < 1:
            raise ValidationError("n_chains must be >= 1")

    @property
    def n_saved(self):
        return (self.chain_length - self.burn_in) // self.thin


@dataclass
class ModelSpec:
    family: str = "rsem3"
    fixed_effects: tuple = None
    random_effects: tuple = None
    sink_indices: tuple = (1, 2, 3)
    trait: str = "dmi"  # response for the st family
    priors: Priors = field(default_factory=Priors)
    mcmc: McmcSettings = field(default_factory=McmcSettings)
    diagnostics: bool = True
    per_sample_partial_regression: bool = False

    def __post_init__(self):
        self.family = str(self.family).lower()
        if self.family not in FAMILIES:
            raise ValidationError(f"unknown model family {self.family!r}; choose from {', '.join(FAMILIES)}")
        fixed, random = _DEFAULT_EFFECTS[self.family]
        self.fixed_effects = tuple(fixed if self.fixed_effects is None else self.fixed_effects)
        self.random_effects = tuple(random if self.random_effects is None else self.random_effects)
        bad = set(self.fixed_effects) - {"intercept", "dim_class"}
        bad |= set(self.random_effects) - {"test_week", "animal"}
        if bad:
            raise ValidationError(f"unknown effect(s) {sorted(bad)}")
        self.sink_indices = tuple(int(i) for i in self.sink_indices)
        if 0 in self.sink_indices or not self.sink_indices:
            raise ValidationError("sink_indices must be non-empty and exclude the DMI index 0")
        if self.trait not in TRAITS:
            raise ValidationError(f"unknown trait {self.trait!r}")
        if self.diagnostics and self.family != "lr1" and self.mcmc.n_chains < 2:
            raise ValidationError("convergence diagnostics need n_chains >= 2")

    def to_dict(self):
        d = asdict(self)
        d["priors"] = {k: (None if isinstance(v, float) and math.isinf(v) else v) for k, v in d["priors"].items()}
        d["fixed_effects"] = list(self.fixed_effects)
        d["random_effects"] = list(self.random_effects)
        d["sink_indices"] = list(self.sink_indices)
        return d

    @classmethod
    def from_config(cls, config, **overrides):
        """Build from a nested config mapping (``model``, ``mcmc``, ``priors``)."""
        model = dict(config.get("model", {}))
        mcmc = dict(config.get("mcmc", {}))
        priors = dict(config.get("priors", {}))
        mcmc_keys = {"chains": "n_chains", "length": "chain_length", "burnin": "burn_in", "seed": "base_seed"}
        mcmc = {mcmc_keys.get(k, k): v for k, v in mcmc.items()}
        for k, v in overrides.items():
            if v is None:
                continue
            if k == "seed":
                mcmc["base_seed"] = v
            elif k in ("n_chains", "chain_length", "burn_in", "thin", "workers"):
                mcmc[k] = v
            else:
                model[k] = v
        if priors.get("intercept_var") is None:
            priors.pop("intercept_var", None)
        try:
            return cls(priors=Priors(**priors), mcmc=McmcSettings(**mcmc), **model)
        except TypeError as exc:
            raise ValidationError(f"bad config: {exc}") from None


def load_config(path):
    """Read a JSON or YAML config document into a dict."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() in (".yaml", ".yml"):
        import yaml

        data = yaml.safe_load(text) or {}
    else:
        data = json.loads(text)
    if not isinstance(data, dict):
        raise ValidationError(f"{path}: config must be a mapping")
    return data


@dataclass
class Design:
    """Incidence structure shared by all model fits on one record set.

    ``X`` is the fixed-effect model matrix.  With an intercept the first
    level of each categorical factor is absorbed into it.
    """

    n: int
    X: np.ndarray
    x_names: tuple
    prior_precision: np.ndarray
    prior_mean: np.ndarray
    incidence: dict
    levels: dict
    tw_index: np.ndarray = None
    animal: object = None  # AnimalEffects

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def n_tw(self):
        return 0 if self.tw_index is None else len(self.levels["test_week"])

    def with_covariates(self, covariates, names, priors):
        """Append covariate columns (one-step regression on energy sinks)."""
        covariates = np.asarray(covariates, dtype=float).reshape(self.n, -1)
        return replace(
            self,
            X=np.hstack([self.X, covariates]),
            x_names=self.x_names + tuple(names),
            prior_precision=np.concatenate([self.prior_precision, np.full(covariates.shape[1], 1.0 / priors.beta_var)]),
            prior_mean=np.concatenate([self.prior_mean, np.full(covariates.shape[1], priors.beta_mean)]),
        )


def _one_hot(codes):
    levels = sorted(set(codes))
    pos = {lv: i for i, lv in enumerate(levels)}
    idx = np.array([pos[c] for c in codes], dtype=int)
    M = np.zeros((len(codes), len(levels)))
    M[np.arange(len(codes)), idx] = 1.0
    return tuple(levels), idx, M


def build_design(records, spec, pedigree=None):
    """Incidence maps for intercept, DIM class, test week and animal."""
    n = len(records)
    if n == 0:
        raise ValidationError("no records")
    priors = spec.priors
    incidence, levels = {}, {}
    cols, names, prec, mean = [], [], [], []
    intercept = "intercept" in spec.fixed_effects
    if intercept:
        cols.append(np.ones((n, 1)))
        names.append("intercept")
        prec.append(0.0 if math.isinf(priors.intercept_var) else 1.0 / priors.intercept_var)
        mean.append(0.0)
    if "dim_class" in spec.fixed_effects:
        lv, _, M = _one_hot([r.dim_class for r in records])
        if len(lv) < 2 and intercept:
            raise ValidationError("dim_class has a single level and is not estimable alongside the intercept")
        incidence["dim_class"], levels["dim_class"] = M, lv
        keep = slice(1, None) if intercept else slice(None)
        cols.append(M[:, keep])
        names += [f"dim_{v}" for v in lv[keep]]
        prec += [1.0 / priors.beta_var] * len(lv[keep])
        mean += [priors.beta_mean] * len(lv[keep])
    X = np.hstack(cols) if cols else np.zeros((n, 0))

    tw_index = None
    if "test_week" in spec.random_effects:
        lv, tw_index, M = _one_hot([r.test_week for r in records])
        incidence["test_week"], levels["test_week"] = M, lv

    animal = None
    if "animal" in spec.random_effects:
        if pedigree is None:
            raise ValidationError("animal effects requested but no pedigree supplied")
        from .gibbs import AnimalEffects

        animal = AnimalEffects.from_pedigree(pedigree, [r.animal_id for r in records])
        levels["animal"] = tuple(animal.ids)

    return Design(
        n=n,
        X=X,
        x_names=tuple(names),
        prior_precision=np.array(prec, dtype=float),
        prior_mean=np.array(mean, dtype=float),
        incidence=incidence,
        levels=levels,
        tw_index=tw_index,
        animal=animal,
    )
