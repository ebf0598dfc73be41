import json
import math

import numpy as np
import pytest

from rfisem.data import (
    DIM_LEVELS,
    McmcSettings,
    ModelSpec,
    PhenotypeRecord,
    Priors,
    build_design,
    ingest_phenotypes,
    load_config,
    standardize,
    trait_matrix,
    write_phenotypes,
)
from rfisem.errors import DegenerateInputError, ValidationError
from rfisem.simulate import PAPER_MEANS, PAPER_SDS

HEADER = "animal,dim,test_week,dmi,mbw,milkne,dbw\n"


def test_ingest_three_rows(tmp_path):
    p = tmp_path / "ph.csv"
    p.write_text(HEADER + "1,71,1,28.1,110.2,20.0,0.4\n2,72,1,30.0,115,22.1,0.5\n3,73,2,27,112,19.5,0.3\n")
    recs = ingest_phenotypes(p)
    assert len(recs) == 3
    assert recs[1] == PhenotypeRecord(2, 72, 1, (30.0, 115.0, 22.1, 0.5))


@pytest.mark.parametrize(
    "body, match",
    [
        ("1,71,1,28,110,20,0.4\n2,71,1,,110,20,0.4\n", "row 2, column dmi"),
        ("1,71,1,28,abc,20,0.4\n", "row 1, column mbw"),
        ("1,71,1,28,110,20,nan\n", "row 1, column dbw"),
        ("1,70,1,28,110,20,0.4\n", "row 1, column dim"),
    ],
)
def test_ingest_errors(tmp_path, body, match):
    p = tmp_path / "ph.csv"
    p.write_text(HEADER + body)
    with pytest.raises(ValidationError, match=match):
        ingest_phenotypes(p, dim_levels=DIM_LEVELS)


def test_ingest_missing_column(tmp_path):
    p = tmp_path / "ph.csv"
    p.write_text("animal,dim,dmi,mbw,milkne,dbw\n1,71,1,2,3,4\n")
    with pytest.raises(ValidationError, match="test_week"):
        ingest_phenotypes(p)


def test_round_trip_replica(tmp_path, replica):
    write_phenotypes(replica.records, tmp_path / "ph.csv")
    back = ingest_phenotypes(tmp_path / "ph.csv", dim_levels=DIM_LEVELS)
    assert back == replica.records
    assert len(back) == 645


def _records(Y):
    return [PhenotypeRecord(i + 1, DIM_LEVELS[i % 7], i % 5 + 1, tuple(y)) for i, y in enumerate(Y)]


def test_standardize_moments_and_correlations():
    rng = np.random.default_rng(0)
    Y = rng.standard_normal((200, 4)) @ rng.standard_normal((4, 4)) + [28.9, 113.8, 21.1, 0.47]
    std, info = standardize(_records(Y))
    Z = trait_matrix(std)
    assert np.abs(Z.mean(axis=0)).max() < 1e-12
    assert np.abs(Z.std(axis=0, ddof=1) - 1).max() < 1e-12
    assert np.abs(np.corrcoef(Z, rowvar=False) - np.corrcoef(Y, rowvar=False)).max() < 1e-12
    np.testing.assert_allclose(info.to_raw(Z), Y, rtol=1e-12)
    # location invariance and idempotence
    shifted, _ = standardize(_records(Y + 100.0))
    np.testing.assert_allclose(trait_matrix(shifted), Z, atol=1e-12)
    again, _ = standardize(std)
    assert np.abs(trait_matrix(again) - Z).max() < 1e-12


def test_standardize_errors():
    Y = np.ones((5, 4))
    Y[:, 1:] = np.arange(15).reshape(5, 3)
    with pytest.raises(DegenerateInputError, match="dmi"):
        standardize(_records(Y))
    with pytest.raises(DegenerateInputError):
        standardize(_records(np.zeros((1, 4))))


def test_replica_standardization_info(replica):
    _, info = standardize(replica.records)
    np.testing.assert_allclose(info.means, PAPER_MEANS, rtol=1e-10)
    np.testing.assert_allclose(info.sds, PAPER_SDS, rtol=1e-10)


def test_design_replica(replica):
    d = build_design(replica.records, ModelSpec(family="rsem3"), replica.pedigree)
    assert d.incidence["dim_class"].shape == (645, 7)
    assert d.levels["dim_class"] == DIM_LEVELS
    assert d.incidence["test_week"].shape == (645, 143)
    for M in d.incidence.values():
        np.testing.assert_array_equal(M.sum(axis=1), 1.0)
    # intercept plus six treatment contrasts
    assert d.x_names[0] == "intercept" and d.p == 7
    assert d.animal.q == 1247 and d.animal.r == 645


def test_design_lr1_is_empty(replica):
    d = build_design(replica.records, ModelSpec(family="lr1"))
    assert d.p == 0 and d.tw_index is None and d.animal is None


def test_design_single_level_dim():
    recs = [PhenotypeRecord(i + 1, 71, 1, (0.0, 0.0, 0.0, 0.0)) for i in range(5)]
    with pytest.raises(ValidationError, match="single level"):
        build_design(recs, ModelSpec(family="rsem2", random_effects=()))


def test_design_missing_pedigree_animal(replica):
    from rfisem.pedigree import Pedigree

    ped = Pedigree(((1, 0, 0),))
    with pytest.raises(ValidationError, match="missing from pedigree"):
        build_design(replica.records, ModelSpec(family="rsem2"), ped)


def test_model_spec_validation():
    with pytest.raises(ValidationError):
        ModelSpec(family="xyz")
    with pytest.raises(ValidationError):
        McmcSettings(chain_length=100, burn_in=100)
    with pytest.raises(ValidationError):
        McmcSettings(thin=0)
    with pytest.raises(ValidationError):
        ModelSpec(mcmc=McmcSettings(n_chains=1))
    ModelSpec(mcmc=McmcSettings(n_chains=1), diagnostics=False)
    with pytest.raises(ValidationError):
        ModelSpec(sink_indices=(0, 1))
    with pytest.raises(ValidationError):
        Priors(lambda_var=0)
    assert McmcSettings(chain_length=2200, burn_in=2000, thin=2).n_saved == 100


def test_config_files(tmp_path):
    cfg = {"model": {"family": "RSEM1"}, "mcmc": {"chains": 4, "length": 300, "burnin": 100, "thin": 2, "seed": 7}, "priors": {"lambda_var": 10.0}}
    (tmp_path / "c.json").write_text(json.dumps(cfg))
    (tmp_path / "c.yaml").write_text("model:\n  family: RSEM1\nmcmc:\n  chains: 4\n  length: 300\n  burnin: 100\n  thin: 2\n  seed: 7\npriors:\n  lambda_var: 10.0\n")
    for name in ("c.json", "c.yaml"):
        spec = ModelSpec.from_config(load_config(tmp_path / name))
        assert spec.family == "rsem1"
        assert (spec.mcmc.n_chains, spec.mcmc.chain_length, spec.mcmc.burn_in, spec.mcmc.base_seed) == (4, 300, 100, 7)
        assert spec.priors.lambda_var == 10.0
        assert math.isinf(spec.priors.intercept_var)
    spec = ModelSpec.from_config(load_config(tmp_path / "c.json"), family="mt", seed=11, n_chains=None)
    assert spec.family == "mt" and spec.mcmc.base_seed == 11 and spec.mcmc.n_chains == 4
    with pytest.raises(ValidationError):
        ModelSpec.from_config({"mcmc": {"bogus": 1}})
    json.dumps(spec.to_dict())
