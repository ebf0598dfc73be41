"""Run-directory files: samples, summaries, diagnostics, genetic values, manifest."""

import csv
import glob
import hashlib
import json
import math
import re
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from .diagnostics import shrink_trajectory, spearman
from .errors import ValidationError

_CHAIN_RE = re.compile(r"samples_chain(\d+)\.csv$")


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _clean(obj):
    """JSON-safe copy: numpy scalars to floats, non-finite to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_json(obj, path):
    Path(path).write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")


def _fmt(v):
    return repr(float(v))


def write_chain_samples(chain, path):
    """Long-format ``iter,param,value``: every iteration for traced
    parameters, saved iterations for derived quantities."""
    with open(path, "w", newline="") as handle:
        w = csv.writer(handle, lineterminator="\n")
        w.writerow(("iter", "param", "value"))
        derived_at = {int(it): row for it, row in zip(chain.saved_iters, chain.derived)}
        for t in range(chain.trace.shape[0]):
            it = t + 1
            for name, v in zip(chain.trace_names, chain.trace[t]):
                w.writerow((it, name, _fmt(v)))
            row = derived_at.get(it)
            if row is not None:
                for name, v in zip(chain.derived_names, row):
                    w.writerow((it, name, _fmt(v)))


def read_chain_samples(path):
    """Return ``{param: (iters, values)}`` from one chain file."""
    data = {}
    with open(path, newline="") as handle:
        for row in csv.DictReader(handle):
            it, vals = data.setdefault(row["param"], ([], []))
            it.append(int(row["iter"]))
            vals.append(float(row["value"]))
    return {k: (np.array(i), np.array(v)) for k, (i, v) in data.items()}


def chain_files(run_dir):
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise FileNotFoundError(f"run directory {run_dir} does not exist")
    files = [Path(p) for p in glob.glob(str(run_dir / "samples_chain*.csv"))]
    return sorted(files, key=lambda p: int(_CHAIN_RE.search(p.name).group(1)))


def traced_parameters(samples, chain_length=None):
    """Parameters recorded at every iteration (the ones diagnostics use)."""
    out = []
    for name, (iters, _) in samples.items():
        if iters.size and iters[0] == 1 and iters.size == iters[-1]:
            out.append(name)
    return out


def diagnostics_rows(traces, stride=50):
    """``traces``: ``{param: chains x iterations}`` -> rows ``(param, iteration, sf)``."""
    rows = []
    for name, x in traces.items():
        for it, sf in shrink_trajectory(x, stride):
            rows.append((name, it, sf))
    return rows


def write_diagnostics(rows, path):
    with open(path, "w", newline="") as handle:
        w = csv.writer(handle, lineterminator="\n")
        w.writerow(("param", "iteration", "sf"))
        for name, it, sf in rows:
            w.writerow((name, it, _fmt(sf)))


def run_traces(run_dir):
    """Read every chain of a run into ``{param: chains x iterations}``."""
    files = chain_files(run_dir)
    if len(files) < 2:
        raise ValidationError(f"{run_dir}: shrink factors need at least 2 chains, found {len(files)}")
    per_chain = [read_chain_samples(f) for f in files]
    names = traced_parameters(per_chain[0])
    return {n: np.stack([c[n][1] for c in per_chain]) for n in names}


def write_genetic_values(animal_ids, gv, labels, path, phenotyped=()):
    ph = set(phenotyped)
    with open(path, "w", newline="") as handle:
        w = csv.writer(handle, lineterminator="\n")
        w.writerow(("animal", "trait", "gv", "phenotyped"))
        for j, label in enumerate(labels):
            for a, v in zip(animal_ids, gv[:, j]):
                w.writerow((a, label, _fmt(v), int(a in ph)))


def read_genetic_values(path, trait, phenotyped_only=False):
    path = Path(path)
    if path.is_dir():
        path = path / "genetic_values.csv"
    out = {}
    with path.open(newline="") as handle:
        for row in csv.DictReader(handle):
            if row["trait"] != trait:
                continue
            if phenotyped_only and row.get("phenotyped") == "0":
                continue
            out[int(row["animal"])] = float(row["gv"])
    if not out:
        raise ValidationError(f"{path}: no genetic values for trait {trait!r}")
    return out


def compare_genetic_values(gv_a, gv_b):
    """Spearman correlation and per-animal rank table over shared animals."""
    shared = sorted(set(gv_a) & set(gv_b))
    if not shared:
        raise ValidationError("the two runs share no animals")
    if len(shared) < 2:
        raise ValidationError("need at least 2 shared animals")
    a = np.array([gv_a[i] for i in shared])
    b = np.array([gv_b[i] for i in shared])
    ra, rb = rankdata(-a), rankdata(-b)
    rows = list(zip(shared, a, b, ra, rb))
    return spearman(a, b), rows


def write_comparison(rows, path):
    with open(path, "w", newline="") as handle:
        w = csv.writer(handle, lineterminator="\n")
        w.writerow(("animal", "gv_model_a", "gv_model_b", "rank_a", "rank_b"))
        for animal, a, b, ra, rb in rows:
            w.writerow((animal, _fmt(a), _fmt(b), _fmt(ra), _fmt(rb)))


def write_coefficients(fit, path):
    with open(path, "w", newline="") as handle:
        w = csv.writer(handle, lineterminator="\n")
        w.writerow(("term", "estimate", "se"))
        for t, b, s in zip(fit.terms, fit.coefficients, fit.se):
            w.writerow((t, _fmt(b), _fmt(s)))


def write_rfi_phenotypes(fit, path):
    with open(path, "w", newline="") as handle:
        w = csv.writer(handle, lineterminator="\n")
        w.writerow(("animal", "rfi_phenotype"))
        for a, r in zip(fit.animal_ids, fit.residuals):
            w.writerow((a, _fmt(r)))
