"""Command-line entry point: simulate, fit, diagnose, compare.

Exit codes: 0 success, 2 validation, 3 numerical, 4 I/O.
"""

import argparse
import logging
import sys
import time
from pathlib import Path

from . import __version__
from .data import FAMILIES, TRAITS, ModelSpec, ingest_phenotypes, load_config, write_phenotypes
from .errors import NumericalError, ValidationError
from .output import (
    compare_genetic_values,
    diagnostics_rows,
    read_genetic_values,
    run_traces,
    sha256,
    write_chain_samples,
    write_coefficients,
    write_comparison,
    write_diagnostics,
    write_genetic_values,
    write_json,
    write_rfi_phenotypes,
)
from .pedigree import Pedigree
from .simulate import paper_replica_truth, simulate_pedigree, simulate_phenotypes

log = logging.getLogger("rfisem")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4


def _config(args):
    return load_config(args.config) if getattr(args, "config", None) else {}


def _manifest(out, command, spec, inputs, seed, timings):
    """Write manifest.json listing every other file in ``out`` with its digest."""
    outputs = {p.name: sha256(p) for p in sorted(out.iterdir()) if p.is_file() and p.name != "manifest.json"}
    write_json(
        {
            "command": command,
            "version": __version__,
            "spec": spec,
            "inputs": inputs,
            "seed": seed,
            "outputs": outputs,
            "timings_seconds": timings,
        },
        out / "manifest.json",
    )


# ----------------------------------------------------------------------


def cmd_simulate(args):
    cfg = dict(_config(args).get("simulate", {}))
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 2021))
    n_sires = int(cfg.get("n_sires", 125))
    n_dams = int(cfg.get("n_dams", 477))
    n_off = int(args.n_offspring if args.n_offspring is not None else cfg.get("n_offspring", 645))
    test_week = bool(cfg.get("test_week", True))
    match = bool(cfg.get("match_moments", True))
    t0 = time.perf_counter()
    ped = simulate_pedigree(n_sires, n_dams, n_off, seed)
    truth = paper_replica_truth(test_week, float(cfg.get("tw_share", 0.05)))
    sim = simulate_phenotypes(ped, truth, seed + 1, match=match)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ped.to_csv(out / "pedigree.csv")
    write_phenotypes(sim.records, out / "phenotypes.csv")
    truth.save(out / "truth.json")
    settings = {"n_sires": n_sires, "n_dams": n_dams, "n_offspring": n_off, "test_week": test_week, "match_moments": match}
    _manifest(out, "simulate", settings, {}, seed, {"simulate": time.perf_counter() - t0})
    print(f"wrote {len(sim.records)} phenotype records and {len(ped)} pedigree entries to {out}")
    return EXIT_OK


def _data_paths(args):
    if args.data:
        d = Path(args.data)
        return Path(args.phenotypes or d / "phenotypes.csv"), Path(args.pedigree or d / "pedigree.csv")
    if not args.phenotypes:
        raise ValidationError("give --data DIR or --phenotypes FILE")
    return Path(args.phenotypes), Path(args.pedigree) if args.pedigree else None


def cmd_fit(args):
    from .workflow import fit_model

    cfg = _config(args)
    spec = ModelSpec.from_config(
        cfg,
        family=args.family,
        trait=args.trait,
        seed=args.seed,
        n_chains=args.chains,
        chain_length=args.length,
        burn_in=args.burnin,
        thin=args.thin,
        workers=args.workers,
    )
    pheno_path, ped_path = _data_paths(args)
    inputs = {str(pheno_path): sha256(pheno_path)}
    if ped_path is not None and ped_path.exists():
        inputs[str(ped_path)] = sha256(ped_path)
    timings = {}
    t0 = time.perf_counter()
    records = ingest_phenotypes(pheno_path)
    pedigree = Pedigree.from_csv(ped_path) if ped_path is not None and ped_path.exists() else None
    log.info("read %d records", len(records))
    timings["ingest"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    args.context = spec.family
    result = fit_model(spec, records, pedigree)
    timings["fit"] = time.perf_counter() - t0
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = dict(result.summary)
    if spec.family == "lr1":
        write_coefficients(result.stage1, out / "coefficients.csv")
        write_rfi_phenotypes(result.stage1, out / "rfi_phenotypes.csv")
    else:
        par = result.parallel
        for c, chain in enumerate(par.chains):
            write_chain_samples(chain, out / f"samples_chain{c}.csv")
        if spec.diagnostics and len(par.chains) >= 2:
            names = [n for n in par.chains[0].trace_names]
            traces = {n: par.traces(n) for n in names}
            write_diagnostics(diagnostics_rows(traces), out / "diagnostics.csv")
        if result.gv is not None:
            phenotyped = [r.animal_id for r in records]
            write_genetic_values(result.animal_ids, result.gv, result.gv_labels, out / "genetic_values.csv", phenotyped)
    write_json(summary, out / "summary.json")
    _manifest(out, "fit", spec.to_dict(), inputs, spec.mcmc.base_seed, timings)
    _print_summary(summary)
    return EXIT_OK


def _print_summary(summary):
    if "coefficients" in summary:
        for t, c in summary["coefficients"].items():
            print(f"{t:10s} {c['estimate']:.3f} ({c['se']:.3f})")
        return
    for section in ("heritability", "genetic_correlation"):
        for name, v in sorted(summary.get(section, {}).items()):
            if isinstance(v, dict) and "mean" in v:
                print(f"{section}.{name:16s} {v['mean']:.3f} ({v['sd']:.3f})")
    for name, v in summary["parameters"].items():
        if name.startswith(("lambda.", "b.")):
            print(f"{name:22s} {v['mean']:.3f} ({v['sd']:.3f})")


def cmd_diagnose(args):
    run = Path(args.run)
    traces = run_traces(run)
    rows = diagnostics_rows(traces, args.stride)
    out = Path(args.out) if args.out else run / "diagnostics.csv"
    write_diagnostics(rows, out)
    last = {}
    for name, it, sf in rows:
        last[name] = (it, sf)
    for name, (it, sf) in last.items():
        print(f"{name:28s} iteration {it:5d}  SF {sf:.4f}")
    return EXIT_OK


def cmd_compare(args):
    a = read_genetic_values(args.run_a, args.trait, args.phenotyped_only)
    b = read_genetic_values(args.run_b, args.trait_b or args.trait, args.phenotyped_only)
    rho, rows = compare_genetic_values(a, b)
    if args.out:
        write_comparison(rows, args.out)
    print(f"spearman {rho:.6f} over {len(rows)} animals")
    return EXIT_OK


# ----------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="rfisem", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="write a synthetic pedigree, phenotypes and truth")
    s.add_argument("--config")
    s.add_argument("--seed", type=int)
    s.add_argument("--n-offspring", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit", help="fit one model family")
    f.add_argument("--config")
    f.add_argument("--family", choices=FAMILIES, type=str.lower)
    f.add_argument("--trait", choices=TRAITS)
    f.add_argument("--data", help="directory with phenotypes.csv and pedigree.csv")
    f.add_argument("--phenotypes")
    f.add_argument("--pedigree")
    f.add_argument("--seed", type=int)
    f.add_argument("--chains", type=int)
    f.add_argument("--length", type=int)
    f.add_argument("--burnin", type=int)
    f.add_argument("--thin", type=int)
    f.add_argument("--workers", type=int)
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_fit)

    d = sub.add_parser("diagnose", help="shrink-factor trajectories of a fitted run")
    d.add_argument("run")
    d.add_argument("--stride", type=int, default=50)
    d.add_argument("--out")
    d.set_defaults(func=cmd_diagnose)

    c = sub.add_parser("compare", help="Spearman correlation of two runs' genetic values")
    c.add_argument("run_a")
    c.add_argument("run_b")
    c.add_argument("--trait", default="rfi")
    c.add_argument("--trait-b")
    c.add_argument("--phenotyped-only", action="store_true")
    c.add_argument("--out")
    c.set_defaults(func=cmd_compare)
    return p


def _context(args):
    ctx = getattr(args, "context", None)
    return f" [{ctx}]" if ctx else ""


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error{_context(args)}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical error{_context(args)}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
