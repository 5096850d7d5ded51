"""Command-line driver.

Subcommands: simulate, tomo, stokes, skyrme, chsh, ghz, sweep, ingest.
Configuration comes from an optional JSON file (--config) with individual
flags taking precedence.  All outputs are UTF-8 CSV/JSON with full-precision
floats; runs are deterministic under a fixed seed.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import topology
from .hilbert import DensityMatrix
from .scenarios import (RunConfig, SweepSpec, run_scenario, sweep,
                        tool_version, write_sweep_csv)
from .tomography import (hybrid36_for_modes, ingest_counts, projector_set,
                         reconstruct_from_counts)


def _config_from_args(args, scenario: str) -> RunConfig:
    base: dict = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            base = json.load(fh)
    base["scenario"] = scenario
    overrides = {
        "voltage": getattr(args, "voltage", None),
        "seed": getattr(args, "seed", None),
        "grid_n": getattr(args, "grid", None),
        "grid_half_extent": getattr(args, "half_extent", None),
        "herald_pol": getattr(args, "herald", None),
        "pump_pol": getattr(args, "pump", None),
        "with_tomography": True if getattr(args, "tomography", False) else None,
        "eps_rel": getattr(args, "eps_rel", None),
        "visibility": getattr(args, "visibility", None),
        "integration_s": getattr(args, "integration", None),
        "rate_max": getattr(args, "rate", None),
        "ghz_force": True if getattr(args, "force", False) else None,
    }
    for k, v in overrides.items():
        if v is not None:
            base[k] = v
    return RunConfig.from_dict(base)


def _print_metrics(report: dict) -> None:
    for k, v in sorted(report.get("metrics", {}).items()):
        print(f"{k} = {v}")


def cmd_simulate(args) -> int:
    cfg = _config_from_args(args, args.scenario)
    report = run_scenario(cfg, out_dir=args.out)
    _print_metrics(report)
    if args.out:
        print(f"wrote {Path(args.out) / 'report.json'}")
    return 0


def cmd_chsh(args) -> int:
    cfg = _config_from_args(args, "chsh")
    if args.counts:
        cfg = dataclasses.replace(cfg, with_tomography=True)
    report = run_scenario(cfg, out_dir=args.out)
    _print_metrics(report)
    return 0


def cmd_ghz(args) -> int:
    cfg = _config_from_args(args, "ghz")
    report = run_scenario(cfg, out_dir=args.out)
    _print_metrics(report)
    return 0


def _parse_modes(text: str) -> tuple[int, int]:
    parts = [int(p) for p in text.split(",")]
    if len(parts) != 2:
        raise ValueError("expected two comma-separated OAM charges")
    return parts[0], parts[1]


def cmd_tomo(args) -> int:
    if args.set == "hybrid36" and args.modes:
        pset = hybrid36_for_modes(*_parse_modes(args.modes))
    elif "*" in args.set:
        a, b = args.set.split("*")
        from .tomography import product_set
        pset = product_set(projector_set(a), projector_set(b))
    else:
        pset = projector_set(args.set)
    records = ingest_counts(args.counts, pset)
    result = reconstruct_from_counts(records, pset, per_group=args.per_group,
                                     variance_weighted=args.variance_weighted,
                                     refine_iters=0 if args.no_refine else 500)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    (out / "density_matrix.json").write_text(result.rho.to_json() + "\n")
    report = {"tool_version": tool_version(), "projector_set": pset.kind,
              **result.report()}
    with open(out / "tomo_report.json", "w") as fh:
        json.dump(report, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"chi2 = {result.chi2:.6g}, iterations = {result.iterations}")
    print(f"eigenvalues = {[f'{x:.6g}' for x in result.eigenvalues]}")
    print(f"wrote {out / 'density_matrix.json'}")
    return 0


def cmd_stokes(args) -> int:
    rho = DensityMatrix.from_json(Path(args.density).read_text())
    charges = sorted({b[1] for b in rho.basis}, reverse=True)
    modes = topology.ModeMap(tuple(charges), waist=args.waist)
    grid = topology.GridSpec(args.grid, args.grid, args.half_extent)
    field = topology.reduced_stokes_field(rho, modes, grid)
    out = Path(args.out or "stokes.json")
    if out.suffix == ".csv":
        field.write_csv(out)
    else:
        field.write_json(out)
    print(f"wrote {out}")
    return 0


def cmd_skyrme(args) -> int:
    field = topology.StokesField.read_json(args.stokes)
    ns = topology.normalize_stokes(field, eps_rel=args.eps_rel)
    quad = topology.skyrme_number_quadrature(ns)
    solid = topology.skyrme_number_solid_angle(ns)
    cov = topology.poincare_coverage(ns, args.bins)
    report = {
        "tool_version": tool_version(),
        "quadrature": quad.to_dict(),
        "solid_angle": solid.to_dict(),
        "coverage": cov,
        "masked_fraction": ns.masked_fraction,
    }
    text = json.dumps(report, indent=1, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def cmd_sweep(args) -> int:
    cfg = _config_from_args(args, "sweep")
    spec = SweepSpec(args.vmin, args.vmax, args.vstep,
                     tuple(args.scenarios.split(",")))
    rows = sweep(spec, dataclasses.replace(cfg, scenario="entangled_nonlocal",
                                           voltage=None))
    out = args.out or "sweep.csv"
    write_sweep_csv(rows, out)
    failures = sum(1 for r in rows if r["error"])
    print(f"wrote {out}: {len(rows)} rows, {failures} failures")
    return 0


def cmd_ingest(args) -> int:
    pset = None
    if args.set:
        if args.set == "hybrid36" and args.modes:
            pset = hybrid36_for_modes(*_parse_modes(args.modes))
        else:
            pset = projector_set(args.set)
    records = ingest_counts(args.counts, pset)
    total = sum(r.counts for r in records)
    print(f"{len(records)} records, {total} total counts, "
          f"settings valid: {pset.kind if pset else 'not checked'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="qskyrm",
        description="Spin-orbit photon-pair simulation and topology analysis")
    ap.add_argument("--version", action="version", version=tool_version())
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, voltage=True):
        p.add_argument("--config", help="JSON config file; flags override it")
        p.add_argument("--seed", type=int, help="master RNG seed")
        p.add_argument("--out", help="output directory")
        if voltage:
            p.add_argument("--voltage", type=float, help="plate drive voltage")

    p = sub.add_parser("simulate", help="run a scenario end to end")
    p.add_argument("--scenario", default="entangled_nonlocal",
                   choices=["entangled_nonlocal", "heralded_local_A",
                            "heralded_local_B", "trivial"])
    common(p)
    p.add_argument("--grid", type=int, help="cells per axis (default 256)")
    p.add_argument("--half-extent", dest="half_extent", type=float,
                   help="grid half extent in waist units (default 5)")
    p.add_argument("--herald", choices=["R", "L"], help="herald polarization")
    p.add_argument("--pump", choices=["R", "L"], help="pump circular polarization")
    p.add_argument("--eps-rel", dest="eps_rel", type=float,
                   help="Stokes masking threshold")
    p.add_argument("--tomography", action="store_true",
                   help="simulate counts and reconstruct before the analysis")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("tomo", help="reconstruct a density matrix from counts")
    p.add_argument("counts", help="counts CSV file")
    p.add_argument("--set", default="hybrid36",
                   help="projector set kind (or A*B product)")
    p.add_argument("--modes", help="OAM pair for hybrid36, e.g. '-2,-4'")
    p.add_argument("--per-group", action="store_true",
                   help="normalize per basis group instead of grand total")
    p.add_argument("--variance-weighted", action="store_true",
                   help="weight residuals by the Poisson variance estimate")
    p.add_argument("--no-refine", action="store_true",
                   help="skip iterative refinement")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_tomo)

    p = sub.add_parser("stokes", help="Stokes field from a density matrix")
    p.add_argument("density", help="density matrix JSON")
    p.add_argument("--grid", type=int, default=256)
    p.add_argument("--half-extent", dest="half_extent", type=float, default=5.0)
    p.add_argument("--waist", type=float, default=1.0)
    p.add_argument("--out", help="output file (.json or .csv)")
    p.set_defaults(func=cmd_stokes)

    p = sub.add_parser("skyrme", help="topology metrics of a Stokes field")
    p.add_argument("stokes", help="Stokes field JSON")
    p.add_argument("--eps-rel", dest="eps_rel", type=float, default=1e-6)
    p.add_argument("--bins", type=int, default=512)
    p.add_argument("--out", help="report JSON path")
    p.set_defaults(func=cmd_skyrme)

    p = sub.add_parser("chsh", help="CHSH parameter of the OAM Bell pair")
    common(p, voltage=False)
    p.add_argument("--visibility", type=float, help="Werner visibility")
    p.add_argument("--counts", action="store_true",
                   help="also estimate S from simulated Poisson counts")
    p.add_argument("--rate", type=float, help="max coincidence rate (counts/s)")
    p.add_argument("--integration", type=float, help="seconds per setting")
    p.set_defaults(func=cmd_chsh)

    p = sub.add_parser("ghz", help="tripartite GHZ preparation metrics")
    common(p)
    p.add_argument("--force", action="store_true",
                   help="proceed at an off-nominal operating point")
    p.set_defaults(func=cmd_ghz)

    p = sub.add_parser("sweep", help="voltage sweep CSV")
    common(p, voltage=False)
    p.add_argument("--vmin", type=float, required=True)
    p.add_argument("--vmax", type=float, required=True)
    p.add_argument("--vstep", type=float, default=0.1)
    p.add_argument("--scenarios", default="entangled_nonlocal",
                   help="comma-separated scenario list")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("ingest", help="validate a counts CSV")
    p.add_argument("counts")
    p.add_argument("--set", help="projector set to validate settings against")
    p.add_argument("--modes", help="OAM pair for hybrid36 validation")
    p.set_defaults(func=cmd_ingest)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
