"""Command-line front end.

Thin orchestration over the library: every subcommand parses a run
configuration, derives per-task seeds from the base seed, delegates the
numerics, and persists artifacts with embedded configuration and format
version.  Identical configurations (same seed) reproduce artifacts
byte-for-byte except the `created` timestamp, regardless of worker count.

Subcommands: sweep, convolve, estimate, cluster-dist, meanfield, animals,
audit-ineq, homog.  The DEFECTPERC_OUT environment variable sets the
default output directory.
"""

from __future__ import annotations

import argparse
import os
import struct
import sys

import numpy as np

from . import animals as animals_mod
from . import estimator, meanfield, observables, runmeta, sampler
from ._rng import _py_mix64
from .lattice import LatticeSpec

_MASK = (1 << 64) - 1


def derived_seed(base: int, *parts) -> int:
    """Stable per-task seed from the base seed and task labels.

    Floats contribute their IEEE bit pattern, ints their value; the chain
    of finalizer mixes keeps distinct (p, L) tasks on distinct streams
    while staying reproducible across runs and platforms.
    """
    x = _py_mix64(base & _MASK)
    for part in parts:
        if isinstance(part, float):
            bits = struct.unpack("<Q", struct.pack("<d", part))[0]
        else:
            bits = int(part) & _MASK
        x = _py_mix64((x ^ bits) & _MASK)
    return x


def parse_grid(text: str) -> np.ndarray:
    """Density grid from 'lo:hi:step' or a comma-separated list."""
    if ":" in text:
        fields = text.split(":")
        if len(fields) != 3:
            raise ValueError(f"grid {text!r} is not lo:hi:step")
        lo, hi, step = (float(x) for x in fields)
        if step <= 0 or hi < lo:
            raise ValueError(f"grid {text!r} needs hi >= lo and step > 0")
        npts = int(round((hi - lo) / step)) + 1
        grid = lo + step * np.arange(npts)
    else:
        grid = np.array([float(x) for x in text.split(",")], dtype=np.float64)
    if grid.size < 1 or np.any(np.diff(grid) <= 0):
        raise ValueError(f"grid {text!r} must be strictly increasing")
    if grid[0] < 0.0 or grid[-1] > 1.0 + 1e-12:
        raise ValueError(f"grid {text!r} leaves [0, 1]")
    return np.minimum(grid, 1.0)


def _workers(args) -> int:
    if args.workers is not None:
        if args.workers < 1:
            raise ValueError("workers must be >= 1")
        return args.workers
    return os.cpu_count() or 1


def _out_dir(args) -> str:
    return args.out if args.out else runmeta.default_out_dir()


# -- subcommands --------------------------------------------------------------


def cmd_sweep(args) -> int:
    out_dir = _out_dir(args)
    workers = _workers(args)
    for p in args.p:
        for L in args.L:
            spec = LatticeSpec(d=args.d, s=args.s, L=L, boundary="free")
            seed = derived_seed(args.seed, p, L)
            curve = sampler.run_sweep(
                spec, p, args.realizations, seed,
                workers=workers, all_faces=args.all_faces,
            )
            name = f"sweep_d{args.d}s{args.s}_p{p:g}_L{L}.json"
            path = os.path.join(out_dir, name)
            curve.save(path)
            print(f"p={p:g} L={L} seed={seed} -> {path}")
    return 0


def cmd_homog(args) -> int:
    out_dir = _out_dir(args)
    workers = _workers(args)
    for L in args.L:
        spec = LatticeSpec(d=args.d, s=args.d, L=L, boundary="free")
        seed = derived_seed(args.seed, L)
        curve = sampler.run_homogeneous(
            spec, args.realizations, seed, workers=workers,
        )
        path = os.path.join(out_dir, f"homog_d{args.d}_L{L}.json")
        curve.save(path)
        print(f"L={L} seed={seed} -> {path}")
    return 0


def cmd_convolve(args) -> int:
    grid = parse_grid(args.sigma_grid)
    out_dir = args.out
    single_file = (
        len(args.inputs) == 1
        and out_dir is not None
        and os.path.splitext(out_dir)[1] in (".json", ".csv")
    )
    for path in args.inputs:
        micro = sampler.MicrocanonicalCurve.load(path)
        curve = sampler.convolve_grid(micro, grid)
        if single_file:
            dest = out_dir
        else:
            stem = os.path.splitext(os.path.basename(path))[0]
            ext = ".csv" if args.format == "csv" else ".json"
            dest = os.path.join(out_dir or runmeta.default_out_dir(),
                                stem + "_canonical" + ext)
        if dest.endswith(".csv"):
            _write_canonical_csv(dest, curve)
        else:
            curve.save(dest)
        print(f"{path} -> {dest}")
    return 0


def _write_canonical_csv(path: str, curve: sampler.CanonicalCurve) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(f"# {runmeta.FORMAT_CANONICAL}\n")
        fh.write(f"# config_hash={curve.meta.get('config_hash')}\n")
        fh.write("sigma,value,stderr\n")
        for sg, v, e in zip(curve.sigma_grid, curve.values, curve.stderr):
            fh.write(f"{sg:.10g},{v:.10g},{e:.6g}\n")


def cmd_estimate(args) -> int:
    curves = [sampler.CanonicalCurve.load(path) for path in args.inputs]
    family = estimator.CrossingFamily.from_curves(curves, force=args.force)
    est = estimator.estimate_sigma_star(family)
    print(
        f"sigma_star = {est.sigma_star:.6f} "
        f"+/- {est.stat_err:.6f} (stat) +/- {est.sys_err:.6f} (sys), "
        f"combined {est.combined_err:.6f}, L={family.L_list}"
    )
    if est.diagnostics.get("flags"):
        print("flags: " + ", ".join(est.diagnostics["flags"]))
    if est.meta.get("p") is not None:
        csv_text = estimator.render_table_csv(estimator.curve_table([est]))
        print(csv_text.rstrip("\n"))
    if args.out:
        if args.format == "csv" and est.meta.get("p") is not None:
            rows = estimator.curve_table([est])
            with open(args.out, "w") as fh:
                fh.write(estimator.render_table_csv(rows))
        else:
            est.save(args.out)
        print(f"-> {args.out}")
    return 0


def cmd_cluster_dist(args) -> int:
    spec = LatticeSpec(d=args.d, s=args.s, L=args.L, boundary=args.boundary)
    workers = _workers(args)
    dist = observables.sample_cluster_distribution(
        spec, args.p, args.sigma, args.samples, args.seed, workers=workers,
    )
    out_dir = _out_dir(args)
    name = (
        f"clusterdist_d{args.d}s{args.s}_L{args.L}"
        f"_p{args.p:g}_s{args.sigma:g}.json"
    )
    path = args.out if (args.out and args.out.endswith(".json")) else \
        os.path.join(out_dir, name)
    dist.save(path)
    print(f"samples={dist.samples} boundary={dist.boundary_count} -> {path}")

    fit = observables.decay_fit(dist)
    if fit.inconclusive:
        print("decay fit: inconclusive (tail too thin)")
    else:
        lo, hi = fit.window
        print(f"decay fit window: {lo} <= n <= {hi}")
        for c in fit.candidates:
            print(f"  alpha={c.alpha:.4g}  rate={c.rate:.5g}  rss={c.rss:.4g}")
        print(f"  regime: alpha={fit.regime_alpha:.4g}")
    if args.fit_out:
        runmeta.write_json(args.fit_out, fit.to_payload())
        print(f"fit -> {args.fit_out}")
    return 0


def cmd_meanfield(args) -> int:
    if args.p_grid:
        ps = parse_grid(args.p_grid)
    elif args.p:
        ps = np.array(args.p, dtype=np.float64)
    else:
        raise ValueError("pass --p (repeatable) or --p-grid lo:hi:step")
    rows = meanfield.meanfield_table(ps, args.d, args.s, args.sigma_c)
    lines = ["p,sigma_star_mf,beyond_validity"]
    for row in rows:
        lines.append(
            f"{row['p']:.10g},{row['sigma_star_mf']:.10g},"
            f"{int(row['beyond_validity'])}"
        )
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(f"# {runmeta.FORMAT_TABLE}\n")
            fh.write(text)
        print(f"-> {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_animals(args) -> int:
    census = animals_mod.enumerate_census(
        args.d, args.s, args.max_edges, force=args.force,
    )
    audit = animals_mod.identity_audit(census)
    totals = census.edge_count_totals()
    for n in sorted(totals):
        print(f"n={n}: {totals[n]} animals")
    print(
        f"classes={audit['classes_checked']} "
        f"identity violations={audit['violations']} covered_v={census.covered_v}"
    )
    path = args.out or os.path.join(
        runmeta.default_out_dir(),
        f"census_d{census.d}s{census.s}_n{census.max_edges}.csv",
    )
    census.save_csv(path)
    print(f"-> {path}")
    return 0 if audit["passed"] else 3


def cmd_audit_ineq(args) -> int:
    spec = LatticeSpec(d=args.d, s=args.s, L=args.L, boundary=args.boundary)
    workers = _workers(args)
    result = observables.inequality_audit(
        spec, args.p, args.sigma, args.gamma, args.samples, args.seed,
        h=args.h, batches=args.batches, workers=workers,
    )
    print(
        f"point: p={args.p:g} sigma={args.sigma:g} gamma={args.gamma:g} "
        f"h={args.h:g} L={args.L}"
    )
    for q in result.inequalities:
        verdict = "PASS" if q["passed"] else "FAIL"
        print(
            f"  {q['name']:24s} lhs={q['lhs']:+.5g} rhs={q['rhs']:+.5g} "
            f"slack={q['slack']:+.5g} stderr={q['stderr']:.3g}  {verdict}"
        )
    print(f"overall: {'PASS' if result.passed else 'FAIL'}")
    if args.out:
        result.save(args.out)
        print(f"-> {args.out}")
    return 0


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="defectperc",
        description="bond percolation with a defect plane: sampling, "
                    "estimation, and exact cross-checks",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def add_common(p, seed=True, workers=True, out_help="output directory"):
        if seed:
            p.add_argument("--seed", type=int, default=0,
                           help="base seed (default 0)")
        if workers:
            p.add_argument("--workers", type=int, default=None,
                           help="thread count (default: all cores; "
                                "never affects results)")
        p.add_argument("--out", default=None, help=out_help)

    p = sub.add_parser("sweep", help="microcanonical defect sweep, one curve "
                                     "file per (p, L)")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--L", type=int, action="append", required=True,
                   help="box size (repeatable)")
    p.add_argument("--p", type=float, action="append", required=True,
                   help="bulk density (repeatable)")
    p.add_argument("--realizations", type=int, required=True)
    p.add_argument("--all-faces", action="store_true",
                   help="average the crossing indicator over all s face pairs")
    add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("homog", help="homogeneous sweep (baseline p_c check)")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--L", type=int, action="append", required=True)
    p.add_argument("--realizations", type=int, required=True)
    add_common(p)
    p.set_defaults(func=cmd_homog)

    p = sub.add_parser("convolve", help="microcanonical curve(s) to canonical "
                                        "crossing curve(s) on a density grid")
    p.add_argument("inputs", nargs="+", help="microcanonical curve JSON files")
    p.add_argument("--sigma-grid", required=True,
                   help="lo:hi:step or comma list (p grid for homog curves)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", default=None,
                   help="output directory, or file when a single input")
    p.set_defaults(func=cmd_convolve)

    p = sub.add_parser("estimate", help="critical density from canonical "
                                        "curves at three or more box sizes")
    p.add_argument("inputs", nargs="+", help="canonical curve JSON files")
    p.add_argument("--force", action="store_true",
                   help="accept mixed soft provenance (realizations, rng)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", default=None, help="output file")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("cluster-dist", help="origin cluster size histogram "
                                            "plus decay-regime fit")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--boundary", choices=("free", "periodic"), default="free")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--fit-out", default=None, help="decay-fit report file")
    add_common(p, out_help="output file or directory")
    p.set_defaults(func=cmd_cluster_dist)

    p = sub.add_parser("meanfield", help="mean-field critical plane density")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--sigma-c", type=float, default=None,
                   help="plane-alone threshold (default: exact for s=2)")
    p.add_argument("--p", type=float, action="append",
                   help="bulk density (repeatable)")
    p.add_argument("--p-grid", default=None, help="lo:hi:step or comma list")
    p.add_argument("--out", default=None, help="output CSV file")
    p.set_defaults(func=cmd_meanfield)

    p = sub.add_parser("animals", help="exact rooted animal census and audits")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--max-edges", type=int, default=None,
                   help="edge cap (default: per-dimension preset)")
    p.add_argument("--force", action="store_true",
                   help="allow caps past the runtime guard")
    p.add_argument("--out", default=None, help="census CSV file")
    p.set_defaults(func=cmd_animals)

    p = sub.add_parser("audit-ineq", help="ghost-field differential "
                                          "inequality audit at one point")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--boundary", choices=("free", "periodic"), default="free")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--h", type=float, default=0.02, help="stencil step")
    p.add_argument("--batches", type=int, default=50)
    add_common(p, out_help="audit report file")
    p.set_defaults(func=cmd_audit_ineq)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
