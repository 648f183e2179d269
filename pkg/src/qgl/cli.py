"""Command line front end.

Exit codes: 0 success, 2 invalid input or graph, 3 a requested assertion
failed.  Results go to --out as CSV or JSON; a short summary goes to stdout.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import counts as counts_mod
from . import magnetic as magnetic_mod
from . import neumann as neumann_mod
from . import stats as stats_mod
from . import spectrum as spectrum_mod
from .errors import QGLError
from .graphs import MetricGraph, load_graph
from .secular import sample_manifold

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_ASSERT = 3


# ---------------------------------------------------------------------------
# parallel localization


def _locate_window(payload):
    gjson, k_min, k_max = payload
    g = MetricGraph.from_json(gjson)
    return spectrum_mod.locate_spectrum(g, k_max=k_max, k_min=k_min)


def locate_parallel(graph: MetricGraph, count: int | None = None,
                    k_max: float | None = None, workers: int = 1):
    """Window-parallel localization with a deterministic ordered merge.

    Each window recomputes its own starting count, so results do not depend
    on the window split or the worker count.
    """
    if workers <= 1:
        if count is not None:
            return spectrum_mod.locate_spectrum(graph, count=count)
        return spectrum_mod.locate_spectrum(graph, k_max=k_max)

    if k_max is None:
        # Weyl estimate for the k reaching `count` eigenvalues, padded
        k_max = (count + 2 + (graph.E + graph.V) / 2.0) * np.pi / graph.total_length
        k_max *= 1.05
    edges = np.linspace(0.0, k_max, workers + 1)
    payloads = [(graph.to_json(), float(a), float(b))
                for a, b in zip(edges[:-1], edges[1:])]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        chunks = list(pool.map(_locate_window, payloads))
    levels = [lv for chunk in chunks for lv in chunk]

    if count is not None:
        while spectrum_mod.len_done(levels) < count:
            n_off = levels[-1].n - 1 + levels[-1].multiplicity if levels else 0
            k_lo = levels[-1].k * (1 + 1e-8) if levels else 0.0
            more = spectrum_mod.locate_spectrum(
                graph, k_max=k_max * 1.2, k_min=k_lo, n_offset=n_off)
            levels.extend(more)
            k_max *= 1.2
        kept, done = [], 0
        for lv in levels:
            if done >= count:
                break
            kept.append(lv)
            done += lv.multiplicity
        levels = kept
    return levels


# ---------------------------------------------------------------------------
# output helpers


def _write_rows(out_dir: Path, name: str, fmt: str, header: list[str],
                rows: list[list]) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        path = out_dir / f"{name}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
    else:
        path = out_dir / f"{name}.json"
        with open(path, "w") as fh:
            json.dump([dict(zip(header, r)) for r in rows], fh, indent=1)
            fh.write("\n")
    return path


def _write_json(out_dir: Path, name: str, obj) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{name}.json"
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, default=float)
        fh.write("\n")
    return path


def _fmt_k(k: float) -> str:
    return f"{k:.12g}"


# ---------------------------------------------------------------------------
# subcommands


def _expand(graph, levels, thresholds, need_eigenfunction=True):
    """Yield (n, level, eigenpair-or-None, flags-or-None) per spectral index."""
    for lv in levels:
        if lv.multiplicity == 1 and need_eigenfunction:
            ep = spectrum_mod.eigenfunction_at(graph, lv.k, n=lv.n,
                                               thresholds=thresholds)
            flags = spectrum_mod.classify(graph, ep, thresholds)
            yield lv.n, lv, ep, flags
        else:
            for j in range(lv.multiplicity):
                yield lv.n + j, lv, None, None


def cmd_spectrum(args, graph, thresholds, out_dir) -> int:
    levels = locate_parallel(graph, count=args.K, k_max=args.kmax,
                             workers=args.workers)
    rows = []
    for n, lv, ep, flags in _expand(graph, levels, thresholds):
        if flags is not None:
            simple = flags.simple
            generic = flags.generic
            loop = flags.loop_supported is not None
        else:
            simple = False
            generic = False
            loop = (n - lv.n) < lv.loop_dims
        rows.append([n, _fmt_k(lv.k), int(simple), int(generic), int(loop)])
    path = _write_rows(out_dir, "spectrum", args.format,
                       ["n", "k", "simple", "generic", "loop_supported"], rows)
    total = len(rows)
    generic_n = sum(int(r[3]) for r in rows)
    loops_n = sum(int(r[4]) for r in rows)
    print(f"graph: V={graph.V} E={graph.E} betti={graph.topology.betti} "
          f"families={list(graph.topology.families)}")
    print(f"eigenvalues: {total} located, k in (0, {_fmt_k(levels[-1].k)}]")
    print(f"generic: {generic_n}  loop-supported: {loops_n}  "
          f"other: {total - generic_n - loops_n}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_counts(args, graph, thresholds, out_dir) -> int:
    levels = locate_parallel(graph, count=args.K, k_max=args.kmax,
                             workers=args.workers)
    rows, skipped = [], 0
    for n, lv, ep, flags in _expand(graph, levels, thresholds):
        if flags is None or not flags.generic:
            skipped += 1
            continue
        rec = counts_mod.counts(graph, ep)
        rows.append([n, _fmt_k(lv.k), rec.phi, rec.mu, rec.sigma, rec.omega])
    path = _write_rows(out_dir, "counts", args.format,
                       ["n", "k", "phi", "mu", "sigma", "omega"], rows)
    print(f"counts for {len(rows)} generic eigenpairs ({skipped} skipped)")
    if rows:
        sig = [r[4] for r in rows]
        om = [r[5] for r in rows]
        print(f"mean sigma {np.mean(sig):.4f}  mean omega {np.mean(om):.4f}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_domains(args, graph, thresholds, out_dir) -> int:
    levels = locate_parallel(graph, count=args.K, k_max=args.kmax,
                             workers=args.workers)
    star_threshold = np.pi / graph.min_length
    rows, skipped = [], 0
    for n, lv, ep, flags in _expand(graph, levels, thresholds):
        if flags is None or not flags.generic or lv.k <= star_threshold:
            skipped += 1
            continue
        part = neumann_mod.partition(graph, ep)
        for v in sorted(part.stars):
            s = part.stars[v]
            rows.append([n, v, s.N, f"{s.rho:.12g}"])
    path = _write_rows(out_dir, "domains", args.format,
                       ["n", "vertex", "N_v", "rho_v"], rows)
    print(f"star observables for {len(set(r[0] for r in rows))} eigenpairs "
          f"above k = {star_threshold:.4g} ({skipped} skipped)")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_magnetic(args, graph, thresholds, out_dir) -> int:
    levels = locate_parallel(graph, count=args.K, k_max=args.kmax,
                             workers=args.workers)
    n_blocks = sum(1 for b in graph.topology.blocks if b.betti > 0)
    header = (["n", "k", "sigma_counting", "sigma_magnetic"]
              + [f"iota_{j + 1}" for j in range(n_blocks)])
    rows, skipped, agree = [], 0, True
    for n, lv, ep, flags in _expand(graph, levels, thresholds):
        if flags is None or not flags.generic:
            skipped += 1
            continue
        rec = counts_mod.counts(graph, ep)
        frame = magnetic_mod.hessian_alpha(graph, ep.kappa)
        iota = magnetic_mod.local_indices(frame)
        if frame.sigma_magnetic != rec.sigma:
            agree = False
        rows.append([n, _fmt_k(lv.k), rec.sigma, frame.sigma_magnetic] + iota)
    path = _write_rows(out_dir, "magnetic", args.format, header, rows)
    print(f"magnetic indices for {len(rows)} generic eigenpairs "
          f"({skipped} skipped); counting/magnetic agree: {agree}")
    print(f"wrote {path}")
    if "agreement" in args.asserts and not agree:
        print("ASSERT agreement: FAIL", file=sys.stderr)
        return EXIT_ASSERT
    return EXIT_OK


def cmd_stats(args, graph, thresholds, out_dir) -> int:
    dist = stats_mod.run_experiment(
        graph, args.K, seed=args.seed, thresholds=thresholds,
        magnetic=args.magnetic, check_identities=True)
    rows = [[r.n, _fmt_k(r.k), r.sigma, r.omega] for r in dist.records]
    path = _write_rows(out_dir, "stats", args.format,
                       ["n", "k", "sigma", "omega"], rows)

    summary = {
        "graph": graph.to_json(),
        "families": list(graph.topology.families),
        "K": dist.K, "N_raw": dist.N_raw,
        "loop_density": dist.loop_density(),
        "excluded": dict(dist.excluded),
        "identity_failures": dist.identity_failures,
        "sigma_hist": {str(k): v for k, v in sorted(dist.sigma_hist.items())},
        "omega_hist": {str(k): v for k, v in sorted(dist.omega_hist.items())},
        "sigma_mean": dist.sigma_mean(), "sigma_var": dist.sigma_var(),
        "omega_mean": dist.omega_mean(),
    }
    reports = {}
    failed = []
    for name in args.asserts:
        if name == "symmetry":
            rep = stats_mod.symmetry_test(dist)
        elif name == "binomial":
            rep = stats_mod.binomial_test(dist)
        elif name == "recurrence":
            rep = stats_mod.signature_recurrence(dist)
        else:
            raise QGLError(f"unknown assertion '{name}' "
                           "(expected symmetry, binomial, recurrence)")
        reports[name] = rep
        if not rep["ok"]:
            failed.append(name)
    summary["tests"] = reports
    spath = _write_json(out_dir, "stats_summary", summary)

    print(f"{dist.K} generic eigenpairs out of {dist.N_raw} indices "
          f"(loop density {dist.loop_density():.4f})")
    print(f"mean sigma {dist.sigma_mean():.4f}  var {dist.sigma_var():.4f}  "
          f"mean omega {dist.omega_mean():.4f}")
    for name, rep in reports.items():
        print(f"ASSERT {name}: {'ok' if rep['ok'] else 'FAIL'}")
    print(f"wrote {path} and {spath}")
    if failed:
        return EXIT_ASSERT
    return EXIT_OK


def cmd_manifold(args, graph, thresholds, out_dir) -> int:
    rows = [[f"{k1:.12g}", f"{k2:.12g}", f"{k3:.12g}", comp]
            for k1, k2, k3, comp in sample_manifold(graph, resolution=args.res)]
    path = _write_rows(out_dir, "manifold", args.format,
                       ["k1", "k2", "k3", "component"], rows)
    comps = sorted({r[3] for r in rows})
    print(f"{len(rows)} zero-set points on [0, 2pi)^3, components: {comps}")
    print(f"wrote {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="qgl",
        description="Spectra, eigenfunctions, nodal and Neumann statistics "
                    "of metric graphs with standard vertex conditions.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, spectral=True):
        sp.add_argument("--graph", required=True,
                        help="graph JSON file or builtin graph name")
        if spectral:
            g = sp.add_mutually_exclusive_group(required=(sp.prog.endswith("stats")))
            g.add_argument("--K", "--count", dest="K", type=int,
                           help="number of eigenvalues to locate")
            if not sp.prog.endswith("stats"):
                g.add_argument("--kmax", type=float,
                               help="locate all eigenvalues up to this k")
        sp.add_argument("--seed", type=int, default=None,
                        help="redraw edge lengths uniformly from [1, 2]")
        sp.add_argument("--workers", type=int,
                        default=int(os.environ.get("QGL_WORKERS", "1")))
        sp.add_argument("--out", type=Path, default=Path("."),
                        help="output directory")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        sp.add_argument("--assert", dest="asserts", default="",
                        help="comma separated checks; nonzero exit on failure")
        sp.add_argument("--thresholds", default=None,
                        help="JSON object overriding classification thresholds")

    common(sub.add_parser("spectrum", help="locate and classify eigenvalues"))
    common(sub.add_parser("counts", help="nodal and Neumann counts"))
    common(sub.add_parser("domains", help="Neumann domain observables"))
    common(sub.add_parser("magnetic", help="magnetic stability indices"))
    sp = sub.add_parser("stats", help="surplus distribution experiment")
    common(sp)
    sp.add_argument("--magnetic", action="store_true",
                    help="also accumulate local magnetic indices")
    sp = sub.add_parser("manifold", help="sample the secular zero set (E = 3)")
    common(sp, spectral=False)
    sp.add_argument("--res", type=int, default=60, help="grid resolution")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args.asserts = [s for s in args.asserts.split(",") if s]
    if getattr(args, "K", None) is None and getattr(args, "kmax", None) is None \
            and args.command != "manifold":
        print("error: one of --K, --kmax is required", file=sys.stderr)
        return EXIT_INVALID
    try:
        graph = load_graph(args.graph)
        if args.seed is not None and args.command != "stats":
            graph = graph.with_lengths(stats_mod.draw_lengths(graph.E, args.seed))
        thresholds = spectrum_mod.Thresholds.from_dict(
            json.loads(args.thresholds) if args.thresholds else None)
        handler = {
            "spectrum": cmd_spectrum, "counts": cmd_counts,
            "domains": cmd_domains, "magnetic": cmd_magnetic,
            "stats": cmd_stats, "manifold": cmd_manifold,
        }[args.command]
        return handler(args, graph, thresholds, args.out)
    except (QGLError, FileNotFoundError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
