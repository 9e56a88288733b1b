"""Command-line interface.

    scforge <command> --config path [--grid N] [--dump] [--out dir] [--workers K]

Commands run the pipeline up to a stage and write artifacts into the output
directory:

    seed      seed functions and their PDE residuals
    classify  species report of the Gauss pair at t = 0
    build     hypersurface, extrinsic report and cross-section OBJ
    bend      sigma, B and the bending field with their residuals
    sweep     deformation certificate on one grid
    verify    everything on every grid size plus the convergence table
    export    OBJ meshes of f_t and f_-t, CSV tables and SVG residual plots

Exit status: 0 when every gated check passes, 1 for configuration errors, 2
when the input is classified in the continuous class (first species), 3 when
any other gated check fails.  ``verify`` on a negative-control configuration
(one with ``expect.stage``) exits 0 exactly when every grid stops at the
declared stage and 3 otherwise.
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import config as cfgmod
from . import family as fam
from . import pipeline as pl
from . import report as rp
from .errors import ConfigError, ScforgeError

UPTO = {"seed": "pde_residual", "classify": "hypothesis", "build": "hyper", "bend": "bending",
        "sweep": None, "export": None}


def build_parser():
    p = argparse.ArgumentParser(prog="scforge", description="Discrete-class deformation certificates from "
                                "conjugate-net seeds.")
    p.add_argument("--version", action="version", version=f"scforge {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "seed": "build or solve the seed functions and report PDE residuals",
        "classify": "species report of the Gauss pair at t = 0",
        "build": "hypersurface with extrinsic report and OBJ",
        "bend": "infinitesimal bending with its contracts",
        "sweep": "deformation certificate on one grid",
        "verify": "run everything on every grid and emit the convergence table",
        "export": "OBJ/CSV/SVG artifacts of the deformation",
    }
    for name, text in helps.items():
        s = sub.add_parser(name, help=text, description=text)
        s.add_argument("--config", required=True, help="JSON configuration (comments allowed)")
        s.add_argument("--grid", type=int, default=None,
                       help="grid size for single-grid commands (default: first configured size)")
        s.add_argument("--dump", action="store_true", default=None, help="also write raw fields as .npz")
        s.add_argument("--out", default=None, help="output directory (overrides the configuration)")
        s.add_argument("--workers", type=int, default=None,
                       help="worker threads for the t-sweep (default: SCFORGE_WORKERS or CPU count)")
        if name == "verify":
            s.add_argument("--oracle-max", type=int, default=129,
                           help="run the pointwise-nullspace oracle on grids up to this size")
    return p


def _workers(args, cfg):
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigError("--workers must be positive")
        return args.workers
    return cfg.workers if cfg.workers is not None else fam.workers_default()


def _header(cfg, command):
    return {"tool": "scforge", "version": __version__, "command": command, "config": cfg.to_dict(),
            "seed_hash": rp.seed_hash(cfg)}


def _dump_fields(out, run):
    o = run.objects
    arrays = {}
    if "seed" in o:
        arrays["phi"] = o["seed"].phi
    if "pair" in o:
        arrays.update(g=o["pair"].g, gamma=o["pair"].gamma)
    if "H" in o:
        arrays.update(f0=o["H"].f0, xi=o["H"].xi, regular=o["H"].regular, A=o["H"].A)
    if "B" in o:
        arrays.update(B=o["B"].B, sigma=o["B"].sigma.sigma)
    if "bending" in o:
        arrays.update(T=o["bending"].T, Omega=o["bending"].Omega)
    np.savez_compressed(out / f"fields_{run.n}.npz", **arrays)


def _print_run(run, stream):
    for s in run.stages:
        if s.status == "skipped":
            continue
        print(f"  [{s.status:4}] {s.name:<19} {s.seconds:7.2f} s", file=stream)
        if s.error:
            for line in s.error.splitlines():
                print(f"         {line}", file=stream)
    if run.verdict:
        print(f"  verdict: {run.verdict}", file=stream)


def _run_report(cfg, command, runs):
    return dict(_header(cfg, command), runs=[r.to_dict() for r in runs])


def _certificate_doc(cfg, runs):
    certs = [{"grid": r.n, "h": r.h, **r.certificate.to_dict()} for r in runs if r.certificate is not None]
    return dict(_header(cfg, "certificate"), certificates=certs,
                verdict=(certs[-1]["verdict"] if certs else None))


def _timings(runs):
    return [{"n": r.n, "stage": s.name, "seconds": s.seconds} for r in runs for s in r.stages
            if s.status != "skipped"]


def _plots(out, cfg, runs):
    conv = pl.convergence_table(runs)
    series = {}
    for row in conv:
        series.setdefault(f"{row['stage']}:{row['quantity']}", ([], []))
        series[f"{row['stage']}:{row['quantity']}"][0].append(row["h"])
        series[f"{row['stage']}:{row['quantity']}"][1].append(row["value"])
    if len(runs) > 1:
        rp.write_svg(out / "convergence.svg", series, f"{cfg.name}: residual vs h", "h", "normalized residual",
                     logx=True, logy=True)
    sweep_rows = [row for r in runs for row in pl.sweep_table(r)]
    if sweep_rows:
        keys = ("special_pair_res", "first_species_res", "congruence_separation", "nullity_inclusion",
                "system_res", "metric_pair")
        sseries = {}
        for r in runs:
            rows = pl.sweep_table(r)
            for k in keys:
                sseries[f"{k} ({r.n})"] = ([x["t"] for x in rows], [x.get(k) for x in rows])
        rp.write_svg(out / "sweep.svg", sseries, f"{cfg.name}: certificate residuals vs t", "t", "value",
                     logx=False, logy=True)
    return conv, sweep_rows


def _export_meshes(out, run):
    o = run.objects
    H, bf, cert = o.get("H"), o.get("bending"), o.get("certificate")
    if H is None:
        return
    if bf is None or cert is None or not cert.rows:
        rp.write_obj(out / f"cross_section_{run.n}.obj", H.f0, H.regular, comment="cross-section f0 (PCA)")
        return
    t = max(r.t for r in cert.rows)
    surfaces = {"f0": H.f0, "f_plus": H.f0 + t * bf.T, "f_minus": H.f0 - t * bf.T}
    stacked = rp.pca_project(np.stack(list(surfaces.values())), 3)
    for (name, _), pts in zip(surfaces.items(), stacked):
        rp.write_obj(out / f"{name}_{run.n}.obj", pts, H.regular,
                     comment=f"{name} at t = {t!r}, common PCA projection")


def cmd_single(args, cfg, out):
    n = args.grid if args.grid is not None else cfg.grids[0]
    if n < 9:
        raise ConfigError("--grid must be at least 9")
    run = pl.run_grid(cfg, n, upto=UPTO[args.command], workers=_workers(args, cfg))
    print(f"{cfg.name} [{args.command}] grid {n}x{n}", file=sys.stdout)
    _print_run(run, sys.stdout)
    rp.write_json(out / "report.json", _run_report(cfg, args.command, [run]))
    rp.write_json(out / "timings.json", _timings([run]))
    if args.command in ("build", "export"):
        _export_meshes(out, run)
    if run.certificate is not None:
        rp.write_json(out / "certificate.json", _certificate_doc(cfg, [run]))
        rp.write_csv(out / "sweep.csv", pl.sweep_table(run))
    if args.command == "export":
        _plots(out, cfg, [run])
    if cfg.dump or args.dump:
        _dump_fields(out, run)
    # single-grid commands report the verdict itself; control semantics belong to verify
    return run.exit_code()


def cmd_verify(args, cfg, out):
    runs = []
    expect = cfg.expect.get("stage")
    workers = _workers(args, cfg)
    t0 = time.perf_counter()
    for n in cfg.grids:
        run = pl.run_grid(cfg, n, workers=workers, oracle=n <= args.oracle_max)
        print(f"{cfg.name} [verify] grid {n}x{n}", file=sys.stdout)
        _print_run(run, sys.stdout)
        runs.append(run)
    total = time.perf_counter() - t0
    rp.write_json(out / "report.json", _run_report(cfg, "verify", runs))
    rp.write_json(out / "certificate.json", _certificate_doc(cfg, runs))
    rp.write_json(out / "timings.json", {"total_seconds": total, "stages": _timings(runs)})
    conv, sweep_rows = _plots(out, cfg, runs)
    rp.write_csv(out / "convergence.csv", conv, ["stage", "quantity", "n", "h", "value", "ratio"])
    if sweep_rows:
        rp.write_csv(out / "sweep.csv", sweep_rows)
    if cfg.dump or args.dump:
        for run in runs:
            _dump_fields(out, run)
    codes = [r.exit_code(expect) for r in runs]
    code = max(codes)
    if expect:
        print(f"negative control: expected stop at '{expect}', got "
              f"{[r.failed_stage for r in runs]} -> {'ok' if code == 0 else 'MISMATCH'}")
    print(f"total {total:.1f} s; exit {code}")
    return code


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = cfgmod.load(args.config)
        out = Path(args.out if args.out is not None else cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "verify":
            return cmd_verify(args, cfg, out)
        return cmd_single(args, cfg, out)
    except ConfigError as err:
        print(err.describe(), file=sys.stderr)
        return pl.EXIT_ERROR
    except ScforgeError as err:  # errors outside the staged pipeline (e.g. while exporting)
        print(err.describe(), file=sys.stderr)
        return pl.EXIT_GATED


if __name__ == "__main__":
    sys.exit(main())
