"""Command line: ``ubssd {gen,run,sweep,report}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import serialize
from .config import ConfigError, load_config
from .datagen import make_scene
from .harness import cell_seeds, load_records, report, run_sweep
from .metrics import format_percent
from .pipelines import lpa_deconvolve, run_method, tcc_deconvolve


def _config(args):
    cfg = load_config(args.config)
    return cfg.with_overrides(seeds=getattr(args, "seeds", None),
                              methods=getattr(args, "methods", None),
                              out=getattr(args, "out", None))


def _first_cell(cfg, args):
    T = args.T if args.T is not None else cfg.T_list[0]
    L = args.L if args.L is not None else cfg.L_list[0]
    return T, L


def cmd_gen(args) -> int:
    cfg = _config(args)
    T, L = _first_cell(cfg, args)
    scene_seed, _ = cell_seeds(cfg.master_seed, T, L, args.seed_index)
    scene = make_scene(cfg.source_spec(), cfg.dims(T, L), scene_seed)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    serialize.save_series(out / "sources.bssd", scene.sources)
    serialize.save_series(out / "observation.bssd", scene.observation)
    np.save(out / "mixing.npy", scene.mixing.stacked())
    meta = {"config": cfg.echo(), "T": T, "L": L, "seed_index": args.seed_index,
            "scene_seed": scene_seed, "digest": scene.digest()}
    (out / "scene.json").write_text(json.dumps(meta, indent=1, sort_keys=True))
    print(f"wrote scene T={T} L={L} D_x={cfg.D_x} D_s={cfg.D_s} to {out}")
    return 0


def _load_observation(path):
    path = Path(path)
    if path.suffix == ".csv":
        return serialize.load_series_csv(path)
    return serialize.load_series(path)


def cmd_run(args) -> int:
    cfg = _config(args)
    T, L = _first_cell(cfg, args)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    scene_seed, solver_seed = cell_seeds(cfg.master_seed, T, L, args.seed_index)
    if args.observation:
        x = _load_observation(args.observation).centered()
        dims = cfg.dims(x.len, L)
        results = []
        for m in cfg.methods:
            fn = lpa_deconvolve if m == "LPA" else tcc_deconvolve
            results.append(fn(x, dims, solver_seed, restarts=cfg.restarts))
    else:
        scene = make_scene(cfg.source_spec(), cfg.dims(T, L), scene_seed)
        results = [run_method(m, scene, solver_seed, cfg.restarts) for m in cfg.methods]
    for res in results:
        rec = {"config": cfg.echo(), "T": T, "L": L, "seed_index": args.seed_index,
               **res.record()}
        path = out / f"run_{res.method.lower()}.json"
        path.write_text(json.dumps(rec, indent=1, sort_keys=True))
        serialize.save_series(out / f"estimates_{res.method.lower()}.bssd", res.estimates)
        amari = "n/a" if res.amari is None else f"{format_percent(res.amari)}%"
        print(f"{res.method}: Amari-index {amari} -> {path}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _config(args)

    def progress(recs):
        for r in recs:
            status = r["error"] or f"{format_percent(r['amari'])}%"
            print(f"T={r['T']} L={r['L']} seed={r['seed_index']} {r['method']}: {status}",
                  flush=True)

    records = run_sweep(cfg, resume=args.resume, jobs=args.jobs,
                        progress=None if args.quiet else progress)
    paths = report(records, cfg.out, figures=not args.no_figures)
    for k, p in paths.items():
        print(f"{k}: {p}")
    failed = sum(r.failed for r in records)
    if failed:
        print(f"{failed} cell(s) failed", file=sys.stderr)
        return 1
    return 0


def cmd_report(args) -> int:
    out = Path(args.out)
    records = load_records(out) if (out / "records.json").exists() else []
    paths = report(records, out, figures=not args.no_figures)
    for k, p in paths.items():
        print(f"{k}: {p}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ubssd", description="Undercomplete blind subspace "
                                "deconvolution benchmark (LPA vs TCC)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, cell=True):
        sp.add_argument("--config", required=True, help="key-value config file")
        sp.add_argument("--out", help="output directory (overrides config)")
        if cell:
            sp.add_argument("--T", type=int, help="sample number (default: first in config)")
            sp.add_argument("--L", type=int, help="convolution degree (default: first in config)")
            sp.add_argument("--seed-index", type=int, default=0)

    sp = sub.add_parser("gen", help="generate one scene and write binary series caches")
    common(sp)
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("run", help="run the methods on one scene or on a given observation")
    common(sp)
    sp.add_argument("--methods", help="comma list, e.g. lpa,tcc")
    sp.add_argument("--observation", help="observation file (.bssd or headerless .csv)")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("sweep", help="run the full (T, L, seed) sweep and report")
    common(sp, cell=False)
    sp.add_argument("--seeds", type=int, help="seeds per cell (overrides config)")
    sp.add_argument("--methods", help="comma list, e.g. lpa,tcc")
    sp.add_argument("--resume", action="store_true", help="skip cells already in cells.jsonl")
    sp.add_argument("--jobs", type=int, default=1, help="worker processes")
    sp.add_argument("--no-figures", action="store_true")
    sp.add_argument("--quiet", action="store_true")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("report", help="write CSV, gnuplot data and figures from records.json")
    sp.add_argument("--out", required=True, help="sweep output directory")
    sp.add_argument("--no-figures", action="store_true")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, serialize.FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
