"""Seeded sweeps over (T, L, seed) cells, run persistence and reporting.

Each cell gets its own seed derived from ``(master_seed, T, L, seed_index)``
so cells are independent of execution order. Finished cells are appended
to ``cells.jsonl`` as they complete; ``resume`` skips cells already there.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .config import ExperimentConfig
from .datagen import make_scene
from .pipelines import METHODS, run_method

log = logging.getLogger(__name__)

CELLS_FILE = "cells.jsonl"
RECORDS_FILE = "records.json"
CSV_FILE = "amari.csv"
LOGLOG_FILE = "amari_loglog.dat"
CSV_COLUMNS = ("T", "L", "method", "mean_r", "std_r", "quotient")


def cell_seeds(master: int, T: int, L: int, index: int) -> tuple[int, int]:
    """(scene seed, solver seed) for one cell."""
    ss = np.random.SeedSequence([master, T, L, index])
    scene, solver = (int(c.generate_state(1, np.uint64)[0]) for c in ss.spawn(2))
    return scene, solver


def run_cell(config: ExperimentConfig, T: int, L: int, index: int, methods) -> list[dict]:
    """One scene, every requested method on it. Failures become records with ``error``."""
    scene_seed, solver_seed = cell_seeds(config.master_seed, T, L, index)
    out = []
    base = {"T": T, "L": L, "seed_index": index, "scene_seed": scene_seed}
    try:
        scene = make_scene(config.source_spec(), config.dims(T, L), scene_seed)
    except Exception as exc:
        return [{**base, "method": m, "amari": None, "error": f"scene: {exc}"} for m in methods]
    for method in methods:
        t0 = time.perf_counter()
        try:
            res = run_method(method, scene, seed=solver_seed, restarts=config.restarts)
            rec = {**base, "method": method, "amari": res.amari, "error": None,
                   "ar_order": res.diagnostics.get("ar_order"),
                   "amari_lag0": res.diagnostics.get("amari_lag0")}
        except Exception as exc:
            log.warning("cell T=%d L=%d seed=%d %s failed: %s", T, L, index, method, exc)
            rec = {**base, "method": method, "amari": None, "error": str(exc)}
        rec["wall"] = time.perf_counter() - t0
        out.append(rec)
    return out


@dataclass
class MethodStats:
    per_seed: list
    mean: float | None
    std: float | None
    wall: list = field(default_factory=list)
    failures: int = 0


@dataclass
class RunRecord:
    T: int
    L: int
    methods: dict
    quotient: float | None
    config: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"T": self.T, "L": self.L, "quotient": self.quotient, "config": self.config,
                "methods": {m: asdict(s) for m, s in self.methods.items()}}

    @classmethod
    def from_json(cls, data: dict) -> "RunRecord":
        return cls(data["T"], data["L"], {m: MethodStats(**s) for m, s in data["methods"].items()},
                   data["quotient"], data.get("config", {}))

    @property
    def failed(self) -> int:
        return sum(s.failures for s in self.methods.values())


def _read_cells(path: Path) -> dict:
    done = {}
    if not path.exists():
        return done
    with open(path) as fh:
        for line in fh:
            try:
                rec = json.loads(line)
            except json.JSONDecodeError:
                continue  # torn final line after a crash
            done[(rec["T"], rec["L"], rec["seed_index"], rec["method"])] = rec
    return done


def aggregate(config: ExperimentConfig, cells: dict) -> list[RunRecord]:
    records = []
    echo = config.echo()
    for L in config.L_list:
        for T in config.T_list:
            per_method = {}
            for m in config.methods:
                vals, walls, fails = [], [], 0
                for i in range(config.seeds):
                    rec = cells.get((T, L, i, m))
                    if rec is None:
                        continue
                    if rec.get("error") or rec.get("amari") is None:
                        fails += 1
                        continue
                    vals.append(rec["amari"])
                    walls.append(rec.get("wall"))
                mean = float(np.mean(vals)) if vals else None
                std = float(np.std(vals)) if vals else None
                per_method[m] = MethodStats(vals, mean, std, walls, fails)
            q = None
            if "LPA" in per_method and "TCC" in per_method:
                a, b = per_method["LPA"].mean, per_method["TCC"].mean
                if a and b is not None:
                    q = b / a
            records.append(RunRecord(T, L, per_method, q, echo))
    return records


def run_sweep(config: ExperimentConfig, out_dir=None, resume: bool = False, jobs: int = 1,
              progress=None) -> list[RunRecord]:
    """Run every (L, T, seed) cell of ``config`` and write cells/records to ``out_dir``."""
    out = Path(out_dir or config.out)
    out.mkdir(parents=True, exist_ok=True)
    cells_path = out / CELLS_FILE
    done = _read_cells(cells_path) if resume else {}
    if not resume and cells_path.exists():
        cells_path.unlink()

    todo = []
    for L in config.L_list:
        for T in config.T_list:
            for i in range(config.seeds):
                missing = [m for m in config.methods if (T, L, i, m) not in done]
                if missing:
                    todo.append((T, L, i, missing))

    with open(cells_path, "a") as fh:
        def store(recs):
            for rec in recs:
                done[(rec["T"], rec["L"], rec["seed_index"], rec["method"])] = rec
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
            if progress:
                progress(recs)

        if jobs <= 1:
            for T, L, i, methods in todo:
                store(run_cell(config, T, L, i, methods))
        else:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                futures = [pool.submit(run_cell, config, T, L, i, methods)
                           for T, L, i, methods in todo]
                for fut in as_completed(futures):
                    store(fut.result())

    records = aggregate(config, done)
    with open(out / RECORDS_FILE, "w") as fh:
        json.dump([r.to_json() for r in records], fh, indent=1, sort_keys=True)
    return records


def load_records(out_dir) -> list[RunRecord]:
    with open(Path(out_dir) / RECORDS_FILE) as fh:
        return [RunRecord.from_json(r) for r in json.load(fh)]


def _pct(v) -> str:
    return "NA" if v is None else f"{100 * v:.2f}"


def _sorted_rows(records):
    rows = []
    for rec in sorted(records, key=lambda r: (r.L, r.T)):
        for m in METHODS:
            if m in rec.methods:
                rows.append((rec, m, rec.methods[m]))
    return rows


def write_csv(records, path):
    """RFC-4180 CSV; Amari values as percent with two decimals, quotient to two decimals."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(CSV_COLUMNS)
        for rec, m, s in _sorted_rows(records):
            q = "NA" if rec.quotient is None else f"{rec.quotient:.2f}"
            w.writerow([rec.T, rec.L, m, _pct(s.mean), _pct(s.std), q])


def write_loglog(records, path):
    """gnuplot data: one block per (method, L), separated by two blank lines."""
    blocks = {}
    for rec, m, s in _sorted_rows(records):
        blocks.setdefault((m, rec.L), []).append((rec.T, s.mean, s.std))
    with open(path, "w") as fh:
        fh.write("# T mean_r_percent std_r_percent; plot with: set logscale xy\n")
        for k, ((m, L), pts) in enumerate(sorted(blocks.items(), key=lambda kv: (kv[0][1], kv[0][0]))):
            if k:
                fh.write("\n\n")
            fh.write(f"# method={m} L={L}\n")
            for T, mean, std in pts:
                if mean is None:
                    fh.write(f"{T} NA NA\n")
                else:
                    fh.write(f"{T} {100 * mean:.6g} {100 * std:.6g}\n")


def report(records, out_dir, figures: bool = True) -> dict:
    """Write CSV, gnuplot data and (optionally) PNG figures; returns the paths written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"csv": out / CSV_FILE, "loglog": out / LOGLOG_FILE}
    write_csv(records, paths["csv"])
    write_loglog(records, paths["loglog"])
    if figures and records:
        from .plotting import plot_amari_vs_T, plot_quotient_vs_T

        paths["amari_figure"] = plot_amari_vs_T(records, out / "amari_vs_T.png")
        if any(r.quotient is not None for r in records):
            paths["quotient_figure"] = plot_quotient_vs_T(records, out / "quotient_vs_T.png")
    return paths


@dataclass
class PowerLawFit:
    exponent: float  # c in r ~ T^-c
    stderr: float
    ci_low: float
    ci_high: float


def fit_power_law(T, r, confidence: float = 0.95) -> PowerLawFit:
    """Least-squares line through (log T, log r); returns c = -slope with its confidence interval."""
    fit = stats.linregress(np.log(T), np.log(r))
    tcrit = stats.t.ppf(0.5 + confidence / 2, len(T) - 2)
    c = -fit.slope
    return PowerLawFit(c, fit.stderr, c - tcrit * fit.stderr, c + tcrit * fit.stderr)


def count_inversions(values) -> int:
    """Number of consecutive increases in a sequence expected to be nonincreasing."""
    v = np.asarray(values)
    return int(np.sum(v[1:] > v[:-1]))
