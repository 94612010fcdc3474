"""Repeated-seed comparison of training modes across held-out fractions."""

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .data import TASKS, fit_maxabs, generate, read_csv
from .errors import ConfigError, ShapeError
from .network import init_mlp
from .training import TrainConfig, TrainMode, split_indices, train

log = logging.getLogger(__name__)

METRICS = ("rmse_overall", "rmse_constrained", "rmse_unconstrained", "mean_violation")
DEFAULT_MODES = ("nn", "pinn", "kkt_hpinn", "nn_post")
# modes left out of the improvement-vs-nn comparison
NO_IMPROVEMENT = ("pinn",)


@dataclass
class ExperimentConfig:
    task: str = "cstr"
    modes: list = field(default_factory=lambda: [TrainMode(m) for m in DEFAULT_MODES])
    n_repeats: int = 10
    holdout_fractions: tuple = (0.2, 0.3, 0.4)
    train: TrainConfig = field(default_factory=TrainConfig)
    out_dir: str = None
    n_samples: int = None
    data_seed: int = 0
    noise_std: float = 0.0
    data_path: str = None
    activation: str = "relu"
    hidden: tuple = None
    jobs: int = 1

    def __post_init__(self):
        self.modes = [TrainMode.parse(m) if isinstance(m, str) else m for m in self.modes]
        if not self.modes:
            raise ConfigError("at least one mode is required")
        tags = [m.tag for m in self.modes]
        if len(set(tags)) != len(tags):
            raise ConfigError(f"duplicate modes in {tags}")
        if self.n_repeats < 1:
            raise ConfigError("n_repeats must be >= 1")
        self.holdout_fractions = tuple(float(f) for f in self.holdout_fractions)
        if not self.holdout_fractions or any(not 0.0 < f < 1.0 for f in self.holdout_fractions):
            raise ConfigError("holdout fractions must lie in (0, 1)")
        if len(set(self.holdout_fractions)) != len(self.holdout_fractions):
            raise ConfigError("duplicate holdout fractions")
        if self.data_path is None and self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}")


def fraction_tag(fraction):
    return f"{fraction:g}"


MAX_MODES = 64
MAX_REPEATS = 100_000


def cell_seed(base_seed, mode_index, fraction, repeat):
    """Training seed of one cell.

    A mixed-radix integer, so distinct (mode, fraction, repeat) cells can
    never share a seed.
    """
    if base_seed < 0 or not 0 <= mode_index < MAX_MODES or not 0 <= repeat < MAX_REPEATS:
        raise ConfigError("seed components out of range")
    permille = int(round(fraction * 1000))
    return ((int(base_seed) * MAX_MODES + mode_index) * 1001 + permille) * MAX_REPEATS + repeat


def split_seed(base_seed, fraction, repeat):
    """Test-split seed; shared by all modes so comparisons are paired."""
    return [int(base_seed), 1000, int(round(fraction * 1000)), int(repeat)]


@dataclass
class CellResult:
    mode: str
    fraction: float
    repeat: int
    seed: int
    report: object = None
    error: str = None


def _run_cell(args):
    ds, dims, activation, mode, tcfg, fraction, repeat, seed, sseed = args
    keep, test = split_indices(ds.n, fraction, sseed)
    try:
        net = init_mlp(dims, activation, seed)
        _, report = train(net, mode, ds.subset(keep), replace(tcfg, seed=seed),
                          test=ds.subset(test))
        return CellResult(mode.tag, fraction, repeat, seed, report=report)
    except Exception as exc:  # a failed cell must not sink the experiment
        log.warning("cell %s/%s/%d failed: %s", mode.tag, fraction, repeat, exc)
        return CellResult(mode.tag, fraction, repeat, seed, error=f"{type(exc).__name__}: {exc}")


def _mean_std(values):
    vals = [v for v in values if v is not None]
    if not vals:
        return None, None
    mean = math.fsum(vals) / len(vals)
    if len(vals) == 1:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in vals) / (len(vals) - 1)
    return mean, math.sqrt(var)


@dataclass
class SummaryTable:
    task: str
    modes: list
    fractions: list
    n_repeats: int
    cells: dict
    config: dict

    @property
    def complete(self):
        return all(c["n_failed"] == 0 for c in self.cells.values())

    def cell(self, mode, fraction):
        return self.cells[f"{mode}@{fraction_tag(fraction)}"]

    def to_dict(self):
        return {
            "task": self.task,
            "modes": self.modes,
            "holdout_fractions": self.fractions,
            "n_repeats": self.n_repeats,
            "complete": self.complete,
            "cells": self.cells,
            "config": self.config,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self):
        head = ["mode", "holdout", "n_ok", "rmse_overall", "rmse_constrained",
                "rmse_unconstrained", "mean_violation", "improvement"]
        rows = [head]

        def pm(stat):
            return "-" if stat["mean"] is None else f"{stat['mean']:.4e} ± {stat['std']:.1e}"

        for f in self.fractions:
            for m in self.modes:
                c = self.cell(m, f)
                imp = c["improvement"]["rmse_overall"]
                rows.append([m, fraction_tag(f), str(c["n_ok"]), *(pm(c[k]) for k in METRICS),
                             "-" if imp is None else f"{100 * imp:+.1f}%"])
        widths = [max(len(r[i]) for r in rows) for i in range(len(head))]
        return "\n".join("  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip() for r in rows) + "\n"


def aggregate(results, modes, fractions, n_repeats, task, config):
    """Mean ± sample std of per-run test metrics for each (mode, fraction)."""
    cells = {}
    for f in fractions:
        for m in modes:
            runs = [r for r in results if r.mode == m and r.fraction == f]
            ok = [r for r in runs if r.report is not None and r.report.test is not None]
            cell = {"mode": m, "holdout": f, "n_ok": len(ok), "n_failed": len(runs) - len(ok),
                    "failures": [{"repeat": r.repeat, "error": r.error} for r in runs if r.error]}
            for k in METRICS:
                mean, std = _mean_std([r.report.test[k] for r in ok])
                cell[k] = {"mean": mean, "std": std}
            cells[f"{m}@{fraction_tag(f)}"] = cell
        base = cells.get(f"nn@{fraction_tag(f)}")
        for m in modes:
            cell = cells[f"{m}@{fraction_tag(f)}"]
            cell["improvement"] = {}
            for k in METRICS[:3]:
                val = None
                if base is not None and m not in NO_IMPROVEMENT:
                    ref, mine = base[k]["mean"], cell[k]["mean"]
                    if ref is not None and mine is not None and ref != 0:
                        val = (ref - mine) / ref
                cell["improvement"][k] = val
    return SummaryTable(task, list(modes), list(fractions), n_repeats, cells, config)


def load_experiment_data(cfg):
    ds = read_csv(cfg.data_path) if cfg.data_path else generate(cfg.task, cfg.n_samples, cfg.data_seed, cfg.noise_std)
    if ds.is_scaled:
        ds = ds.unscaled()
    return fit_maxabs(ds)


def run_experiment(cfg):
    ds = load_experiment_data(cfg)
    task = TASKS.get(ds.task)
    hidden = cfg.hidden or (task.hidden if task else (32, 32))
    dims = [ds.X.shape[1], *hidden, ds.Y.shape[1]]
    base = cfg.train.seed
    jobs = []
    for fi, f in enumerate(cfg.holdout_fractions):
        for r in range(cfg.n_repeats):
            for mi, mode in enumerate(cfg.modes):
                jobs.append((ds, dims, cfg.activation, mode, cfg.train, f, r,
                             cell_seed(base, mi, f, r), split_seed(base, f, r)))
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_run_cell, jobs))
    else:
        results = [_run_cell(j) for j in jobs]

    echo = {
        "task": ds.task, "modes": [m.tag for m in cfg.modes], "lambda": {m.tag: m.lam for m in cfg.modes},
        "n_repeats": cfg.n_repeats, "holdout_fractions": list(cfg.holdout_fractions),
        "train": asdict(cfg.train), "n_samples": ds.n, "data_seed": cfg.data_seed,
        "noise_std": cfg.noise_std, "activation": cfg.activation, "layer_dims": dims,
    }
    table = aggregate(results, [m.tag for m in cfg.modes], list(cfg.holdout_fractions),
                      cfg.n_repeats, ds.task, echo)
    table.results = results
    if cfg.out_dir:
        write_outputs(table, results, cfg.out_dir)
    return table


def run_name(mode, fraction, repeat):
    return f"{mode}_{fraction_tag(fraction)}_{repeat}"


def write_outputs(table, results, out_dir):
    out = Path(out_dir)
    (out / "runs").mkdir(parents=True, exist_ok=True)
    for r in results:
        if r.report is None:
            continue
        stem = run_name(r.mode, r.fraction, r.repeat)
        r.report.write_csv(out / "runs" / f"{stem}.csv")
        r.report.write_json(out / "runs" / f"{stem}.json")
    (out / "summary.json").write_text(table.to_json())
    (out / "summary.txt").write_text(table.to_text())
    f0 = table.fractions[0]
    curves = [r.report for r in results if r.fraction == f0 and r.repeat == 0 and r.report is not None]
    if curves:
        emit_learning_curves(curves, out / "curves.csv")


def emit_learning_curves(reports, path):
    """Wide CSV: epoch, then train_rmse / val_rmse / violation per report."""
    if not reports:
        raise ShapeError("no reports to write")
    n = reports[0].epochs
    if any(r.epochs != n for r in reports):
        raise ShapeError(f"reports disagree on epoch count: {[r.epochs for r in reports]}")
    tags = [r.mode for r in reports]
    if len(set(tags)) != len(tags):
        tags = [f"{t}_{i}" for i, t in enumerate(tags)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", *(f"{t}_{k}" for t in tags for k in ("train_rmse", "val_rmse", "violation"))])
        for e in range(n):
            row = [e + 1]
            for r in reports:
                row += [repr(r.train_rmse[e]), repr(r.val_rmse[e]), repr(r.mean_violation[e])]
            w.writerow(row)
