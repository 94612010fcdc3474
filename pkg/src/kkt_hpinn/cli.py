"""Command line entry point: generate, train, evaluate, experiment, verify."""

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .data import TASKS, fit_maxabs, generate, read_csv, write_csv
from .errors import ConfigError, DataError, ShapeError, SingularityError, TrainingError
from .harness import ExperimentConfig, run_experiment
from .network import init_mlp, load_checkpoint, save_checkpoint
from .projection import rescale_constraints
from .training import TrainConfig, TrainMode, evaluate, split_indices, train
from .verify import run_checks

log = logging.getLogger("kkt_hpinn")


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text):
    return tuple(int(v) for v in text.split(",") if v.strip())


def _add_train_flags(p):
    p.add_argument("--epochs", type=int, default=1000, help="training epochs (default 1000)")
    p.add_argument("--batch-size", type=int, default=16, help="minibatch size (default 16)")
    p.add_argument("--lr", type=float, default=1e-4, help="Adam learning rate (default 1e-4)")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0,
                   help="PINN penalty weight (default 1.0)")
    p.add_argument("--seed", type=int, default=0, help="base random seed (default 0)")
    p.add_argument("--activation", choices=["relu", "tanh"], default="relu",
                   help="hidden-layer activation (default relu)")
    p.add_argument("--hidden", type=_ints, default=None,
                   help="hidden layer widths, comma separated (default: per task)")


def build_parser():
    parser = argparse.ArgumentParser(prog="kkt-hpinn", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic task dataset (CSV + JSON manifest)")
    g.add_argument("--task", choices=sorted(TASKS), required=True, help="case study to synthesize")
    g.add_argument("--n", type=int, default=None, help="number of samples (default: per task)")
    g.add_argument("--seed", type=int, default=0, help="generator seed (default 0)")
    g.add_argument("--noise", type=float, default=0.0,
                   help="relative null-space noise level (default 0)")
    g.add_argument("--out", required=True, help="output CSV path, or a directory for <task>.csv")

    t = sub.add_parser("train", help="train one mode on one dataset")
    t.add_argument("--data", required=True, help="dataset CSV (manifest alongside)")
    t.add_argument("--mode", default="kkt_hpinn", help="nn | pinn | kkt_hpinn | nn_post")
    t.add_argument("--holdout", type=float, default=0.2, help="test fraction (default 0.2)")
    t.add_argument("--out", required=True, help="output directory")
    _add_train_flags(t)

    e = sub.add_parser("evaluate", help="evaluate a checkpoint on a dataset")
    e.add_argument("--checkpoint", required=True, help="model .npz written by train")
    e.add_argument("--data", required=True, help="dataset CSV (manifest alongside)")
    e.add_argument("--mode", default=None, help="override the mode stored in the checkpoint")
    e.add_argument("--out", default=None, help="optional JSON file for the metrics")

    x = sub.add_parser("experiment", help="repeated-seed comparison of modes")
    x.add_argument("--task", choices=sorted(TASKS), default="cstr", help="synthetic task")
    x.add_argument("--data", default=None, help="use this dataset CSV instead of generating")
    x.add_argument("--mode", action="append", default=None,
                   help="mode to include; repeat or comma separate (default: all four)")
    x.add_argument("--repeats", type=int, default=10, help="repeats per cell (default 10)")
    x.add_argument("--holdout", type=_floats, default=[0.2, 0.3, 0.4],
                   help="held-out test fractions, comma separated (default 0.2,0.3,0.4)")
    x.add_argument("--n", type=int, default=None, help="samples to generate (default: per task)")
    x.add_argument("--noise", type=float, default=0.0, help="generator noise level (default 0)")
    x.add_argument("--data-seed", type=int, default=0, help="generator seed (default 0)")
    x.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    x.add_argument("--out", required=True, help="output directory")
    _add_train_flags(x)

    v = sub.add_parser("verify", help="run the projection and gradient invariant checks")
    v.add_argument("--seed", type=int, default=0, help="seed for random instances (default 0)")
    return parser


def _mode(text, lam):
    mode = TrainMode.parse(text, lam)
    return mode


def _cmd_generate(args):
    ds = generate(args.task, args.n, args.seed, args.noise)
    out = Path(args.out)
    if out.suffix.lower() != ".csv":
        out.mkdir(parents=True, exist_ok=True)
        out = out / f"{args.task}.csv"
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(out, ds)
    print(f"wrote {ds.n} samples to {out}")
    return 0


def _load_scaled(path):
    ds = read_csv(path)
    if ds.is_scaled:
        ds = ds.unscaled()
    return fit_maxabs(ds)


def _cmd_train(args):
    mode = _mode(args.mode, args.lam)
    ds = _load_scaled(args.data)
    task = TASKS.get(ds.task)
    hidden = args.hidden or (task.hidden if task else (32, 32))
    dims = [ds.X.shape[1], *hidden, ds.Y.shape[1]]
    keep, test = split_indices(ds.n, args.holdout, [args.seed, 1000])
    cfg = TrainConfig(epochs=args.epochs, batch_size=args.batch_size,
                      learning_rate=args.lr, seed=args.seed)
    net = init_mlp(dims, args.activation, args.seed)
    net, report = train(net, mode, ds.subset(keep), cfg, test=ds.subset(test))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report.write_csv(out / "run.csv")
    report.write_json(out / "run.json")
    meta = {"mode": mode.variant, "lam": mode.lam, "scale_x": ds.scale_x.tolist(),
            "scale_y": ds.scale_y.tolist(), "task": ds.task}
    save_checkpoint(out / "model.npz", net, meta)
    print(json.dumps(report.test, indent=2))
    print(f"report and checkpoint written to {out}")
    return 0


def _cmd_evaluate(args):
    net, meta = load_checkpoint(args.checkpoint)
    mode = _mode(args.mode or meta.get("mode", "nn"), meta.get("lam"))
    ds = read_csv(args.data)
    if ds.is_scaled:
        ds = ds.unscaled()
    sx = np.asarray(meta.get("scale_x", np.ones(ds.X.shape[1])))
    sy = np.asarray(meta.get("scale_y", np.ones(ds.Y.shape[1])))
    spec = rescale_constraints(ds.spec, sx, sy)
    metrics = evaluate(net, mode, (ds.X / sx, ds.Y / sy), spec)
    text = json.dumps(metrics, indent=2)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n")
    return 0


def _cmd_experiment(args):
    names = []
    for chunk in args.mode or ["nn,pinn,kkt_hpinn,nn_post"]:
        names += [c for c in chunk.split(",") if c.strip()]
    modes = [_mode(n, args.lam) for n in names]
    cfg = ExperimentConfig(
        task=args.task, modes=modes, n_repeats=args.repeats, holdout_fractions=args.holdout,
        train=TrainConfig(epochs=args.epochs, batch_size=args.batch_size,
                          learning_rate=args.lr, seed=args.seed),
        out_dir=args.out, n_samples=args.n, data_seed=args.data_seed, noise_std=args.noise,
        data_path=args.data, activation=args.activation, hidden=args.hidden, jobs=args.jobs,
    )
    table = run_experiment(cfg)
    print(table.to_text(), end="")
    if not table.complete:
        print("warning: some runs failed; see summary.json", file=sys.stderr)
    return 0


def _cmd_verify(args):
    checks = run_checks(args.seed)
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.detail}")
    failed = [c for c in checks if not c.passed]
    if failed:
        print(f"{len(failed)} of {len(checks)} invariant checks failed")
        return 1
    print(f"all {len(checks)} invariant checks passed")
    return 0


COMMANDS = {
    "generate": _cmd_generate,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "experiment": _cmd_experiment,
    "verify": _cmd_verify,
}


def cli_main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, DataError, ShapeError, SingularityError, TrainingError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(cli_main())
