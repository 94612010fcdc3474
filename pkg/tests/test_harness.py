import csv
import json
import math
from itertools import product

import pytest

from kkt_hpinn import harness
from kkt_hpinn.errors import ConfigError, ShapeError
from kkt_hpinn.harness import (
    ExperimentConfig,
    cell_seed,
    emit_learning_curves,
    run_experiment,
    split_seed,
)
from kkt_hpinn.training import TrainConfig


def small_config(**kw):
    base = dict(task="cstr", n_samples=200, n_repeats=2, holdout_fractions=(0.2, 0.4),
                train=TrainConfig(epochs=3, seed=1))
    base.update(kw)
    return ExperimentConfig(**base)


@pytest.fixture(scope="module")
def experiment(tmp_path_factory):
    out = tmp_path_factory.mktemp("exp")
    return run_experiment(small_config(out_dir=str(out))), out


def test_config_validation():
    with pytest.raises(ConfigError):
        small_config(modes=[])
    with pytest.raises(ConfigError):
        small_config(modes=["nn", "nn"])
    with pytest.raises(ConfigError):
        small_config(n_repeats=0)
    with pytest.raises(ConfigError):
        small_config(holdout_fractions=(0.0,))
    with pytest.raises(ConfigError):
        small_config(task="nope")
    cfg = small_config(modes=["nn", "pinn:0.5", "pinn:2"])
    assert [m.tag for m in cfg.modes] == ["nn", "pinn0.5", "pinn2"]


def test_cell_seeds_are_injective():
    seeds = [cell_seed(b, m, f, r) for b, m, f, r in
             product(range(3), range(4), (0.1, 0.2, 0.25, 0.3, 0.4), range(12))]
    assert len(set(seeds)) == len(seeds)
    with pytest.raises(ConfigError):
        cell_seed(0, harness.MAX_MODES, 0.2, 0)


def test_split_seed_shared_across_modes():
    assert split_seed(3, 0.3, 4) == split_seed(3, 0.3, 4)
    assert split_seed(3, 0.3, 4) != split_seed(3, 0.3, 5)


def test_summary_structure(experiment):
    table, out = experiment
    assert table.complete
    assert set(table.cells) == {f"{m}@{f}" for m in ("nn", "pinn", "kkt_hpinn", "nn_post") for f in ("0.2", "0.4")}
    for c in table.cells.values():
        assert c["n_ok"] == 2 and c["n_failed"] == 0
    assert table.cell("kkt_hpinn", 0.2)["mean_violation"]["mean"] <= 1e-9
    assert table.cell("nn", 0.4)["rmse_unconstrained"] == {"mean": None, "std": None}
    for f in (0.2, 0.4):
        assert table.cell("nn", f)["improvement"]["rmse_overall"] == 0.0
        assert all(v is None for v in table.cell("pinn", f)["improvement"].values())
    runs = sorted(p.name for p in (out / "runs").iterdir())
    assert len(runs) == 2 * 4 * 2 * 2 and "kkt_hpinn_0.2_1.json" in runs
    text = (out / "summary.txt").read_text()
    assert text.splitlines()[0].split()[:2] == ["mode", "holdout"]
    assert len(text.splitlines()) == 1 + 8


def test_aggregates_match_per_run_files(experiment):
    table, out = experiment
    for key, cell in table.cells.items():
        m, f = key.split("@")
        vals = [json.loads((out / "runs" / f"{m}_{f}_{r}.json").read_text())["test"]["rmse_overall"]
                for r in range(2)]
        mean = sum(vals) / 2
        std = math.sqrt(sum((v - mean) ** 2 for v in vals))  # n - 1 = 1
        assert abs(cell["rmse_overall"]["mean"] - mean) <= 1e-12
        assert abs(cell["rmse_overall"]["std"] - std) <= 1e-12
        nn = table.cells[f"nn@{f}"]["rmse_overall"]["mean"]
        if m != "pinn":
            assert abs(cell["improvement"]["rmse_overall"] - (nn - mean) / nn) <= 1e-12


def test_summary_json_is_byte_identical(experiment, tmp_path):
    table, out = experiment
    run_experiment(small_config(out_dir=str(tmp_path)))
    assert (tmp_path / "summary.json").read_bytes() == (out / "summary.json").read_bytes()


def test_parallel_matches_serial(experiment, tmp_path):
    _, out = experiment
    run_experiment(small_config(out_dir=str(tmp_path), jobs=2))
    assert (tmp_path / "summary.json").read_bytes() == (out / "summary.json").read_bytes()


def test_single_repeat_has_zero_std():
    table = run_experiment(small_config(n_repeats=1, modes=["nn"], holdout_fractions=(0.3,)))
    stat = table.cell("nn", 0.3)["rmse_overall"]
    assert stat["std"] == 0.0 and stat["mean"] > 0


def test_modes_share_test_split(monkeypatch):
    real, seen = harness.train, {}

    def spy(net, mode, dataset, config, test=None, **kw):
        seen[mode.tag] = (test.X.tobytes(), config.seed)
        return real(net, mode, dataset, config, test=test, **kw)

    monkeypatch.setattr(harness, "train", spy)
    run_experiment(small_config(n_repeats=1, modes=["nn", "nn_post"], holdout_fractions=(0.3,)))
    assert seen["nn"][0] == seen["nn_post"][0]
    assert seen["nn"][1] != seen["nn_post"][1]


def test_failed_cell_is_recorded(monkeypatch):
    real = harness.train

    def flaky(net, mode, *a, **kw):
        if mode.variant == "pinn":
            raise RuntimeError("boom")
        return real(net, mode, *a, **kw)

    monkeypatch.setattr(harness, "train", flaky)
    table = run_experiment(small_config(n_repeats=1, modes=["nn", "pinn"], holdout_fractions=(0.2,)))
    assert not table.complete
    cell = table.cell("pinn", 0.2)
    assert cell["n_ok"] == 0 and cell["n_failed"] == 1
    assert cell["failures"] == [{"repeat": 0, "error": "RuntimeError: boom"}]
    assert cell["rmse_overall"]["mean"] is None
    assert table.cell("nn", 0.2)["n_ok"] == 1


def test_learning_curves(experiment, tmp_path):
    table, out = experiment
    reports = [r.report for r in table.results]
    emit_learning_curves(reports[:1], tmp_path / "one.csv")
    rows = list(csv.reader(open(tmp_path / "one.csv")))
    assert len(rows[0]) == 4 and len(rows) == 1 + 3
    assert float(rows[3][2]) == reports[0].val_rmse[2]
    curves = list(csv.reader(open(out / "curves.csv")))
    assert curves[0][0] == "epoch" and len(curves[0]) == 1 + 3 * 4
    short = table.results[0].report
    import copy
    trimmed = copy.copy(short)
    trimmed.train_rmse = short.train_rmse[:2]
    trimmed.val_rmse = short.val_rmse[:2]
    trimmed.mean_violation = short.mean_violation[:2]
    with pytest.raises(ShapeError):
        emit_learning_curves([short, trimmed], tmp_path / "bad.csv")
    with pytest.raises(ShapeError):
        emit_learning_curves([], tmp_path / "none.csv")
