import numpy as np
import pytest

from kkt_hpinn.data import (
    TASKS,
    Dataset,
    cstr_extent,
    cstr_outputs,
    filter_feasible,
    fit_maxabs,
    generate,
    manifest_path,
    read_csv,
    spec_from_text,
    spec_to_text,
    split_flow,
    write_csv,
)
from kkt_hpinn.errors import ConfigError, DataError, ParseError, ScaleError, SchemaError
from kkt_hpinn.projection import apply_projection, build_projection, violation

SMALL = {"cstr": 200, "plant": 200, "distillation": 300}


@pytest.mark.parametrize("task", sorted(TASKS))
def test_generators_are_deterministic(task):
    a = generate(task, SMALL[task], seed=5)
    b = generate(task, SMALL[task], seed=5)
    c = generate(task, SMALL[task], seed=6)
    assert a.X.tobytes() == b.X.tobytes() and a.Y.tobytes() == b.Y.tobytes()
    assert not np.array_equal(a.X, c.X)


@pytest.mark.parametrize("task", sorted(TASKS))
@pytest.mark.parametrize("noise", [0.0, 0.05])
def test_generated_rows_are_feasible(task, noise):
    ds = generate(task, SMALL[task], seed=1, noise_std=noise)
    assert ds.n == SMALL[task]
    assert ds.violations().max() <= 1e-12 * max(1.0, np.abs(ds.Y).max())
    assert ds.X.shape[1] == TASKS[task].n_inputs and ds.Y.shape[1] == TASKS[task].n_outputs


def test_noise_changes_outputs():
    clean = generate("plant", 100, seed=2)
    noisy = generate("plant", 100, seed=2, noise_std=0.05)
    assert np.array_equal(clean.X, noisy.X)
    assert np.abs(clean.Y - noisy.Y).max() > 1e-3


def test_unknown_task_and_bad_n():
    with pytest.raises(ConfigError):
        generate("reactor", 10)
    with pytest.raises(ConfigError):
        generate("cstr", 0)


def test_cstr_hand_examples():
    assert np.allclose(cstr_outputs(1.0, 1.0, 0.0), [0.0, 1.0, 1.0])
    assert np.allclose(cstr_outputs(2.0, 1.0, 0.5), [0.5, 1.5, 0.5])
    # extent grows with temperature and never exceeds the limiting feed
    lo, hi = cstr_extent(550.0, 2.0, 1.0), cstr_extent(700.0, 2.0, 1.0)
    assert 0 < lo < hi < 1.0


def test_cstr_conversion_range():
    ds = generate("cstr", 500, seed=0)
    conv = ds.Y[:, 0] / np.minimum(ds.X[:, 1], ds.X[:, 2])
    assert conv.min() > 0.4 and conv.max() < 0.95


def test_plant_products_bounded_by_totals():
    ds = generate("plant", 300, seed=0)
    assert np.all(ds.Y[:, 1] <= ds.Y[:, 0]) and np.all(ds.Y[:, 3] <= ds.Y[:, 2])
    assert np.all(ds.Y > 0)


def test_split_flow():
    assert np.array_equal(split_flow(5.0, [1.0, 0.0, 0.0]), [5.0, 0.0, 0.0])
    parts = split_flow(np.array([3.0, 6.0]), [[1, 1, 1], [1, 2, 3]])
    assert np.allclose(parts, [[1, 1, 1], [1, 2, 3]])
    with pytest.raises(DataError):
        split_flow(1.0, [1.0, -0.5])


def _toy(X, Y, spec=None):
    spec = spec or TASKS["cstr"].spec
    return Dataset(np.asarray(X, float), np.asarray(Y, float), spec,
                   x_names=("a", "b", "c"), y_names=("p", "q", "r"))


def test_fit_maxabs_hand_example():
    X = [[2.0, 1.0, 1.0], [-4.0, 1.0, 1.0], [1.0, 1.0, 1.0]]
    ds = fit_maxabs(_toy(X, np.ones((3, 3))))
    assert ds.scale_x[0] == 4.0
    assert np.array_equal(ds.X[:, 0], [0.5, -1.0, 0.25])
    again = fit_maxabs(ds)
    assert again.extra["last_fit"]["x"] == [1.0, 1.0, 1.0]
    assert np.array_equal(again.X, ds.X) and np.array_equal(again.scale_x, ds.scale_x)


def test_fit_maxabs_round_trip_and_spec():
    raw = generate("plant", 150, seed=3)
    ds = fit_maxabs(raw)
    assert np.abs(ds.X).max() == 1.0 and np.abs(ds.Y).max() == 1.0
    back = ds.unscaled()
    assert np.abs(back.X - raw.X).max() <= 1e-14 * np.abs(raw.X).max()
    assert np.abs(back.Y - raw.Y).max() <= 1e-14 * np.abs(raw.Y).max()
    # rescaled constraints measure the same violation in either unit system
    assert violation(ds.working_spec, ds.X, ds.Y).max() <= 1e-12
    y_bad = ds.Y.copy()
    y_bad[:, 0] += 0.01
    v_scaled = violation(ds.working_spec, ds.X, y_bad)
    v_orig = violation(raw.spec, raw.X, y_bad * ds.scale_y)
    assert np.allclose(v_scaled, v_orig, rtol=1e-10)


def test_fit_maxabs_zero_column():
    X = [[0.0, 1.0, 1.0], [0.0, 2.0, 1.0]]
    with pytest.raises(ScaleError, match="'a'"):
        fit_maxabs(_toy(X, np.ones((2, 3))))


def test_filter_feasible():
    ds = generate("cstr", 50, seed=4)
    tol = TASKS["cstr"].tolerance
    Y = ds.Y.copy()
    row = TASKS["cstr"].spec.B[0]
    Y[7] += 10 * tol * row / np.linalg.norm(row)
    bad = Dataset(ds.X, Y, ds.spec, x_names=ds.x_names, y_names=ds.y_names)
    kept = filter_feasible(bad, tol)
    assert kept.n == 49 and kept.extra["filter"]["dropped"] == 1
    assert not np.any(np.all(kept.Y == Y[7], axis=1))
    assert filter_feasible(bad, 1e6).n == 50
    with pytest.raises(DataError):
        filter_feasible(bad.subset([7]), tol)
    with pytest.raises(ConfigError):
        filter_feasible(bad, 0.0)


def test_dataset_validation():
    with pytest.raises(Exception):
        _toy(np.ones((3, 2)), np.ones((3, 3)))
    with pytest.raises(Exception):
        _toy(np.ones((3, 3)), np.ones((2, 3)))


def test_spec_text_round_trip():
    spec = TASKS["distillation"].spec
    back = spec_from_text(spec_to_text(spec))
    assert np.array_equal(back.A, spec.A) and np.array_equal(back.B, spec.B)
    assert np.array_equal(back.b, spec.b)


@pytest.mark.parametrize("task", sorted(TASKS))
def test_csv_round_trip(task, tmp_path):
    ds = fit_maxabs(generate(task, 120, seed=8, noise_std=0.01))
    path = tmp_path / "d.csv"
    write_csv(path, ds)
    assert manifest_path(path).exists()
    back = read_csv(path)
    assert np.abs(back.X - ds.X).max() <= 1e-15
    assert np.abs(back.Y - ds.Y).max() <= 1e-15
    assert np.array_equal(back.scale_x, ds.scale_x) and np.array_equal(back.scale_y, ds.scale_y)
    assert back.task == task and back.tolerance == ds.tolerance
    # the manifest spec alone reconstructs a valid projection
    proj = build_projection(back.working_spec)
    assert violation(back.working_spec, back.X, apply_projection(proj, back.X, back.Y)).max() <= 1e-12


def test_csv_missing_column(tmp_path):
    ds = generate("cstr", 10, seed=0)
    path = tmp_path / "d.csv"
    write_csv(path, ds)
    lines = path.read_text().splitlines()
    trimmed = [",".join(line.split(",")[:-1]) for line in lines]
    path.write_text("\n".join(trimmed) + "\n")
    with pytest.raises(SchemaError, match="F_E_out"):
        read_csv(path)


def test_csv_extra_column(tmp_path):
    ds = generate("cstr", 10, seed=0)
    path = tmp_path / "d.csv"
    write_csv(path, ds)
    lines = path.read_text().splitlines()
    lines = [lines[0] + ",junk"] + [line + ",0" for line in lines[1:]]
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(SchemaError, match="junk"):
        read_csv(path)


@pytest.mark.parametrize("bad", ["1.0,abc,2,3,4,5", "1,2,3", "1,2,3,4,5,nan"])
def test_csv_malformed_row(tmp_path, bad):
    ds = generate("cstr", 5, seed=0)
    path = tmp_path / "d.csv"
    write_csv(path, ds)
    lines = path.read_text().splitlines()
    lines.insert(4, bad)
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(ParseError) as err:
        read_csv(path)
    assert err.value.line == 5 and ":5:" in str(err.value)


def test_csv_missing_files(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_csv(tmp_path / "none.csv")
