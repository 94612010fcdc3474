"""Synthetic case-study datasets, max-abs scaling and CSV persistence.

The generators are analytic stand-ins for process simulators.  Each one
reproduces the linear balance structure of its unit exactly; the remaining
input/output behaviour comes from fixed smooth nonlinear maps.

CSTR (3 inputs, 3 outputs)
    x = (T, F_B, F_E), y = (F_EB, F_B,out, F_E,out)
    x2 - x3 - y2 + y3 = 0      reactant consumption
    x2 - y1 - y2 = 0           ethylbenzene production
Plant (4 inputs, 5 outputs)
    x1 + x2 + x3 - x4 - y1 - y3 - y5 = 0
Distillation (5 inputs, 10 outputs)
    x3 - y1 - y7 - y8 = 0
    x5 - y2 - y9 - y10 = 0
"""

import csv
import json
import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, ParseError, ScaleError, SchemaError
from .projection import ConstraintSpec, apply_projection, build_projection, rescale_constraints

log = logging.getLogger(__name__)

MANIFEST_VERSION = 1

# CSTR kinetics: k(T) = CSTR_PREEXP * exp(-CSTR_EA / T), residence time CSTR_TAU
CSTR_PREEXP = 5e4
CSTR_EA = 6000.0
CSTR_TAU = 1.0

# seed of the fixed nonlinear maps behind the plant and distillation data
MAP_SEED = 20240


@dataclass(frozen=True)
class TaskDef:
    name: str
    x_names: tuple
    y_names: tuple
    spec: ConstraintSpec
    ranges: tuple
    tolerance: float
    hidden: tuple
    default_n: int

    @property
    def n_inputs(self):
        return len(self.x_names)

    @property
    def n_outputs(self):
        return len(self.y_names)

    def layer_dims(self):
        return [self.n_inputs, *self.hidden, self.n_outputs]


@dataclass(eq=False)
class Dataset:
    """Paired samples plus the constraints they satisfy.

    ``spec`` is always in original units.  ``X`` and ``Y`` hold values divided
    by ``scale_x`` / ``scale_y`` (both ones before scaling), and
    ``working_spec`` is the same constraint set expressed in those units.
    """

    X: np.ndarray
    Y: np.ndarray
    spec: ConstraintSpec
    scale_x: np.ndarray = None
    scale_y: np.ndarray = None
    x_names: tuple = None
    y_names: tuple = None
    task: str = "custom"
    tolerance: float = None
    seed: int = None
    noise_std: float = 0.0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.Y = np.asarray(self.Y, dtype=np.float64)
        if self.X.ndim != 2 or self.Y.ndim != 2 or self.X.shape[0] != self.Y.shape[0]:
            raise DataError(f"X {self.X.shape} and Y {self.Y.shape} must be 2-D with equal rows")
        if not (np.isfinite(self.X).all() and np.isfinite(self.Y).all()):
            raise DataError("dataset contains non-finite values")
        n0, nl = self.X.shape[1], self.Y.shape[1]
        if self.spec.n_inputs != n0 or self.spec.n_outputs != nl:
            raise DataError("constraint dimensions do not match the data")
        self.scale_x = np.ones(n0) if self.scale_x is None else np.asarray(self.scale_x, dtype=np.float64)
        self.scale_y = np.ones(nl) if self.scale_y is None else np.asarray(self.scale_y, dtype=np.float64)
        if np.any(self.scale_x <= 0) or np.any(self.scale_y <= 0):
            raise ScaleError("scales must be strictly positive")
        self.x_names = tuple(self.x_names or (f"x{i + 1}" for i in range(n0)))
        self.y_names = tuple(self.y_names or (f"y{i + 1}" for i in range(nl)))

    @property
    def n(self):
        return self.X.shape[0]

    @cached_property
    def working_spec(self):
        return rescale_constraints(self.spec, self.scale_x, self.scale_y)

    @property
    def is_scaled(self):
        return bool(np.any(self.scale_x != 1.0) or np.any(self.scale_y != 1.0))

    def violations(self):
        return np.linalg.norm(self.working_spec.residual(self.X, self.Y), axis=1)

    def subset(self, idx):
        return replace(self, X=self.X[idx], Y=self.Y[idx], extra=dict(self.extra))

    def unscaled(self):
        return replace(self, X=self.X * self.scale_x, Y=self.Y * self.scale_y,
                       scale_x=None, scale_y=None, extra=dict(self.extra))


def _maxabs(M, names):
    s = np.abs(M).max(axis=0)
    for j, v in enumerate(s):
        if v == 0.0:
            raise ScaleError(f"variable {names[j]!r} is identically zero; cannot scale")
    return s


def fit_maxabs(ds):
    """Divide every column by its maximum absolute value.

    Scales compose, so refitting an already scaled dataset is a no-op.
    """
    if ds.n == 0:
        raise DataError("cannot scale an empty dataset")
    sx = _maxabs(ds.X, ds.x_names)
    sy = _maxabs(ds.Y, ds.y_names)
    out = replace(ds, X=ds.X / sx, Y=ds.Y / sy, scale_x=ds.scale_x * sx,
                  scale_y=ds.scale_y * sy, extra=dict(ds.extra))
    out.extra["last_fit"] = {"x": sx.tolist(), "y": sy.tolist()}
    return out


def filter_feasible(ds, tol):
    """Drop rows whose constraint violation (2-norm) exceeds ``tol``."""
    if not tol > 0:
        raise ConfigError("tolerance must be positive")
    keep = ds.violations() <= tol
    n_keep = int(keep.sum())
    if n_keep == 0:
        raise DataError(f"all {ds.n} rows violate the tolerance {tol:g}")
    log.info("feasibility filter (tol=%g): kept %d, dropped %d", tol, n_keep, ds.n - n_keep)
    out = ds.subset(np.flatnonzero(keep))
    out.extra["filter"] = {"tol": tol, "retained": n_keep, "dropped": ds.n - n_keep}
    return out


class SmoothMap:
    """Fixed random map [0,1]^d -> R^k built from sinusoid and sigmoid ridges."""

    def __init__(self, n_in, n_out, n_terms=6, seed=MAP_SEED):
        rng = np.random.default_rng(seed)
        self.freq = rng.normal(0.0, 2.0, size=(n_out, n_terms, n_in))
        self.phase = rng.uniform(0.0, 2 * np.pi, size=(n_out, n_terms))
        self.amp = rng.normal(0.0, 1.0, size=(n_out, n_terms)) / np.sqrt(n_terms)
        self.gate_w = rng.normal(0.0, 3.0, size=(n_out, n_in))
        self.gate_b = rng.normal(0.0, 1.0, size=n_out)

    def __call__(self, u):
        u = np.atleast_2d(u)
        ridge = np.einsum("ktd,nd->nkt", self.freq, u) + self.phase
        waves = np.einsum("nkt,kt->nk", np.sin(ridge), self.amp)
        gate = 1.0 / (1.0 + np.exp(-(u @ self.gate_w.T + self.gate_b)))
        return waves + gate - 0.5


def _softmax(z):
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def _sample_inputs(rng, ranges, n):
    lo = np.array([r[0] for r in ranges])
    hi = np.array([r[1] for r in ranges])
    u = rng.uniform(size=(n, len(ranges)))
    return lo + u * (hi - lo), u


def _check_n(n):
    if int(n) < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    return int(n)


def _finish(task, X, Y, seed, noise_std, rng):
    """Clean up round-off, add null-space noise, filter and wrap."""
    spec = task.spec
    proj = build_projection(spec)
    Y = apply_projection(proj, X, Y)
    if noise_std > 0:
        eps = rng.normal(size=Y.shape) * (noise_std * Y.std(axis=0))
        Y = Y + eps @ proj.b_star
    ds = Dataset(X, Y, spec, x_names=task.x_names, y_names=task.y_names, task=task.name,
                 tolerance=task.tolerance, seed=seed, noise_std=float(noise_std))
    return filter_feasible(ds, task.tolerance)


# ---------------------------------------------------------------- CSTR

def cstr_extent(T, F_B, F_E):
    """Reaction extent of B + E -> EB in a first-order CSTR."""
    k = CSTR_PREEXP * np.exp(-CSTR_EA / np.asarray(T, dtype=np.float64))
    return np.minimum(F_B, F_E) * k * CSTR_TAU / (1.0 + k * CSTR_TAU)


def cstr_outputs(F_B, F_E, extent):
    return np.stack(np.broadcast_arrays(extent, F_B - extent, F_E - extent), axis=-1)


def cstr_generate(n=None, seed=0, noise_std=0.0):
    task = TASKS["cstr"]
    n = _check_n(task.default_n if n is None else n)
    rng = np.random.default_rng(seed)
    X, _ = _sample_inputs(rng, task.ranges, n)
    T, F_B, F_E = X.T
    Y = cstr_outputs(F_B, F_E, cstr_extent(T, F_B, F_E))
    return _finish(task, X, Y, seed, noise_std, rng)


# ---------------------------------------------------------------- plant

_PLANT_MAP = None

# molar masses [kg/kmol] for 2 MeOH -> DME + H2O and 2 EtOH -> DEE + H2O
MW_MEOH, MW_ETOH, MW_DME, MW_DEE = 32.04, 46.07, 46.07, 74.12


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def plant_generate(n=None, seed=0, noise_std=0.0):
    """Alcohol dehydration plant on a mass basis.

    Conversions and product purities are smooth nonlinear functions of the
    feed; the water stream closes the overall mass balance.
    """
    global _PLANT_MAP
    task = TASKS["plant"]
    n = _check_n(task.default_n if n is None else n)
    rng = np.random.default_rng(seed)
    rows, us = [], []
    need = n
    while need > 0:
        X, u = _sample_inputs(rng, task.ranges, need)
        ok = X[:, :3].sum(axis=1) > X[:, 3]
        rows.append(X[ok])
        us.append(u[ok])
        need -= int(ok.sum())
    X, u = np.concatenate(rows), np.concatenate(us)
    if _PLANT_MAP is None:
        _PLANT_MAP = SmoothMap(4, 4, seed=MAP_SEED)
    h = _PLANT_MAP(u)
    meoh, etoh, water, purge = X.T
    conv_m = 0.5 + 0.4 * _sigmoid(1.5 * h[:, 0] + 2.0 * (u[:, 2] - 0.5))
    conv_e = 0.4 + 0.45 * _sigmoid(1.5 * h[:, 1] - 2.0 * (u[:, 3] - 0.5))
    dme = meoh * conv_m * MW_DME / (2 * MW_MEOH)
    dee = etoh * conv_e * MW_DEE / (2 * MW_ETOH)
    Y = np.empty((n, 5))
    Y[:, 1] = dme
    Y[:, 0] = dme / (0.92 + 0.07 * _sigmoid(2.0 * h[:, 2]))
    Y[:, 3] = dee
    Y[:, 2] = dee / (0.88 + 0.10 * _sigmoid(2.0 * h[:, 3]))
    Y[:, 4] = meoh + etoh + water - purge - Y[:, 0] - Y[:, 2]
    return _finish(task, X, Y, seed, noise_std, rng)


# ---------------------------------------------------------------- distillation

_DIST_MAP = None


def split_flow(total, shares):
    """Split ``total`` into parts proportional to nonnegative ``shares``."""
    shares = np.asarray(shares, dtype=np.float64)
    if np.any(shares < 0):
        raise DataError("shares must be nonnegative")
    shares = shares / shares.sum(axis=-1, keepdims=True)
    return np.asarray(total, dtype=np.float64)[..., None] * shares


def distillation_generate(n=None, seed=0, noise_std=0.0):
    global _DIST_MAP
    task = TASKS["distillation"]
    n = _check_n(task.default_n if n is None else n)
    rng = np.random.default_rng(seed)
    X, u = _sample_inputs(rng, task.ranges, n)
    if _DIST_MAP is None:
        _DIST_MAP = SmoothMap(5, 10, seed=MAP_SEED + 1)
    h = _DIST_MAP(u)
    solvent, rr1, d1, rr2, d2 = X.T
    c7 = split_flow(d1, _softmax(np.column_stack([2.5 + h[:, 0] + u[:, 0], h[:, 1], -1.0 + h[:, 2]])))
    tol = split_flow(d2, _softmax(np.column_stack([2.0 + h[:, 3] + u[:, 1], h[:, 4], -0.5 + h[:, 5]])))
    Y = np.empty((n, 10))
    Y[:, 0], Y[:, 6], Y[:, 7] = c7.T
    Y[:, 1], Y[:, 8], Y[:, 9] = tol.T
    # heat duties (unconstrained): condensers negative, reboilers positive
    vap1 = (1.0 + rr1) * d1
    vap2 = (1.0 + rr2) * d2
    Y[:, 2] = -0.03 * vap1 * (1.0 + 0.1 * h[:, 6])
    Y[:, 3] = 0.035 * vap1 * (1.0 + 0.1 * h[:, 7]) + 0.004 * solvent
    Y[:, 4] = -0.028 * vap2 * (1.0 + 0.1 * h[:, 8])
    Y[:, 5] = 0.04 * vap2 * (1.0 + 0.1 * h[:, 9]) + 0.006 * solvent
    return _finish(task, X, Y, seed, noise_std, rng)


TASKS = {
    "cstr": TaskDef(
        name="cstr",
        x_names=("T", "F_B", "F_E"),
        y_names=("F_EB_out", "F_B_out", "F_E_out"),
        spec=ConstraintSpec(A=[[0, 1, -1], [0, 1, 0]], B=[[0, -1, 1], [-1, -1, 0]], b=[0, 0]),
        ranges=((550.0, 700.0), (0.5, 3.0), (0.5, 3.0)),
        tolerance=1e-8,
        hidden=(12, 12),
        default_n=1500,
    ),
    "plant": TaskDef(
        name="plant",
        x_names=("feed_methanol", "feed_ethanol", "feed_water", "purge_total"),
        y_names=("dme_total", "dme_dme", "dee_total", "dee_dee", "water_total"),
        spec=ConstraintSpec(A=[[1, 1, 1, -1]], B=[[-1, 0, -1, 0, -1]], b=[0]),
        ranges=((50.0, 150.0), (30.0, 100.0), (10.0, 60.0), (1.0, 20.0)),
        tolerance=1e-6,
        hidden=(32, 32),
        default_n=1200,
    ),
    "distillation": TaskDef(
        name="distillation",
        x_names=("solvent_phenol", "reflux_col1", "distillate_col1", "reflux_col2", "distillate_col2"),
        y_names=("c7_heptane", "tol_toluene", "q_cond_col1", "q_reb_col1", "q_cond_col2",
                 "q_reb_col2", "c7_toluene", "c7_phenol", "tol_heptane", "tol_phenol"),
        spec=ConstraintSpec(
            A=[[0, 0, 1, 0, 0], [0, 0, 0, 0, 1]],
            B=[[-1, 0, 0, 0, 0, 0, -1, -1, 0, 0], [0, -1, 0, 0, 0, 0, 0, 0, -1, -1]],
            b=[0, 0],
        ),
        ranges=((100.0, 300.0), (1.5, 6.0), (40.0, 60.0), (1.0, 4.0), (40.0, 60.0)),
        tolerance=1e-8,
        hidden=(32, 32),
        default_n=5000,
    ),
}

GENERATORS = {
    "cstr": cstr_generate,
    "plant": plant_generate,
    "distillation": distillation_generate,
}


def generate(task, n=None, seed=0, noise_std=0.0):
    if task not in GENERATORS:
        raise ConfigError(f"unknown task {task!r}; choose from {sorted(GENERATORS)}")
    return GENERATORS[task](n, seed, noise_std)


# ---------------------------------------------------------------- persistence

def spec_to_text(spec):
    """Plain-text block: ``m``, then rows of A, rows of B and b (17 sig. digits)."""
    fmt = lambda row: " ".join(f"{v:.17g}" for v in row)  # noqa: E731
    lines = [f"m {spec.m}", f"n_inputs {spec.n_inputs}", f"n_outputs {spec.n_outputs}"]
    lines += [f"A {fmt(row)}".rstrip() for row in spec.A]
    lines += [f"B {fmt(row)}" for row in spec.B]
    lines.append(f"b {fmt(spec.b)}")
    return "\n".join(lines) + "\n"


def spec_from_text(text):
    head, A, B, b = {}, [], [], None
    for k, line in enumerate(text.strip().splitlines(), 1):
        tag, *vals = line.split()
        try:
            if tag in ("m", "n_inputs", "n_outputs"):
                head[tag] = int(vals[0])
            elif tag == "A":
                A.append([float(v) for v in vals])
            elif tag == "B":
                B.append([float(v) for v in vals])
            elif tag == "b":
                b = [float(v) for v in vals]
            else:
                raise ParseError(f"constraint block line {k}: unknown tag {tag!r}", line=k)
        except (ValueError, IndexError):
            raise ParseError(f"constraint block line {k}: bad number in {line!r}", line=k) from None
    m = head.get("m")
    if m is None or b is None or len(B) != m or len(A) != m:
        raise SchemaError("constraint block is incomplete")
    A = np.array(A, dtype=np.float64).reshape(m, head.get("n_inputs", len(A[0])))
    return ConstraintSpec(A=A, B=B, b=b)


def manifest_path(csv_path):
    return Path(csv_path).with_suffix(".json")


def write_csv(path, ds):
    """Write ``ds`` as ``path`` (CSV) plus a JSON manifest next to it."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([*ds.x_names, *ds.y_names])
        for xr, yr in zip(ds.X, ds.Y):
            w.writerow([repr(float(v)) for v in (*xr, *yr)])
    manifest = {
        "format_version": MANIFEST_VERSION,
        "task": ds.task,
        "n_samples": ds.n,
        "x_names": list(ds.x_names),
        "y_names": list(ds.y_names),
        "scale_x": [float(v) for v in ds.scale_x],
        "scale_y": [float(v) for v in ds.scale_y],
        "tolerance": ds.tolerance,
        "seed": ds.seed,
        "noise_std": ds.noise_std,
        "constraints": spec_to_text(ds.spec),
    }
    with open(manifest_path(path), "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def read_csv(path, manifest=None):
    path = Path(path)
    mpath = Path(manifest) if manifest else manifest_path(path)
    if not path.exists():
        raise FileNotFoundError(f"no dataset at {path}")
    if not mpath.exists():
        raise FileNotFoundError(f"no manifest at {mpath}")
    with open(mpath) as fh:
        man = json.load(fh)
    if man.get("format_version") != MANIFEST_VERSION:
        raise SchemaError(f"unsupported manifest version {man.get('format_version')}")
    names = [*man["x_names"], *man["y_names"]]
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError(f"{path}: empty file", line=1)
        missing = [c for c in names if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")
        extra = [c for c in header if c not in names]
        if extra:
            raise SchemaError(f"{path}: unexpected column(s) {', '.join(extra)}")
        order = [header.index(c) for c in names]
        rows = []
        for lineno, row in enumerate(reader, 2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}", line=lineno)
            try:
                vals = [float(row[i]) for i in order]
            except ValueError:
                raise ParseError(f"{path}:{lineno}: non-numeric field", line=lineno) from None
            if not all(math.isfinite(v) for v in vals):
                raise ParseError(f"{path}:{lineno}: non-finite value", line=lineno)
            rows.append(vals)
    data = np.array(rows, dtype=np.float64).reshape(-1, len(names))
    n0 = len(man["x_names"])
    return Dataset(
        X=data[:, :n0], Y=data[:, n0:], spec=spec_from_text(man["constraints"]),
        scale_x=man["scale_x"], scale_y=man["scale_y"],
        x_names=man["x_names"], y_names=man["y_names"], task=man.get("task", "custom"),
        tolerance=man.get("tolerance"), seed=man.get("seed"), noise_std=man.get("noise_std", 0.0),
    )
