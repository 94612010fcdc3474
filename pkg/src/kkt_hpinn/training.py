"""Loss functions and the training loop for the four model variants.

``nn``         plain MSE regression.
``pinn``       MSE plus ``lam * ||A x + B y_hat - b||²`` soft penalty.
``kkt_hpinn``  MSE on the projected prediction; the projection sits inside
               the model so gradients flow through ``b_star``.
``nn_post``    trained exactly like ``nn``; projection is applied only when
               predictions are evaluated.

RMSE is always the plain data RMSE (penalty excluded) in the units of the
training data.
"""

import csv
import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError, DataError, ShapeError, TrainingError
from .network import AdamState, adam_step, backward, forward
from .projection import apply_projection, build_projection, projection_backward

log = logging.getLogger(__name__)

VARIANTS = ("nn", "pinn", "kkt_hpinn", "nn_post")


@dataclass(frozen=True)
class TrainMode:
    variant: str
    lam: float = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown mode {self.variant!r}; choose from {VARIANTS}")
        if self.variant == "pinn":
            lam = 1.0 if self.lam is None else float(self.lam)
            if not lam > 0.0:
                raise ConfigError(f"pinn needs lambda > 0, got {lam}")
            object.__setattr__(self, "lam", lam)
        elif self.lam is not None:
            raise ConfigError(f"lambda only applies to pinn, not {self.variant}")

    @classmethod
    def parse(cls, text, lam=None):
        """``'pinn'``, ``'pinn:0.5'``, ``'kkt_hpinn'`` ..."""
        name, _, value = text.partition(":")
        name = name.strip().lower().replace("-", "_")
        if value:
            if name != "pinn":
                raise ConfigError(f"mode {name!r} takes no penalty weight")
            lam = float(value)
        return cls(name, lam if name == "pinn" else None)

    @property
    def tag(self):
        if self.variant == "pinn" and self.lam != 1.0:
            return f"pinn{self.lam:g}"
        return self.variant

    @property
    def needs_spec(self):
        return self.variant != "nn"

    @property
    def projects(self):
        return self.variant in ("kkt_hpinn", "nn_post")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 1000
    batch_size: int = 16
    learning_rate: float = 1e-4
    seed: int = 0
    validation_fraction: float = 0.2

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ConfigError("validation_fraction must lie in (0, 1)")
        if not self.learning_rate > 0.0:
            raise ConfigError("learning_rate must be positive")


@dataclass
class RunReport:
    mode: str
    seed: int
    train_rmse: list = field(default_factory=list)
    val_rmse: list = field(default_factory=list)
    mean_violation: list = field(default_factory=list)
    max_violation_train: list = field(default_factory=list)
    max_violation_val: list = field(default_factory=list)
    initial_train_rmse: float = None
    initial_val_rmse: float = None
    test: dict = None
    config: dict = None

    @property
    def epochs(self):
        return len(self.train_rmse)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "train_rmse", "val_rmse", "mean_violation"])
            for i, row in enumerate(zip(self.train_rmse, self.val_rmse, self.mean_violation), 1):
                w.writerow([i, *(repr(float(v)) for v in row)])

    def summary(self):
        """JSON-ready final metrics plus a config echo."""
        return {
            "mode": self.mode,
            "seed": self.seed,
            "epochs": self.epochs,
            "final_train_rmse": self.train_rmse[-1] if self.train_rmse else None,
            "final_val_rmse": self.val_rmse[-1] if self.val_rmse else None,
            "max_violation_train": max(self.max_violation_train, default=None),
            "max_violation_val": max(self.max_violation_val, default=None),
            "test": self.test,
            "config": self.config,
        }

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _check_batch(net, batch):
    x, y = batch
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim == 1:
        x, y = x[None, :], y.reshape(1, -1)
    if x.shape[0] == 0:
        raise DataError("empty batch")
    if x.shape[0] != y.shape[0] or y.shape[1] != net.layer_dims[-1]:
        raise ShapeError(f"batch x{x.shape} / y{y.shape} does not fit {net!r}")
    return x, y


def loss_nn(net, batch):
    """``(1/2N) Σ ||NN(x_i) - y_i||²`` and its parameter gradient."""
    x, y = _check_batch(net, batch)
    n = x.shape[0]
    y_hat, trace = forward(net, x)
    r = y_hat - y
    value = 0.5 * np.sum(r * r) / n
    return value, backward(net, trace, r / n)


def pinn_parts(net, batch, spec):
    """Data term and un-weighted penalty term of the PINN objective."""
    x, y = _check_batch(net, batch)
    n = x.shape[0]
    y_hat = forward(net, x)[0]
    r = y_hat - y
    c = spec.residual(x, y_hat)
    return 0.5 * np.sum(r * r) / n, 0.5 * np.sum(c * c) / n


def loss_pinn(net, batch, spec, lam):
    if not lam > 0.0:
        raise ConfigError(f"pinn needs lambda > 0, got {lam}")
    x, y = _check_batch(net, batch)
    n = x.shape[0]
    y_hat, trace = forward(net, x)
    r = y_hat - y
    c = spec.residual(x, y_hat)
    value = 0.5 * (np.sum(r * r) + lam * np.sum(c * c)) / n
    upstream = (r + lam * (c @ spec.B)) / n
    return value, backward(net, trace, upstream)


def loss_kkt(net, proj, batch, penalty=None):
    """MSE of the projected prediction.

    ``penalty`` optionally adds a soft term on the projected output, e.g. a
    nonlinear constraint: ``penalty(x, y_tilde) -> (value, d value / d y_tilde)``
    with ``value`` already averaged over the batch.
    """
    x, y = _check_batch(net, batch)
    n = x.shape[0]
    y_hat, trace = forward(net, x)
    y_tilde = apply_projection(proj, x, y_hat)
    r = y_tilde - y
    value = 0.5 * np.sum(r * r) / n
    g = r / n
    if penalty is not None:
        p_value, p_grad = penalty(x, y_tilde)
        value = value + p_value
        g = g + p_grad
    return value, backward(net, trace, projection_backward(proj, g))


def predict(net, mode, x, proj=None):
    y_hat = forward(net, x)[0]
    if mode.projects:
        if proj is None:
            raise ConfigError(f"mode {mode.variant} needs projection parameters")
        return apply_projection(proj, x, y_hat)
    return y_hat


def _rmse(err):
    return float(np.sqrt(np.mean(err * err))) if err.size else None


def evaluate(net, mode, partition, spec=None, proj=None):
    """Test metrics of ``net`` under ``mode`` on ``partition = (X, Y)``.

    Outputs are split into constrained (nonzero column of B) and
    unconstrained groups; an empty group is reported as ``None``.
    """
    x, y = (partition.X, partition.Y) if hasattr(partition, "X") else partition
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape[0] == 0:
        raise DataError("empty evaluation partition")
    if proj is None and mode.projects:
        proj = build_projection(spec)
    pred = predict(net, mode, x, proj)
    err = pred - y
    out = {"rmse_overall": _rmse(err), "rmse_constrained": None, "rmse_unconstrained": None,
           "mean_violation": None, "max_violation": None}
    if spec is not None:
        out["rmse_constrained"] = _rmse(err[:, spec.constrained_outputs()])
        out["rmse_unconstrained"] = _rmse(err[:, spec.unconstrained_outputs()])
        viol = np.linalg.norm(spec.residual(x, pred), axis=1)
        out["mean_violation"] = float(viol.mean())
        out["max_violation"] = float(viol.max())
    return out


def split_indices(n, fraction, seed):
    """Seeded shuffle split; returns ``(kept, held_out)`` index arrays."""
    if not 0.0 < fraction < 1.0:
        raise ConfigError("split fraction must lie in (0, 1)")
    n_out = int(round(fraction * n))
    if n_out < 1 or n_out >= n:
        raise DataError(f"cannot hold out {fraction:g} of {n} samples")
    perm = np.random.default_rng(seed).permutation(n)
    return np.sort(perm[n_out:]), np.sort(perm[:n_out])


def _epoch_rng(seed, epoch):
    return np.random.default_rng([seed, 2, epoch])


def train(net, mode, dataset, config, spec=None, test=None, penalty=None, on_epoch=None):
    """Train a copy of ``net`` and return ``(trained_net, RunReport)``.

    ``dataset`` needs ``X`` and ``Y`` arrays; ``spec`` defaults to
    ``dataset.working_spec`` (constraints in the units of ``X``/``Y``).
    A seeded ``validation_fraction`` of it is held out for per-epoch
    validation.  If ``test`` is given, final test metrics are attached.
    ``on_epoch(epoch, net)`` is called after every epoch, if given.
    """
    if spec is None:
        spec = getattr(dataset, "working_spec", None)
    if mode.needs_spec and spec is None:
        raise ConfigError(f"mode {mode.variant} needs a ConstraintSpec")
    X = np.asarray(dataset.X, dtype=np.float64)
    Y = np.asarray(dataset.Y, dtype=np.float64)
    tr_idx, va_idx = split_indices(X.shape[0], config.validation_fraction, [config.seed, 1])
    Xtr, Ytr, Xva, Yva = X[tr_idx], Y[tr_idx], X[va_idx], Y[va_idx]
    proj = build_projection(spec) if mode.projects else None

    net = net.copy()
    opt = AdamState.for_net(net, lr=config.learning_rate)
    report = RunReport(mode=mode.tag, seed=config.seed, config=asdict(config))
    report.config["lam"] = mode.lam

    def record(epoch):
        ptr = predict(net, mode, Xtr, proj)
        pva = predict(net, mode, Xva, proj)
        train_rmse, val_rmse = _rmse(ptr - Ytr), _rmse(pva - Yva)
        if epoch == 0:
            report.initial_train_rmse, report.initial_val_rmse = train_rmse, val_rmse
            return
        report.train_rmse.append(train_rmse)
        report.val_rmse.append(val_rmse)
        if spec is not None:
            vtr = np.linalg.norm(spec.residual(Xtr, ptr), axis=1)
            vva = np.linalg.norm(spec.residual(Xva, pva), axis=1)
            report.mean_violation.append(float(vva.mean()))
            report.max_violation_train.append(float(vtr.max()))
            report.max_violation_val.append(float(vva.max()))
        else:
            report.mean_violation.append(float("nan"))

    if mode.variant in ("nn", "nn_post"):
        objective = loss_nn
    elif mode.variant == "pinn":
        def objective(net_, batch):
            return loss_pinn(net_, batch, spec, mode.lam)
    else:
        def objective(net_, batch):
            return loss_kkt(net_, proj, batch, penalty)

    record(0)
    n = Xtr.shape[0]
    bs = config.batch_size
    for epoch in range(1, config.epochs + 1):
        order = _epoch_rng(config.seed, epoch).permutation(n)
        for k, start in enumerate(range(0, n, bs)):
            idx = order[start:start + bs]
            value, grad = objective(net, (Xtr[idx], Ytr[idx]))
            if not np.isfinite(value):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {k}", epoch, k)
            try:
                adam_step(opt, net, grad, batch=k)
            except TrainingError as exc:
                raise TrainingError(f"{exc} (epoch {epoch})", epoch, k) from None
        record(epoch)
        if on_epoch is not None:
            on_epoch(epoch, net)

    if test is not None:
        report.test = evaluate(net, mode, test, spec, proj)
    log.debug("trained %s seed=%s final val rmse %.3e", mode.tag, config.seed, report.val_rmse[-1])
    return net, report
