"""
Bring your own balances
=======================

Any full-row-rank ``B`` works.  This example invents a splitter: one feed
``x0`` is divided into three product streams whose sum must equal the feed,
and a fourth output (a temperature) is unconstrained.  We also add a soft,
nonlinear preference on top of the hard constraint through the penalty hook,
then save and reload the trained network.
"""

import numpy as np

from kkt_hpinn import (
    ConstraintSpec,
    Dataset,
    TrainConfig,
    TrainMode,
    build_projection,
    fit_maxabs,
    init_mlp,
    load_checkpoint,
    predict,
    save_checkpoint,
    train,
)
from kkt_hpinn.errors import SingularityError

rng = np.random.default_rng(3)
n = 800
X = np.column_stack([rng.uniform(10, 50, n), rng.uniform(0, 1, n)])
share = np.column_stack([0.5 + 0.3 * X[:, 1], 0.3 - 0.2 * X[:, 1] ** 2, np.zeros(n)])
share[:, 2] = 1.0 - share[:, 0] - share[:, 1]
Y = np.column_stack([X[:, :1] * share, 300 + 40 * np.sin(3 * X[:, 1])])

spec = ConstraintSpec(A=[[1.0, 0.0]], B=[[-1.0, -1.0, -1.0, 0.0]], b=[0.0])
ds = fit_maxabs(Dataset(X, Y, spec, x_names=("feed", "valve"), y_names=("s1", "s2", "s3", "T")))
print("max violation of the raw data:", ds.violations().max())

###############################################################################
# Redundant rows are caught when the spec is built.

try:
    ConstraintSpec(A=[[1.0, 0.0]] * 2, B=[[-1.0, -1.0, -1.0, 0.0]] * 2, b=[0.0, 0.0])
except SingularityError as exc:
    print("rejected:", exc)

###############################################################################
# Soft term: we would like stream 1 to be no smaller than stream 2.  The
# hook receives the projected predictions and returns (value, dL/dy).

def prefer_order(x, y):
    gap = np.minimum(y[:, 0] - y[:, 1], 0.0)
    n = len(y)
    grad = np.zeros_like(y)
    grad[:, 0] = gap / n
    grad[:, 1] = -gap / n
    return 0.5 * np.sum(gap ** 2) / n, grad


net, rep = train(init_mlp([2, 16, 16, 4], seed=0), TrainMode("kkt_hpinn"), ds,
                 TrainConfig(epochs=200, learning_rate=1e-3), penalty=prefer_order)
print(f"val rmse {rep.val_rmse[-1]:.3e}, worst violation {max(rep.max_violation_val):.1e}")

###############################################################################
# Checkpoints are plain ``.npz`` files and reload bit for bit.

save_checkpoint("splitter.npz", net, {"mode": "kkt_hpinn"})
net2, meta = load_checkpoint("splitter.npz")
proj = build_projection(ds.working_spec)
same = np.array_equal(predict(net, TrainMode("kkt_hpinn"), ds.X, proj),
                      predict(net2, TrainMode("kkt_hpinn"), ds.X, proj))
print("reloaded", meta, "identical predictions:", same)
