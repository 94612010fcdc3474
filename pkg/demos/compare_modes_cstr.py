"""
Four ways to train a reactor surrogate
======================================

We generate the synthetic CSTR dataset, scale it, and train the same
3-12-12-3 network four ways:

* ``nn``        plain mean-squared error
* ``pinn``      MSE plus a penalty on the balance residual
* ``kkt_hpinn`` MSE measured after a built-in projection layer
* ``nn_post``   the plain network, projected only at prediction time

Pass a smaller epoch count on the command line for a quick look, e.g.
``python compare_modes_cstr.py 200``.
"""

import sys

import numpy as np

from kkt_hpinn import TASKS, TrainConfig, TrainMode, fit_maxabs, generate, init_mlp, split_indices, train

epochs = int(sys.argv[1]) if len(sys.argv) > 1 else 1000

ds = fit_maxabs(generate("cstr", seed=0))
print(f"{ds.n} samples, inputs {ds.x_names}, outputs {ds.y_names}")
keep, hold = split_indices(ds.n, 0.2, seed=0)
train_ds, test_ds = ds.subset(keep), ds.subset(hold)

###############################################################################
# Same initial weights for every mode; only the objective differs.

reports = {}
for name in ("nn", "pinn", "kkt_hpinn", "nn_post"):
    net0 = init_mlp(TASKS["cstr"].layer_dims(), seed=0)
    _, rep = train(net0, TrainMode.parse(name), train_ds, TrainConfig(epochs=epochs), test=test_ds)
    reports[name] = rep
    print(f"trained {name:<10} final val rmse {rep.val_rmse[-1]:.4e}")

###############################################################################
# Test metrics.  The projecting modes satisfy the balances to round-off;
# the other two leave a visible residual.

print(f"\n{'mode':<10} {'rmse':>10} {'violation':>10}")
for name, rep in reports.items():
    t = rep.test
    print(f"{name:<10} {t['rmse_overall']:>10.4e} {t['mean_violation']:>10.2e}")

###############################################################################
# ``nn`` and ``nn_post`` share weights: projecting after training moves the
# prediction onto the feasible set but cannot change how the network learned.

gap = abs(reports["nn"].test["rmse_overall"] - reports["nn_post"].test["rmse_overall"])
print(f"\nnn vs nn_post rmse gap: {gap:.2e}")
print("kkt_hpinn worst violation during training:",
      f"{np.max(reports['kkt_hpinn'].max_violation_train):.1e}")
