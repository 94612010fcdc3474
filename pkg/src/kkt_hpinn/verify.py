"""Self-contained invariant checks behind ``kkt-hpinn verify``."""

from dataclasses import dataclass

import numpy as np

from . import linalg
from .network import init_mlp
from .projection import ConstraintSpec, apply_projection, build_projection
from .training import loss_kkt, loss_nn, loss_pinn


@dataclass
class Check:
    name: str
    passed: bool
    detail: str


def random_spec(rng, m, n_inputs, n_outputs):
    return ConstraintSpec(
        A=rng.normal(size=(m, n_inputs)),
        B=rng.normal(size=(m, n_outputs)),
        b=rng.normal(size=m),
    )


def kkt_block_solve(spec, x, y_hat):
    """Solve [[I, Bᵀ], [B, 0]] [y; λ] = [y_hat; b - A x] directly (LU)."""
    m, nl = spec.B.shape
    K = np.zeros((nl + m, nl + m))
    K[:nl, :nl] = np.eye(nl)
    K[:nl, nl:] = spec.B.T
    K[nl:, :nl] = spec.B
    rhs = np.concatenate([y_hat, spec.b - spec.A @ x])
    return np.linalg.solve(K, rhs)[:nl]


LD = np.longdouble


def _forward_ld(net, theta, x):
    # straight-line evaluator in extended precision, independent of network.forward
    weights, biases = net.split(theta)
    a = x.astype(LD)
    for l, (W, b) in enumerate(zip(weights, biases)):
        z = a @ W.T + b
        if l < len(weights) - 1:
            z = np.tanh(z) if net.activation == "tanh" else np.maximum(z, 0)
        a = z
    return a


def reference_loss(kind, net, theta, batch, spec=None, proj=None, lam=1.0):
    """The three training objectives evaluated in extended precision."""
    x, y = batch
    xl, n = x.astype(LD), x.shape[0]
    y_hat = _forward_ld(net, theta, x)
    if kind == "kkt":
        y_hat = xl @ proj.a_star.T.astype(LD) + y_hat @ proj.b_star.astype(LD) + proj.bias_star.astype(LD)
    r = y_hat - y.astype(LD)
    value = np.sum(r * r)
    if kind == "pinn":
        c = xl @ spec.A.T.astype(LD) + y_hat @ spec.B.T.astype(LD) - spec.b.astype(LD)
        value += LD(lam) * np.sum(c * c)
    return value / (2 * n)


def central_difference(loss, theta, coords, h=1e-6):
    """Central differences of ``loss(theta)`` at the given coordinates."""
    theta = np.asarray(theta, dtype=LD)
    h = LD(h)
    out = np.empty(len(coords))
    for k, i in enumerate(coords):
        up, down = theta.copy(), theta.copy()
        up[i] += h
        down[i] -= h
        out[k] = (loss(up) - loss(down)) / (2 * h)
    return out


def _rel_err(a, b, floor=1e-8):
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def check_projection(rng, n_specs=200, tol=1e-10):
    worst = 0.0
    for _ in range(n_specs):
        m = int(rng.integers(1, 4))
        nl = int(rng.integers(max(3, m), 9))
        spec = random_spec(rng, m, int(rng.integers(1, 6)), nl)
        p = build_projection(spec)
        B = spec.B
        worst = max(
            worst,
            np.abs(B @ p.b_star).max(),
            np.abs(B @ p.a_star + spec.A).max(),
            np.abs(B @ p.bias_star - spec.b).max(),
            np.abs(p.b_star - p.b_star.T).max(),
            np.abs(p.b_star @ p.b_star - p.b_star).max(),
        )
    return Check("projection identities", worst <= tol, f"{n_specs} specs, max deviation {worst:.2e}")


def check_qp_oracle(rng, n=100, tol=1e-10):
    worst = 0.0
    for _ in range(n):
        m = int(rng.integers(1, 4))
        nl = int(rng.integers(max(3, m), 9))
        spec = random_spec(rng, m, 3, nl)
        x, y_hat = rng.normal(size=3), rng.normal(size=nl)
        got = apply_projection(build_projection(spec), x, y_hat)
        worst = max(worst, np.abs(got - kkt_block_solve(spec, x, y_hat)).max())
    return Check("KKT system agreement", worst <= tol, f"{n} instances, max deviation {worst:.2e}")


def check_feasible_idempotent(rng, n=100, tol=1e-10):
    worst_v = worst_i = 0.0
    for _ in range(n):
        spec = random_spec(rng, 2, 3, 6)
        p = build_projection(spec)
        x, y_hat = rng.normal(size=3), rng.normal(size=6)
        y = apply_projection(p, x, y_hat)
        worst_v = max(worst_v, np.abs(spec.residual(x, y)).max() / (1 + np.abs(spec.b).max()))
        worst_i = max(worst_i, np.abs(apply_projection(p, x, y) - y).max())
    ok = worst_v <= tol and worst_i <= tol
    return Check("feasibility and idempotency", ok, f"residual {worst_v:.2e}, re-projection {worst_i:.2e}")


def check_spd_solve(rng, tol=1e-10):
    worst = 0.0
    for n in range(1, 21):
        M = rng.normal(size=(n, n + 2))
        S = M @ M.T
        rhs = rng.normal(size=(n, 3))
        X = linalg.spd_solve(S, rhs)
        worst = max(worst, np.abs(S @ X - rhs).max() / np.abs(rhs).max())
    return Check("SPD solve residual", worst <= tol, f"sizes 1..20, relative residual {worst:.2e}")


def check_gradients(rng, n_coords=100, tol=1e-6):
    spec = random_spec(rng, 2, 3, 4)
    proj = build_projection(spec)
    net = init_mlp([3, 8, 8, 4], "tanh", seed=int(rng.integers(1 << 31)))
    net.params[:] += rng.normal(scale=0.1, size=net.n_params)
    batch = (rng.normal(size=(5, 3)), rng.normal(size=(5, 4)))
    lam = 0.7
    analytic = {
        "nn": loss_nn(net, batch)[1],
        "pinn": loss_pinn(net, batch, spec, lam)[1],
        "kkt": loss_kkt(net, proj, batch)[1],
    }
    out = []
    for kind, grad in analytic.items():
        coords = rng.choice(net.n_params, size=min(n_coords, net.n_params), replace=False)
        numeric = central_difference(
            lambda th: reference_loss(kind, net, th, batch, spec, proj, lam), net.params, coords)
        err = _rel_err(grad[coords], numeric).max()
        out.append(Check(f"gradient of loss_{kind}", err <= tol, f"{len(coords)} coords, max rel. error {err:.2e}"))
    return out


def run_checks(seed=0):
    rng = np.random.default_rng(seed)
    checks = [
        check_spd_solve(rng),
        check_projection(rng),
        check_qp_oracle(rng),
        check_feasible_idempotent(rng),
    ]
    checks += check_gradients(rng)
    return checks
