"""Non-trainable projection layers enforcing ``A x + B y = b`` exactly.

For a prediction ``y_hat`` at input ``x`` the Euclidean-closest point of the
affine set ``{y : A x + B y = b}`` is

    y_tilde = a_star @ x + b_star @ y_hat + bias_star

with ``a_star = -Bᵀ(BBᵀ)⁻¹A``, ``b_star = I - Bᵀ(BBᵀ)⁻¹B`` and
``bias_star = Bᵀ(BBᵀ)⁻¹b``.  The map is affine in ``y_hat`` so its Jacobian is
the constant orthogonal projector ``b_star``.

Batched arguments are row-major: one sample per row.
"""

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import ConfigError, ScaleError, ShapeError, SingularityError


@dataclass(frozen=True, eq=False)
class ConstraintSpec:
    """Linear equality constraints ``A x + B y = b`` with ``rank(B) = m``."""

    A: np.ndarray
    B: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        B = linalg.as_mat(self.B, "B")
        m = B.shape[0]
        A = np.asarray(self.A, dtype=np.float64)
        if A.size == 0:
            A = np.zeros((m, 0))
        A = linalg.as_mat(A, "A")
        b = linalg.as_vec(self.b, "b")
        if m < 1:
            raise ConfigError("at least one constraint is required")
        if A.shape[0] != m or b.shape[0] != m:
            raise ShapeError(f"A has {A.shape[0]} rows, B has {m}, b has {b.shape[0]}")
        if m > B.shape[1]:
            raise ConfigError(f"{m} constraints on {B.shape[1]} outputs cannot have rank(B) = m")
        for arr in (A, B, b):
            arr.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "b", b)
        # rank check; the factor is reused by build_projection
        try:
            L = linalg.cholesky(B @ B.T)
        except SingularityError as exc:
            raise SingularityError(
                f"B is rank deficient (pivot {exc.pivot}); remove dependent constraints",
                pivot=exc.pivot,
            ) from None
        object.__setattr__(self, "_gram_factor", L)

    @property
    def m(self):
        return self.B.shape[0]

    @property
    def n_inputs(self):
        return self.A.shape[1]

    @property
    def n_outputs(self):
        return self.B.shape[1]

    def constrained_outputs(self):
        """Indices of outputs with a nonzero coefficient in some constraint."""
        return np.flatnonzero(np.any(self.B != 0.0, axis=0))

    def unconstrained_outputs(self):
        return np.flatnonzero(np.all(self.B == 0.0, axis=0))

    def residual(self, x, y):
        """``A x + B y - b``, one row per sample for batched input."""
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if x.shape[-1] != self.n_inputs or y.shape[-1] != self.n_outputs:
            raise ShapeError(
                f"expected x[..., {self.n_inputs}] and y[..., {self.n_outputs}], "
                f"got {x.shape} and {y.shape}"
            )
        return x @ self.A.T + y @ self.B.T - self.b


@dataclass(frozen=True, eq=False)
class ProjectionParams:
    a_star: np.ndarray
    b_star: np.ndarray
    bias_star: np.ndarray

    @property
    def n_inputs(self):
        return self.a_star.shape[1]

    @property
    def n_outputs(self):
        return self.b_star.shape[0]


def build_projection(spec):
    B = spec.B
    # Gram matrix in extended precision so refinement can undo the rounding
    # of forming BBᵀ; the factorization itself stays in double
    B_ext = B.astype(np.longdouble)
    BtG = linalg.transpose(linalg.spd_solve(B_ext @ B_ext.T, B, refine=2))  # Bᵀ(BBᵀ)⁻¹, NL×m
    a_star = -(BtG @ spec.A)
    b_star = np.eye(spec.n_outputs) - BtG @ B
    b_star = 0.5 * (b_star + b_star.T)
    bias_star = BtG @ spec.b
    for arr in (a_star, b_star, bias_star):
        arr.setflags(write=False)
    return ProjectionParams(a_star=a_star, b_star=b_star, bias_star=bias_star)


def apply_projection(p, x, y_hat):
    """Project ``y_hat`` onto the constraint set at ``x``.

    Works on a single sample (1-D ``x`` and ``y_hat``) or a batch of rows.
    """
    x = np.asarray(x, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if x.shape[-1] != p.n_inputs or y_hat.shape[-1] != p.n_outputs:
        raise ShapeError(
            f"expected x[..., {p.n_inputs}] and y_hat[..., {p.n_outputs}], "
            f"got {x.shape} and {y_hat.shape}"
        )
    if x.shape[:-1] != y_hat.shape[:-1]:
        raise ShapeError(f"batch mismatch: {x.shape} vs {y_hat.shape}")
    return x @ p.a_star.T + y_hat @ p.b_star + p.bias_star


def projection_backward(p, grad_out):
    """Pull a gradient w.r.t. the projected output back to the raw output."""
    grad_out = np.asarray(grad_out, dtype=np.float64)
    if grad_out.shape[-1] != p.n_outputs:
        raise ShapeError(f"grad_out has {grad_out.shape[-1]} columns, expected {p.n_outputs}")
    # b_star is symmetric so the row-major product is b_starᵀ g
    return grad_out @ p.b_star


def violation(spec, x, y):
    """Euclidean norm of the constraint residual (per row for batches)."""
    return np.linalg.norm(spec.residual(x, y), axis=-1)


def rescale_constraints(spec, scale_x, scale_y):
    """Express ``spec`` in variables ``x / scale_x`` and ``y / scale_y``."""
    scale_x = np.asarray(scale_x, dtype=np.float64).reshape(-1)
    scale_y = np.asarray(scale_y, dtype=np.float64).reshape(-1)
    if scale_x.shape[0] != spec.n_inputs or scale_y.shape[0] != spec.n_outputs:
        raise ShapeError("scale vectors do not match the constraint dimensions")
    for name, s in (("scale_x", scale_x), ("scale_y", scale_y)):
        if not np.all(np.isfinite(s)) or np.any(s <= 0.0):
            raise ScaleError(f"{name} entries must be finite and strictly positive")
    return ConstraintSpec(A=spec.A * scale_x, B=spec.B * scale_y, b=spec.b.copy())
