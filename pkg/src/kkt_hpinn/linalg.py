"""Small dense real-matrix kernel.

Matrices are plain 2-D ``float64`` numpy arrays and vectors are 1-D arrays.
Everything here is pure: inputs are never modified.
"""

import numpy as np

from .errors import DataError, ShapeError, SingularityError

# relative pivot floor used to flag rank deficiency
PIVOT_RTOL = 1e-12


def as_mat(a, name="matrix"):
    """Coerce ``a`` to a finite 2-D float64 array."""
    m = np.array(a, dtype=np.float64, ndmin=2)
    if m.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise DataError(f"{name} has non-finite entries")
    return m


def as_vec(v, name="vector"):
    out = np.array(v, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(out)):
        raise DataError(f"{name} has non-finite entries")
    return out


def matmul(a, b):
    """Matrix product with an explicit shape check."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def transpose(a):
    return np.array(np.asarray(a, dtype=np.float64).T)


def cholesky(s):
    """Lower Cholesky factor of a symmetric positive definite matrix.

    Raises SingularityError naming the first pivot that falls below
    ``PIVOT_RTOL`` times the largest diagonal entry.
    """
    s = as_mat(s, "s")
    n = s.shape[0]
    if s.shape != (n, n):
        raise ShapeError(f"cholesky needs a square matrix, got {s.shape}")
    if not np.allclose(s, s.T, rtol=1e-12, atol=1e-14 * max(1.0, np.abs(s).max(initial=0.0))):
        raise ShapeError("cholesky needs a symmetric matrix")
    floor = PIVOT_RTOL * max(np.abs(np.diag(s)).max(initial=0.0), np.finfo(float).tiny)
    L = np.zeros_like(s)
    for j in range(n):
        d = s[j, j] - L[j, :j] @ L[j, :j]
        if not d > floor:
            raise SingularityError(
                f"non-positive pivot {d:.3e} at index {j}; matrix is not positive definite",
                pivot=j,
            )
        L[j, j] = np.sqrt(d)
        L[j + 1:, j] = (s[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


def cho_solve(L, rhs):
    """Solve ``L Lᵀ X = rhs`` by forward then back substitution."""
    n = L.shape[0]
    X = np.array(rhs, dtype=np.float64, copy=True)
    vec = X.ndim == 1
    if vec:
        X = X[:, None]
    if X.shape[0] != n:
        raise ShapeError(f"rhs has {X.shape[0]} rows, factor has {n}")
    for i in range(n):
        X[i] = (X[i] - L[i, :i] @ X[:i]) / L[i, i]
    for i in range(n - 1, -1, -1):
        X[i] = (X[i] - L[i + 1:, i] @ X[i + 1:]) / L[i, i]
    return X[:, 0] if vec else X


def spd_solve(s, rhs, refine=0):
    """Return X with ``s @ X = rhs`` for symmetric positive definite ``s``.

    ``refine`` extra rounds of iterative refinement are applied.  If ``s`` is
    given in extended precision (``np.longdouble``) the residuals are formed
    in that precision, which recovers most of the accuracy the normal
    equations lose to squaring the condition number.
    """
    s_ext = np.asarray(s)
    s = as_mat(s_ext.astype(np.float64), "s")
    rhs = np.asarray(rhs, dtype=np.float64)
    if rhs.shape[0] != s.shape[0]:
        raise ShapeError(f"rhs has {rhs.shape[0]} rows, s is {s.shape}")
    L = cholesky(s)
    x = cho_solve(L, rhs)
    wide = s_ext.dtype if s_ext.dtype == np.longdouble else np.float64
    for _ in range(refine):
        r = rhs.astype(wide) - s_ext.astype(wide) @ x.astype(wide)
        x = x + cho_solve(L, r.astype(np.float64))
    return x
