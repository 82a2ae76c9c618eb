"""Input validation helpers shared across the package."""

import numpy as np
from scipy.linalg import qr


def as_float_vector(x, name="x"):
    """Coerce to a finite 1-D float array."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def as_float_matrix(x, name="X"):
    """Coerce to a finite 2-D float array; 1-D input becomes a single column."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def as_coords(x, name="coords"):
    """Coerce coordinates to an (n, d) float array with d in {1, 2}.

    Accepts a 1-D array of positions (depth, time) or an (n, 2) array of
    planar locations.
    """
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ValueError(f"{name} must have shape (n,) or (n, d), got {arr.shape}")
    if arr.shape[1] not in (1, 2):
        raise ValueError(f"{name} must be 1-D or 2-D positions, got dimension {arr.shape[1]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_same_dimension(coords, other, name="knots"):
    if coords.shape[1] != other.shape[1]:
        raise ValueError(
            f"{name} dimension {other.shape[1]} does not match coordinate "
            f"dimension {coords.shape[1]}"
        )


def check_binary(y, name="y"):
    """Validate a 0/1 response vector and return it as an int array."""
    arr = np.asarray(y)
    vals = np.unique(arr)
    if not np.all(np.isin(vals, (0, 1))):
        raise ValueError(f"{name} must contain only 0/1 values, found {vals[:5]}")
    return arr.astype(int)


def check_full_column_rank(X, names=None, tol=1e-10):
    """Raise if X is column-rank deficient, naming the collinear columns.

    Rank is judged by the smallest singular value relative to the largest.
    Offending columns are located with a pivoted QR so the error message can
    point at them.
    """
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    if n <= p:
        raise ValueError(f"need more rows than columns, got n={n}, p={p}")
    sv = np.linalg.svd(X, compute_uv=False)
    if sv[0] == 0 or sv[-1] / sv[0] < tol:
        _, r, piv = qr(X, pivoting=True)
        diag = np.abs(np.diag(r))
        scale = diag[0] if diag[0] > 0 else 1.0
        bad = [int(piv[k]) for k in range(len(diag)) if diag[k] / scale < tol]
        if names is not None:
            bad_desc = ", ".join(names[k] for k in bad)
        else:
            bad_desc = ", ".join(f"column {k}" for k in bad)
        raise ValueError(f"design matrix is rank deficient (collinear: {bad_desc})")
    return X
