"""Correlation functions and correlation-matrix builders.

Three stationary families are supported:

* ``ar1`` -- order-one autoregressive, ``phi ** lag`` with ``-1 < phi < 1``
* ``gaussian`` -- ``exp(-d**2 / phi)`` with ``phi > 0``
* ``exponential`` -- ``exp(-d / phi)`` with ``phi > 0``

Distances are Euclidean in the units of the coordinate space (depth in
meters, time in years, planar position).
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform

from .validation import as_coords, check_same_dimension

FAMILIES = ("ar1", "gaussian", "exponential")


@dataclass(frozen=True)
class CorrelationModel:
    """A correlation family together with its range/decay parameter."""

    family: str
    phi: float

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown correlation family {self.family!r}; choose from {FAMILIES}")
        phi = float(self.phi)
        if not np.isfinite(phi):
            raise ValueError("phi must be finite")
        if self.family == "ar1":
            if not -1.0 < phi < 1.0:
                raise ValueError(f"ar1 requires -1 < phi < 1, got {phi}")
        elif phi <= 0.0:
            raise ValueError(f"{self.family} requires phi > 0, got {phi}")
        object.__setattr__(self, "phi", phi)

    def with_phi(self, phi):
        return CorrelationModel(self.family, phi)


def corr_value(d, model):
    """Correlation at distance (or lag) ``d`` under ``model``.

    ``d`` may be a scalar or an array of nonnegative distances.  For the
    ``ar1`` family ``d`` is the time lag; a real-valued lag is accepted for
    ``phi >= 0`` (the natural continuous extension ``phi ** |lag|``), while a
    negative ``phi`` requires integer lags because the real power is
    undefined there.
    """
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ValueError("distances must be nonnegative")
    if model.family == "gaussian":
        out = np.exp(-(d**2) / model.phi)
    elif model.family == "exponential":
        out = np.exp(-d / model.phi)
    else:  # ar1
        if model.phi < 0 and np.any(np.abs(d - np.round(d)) > 1e-8):
            raise ValueError("ar1 with negative phi is defined for integer lags only")
        out = np.sign(model.phi) ** np.round(d) * np.abs(model.phi) ** d if model.phi < 0 else model.phi**d
        # phi == 0 gives 0**0 == 1 on the diagonal, which is the right limit
    return out if out.ndim else float(out)


def corr_matrix(coords, model):
    """Dense correlation matrix for a set of coordinates.

    The result is exactly symmetric with a unit diagonal.  Duplicate
    coordinates are allowed; they produce repeated rows and downstream
    factorizations fall back on the jitter policy.
    """
    pts = as_coords(coords)
    n = pts.shape[0]
    if n == 1:
        return np.ones((1, 1))
    condensed = corr_value(pdist(pts), model)
    mat = squareform(condensed)
    np.fill_diagonal(mat, 1.0)
    return mat


def cross_corr_matrix(coords, knots, model):
    """Correlations between two coordinate sets (rows: coords, columns: knots)."""
    pts = as_coords(coords)
    kts = as_coords(knots, name="knots")
    check_same_dimension(pts, kts)
    return corr_value(cdist(pts, kts), model)


def max_pairwise_distance(coords):
    """Largest pairwise Euclidean distance, used for range-parameter bounds."""
    pts = as_coords(coords)
    if pts.shape[0] < 2:
        return 1.0
    return float(pdist(pts).max())
