"""Basis expansions for modeling autocorrelation.

A :class:`BasisExpansion` bundles the evaluated basis matrix ``Z`` with
per-column metadata, the covariance model for its random coefficients, and a
rule for re-evaluating the basis at new coordinates (needed for prediction).

The coefficient covariance comes in three flavors:

* ``iid`` -- coefficients are exchangeable, covariance ``sigma2 * I``
* ``eigen-weighted`` -- covariance ``sigma2 * diag(weights)`` (eigenvector
  bases with eigenvalue weights)
* ``knot-correlated`` -- covariance ``sigma2 * K`` for a knot correlation
  matrix ``K`` (predictive-process bases)

The induced correlation among observations is always the generalized Gram
product returned by :meth:`BasisExpansion.gram`.
"""

import numpy as np
from scipy.spatial.distance import cdist
from scipy.stats import qmc

from .correlation import corr_matrix, cross_corr_matrix
from .linalg import clamp_eigenvalues, spd_factor, sym_eigen
from .validation import as_coords, as_float_vector, check_same_dimension

MAX_POLY_DEGREE = 10


class BasisExpansion:
    """An evaluated basis matrix with coefficient-covariance metadata.

    Parameters
    ----------
    matrix : (n, m) array
        Basis vectors evaluated at the data coordinates.
    kind : str
        What generated the columns (``"polynomial-power"``,
        ``"shifted-quadratic"``, ``"eigen"``, ``"eigenvector"``,
        ``"gaussian-kernel"``, ``"uniform-kernel"``, ``"group-indicator"``,
        ``"predictive-process"``).
    columns : list of dict
        Per-column metadata (knot location, power, group label, phi).
    coef_cov_kind : str
        ``"iid"``, ``"eigen-weighted"`` or ``"knot-correlated"``.
    coef_cov : None, (m,) array or (m, m) array
        Weight payload for the non-iid covariance kinds.
    evaluator : callable or None
        Maps new coordinates to a basis matrix with matching columns.  Bases
        read off a raw matrix decomposition have no evaluator and cannot be
        used to predict away from the data.
    """

    def __init__(self, matrix, kind, columns, coef_cov_kind="iid", coef_cov=None, evaluator=None):
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[1] < 1:
            raise ValueError(f"basis matrix must be (n, m) with m >= 1, got {matrix.shape}")
        if not np.all(np.isfinite(matrix)):
            raise ValueError("basis matrix contains non-finite entries")
        if coef_cov_kind not in ("iid", "eigen-weighted", "knot-correlated"):
            raise ValueError(f"unknown coefficient covariance kind {coef_cov_kind!r}")
        self.matrix = matrix
        self.kind = kind
        self.columns = list(columns)
        self.coef_cov_kind = coef_cov_kind
        self.coef_cov = None if coef_cov is None else np.asarray(coef_cov, dtype=float)
        self._evaluator = evaluator

    @property
    def n_basis(self):
        return self.matrix.shape[1]

    def gram(self):
        """Induced correlation among observations.

        ``Z Z'`` for iid coefficients, ``Z W Z'`` with the weight payload for
        the eigen-weighted and knot-correlated kinds.
        """
        z = self.matrix
        if self.coef_cov_kind == "iid":
            return z @ z.T
        if self.coef_cov_kind == "eigen-weighted":
            return (z * self.coef_cov) @ z.T
        return z @ self.coef_cov @ z.T

    def weighted_crossprod(self, rows):
        """``rows @ W @ Z'`` where W is the coefficient covariance payload."""
        z = self.matrix
        if self.coef_cov_kind == "iid":
            return rows @ z.T
        if self.coef_cov_kind == "eigen-weighted":
            return (rows * self.coef_cov) @ z.T
        return rows @ self.coef_cov @ z.T

    def evaluate(self, coords):
        """Evaluate the basis functions at new coordinates."""
        if self._evaluator is None:
            raise ValueError(
                f"{self.kind} basis was built from a raw matrix and cannot be "
                "evaluated at new coordinates"
            )
        return self._evaluator(coords)


def polynomial_basis(x, degree):
    """Monomial basis ``x**0, x**1, ..., x**degree``.

    Degrees above ``MAX_POLY_DEGREE`` are rejected to guard against overflow
    with data on physical scales (depths in meters and the like).
    """
    if degree < 0 or int(degree) != degree:
        raise ValueError(f"degree must be a nonnegative integer, got {degree}")
    if degree > MAX_POLY_DEGREE:
        raise ValueError(f"degree {degree} unsupported (maximum {MAX_POLY_DEGREE})")
    x = _coords_to_1d(x)
    powers = np.arange(int(degree) + 1)
    matrix = x[:, None] ** powers[None, :]
    columns = [{"kind": "polynomial-power", "power": int(p)} for p in powers]
    return BasisExpansion(matrix, "polynomial-power", columns,
                          evaluator=lambda c: _coords_to_1d(c)[:, None] ** powers[None, :])


def shifted_quadratic_basis(x, knots):
    """Squared-distance columns ``(x - k_j)**2`` for three or more shift points.

    With three distinct knots the column space equals span{1, x, x**2}, so a
    least-squares fit reproduces the plain quadratic fit exactly while the
    coefficients describe distances to locations of interest.
    """
    x = _coords_to_1d(x)
    knots = as_float_vector(knots, name="knots")
    if knots.size < 3:
        raise ValueError(f"need at least 3 shift knots, got {knots.size}")
    if np.unique(knots).size != knots.size:
        raise ValueError("shift knots must be pairwise distinct")

    def build(values):
        return (np.asarray(values, dtype=float)[:, None] - knots[None, :]) ** 2

    columns = [{"kind": "shifted-quadratic", "knot": float(k)} for k in knots]
    return BasisExpansion(build(x), "shifted-quadratic", columns,
                          evaluator=lambda c: build(_coords_to_1d(c)))


def eigen_basis(R, name="correlation matrix"):
    """Spectral basis ``Z = Q sqrt(L)`` of a PSD correlation matrix.

    Columns are ordered by descending eigenvalue; eigenvalues negligible
    relative to the largest are clamped to zero before the square root.  The
    Gram product ``Z Z'`` reconstructs ``R`` (up to clamping), so the basis
    carries the full correlation structure with iid coefficients.
    """
    values, vectors = _psd_eigen(R, name)
    matrix = vectors * np.sqrt(values)[None, :]
    columns = [{"kind": "eigen", "eigenvalue": float(v)} for v in values]
    return BasisExpansion(matrix, "eigen", columns)


def eigenvector_basis(R, name="correlation matrix"):
    """Eigenvector basis ``Z = Q`` with eigenvalue-weighted coefficients.

    Equivalent to :func:`eigen_basis` but the scale lives in the coefficient
    covariance (``sigma2 * diag(L)``) instead of the columns.
    """
    values, vectors = _psd_eigen(R, name)
    columns = [{"kind": "eigenvector", "eigenvalue": float(v)} for v in values]
    return BasisExpansion(vectors, "eigenvector", columns,
                          coef_cov_kind="eigen-weighted", coef_cov=values)


def correlation_eigen_basis(coords, model):
    """Spectral basis of ``corr_matrix(coords, model)`` that can predict.

    Unlike :func:`eigen_basis` on a raw matrix, this variant knows the
    generating correlation model, so the basis can be interpolated to new
    coordinates: ``Z_new = C_new R^{-1} Z``, which makes first-order
    prediction agree exactly with kriging under the source model.
    """
    pts = as_coords(coords)
    R = corr_matrix(pts, model)
    base = eigen_basis(R)
    w = spd_factor(R, "correlation matrix").solve(base.matrix)

    def evaluator(new_coords):
        return cross_corr_matrix(new_coords, pts, model) @ w

    return BasisExpansion(base.matrix, "eigen", base.columns, evaluator=evaluator)


def gaussian_kernel_basis(coords, knots, phi):
    """Gaussian kernel columns ``exp(-2 d_ij**2 / phi)`` anchored at knots.

    The kernel entry at distance ``d`` equals the Gaussian correlation
    function evaluated at ``phi / 2``; as knots fill the domain the induced
    model approaches the Gaussian-correlation covariance model.
    """
    if phi <= 0:
        raise ValueError(f"phi must be positive, got {phi}")
    pts, kts = _coords_and_knots(coords, knots)

    def build(values):
        d = cdist(as_coords(values), kts)
        return np.exp(-2.0 * d**2 / phi)

    columns = [{"kind": "gaussian-kernel", "knot": _knot_meta(k), "phi": float(phi)} for k in kts]
    return BasisExpansion(build(pts), "gaussian-kernel", columns, evaluator=build)


def uniform_kernel_basis(coords, knots, bandwidth):
    """Compactly supported indicator columns of half-width ``bandwidth / 2``.

    The window is the closed interval (ball in 2-D) of radius
    ``bandwidth / 2`` centered at each knot; the simplest symmetric
    indicator.
    """
    if bandwidth <= 0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth}")
    pts, kts = _coords_and_knots(coords, knots)
    half = bandwidth / 2.0

    def build(values):
        d = cdist(as_coords(values), kts)
        return (d <= half).astype(float)

    columns = [{"kind": "uniform-kernel", "knot": _knot_meta(k), "bandwidth": float(bandwidth)}
               for k in kts]
    return BasisExpansion(build(pts), "uniform-kernel", columns, evaluator=build)


def grouping_basis(labels):
    """Indicator columns for a categorical grouping, first-appearance order.

    The Gram product of a grouping basis is the block-diagonal matrix of
    all-ones blocks, i.e. a compound-symmetry correlation structure.
    """
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.size < 1:
        raise ValueError("labels must be a non-empty 1-D sequence")
    _, first_idx = np.unique(labels, return_index=True)
    levels = labels[np.sort(first_idx)]

    def build(values):
        values = np.asarray(values)
        return (values[:, None] == levels[None, :]).astype(float)

    columns = [{"kind": "group-indicator", "label": lev} for lev in levels]
    return BasisExpansion(build(labels), "group-indicator", columns, evaluator=build)


def predictive_process_basis(coords, knots, model):
    """Reduced-rank basis ``Z = C K^{-1}`` built on preselected knots.

    ``C`` holds correlations between the data and the knots and ``K`` the
    knot correlation matrix; coefficients are correlated with covariance
    ``sigma2 * K``.  With knots equal to the data locations the construction
    collapses to the full covariance model.
    """
    pts, kts = _coords_and_knots(coords, knots)
    if kts.shape[0] != np.unique(kts, axis=0).shape[0]:
        raise ValueError("knots must be pairwise distinct")
    K = corr_matrix(kts, model)
    factor = spd_factor(K, "knot correlation matrix")

    def build(values):
        c = cross_corr_matrix(values, kts, model)
        return factor.solve(c.T).T

    columns = [{"kind": "predictive-process", "knot": _knot_meta(k), "phi": model.phi}
               for k in kts]
    return BasisExpansion(build(pts), "predictive-process", columns,
                          coef_cov_kind="knot-correlated", coef_cov=K, evaluator=build)


def gram(basis):
    """Gram product of a basis expansion; see :meth:`BasisExpansion.gram`."""
    return basis.gram()


def equally_spaced_knots(coords, m):
    """``m`` equally spaced knots over the 1-D data range, endpoints included."""
    pts = as_coords(coords)
    if pts.shape[1] != 1:
        raise ValueError("equally spaced knots require 1-D coordinates")
    if m < 1:
        raise ValueError("need at least one knot")
    lo, hi = float(pts.min()), float(pts.max())
    if m == 1:
        return np.array([[0.5 * (lo + hi)]])
    return np.linspace(lo, hi, int(m)).reshape(-1, 1)


def spread_knots(coords, m):
    """``m`` well-spread knots inside the bounding box of the coordinates.

    1-D coordinates get equally spaced knots; 2-D coordinates get a Halton
    sequence (deterministic, no randomness) scaled to the bounding box.
    """
    pts = as_coords(coords)
    if pts.shape[1] == 1:
        return equally_spaced_knots(pts, m)
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    sampler = qmc.Halton(d=2, scramble=False)
    sampler.fast_forward(1)  # skip the degenerate corner point at the origin
    unit = sampler.random(int(m))
    return lo + unit * (hi - lo)


def _coords_to_1d(x):
    pts = as_coords(x)
    if pts.shape[1] != 1:
        raise ValueError("this basis requires 1-D coordinates")
    return pts[:, 0]


def _coords_and_knots(coords, knots):
    pts = as_coords(coords)
    kts = as_coords(knots, name="knots")
    if kts.shape[0] < 1:
        raise ValueError("need at least one knot")
    check_same_dimension(pts, kts)
    return pts, kts


def _knot_meta(k):
    return float(k[0]) if k.size == 1 else [float(v) for v in k]


def _psd_eigen(R, name):
    values, vectors = sym_eigen(R, name)
    top = values.max(initial=0.0)
    if values.min(initial=0.0) < -1e-8 * max(top, 1.0):
        raise ValueError(f"{name} is not positive semi-definite "
                         f"(eigenvalue {values.min():.3e})")
    return clamp_eigenvalues(values), vectors
