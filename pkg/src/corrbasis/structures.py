"""Random-effect structures: the two ways of declaring autocorrelation.

A structure answers, for a given range parameter ``phi``:

* ``gram(phi)`` -- the n x n correlation ``G`` entering the marginal
  covariance ``sigma2_eps * I + sigma2_alpha * G``
* ``cross_gram(new_coords, phi)`` -- correlations between new and training
  locations, used for prediction
* ``basis(phi)`` -- the basis expansion carrying the structure, when one
  exists

:class:`CovarianceStructure` declares the correlation directly through a
parametric family (the covariance-side formulation); :class:`BasisStructure`
declares it through a basis expansion with random coefficients (the
mean-side formulation).  ``to_basis_form`` converts the former into an
exactly equivalent instance of the latter by spectral decomposition.
"""

import numpy as np

from .basis import (
    correlation_eigen_basis,
    gaussian_kernel_basis,
    grouping_basis,
    polynomial_basis,
    predictive_process_basis,
    uniform_kernel_basis,
)
from .correlation import CorrelationModel, corr_matrix, cross_corr_matrix, max_pairwise_distance
from .validation import as_coords


class RandomStructure:
    """Base class; see the module docstring for the contract."""

    #: correlation family governing phi ("ar1", "gaussian", "exponential")
    #: or None when the structure has no range parameter.
    phi_family = None

    @property
    def has_phi(self):
        return self.phi_family is not None

    def gram(self, phi=None):
        raise NotImplementedError

    def cross_gram(self, new_coords, phi=None):
        raise NotImplementedError

    def basis(self, phi=None):
        return None


class CovarianceStructure(RandomStructure):
    """Autocorrelation declared through a correlation matrix ``R(phi)``."""

    def __init__(self, coords, family):
        self.coords = as_coords(coords)
        self.family = family
        self.phi_family = family

    @property
    def n(self):
        return self.coords.shape[0]

    def gram(self, phi=None):
        return corr_matrix(self.coords, CorrelationModel(self.family, phi))

    def cross_gram(self, new_coords, phi=None):
        return cross_corr_matrix(new_coords, self.coords, CorrelationModel(self.family, phi))


class BasisStructure(RandomStructure):
    """Autocorrelation declared through a basis expansion ``Z(phi)``.

    ``factory(coords, phi)`` builds the expansion; it is re-invoked when the
    range parameter moves during optimization, with a one-slot cache because
    fitted-model queries repeatedly use the estimated phi.

    ``coords`` may be None for bases that do not live in coordinate space
    (grouping indicators); their factories ignore the argument and
    ``cross_gram`` receives whatever the basis evaluator expects (labels).
    """

    def __init__(self, coords, factory, phi_family=None):
        self.coords = None if coords is None else as_coords(coords)
        self.factory = factory
        self.phi_family = phi_family
        self._cache_phi = None
        self._cache_basis = None

    def basis(self, phi=None):
        key = None if not self.has_phi else float(phi)
        if self._cache_basis is None or key != self._cache_phi:
            self._cache_basis = self.factory(self.coords, phi)
            self._cache_phi = key
        return self._cache_basis

    def gram(self, phi=None):
        return self.basis(phi).gram()

    def cross_gram(self, new_coords, phi=None):
        b = self.basis(phi)
        z_new = b.evaluate(new_coords)
        return b.weighted_crossprod(z_new)


def to_basis_form(structure):
    """Equivalent basis-form structure for a covariance-form one.

    The conversion is the spectral decomposition of ``R(phi)``:
    ``Z(phi) = Q sqrt(L)`` with iid coefficients, whose Gram product gives
    back ``R(phi)``.  The marginal likelihood is therefore identical at
    every parameter value, and predictions interpolate exactly as kriging
    does.
    """
    if not isinstance(structure, CovarianceStructure):
        raise TypeError("to_basis_form expects a covariance-form structure")
    family = structure.family

    def factory(coords, phi):
        return correlation_eigen_basis(coords, CorrelationModel(family, phi))

    return BasisStructure(structure.coords, factory, phi_family=family)


def build_structure(coords=None, family=None, basis=None, *, knots=None,
                    bandwidth=None, degree=2, groups=None, phi_fixed=None):
    """Assemble a random-effect structure from flag-style arguments.

    Mirrors the command line surface: ``family`` alone gives the covariance
    form; ``basis`` selects a basis form.  Returns ``None`` when neither is
    requested (independent errors).
    """
    if basis is None:
        if family is None:
            return None
        return CovarianceStructure(coords, family)

    if basis == "eigen":
        if family is None:
            raise ValueError("eigen basis requires a correlation family")
        return to_basis_form(CovarianceStructure(coords, family))

    if basis == "gauss-kernel":
        if knots is None:
            raise ValueError("gauss-kernel basis requires knots")
        kts = as_coords(knots, name="knots")
        return BasisStructure(
            coords,
            lambda c, phi: gaussian_kernel_basis(c, kts, phi),
            phi_family="gaussian",
        )

    if basis == "uniform-kernel":
        if knots is None:
            raise ValueError("uniform-kernel basis requires knots")
        kts = as_coords(knots, name="knots")
        if bandwidth is None:
            bandwidth = _default_bandwidth(kts)
        return BasisStructure(
            coords, lambda c, phi: uniform_kernel_basis(c, kts, bandwidth)
        )

    if basis == "poly":
        return BasisStructure(coords, lambda c, phi: polynomial_basis(c, degree))

    if basis == "group":
        if groups is None:
            raise ValueError("group basis requires group labels")
        labels = np.asarray(groups)
        return BasisStructure(None, lambda c, phi: grouping_basis(labels))

    if basis == "pp":
        if family is None:
            raise ValueError("predictive-process basis requires a correlation family")
        if knots is None:
            raise ValueError("predictive-process basis requires knots")
        kts = as_coords(knots, name="knots")
        return BasisStructure(
            coords,
            lambda c, phi: predictive_process_basis(c, kts, CorrelationModel(family, phi)),
            phi_family=family,
        )

    raise ValueError(f"unknown basis kind {basis!r}")


def phi_search_space(structure, coords=None):
    """Bounds and transform for the range parameter of a structure.

    ar1 uses the atanh transform on (-0.999, 0.999); the distance-based
    families use a log transform with bounds tied to the largest pairwise
    distance, spanning effectively-independent through effectively-flat
    correlation.
    """
    family = structure.phi_family
    if family is None:
        return None
    if family == "ar1":
        # negative phi only makes sense when every lag is an integer
        pts = coords if coords is not None else structure.coords
        lo = -0.999 if _integer_lags(pts) else 1e-6
        return {"family": family, "bounds": (lo, 0.999),
                "to": np.arctanh, "back": np.tanh}
    pts = coords if coords is not None else structure.coords
    d_max = max_pairwise_distance(pts)
    lo, hi = 1e-3 * d_max, 10.0 * d_max
    return {"family": family, "bounds": (lo, hi), "to": np.log, "back": np.exp}


def _integer_lags(coords):
    pts = as_coords(coords)
    if pts.shape[1] != 1:
        return False
    frac = pts[:, 0] - np.round(pts[:, 0])
    return bool(np.all(np.abs(frac - frac[0]) < 1e-8))


def _default_bandwidth(knots):
    """Twice the mean nearest-knot spacing: each point sees a handful of knots."""
    kts = as_coords(knots, name="knots")
    if kts.shape[0] < 2:
        return 1.0
    if kts.shape[1] == 1:
        spacing = np.diff(np.sort(kts[:, 0]))
        return 2.0 * float(spacing.mean()) if spacing.size else 1.0
    from scipy.spatial.distance import pdist

    return 2.0 * float(np.median(pdist(kts)))
