"""Gaussian linear mixed models with autocorrelated random effects.

The marginal model is ``y ~ N(X beta, sigma2_eps * I + sigma2_alpha * G)``
where ``G`` comes from a :mod:`~corrbasis.structures` random-effect
structure: a correlation matrix for the covariance-form specification or
the Gram product of a basis expansion for the basis-form one.  Because the
two forms produce the same ``G``, every quantity here (likelihood, BLUP,
prediction) agrees across forms.

Estimation is maximum likelihood with the fixed effects profiled out by
generalized least squares and the variance parameters optimized by a
bounded derivative-free simplex search on ``(log sigma2_eps,
log sigma2_alpha, t(phi))``.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import ndtri
from sklearn.base import BaseEstimator

from . import structures as st
from .basis import (
    gaussian_kernel_basis,
    polynomial_basis,
    shifted_quadratic_basis,
    spread_knots,
    uniform_kernel_basis,
)
from .diagnostics import diagnostics_report
from .linalg import spd_factor
from .validation import as_coords, as_float_vector, check_full_column_rank

VARIANCE_FLOOR = 1e-12  # keeps the marginal covariance invertible for degenerate data


class ConvergenceError(RuntimeError):
    """Raised when every optimizer restart fails; carries the best fit found."""

    def __init__(self, message, best_fit):
        super().__init__(message)
        self.best_fit = best_fit


@dataclass
class MixedModelFit:
    """Container for a fitted model's parameter estimates."""

    beta: np.ndarray
    beta_cov: np.ndarray
    sigma2_eps: float
    sigma2_alpha: float
    phi: float | None
    loglik: float
    converged: bool
    trace: list = field(default_factory=list, repr=False)


def _marginal_factor(structure, sigma2_eps, sigma2_alpha, phi, n):
    g = None
    if structure is not None and sigma2_alpha > 0:
        g = structure.gram(phi)
    if g is None:
        sigma = max(sigma2_eps, VARIANCE_FLOOR) * np.eye(n)
    else:
        sigma = sigma2_alpha * g
        idx = np.arange(n)
        sigma[idx, idx] += max(sigma2_eps, VARIANCE_FLOOR)
    return spd_factor(sigma, "marginal covariance")


def _gls(y, X, factor):
    """Profile the fixed effects: GLS estimate, its covariance, and the residual."""
    siy = factor.solve(y)
    six = factor.solve(X)
    xtsx = X.T @ six
    xtsy = X.T @ siy
    cov = np.linalg.inv(xtsx)
    beta = cov @ xtsy
    resid = y - X @ beta
    return beta, cov, resid


def marginal_nll(y, X, structure, sigma2_eps, sigma2_alpha, phi=None):
    """Negative log marginal likelihood with the fixed effects profiled out.

    This is the objective of :func:`fit_ml`; with ``sigma2_alpha = 0`` it is
    the ordinary least-squares negative log likelihood at noise variance
    ``sigma2_eps``.
    """
    y = as_float_vector(y, "y")
    X = np.asarray(X, dtype=float)
    n = y.size
    factor = _marginal_factor(structure, sigma2_eps, sigma2_alpha, phi, n)
    _, _, resid = _gls(y, X, factor)
    quad = float(resid @ factor.solve(resid))
    return 0.5 * (n * math.log(2.0 * math.pi) + factor.logdet + quad)


def blup_eta(y, X, beta, structure, sigma2_eps, sigma2_alpha, phi=None):
    """Best linear unbiased predictor of the correlated random effect.

    ``eta_hat = sigma2_alpha * G * (sigma2_eps * I + sigma2_alpha * G)^{-1}
    * (y - X beta)``.
    """
    y = as_float_vector(y, "y")
    n = y.size
    if structure is None or sigma2_alpha == 0:
        return np.zeros(n)
    resid = y - np.asarray(X, dtype=float) @ np.asarray(beta, dtype=float)
    factor = _marginal_factor(structure, sigma2_eps, sigma2_alpha, phi, n)
    return sigma2_alpha * (structure.gram(phi) @ factor.solve(resid))


def blup_alpha(y, X, beta, structure, sigma2_eps, sigma2_alpha, phi=None):
    """Predicted basis coefficients for a basis-form structure.

    ``alpha_hat = sigma2_alpha * W Z' Sigma^{-1} (y - X beta)`` where ``W``
    is the coefficient covariance payload (identity, eigenvalue weights, or
    the knot correlation matrix).  ``Z alpha_hat`` equals :func:`blup_eta`
    of the Gram-equivalent covariance-form model.
    """
    if not isinstance(structure, st.BasisStructure):
        raise ValueError("basis coefficients require a basis-form structure; "
                         "convert with to_basis_form first")
    y = as_float_vector(y, "y")
    basis = structure.basis(phi)
    if sigma2_alpha == 0:
        return np.zeros(basis.n_basis)
    resid = y - np.asarray(X, dtype=float) @ np.asarray(beta, dtype=float)
    factor = _marginal_factor(structure, sigma2_eps, sigma2_alpha, phi, y.size)
    sresid = factor.solve(resid)
    # W Z' s for the three coefficient covariance kinds
    zs = basis.matrix.T @ sresid
    if basis.coef_cov_kind == "eigen-weighted":
        zs = basis.coef_cov * zs
    elif basis.coef_cov_kind == "knot-correlated":
        zs = basis.coef_cov @ zs
    return sigma2_alpha * zs


def predict_mean(y, X, beta, structure, sigma2_eps, sigma2_alpha, phi,
                 new_X, new_coords):
    """Plug-in prediction at new locations.

    ``new_X beta + sigma2_alpha * C_new Sigma^{-1} (y - X beta)`` with
    ``C_new`` the cross-correlation (or cross-Gram) between new and training
    locations -- the kriging extension of the in-sample BLUP.  At the
    training locations it reproduces ``X beta + eta_hat`` exactly.
    """
    y = as_float_vector(y, "y")
    new_X = np.asarray(new_X, dtype=float)
    fixed = new_X @ np.asarray(beta, dtype=float)
    if structure is None or sigma2_alpha == 0:
        return fixed
    resid = y - np.asarray(X, dtype=float) @ np.asarray(beta, dtype=float)
    factor = _marginal_factor(structure, sigma2_eps, sigma2_alpha, phi, y.size)
    cross = structure.cross_gram(new_coords, phi)
    return fixed + sigma2_alpha * (cross @ factor.solve(resid))


def wald_interval(estimate, se, level=0.95):
    """Normal-quantile confidence interval ``estimate +- z * se``."""
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must be in (0, 1), got {level}")
    z = ndtri(0.5 * (1.0 + level))
    return estimate - z * se, estimate + z * se


def _ols_fit(y, X):
    n, p = X.shape
    beta, _, _, _ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    s2 = max(float(resid @ resid) / n, VARIANCE_FLOOR)
    loglik = -0.5 * n * (math.log(2.0 * math.pi * s2) + 1.0)
    cov = s2 * np.linalg.inv(X.T @ X)
    return MixedModelFit(beta=beta, beta_cov=cov, sigma2_eps=s2, sigma2_alpha=0.0,
                         phi=None, loglik=loglik, converged=True,
                         trace=[{"method": "closed-form"}])


def fit_ml(y, X, structure=None, include_nugget=True, n_restarts=3,
           max_iter=500, tol=1e-8):
    """Maximum-likelihood fit of the mixed model.

    The variance parameters are searched on a transformed scale (log for
    the variances, atanh or log for the range parameter depending on its
    family) by Nelder-Mead simplex from ``n_restarts`` dispersed starting
    points that are fixed functions of the data scale.  A restart
    terminates when the simplex diameter drops below ``tol`` or after
    ``max_iter`` iterations; both count as valid stops.  If every restart
    ends on a non-finite objective a :class:`ConvergenceError` is raised
    carrying the best fit found.
    """
    y = as_float_vector(y, "y")
    X = np.asarray(X, dtype=float)
    n = y.size

    if structure is None:
        return _ols_fit(y, X)

    space = st.phi_search_space(structure)
    has_phi = space is not None

    # parameter packing: [log s2e]? + [log s2a] + [t(phi)]?
    def unpack(params):
        k = 0
        if include_nugget:
            s2e = math.exp(params[k]); k += 1
        else:
            s2e = 0.0
        s2a = math.exp(params[k]); k += 1
        phi = space["back"](params[k]) if has_phi else None
        return s2e, s2a, phi

    def objective(params):
        s2e, s2a, phi = unpack(params)
        try:
            return marginal_nll(y, X, structure, s2e, s2a, phi)
        except np.linalg.LinAlgError:
            return 1e300

    # dispersed, data-scale starting points
    ols = _ols_fit(y, X)
    s2 = max(ols.sigma2_eps, 1e-8)
    if has_phi:
        lo, hi = space["bounds"]
        if space["family"] == "ar1":
            phi_starts = (0.3, 0.8, -0.3)
        else:
            phi_starts = (math.sqrt(lo * hi), 0.8 * hi, 2.0 * lo)
        phi_starts = tuple(min(max(ph, lo + 1e-9), hi - 1e-9) for ph in phi_starts)
    else:
        phi_starts = (None, None, None)
    weight_starts = ((0.5, 0.5), (0.9, 0.1), (0.1, 0.9))

    starts = []
    for (we, wa), ph in zip(weight_starts, phi_starts):
        point = []
        if include_nugget:
            point.append(math.log(we * s2))
        point.append(math.log(wa * s2))
        if has_phi:
            point.append(float(space["to"](ph)))
        starts.append(np.array(point))

    log_floor = math.log(VARIANCE_FLOOR)
    bounds = []
    if include_nugget:
        bounds.append((log_floor, 50.0))
    bounds.append((log_floor, 50.0))
    if has_phi:
        lo, hi = space["bounds"]
        bounds.append((float(space["to"](lo)), float(space["to"](hi))))

    best = None
    trace = []
    for start in starts[:max(1, n_restarts)]:
        res = minimize(objective, start, method="Nelder-Mead", bounds=bounds,
                       options={"xatol": tol, "fatol": tol * 1e-2,
                                "maxiter": max_iter, "maxfev": 4 * max_iter})
        trace.append({"start": start.tolist(), "nll": float(res.fun),
                      "n_iter": int(res.nit),
                      "tolerance_met": bool(res.success)})
        if best is None or res.fun < best.fun:
            best = res

    s2e, s2a, phi = unpack(best.x)
    factor = _marginal_factor(structure, s2e, s2a, phi, n)
    beta, beta_cov, resid = _gls(y, X, factor)
    quad = float(resid @ factor.solve(resid))
    loglik = -0.5 * (n * math.log(2.0 * math.pi) + factor.logdet + quad)
    # stopping at max_iter counts as valid termination; only a useless
    # objective is a failure
    fit = MixedModelFit(beta=beta, beta_cov=beta_cov, sigma2_eps=s2e,
                        sigma2_alpha=s2a, phi=phi, loglik=loglik,
                        converged=any(t["tolerance_met"] for t in trace),
                        trace=trace)
    if not np.isfinite(best.fun) or best.fun >= 1e300:
        raise ConvergenceError("every simplex restart ended on a non-finite "
                               "objective", fit)
    return fit


class LinearMixedModel(BaseEstimator):
    """Regression with an autocorrelated random effect, scikit-learn style.

    Parameters
    ----------
    family : str or None
        Correlation family of the random effect (``"ar1"``, ``"gaussian"``,
        ``"exponential"``).  ``None`` together with ``basis=None`` gives an
        ordinary ML linear regression.
    basis : str or None
        ``None`` keeps the covariance-form specification; otherwise one of
        ``"eigen"``, ``"gauss-kernel"``, ``"uniform-kernel"``, ``"poly"``,
        ``"group"``, ``"pp"`` selects a basis-form random effect.
    phi : float or None
        Fixed range parameter; ``None`` estimates it.
    n_knots, knots, bandwidth, degree
        Basis configuration.  ``knots`` overrides ``n_knots``; the default
        knot layout is equally spaced (1-D) or a Halton spread (2-D).
    fixed_basis : bool
        Treat the basis columns as fixed effects (appended to ``X``) rather
        than random effects.  Used for classic polynomial-regression
        parameterizations.
    include_nugget : bool
        Include the independent error variance in the marginal covariance.
    fit_intercept : bool
        Prepend a column of ones to the design.
    n_restarts, max_iter, tol
        Simplex search controls; see :func:`fit_ml`.

    Attributes (after ``fit``)
    --------------------------
    beta_, beta_cov_, sigma2_eps_, sigma2_alpha_, phi_, loglik_,
    eta_ (in-sample random-effect predictor), alpha_ (basis coefficients,
    basis-form only), fitted_, residuals_, converged_, trace_.
    """

    def __init__(self, family=None, basis=None, phi=None, n_knots=None,
                 knots=None, bandwidth=None, degree=2, fixed_basis=False,
                 include_nugget=True, fit_intercept=True, n_restarts=3,
                 max_iter=500, tol=1e-8):
        self.family = family
        self.basis = basis
        self.phi = phi
        self.n_knots = n_knots
        self.knots = knots
        self.bandwidth = bandwidth
        self.degree = degree
        self.fixed_basis = fixed_basis
        self.include_nugget = include_nugget
        self.fit_intercept = fit_intercept
        self.n_restarts = n_restarts
        self.max_iter = max_iter
        self.tol = tol

    # -- design helpers ---------------------------------------------------

    def _design(self, X, n, coords):
        blocks = []
        # the shifted-quadratic columns span constants already; adding an
        # intercept would make the design exactly rank deficient
        wants_intercept = self.fit_intercept and not (
            self.fixed_basis and self.basis == "shifted-quadratic")
        if wants_intercept:
            blocks.append(np.ones((n, 1)))
        if X is not None:
            arr = np.asarray(X, dtype=float)
            if arr.ndim == 1:
                arr = arr.reshape(-1, 1)
            blocks.append(arr)
        if self.fixed_basis and self.basis is not None:
            blocks.append(self._fixed_basis_matrix(coords))
        if not blocks:
            raise ValueError("empty design: provide X or set fit_intercept=True")
        return np.hstack(blocks)

    def _fixed_basis_matrix(self, coords):
        b = self._fixed_basis_expansion(coords)
        m = b.matrix
        if self.fit_intercept and b.kind == "polynomial-power":
            m = m[:, 1:]  # constant column already present
        return m

    def _fixed_basis_expansion(self, coords):
        if self.basis == "poly":
            return polynomial_basis(coords, self.degree)
        if self.basis == "shifted-quadratic":
            if self.knots is None:
                raise ValueError("shifted-quadratic basis requires knots")
            return shifted_quadratic_basis(coords, np.asarray(self.knots, dtype=float).ravel())
        knots = self._resolve_knots(coords)
        if self.basis == "gauss-kernel":
            if self.phi is None:
                raise ValueError("fixed gauss-kernel basis requires an explicit phi")
            return gaussian_kernel_basis(coords, knots, self.phi)
        if self.basis == "uniform-kernel":
            return uniform_kernel_basis(coords, knots, self.bandwidth)
        raise ValueError(f"basis {self.basis!r} cannot be used as a fixed-effect basis")

    def _resolve_knots(self, coords):
        if self.knots is not None:
            return as_coords(np.asarray(self.knots, dtype=float), name="knots")
        if self.n_knots is None:
            raise ValueError(f"{self.basis} basis requires knots or n_knots")
        return spread_knots(coords, self.n_knots)

    def _build_structure(self, coords, groups):
        if self.fixed_basis:
            # basis columns live in the fixed design; only a family term remains random
            if self.family is None:
                return None
            return st.CovarianceStructure(coords, self.family)
        knots = None
        if self.basis in ("gauss-kernel", "uniform-kernel", "pp"):
            knots = self._resolve_knots(coords)
        return st.build_structure(coords, self.family, self.basis, knots=knots,
                                  bandwidth=self.bandwidth, degree=self.degree,
                                  groups=groups)

    # -- estimator API ----------------------------------------------------

    def fit(self, X, y, coords=None, groups=None):
        y = as_float_vector(y, "y")
        n = y.size
        needs_coords = self.family is not None or self.basis not in (None, "group")
        if needs_coords and coords is None:
            raise ValueError("this model requires coordinates")
        coords = None if coords is None else as_coords(coords)
        design = self._design(X, n, coords)
        check_full_column_rank(design)
        structure = self._build_structure(coords, groups)

        if structure is not None and not structure.has_phi and self.phi is not None:
            warnings.warn("phi given but the structure has no range parameter; ignored")

        if structure is not None and structure.has_phi and self.phi is not None:
            fit = self._fit_fixed_phi(y, design, structure)
        else:
            fit = fit_ml(y, design, structure, include_nugget=self.include_nugget,
                         n_restarts=self.n_restarts, max_iter=self.max_iter,
                         tol=self.tol)

        self.structure_ = structure
        self.X_design_ = design
        self.y_ = y
        self.coords_ = coords
        self.groups_ = None if groups is None else np.asarray(groups)
        self.beta_ = fit.beta
        self.beta_cov_ = fit.beta_cov
        self.sigma2_eps_ = fit.sigma2_eps
        self.sigma2_alpha_ = fit.sigma2_alpha
        self.phi_ = fit.phi
        self.loglik_ = fit.loglik
        self.converged_ = fit.converged
        self.trace_ = fit.trace
        self.eta_ = blup_eta(y, design, fit.beta, structure, fit.sigma2_eps,
                             fit.sigma2_alpha, fit.phi)
        if isinstance(structure, st.BasisStructure):
            self.alpha_ = blup_alpha(y, design, fit.beta, structure,
                                     fit.sigma2_eps, fit.sigma2_alpha, fit.phi)
        else:
            self.alpha_ = None
        self.fitted_ = design @ fit.beta + self.eta_
        self.residuals_ = y - self.fitted_
        return self

    def _fit_fixed_phi(self, y, design, structure):
        """ML over the variance parameters with the range parameter held fixed."""
        phi = float(self.phi)
        pinned = _PinnedPhiStructure(structure, phi)
        fit = fit_ml(y, design, pinned, include_nugget=self.include_nugget,
                     n_restarts=self.n_restarts, max_iter=self.max_iter, tol=self.tol)
        fit.phi = phi
        return fit

    def predict(self, X=None, coords=None, groups=None):
        """Plug-in prediction at new covariates/locations."""
        if not hasattr(self, "beta_"):
            raise RuntimeError("model is not fitted")
        if coords is not None:
            coords = as_coords(coords)
            n_new = coords.shape[0]
        elif X is not None:
            arr = np.asarray(X, dtype=float)
            n_new = arr.shape[0]
        elif groups is not None:
            n_new = len(groups)
        else:
            raise ValueError("provide X, coords or groups to predict")
        new_design = self._design(X, n_new, coords)
        structure = self.structure_
        if structure is None:
            return new_design @ self.beta_
        target = groups if self._is_group_model() else coords
        if target is None:
            raise ValueError("prediction requires the structure's coordinates or groups")
        return predict_mean(self.y_, self.X_design_, self.beta_, structure,
                            self.sigma2_eps_, self.sigma2_alpha_, self.phi_,
                            new_design, target)

    def _is_group_model(self):
        return self.basis == "group" and not self.fixed_basis

    def conf_int(self, level=0.95):
        """Wald confidence intervals for all fixed-effect coefficients."""
        se = np.sqrt(np.diag(self.beta_cov_))
        lo, hi = wald_interval(self.beta_, se, level)
        return np.column_stack([lo, hi])

    def diagnostics(self, X=None, max_lag=None):
        """Residual autocorrelation plus basis/covariate collinearity report.

        For covariance-form models the basis used in the collinearity block
        is the spectral conversion at the estimated range parameter --
        exactly how hidden collinearity is surfaced for those models.
        """
        structure = self.structure_
        basis = None
        if self.fixed_basis and self.basis is not None:
            basis = self._fixed_basis_expansion(self.coords_)
        elif isinstance(structure, st.BasisStructure):
            basis = structure.basis(self.phi_)
        elif isinstance(structure, st.CovarianceStructure):
            basis = st.to_basis_form(structure).basis(self.phi_)
        covariates = self.X_design_ if X is None else np.asarray(X, dtype=float)
        if max_lag is None:
            max_lag = min(20, self.y_.size // 2 - 1)
        return diagnostics_report(self.residuals_, basis=basis, covariates=covariates,
                                  max_lag=max_lag)


class _PinnedPhiStructure(st.RandomStructure):
    """Wrapper that freezes the range parameter of another structure."""

    def __init__(self, inner, phi):
        self.inner = inner
        self.pinned_phi = phi
        self.phi_family = None  # hides phi from the optimizer

    def gram(self, phi=None):
        return self.inner.gram(self.pinned_phi)

    def cross_gram(self, new_coords, phi=None):
        return self.inner.cross_gram(new_coords, self.pinned_phi)

    def basis(self, phi=None):
        return self.inner.basis(self.pinned_phi)
