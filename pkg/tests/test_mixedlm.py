"""Tests for the Gaussian mixed model: likelihood, fitting, BLUP, prediction."""

import math
import os

import numpy as np
import pytest

from corrbasis import structures as st
from corrbasis.basis import eigen_basis
from corrbasis.correlation import CorrelationModel, corr_matrix
from corrbasis.mixedlm import (
    LinearMixedModel,
    blup_alpha,
    blup_eta,
    fit_ml,
    marginal_nll,
    predict_mean,
    wald_interval,
)
from corrbasis.simulate import simulate_dataset


def invert_by_gauss_jordan(a):
    """Hand-rolled matrix inverse (oracle, no LAPACK)."""
    n = a.shape[0]
    aug = np.hstack([a.astype(float).copy(), np.eye(n)])
    for col in range(n):
        pivot = col + int(np.argmax(np.abs(aug[col:, col])))
        aug[[col, pivot]] = aug[[pivot, col]]
        aug[col] /= aug[col, col]
        for row in range(n):
            if row != col:
                aug[row] -= aug[row, col] * aug[col]
    return aug[:, n:]


def logdet_by_cofactor(m):
    n = m.shape[0]
    if n == 1:
        return m[0, 0]
    total = 0.0
    for j in range(n):
        minor = np.delete(np.delete(m, 0, axis=0), j, axis=1)
        total += (-1.0) ** j * m[0, j] * logdet_by_cofactor(minor)
    return total


def mvn_profile_nll_oracle(y, X, sigma):
    """Profiled-likelihood oracle via explicit inversion and cofactor determinant."""
    n = y.size
    sigma_inv = invert_by_gauss_jordan(sigma)
    beta = invert_by_gauss_jordan(X.T @ sigma_inv @ X) @ (X.T @ sigma_inv @ y)
    r = y - X @ beta
    det = logdet_by_cofactor(sigma)
    return 0.5 * (n * math.log(2 * math.pi) + math.log(det) + r @ sigma_inv @ r)


class TestMarginalNll:
    def test_zero_alpha_matches_ols_likelihood(self):
        rng = np.random.default_rng(0)
        n = 20
        X = np.column_stack([np.ones(n), rng.normal(size=n)])
        y = X @ np.array([1.0, -2.0]) + rng.normal(size=n)
        structure = st.CovarianceStructure(np.arange(n, dtype=float), "ar1")
        s2e = 1.3
        got = marginal_nll(y, X, structure, s2e, 0.0, 0.5)
        beta, *_ = np.linalg.lstsq(X, y, rcond=None)
        rss = float(np.sum((y - X @ beta) ** 2))
        expected = 0.5 * (n * math.log(2 * math.pi * s2e) + rss / s2e)
        np.testing.assert_allclose(got, expected, rtol=1e-12)

    @pytest.mark.parametrize("family,phi", [("ar1", 0.6), ("gaussian", 2.0),
                                            ("exponential", 1.3)])
    def test_covariance_and_basis_forms_agree(self, family, phi):
        rng = np.random.default_rng(1)
        pts = np.sort(rng.uniform(0, 8, 15))
        X = np.column_stack([np.ones(15), rng.normal(size=15)])
        y = rng.normal(size=15)
        cov_form = st.CovarianceStructure(pts, family)
        basis_form = st.to_basis_form(cov_form)
        for s2e, s2a in [(0.5, 1.0), (2.0, 0.2)]:
            a = marginal_nll(y, X, cov_form, s2e, s2a, phi)
            b = marginal_nll(y, X, basis_form, s2e, s2a, phi)
            assert abs(a - b) < 1e-8

    def test_matches_explicit_inverse_oracle(self):
        """Five AR(1) observations against a Gauss-Jordan + cofactor oracle."""
        rng = np.random.default_rng(2)
        times = np.arange(5.0)
        X = np.column_stack([np.ones(5), rng.normal(size=5)])
        y = rng.normal(size=5)
        s2e, s2a, phi = 0.8, 1.7, 0.5
        structure = st.CovarianceStructure(times, "ar1")
        got = marginal_nll(y, X, structure, s2e, s2a, phi)
        sigma = s2e * np.eye(5) + s2a * corr_matrix(times, CorrelationModel("ar1", phi))
        expected = mvn_profile_nll_oracle(y, X, sigma)
        np.testing.assert_allclose(got, expected, atol=1e-10)


class TestFitMl:
    def test_noiseless_data_recovers_exactly(self):
        rng = np.random.default_rng(3)
        n = 25
        X = np.column_stack([np.ones(n), rng.normal(size=n)])
        beta0 = np.array([2.0, -1.5])
        y = X @ beta0
        structure = st.CovarianceStructure(np.arange(n, dtype=float), "ar1")
        fit = fit_ml(y, X, structure)
        assert fit.sigma2_eps < 1e-6
        assert fit.sigma2_alpha < 1e-6
        np.testing.assert_allclose(fit.beta, beta0, atol=1e-8)

    def test_pure_trend_data(self):
        """With no correlated effect in truth, sigma2_alpha collapses."""
        data = simulate_dataset(80, [1.0, 0.5], family=None, sigma2_eps=1.0,
                                seed=42, trend=True, extent=20.0)
        X = data["X"]
        structure = st.CovarianceStructure(data["coords"], "exponential")
        design = np.column_stack([np.ones(80), X])
        fit = fit_ml(data["y"], design, structure)
        se = np.sqrt(np.diag(fit.beta_cov))
        assert np.all(np.abs(fit.beta - [1.0, 0.5]) < 3 * se)
        assert fit.sigma2_alpha < 0.1 * fit.sigma2_eps

    def test_ar1_monte_carlo_recovery(self):
        """Median estimated decay over 200 integer-grid replicates lands near truth."""
        times = np.arange(100.0)
        estimates = []
        for rep in range(200):
            data = simulate_dataset(100, [2.0], family="ar1", phi=0.5,
                                    sigma2_eps=0.5, sigma2_alpha=1.0,
                                    seed=5_000 + rep, coords=times)
            est = LinearMixedModel(family="ar1", n_restarts=1).fit(
                None, data["y"], coords=times)
            estimates.append(est.phi_)
        assert abs(np.median(estimates) - 0.5) < 0.15

    def test_trace_records_restarts(self):
        rng = np.random.default_rng(4)
        y = rng.normal(size=12)
        structure = st.CovarianceStructure(np.arange(12.0), "ar1")
        fit = fit_ml(y, np.ones((12, 1)), structure, n_restarts=3)
        assert len(fit.trace) == 3
        assert all("nll" in t for t in fit.trace)


class TestBlup:
    def _setup(self, seed=5, n=10):
        rng = np.random.default_rng(seed)
        pts = np.sort(rng.uniform(0, 6, n))
        X = np.column_stack([np.ones(n), rng.normal(size=n)])
        y = rng.normal(size=n)
        return pts, X, y

    def test_zero_residual_gives_zero_eta(self):
        pts, X, _ = self._setup()
        beta = np.array([0.7, -0.4])
        y = X @ beta
        structure = st.CovarianceStructure(pts, "exponential")
        eta = blup_eta(y, X, beta, structure, 0.5, 1.0, 1.0)
        np.testing.assert_allclose(eta, 0.0, atol=1e-12)

    def test_zero_alpha_variance_gives_zero_eta(self):
        pts, X, y = self._setup()
        structure = st.CovarianceStructure(pts, "exponential")
        eta = blup_eta(y, X, np.array([0.1, 0.1]), structure, 0.5, 0.0, 1.0)
        np.testing.assert_array_equal(eta, 0.0)

    def test_matches_explicit_inverse_oracle(self):
        """Four observations against the hand-inverted predictor formula."""
        rng = np.random.default_rng(6)
        times = np.arange(4.0)
        X = np.ones((4, 1))
        y = rng.normal(size=4)
        beta = np.array([0.3])
        s2e, s2a, phi = 0.6, 1.1, 0.4
        structure = st.CovarianceStructure(times, "ar1")
        got = blup_eta(y, X, beta, structure, s2e, s2a, phi)
        r_mat = corr_matrix(times, CorrelationModel("ar1", phi))
        inner = invert_by_gauss_jordan(s2e * np.eye(4) + s2a * r_mat)
        expected = s2a * r_mat @ inner @ (y - X @ beta)
        np.testing.assert_allclose(got, expected, atol=1e-10)

    @pytest.mark.parametrize("family,phi", [("ar1", 0.5), ("gaussian", 1.5),
                                            ("exponential", 2.0)])
    def test_basis_coefficients_reproduce_eta(self, family, phi):
        pts, X, y = self._setup(seed=7, n=14)
        beta = np.array([0.2, 0.1])
        cov_form = st.CovarianceStructure(pts, family)
        basis_form = st.to_basis_form(cov_form)
        eta = blup_eta(y, X, beta, cov_form, 0.5, 1.2, phi)
        alpha = blup_alpha(y, X, beta, basis_form, 0.5, 1.2, phi)
        z = basis_form.basis(phi).matrix
        assert np.abs(z @ alpha - eta).max() < 1e-8

    def test_zero_residual_gives_zero_alpha(self):
        pts, X, _ = self._setup(seed=8)
        beta = np.array([1.0, 2.0])
        y = X @ beta
        basis_form = st.to_basis_form(st.CovarianceStructure(pts, "ar1"))
        alpha = blup_alpha(y, X, beta, basis_form, 0.5, 1.0, 0.5)
        np.testing.assert_allclose(alpha, 0.0, atol=1e-12)

    def test_grouping_coefficients_are_shrunken_means(self):
        """Indicator-basis coefficients equal n_g s2a / (s2e + n_g s2a) * group mean."""
        labels = list("aabbcc")
        rng = np.random.default_rng(9)
        y = rng.normal(size=6)
        X = np.ones((6, 1))
        beta = np.array([y.mean()])
        s2e, s2a = 0.7, 1.3
        structure = st.build_structure(basis="group", groups=labels)
        alpha = blup_alpha(y, X, beta, structure, s2e, s2a)
        r = y - X @ beta
        expected = []
        for g in range(3):
            rg = r[2 * g:2 * g + 2]
            expected.append(2 * s2a / (s2e + 2 * s2a) * rg.mean())
        np.testing.assert_allclose(alpha, expected, atol=1e-8)

    def test_covariance_form_rejected(self):
        pts, X, y = self._setup()
        structure = st.CovarianceStructure(pts, "ar1")
        with pytest.raises(ValueError, match="basis-form"):
            blup_alpha(y, X, np.array([0.0, 0.0]), structure, 1.0, 1.0, 0.5)

    def test_noiseless_residual_covariance_with_eta(self):
        """With noiseless data and the error variance at its floor, the final
        residual is negligible, so its sample covariance with the predictor
        vanishes."""
        rng = np.random.default_rng(10)
        pts = np.sort(rng.uniform(0, 5, 12))
        structure = st.CovarianceStructure(pts, "exponential")
        r_mat = structure.gram(1.5)
        eta_true = np.linalg.cholesky(r_mat + 1e-12 * np.eye(12)) @ rng.normal(size=12)
        X = np.ones((12, 1))
        y = 0.4 + eta_true
        factor_beta = np.array([0.4])
        eta = blup_eta(y, X, factor_beta, structure, 0.0, 1.0, 1.5)
        resid = y - X @ factor_beta - eta
        assert np.abs(resid).max() < 1e-6
        cov = float(np.mean((resid - resid.mean()) * (eta - eta.mean())))
        assert abs(cov) < 1e-6


class TestPredict:
    def test_interpolation_limit(self):
        """As the error variance vanishes, prediction at a data point hits the datum."""
        rng = np.random.default_rng(11)
        pts = np.sort(rng.uniform(0, 5, 10))
        y = np.sin(pts) + 0.1 * rng.normal(size=10)
        X = np.ones((10, 1))
        beta = np.array([y.mean()])
        structure = st.CovarianceStructure(pts, "exponential")
        pred = predict_mean(y, X, beta, structure, 1e-10, 1.0, 2.0,
                            np.ones((1, 1)), [pts[3]])
        assert abs(pred[0] - y[3]) < 1e-4

    def test_intercept_only_without_random_effect(self):
        y = np.array([1.0, 2.0, 3.0])
        X = np.ones((3, 1))
        beta = np.array([2.0])
        got = predict_mean(y, X, beta, None, 1.0, 0.0, None, np.ones((2, 1)),
                           [0.0, 1.0])
        np.testing.assert_array_equal(got, [2.0, 2.0])

    def test_training_locations_reproduce_fitted_values(self):
        rng = np.random.default_rng(12)
        pts = np.sort(rng.uniform(0, 5, 16))
        X = np.column_stack([np.ones(16), rng.normal(size=16)])
        y = rng.normal(size=16)
        beta = np.array([0.5, -0.2])
        structure = st.CovarianceStructure(pts, "ar1")
        eta = blup_eta(y, X, beta, structure, 0.9, 1.4, 0.3)
        pred = predict_mean(y, X, beta, structure, 0.9, 1.4, 0.3, X, pts)
        np.testing.assert_allclose(pred, X @ beta + eta, atol=1e-10)

    @pytest.mark.parametrize("family,phi", [("gaussian", 1.5), ("exponential", 2.0)])
    def test_basis_form_prediction_matches_kriging(self, family, phi):
        rng = np.random.default_rng(13)
        pts = np.sort(rng.uniform(0, 5, 12))
        new_pts = np.array([1.3, 2.7, 4.4])
        X = np.ones((12, 1))
        y = rng.normal(size=12)
        beta = np.array([0.1])
        cov_form = st.CovarianceStructure(pts, family)
        basis_form = st.to_basis_form(cov_form)
        a = predict_mean(y, X, beta, cov_form, 0.5, 1.0, phi, np.ones((3, 1)), new_pts)
        b = predict_mean(y, X, beta, basis_form, 0.5, 1.0, phi, np.ones((3, 1)), new_pts)
        np.testing.assert_allclose(a, b, atol=1e-8)


class TestWaldInterval:
    def test_standard_normal_quantile(self):
        lo, hi = wald_interval(0.0, 1.0, 0.95)
        np.testing.assert_allclose([lo, hi], [-1.959964, 1.959964], atol=1e-6)

    def test_matches_ols_oracle(self):
        rng = np.random.default_rng(14)
        n = 50
        x = rng.normal(size=n)
        X = np.column_stack([np.ones(n), x])
        y = 1.0 + 2.0 * x + rng.normal(size=n)
        est = LinearMixedModel(fit_intercept=False).fit(X, y)
        ci = est.conf_int(0.95)
        # textbook normal-equations fit with ML variance and z quantile
        xtx_inv = invert_by_gauss_jordan(X.T @ X)
        beta = xtx_inv @ X.T @ y
        s2 = float(np.sum((y - X @ beta) ** 2)) / n
        se = np.sqrt(np.diag(s2 * xtx_inv))
        z = 1.959963984540054
        np.testing.assert_allclose(ci[:, 0], beta - z * se, atol=1e-8)
        np.testing.assert_allclose(ci[:, 1], beta + z * se, atol=1e-8)

    def test_level_validated(self):
        with pytest.raises(ValueError, match="level"):
            wald_interval(0.0, 1.0, 1.2)


class TestBasisFormConversion:
    def test_reference_conversion(self):
        structure = st.to_basis_form(st.CovarianceStructure([1.0, 2.0, 3.0], "ar1"))
        z = structure.basis(0.5).matrix
        expected = np.array([[0.74, 0.61, 0.29], [0.87, 0.0, 0.49],
                             [0.74, 0.61, 0.29]])
        np.testing.assert_allclose(np.abs(z), expected, atol=0.01)

    def test_compound_symmetry_rank(self):
        """Three groups of two produce exactly three nonzero basis columns."""
        block = np.kron(np.eye(3), np.ones((2, 2)))
        b = eigen_basis(block)
        norms = np.linalg.norm(b.matrix, axis=0)
        assert int((norms > 1e-12).sum()) == 3

    def test_round_trip_gram(self):
        pts = np.array([0.0, 1.0, 2.5, 4.0])
        cov_form = st.CovarianceStructure(pts, "exponential")
        basis_form = st.to_basis_form(cov_form)
        for phi in (0.5, 2.0):
            assert np.abs(basis_form.gram(phi) - cov_form.gram(phi)).max() < 1e-10


class TestEstimatorApi:
    def test_get_params_round_trip(self):
        est = LinearMixedModel(family="ar1", phi=0.5, n_restarts=2)
        params = est.get_params()
        clone = LinearMixedModel(**params)
        assert clone.get_params() == params

    def test_sklearn_clone(self):
        from sklearn.base import clone

        est = LinearMixedModel(family="gaussian", basis="eigen")
        cloned = clone(est)
        assert cloned.get_params() == est.get_params()

    def test_fixed_phi_is_respected(self):
        rng = np.random.default_rng(15)
        t = np.arange(30.0)
        y = rng.normal(size=30)
        est = LinearMixedModel(family="ar1", phi=0.42).fit(None, y, coords=t)
        assert est.phi_ == 0.42

    def test_rank_deficient_design_rejected(self):
        rng = np.random.default_rng(16)
        x = rng.normal(size=20)
        X = np.column_stack([x, 2.0 * x])
        with pytest.raises(ValueError, match="rank deficient"):
            LinearMixedModel().fit(X, rng.normal(size=20))

    def test_missing_coords_rejected(self):
        with pytest.raises(ValueError, match="coordinates"):
            LinearMixedModel(family="ar1").fit(None, np.zeros(5))

    def test_group_model_fit_and_predict(self):
        data = simulate_dataset(30, [1.0], n_groups=3, sigma2_eps=0.2,
                                sigma2_alpha=2.0, seed=17)
        est = LinearMixedModel(basis="group").fit(None, data["y"],
                                                  groups=data["group"])
        pred = est.predict(groups=np.array(["g1", "g2", "g3"]))
        assert pred.shape == (3,)
        # group means shrink toward the intercept
        for g, label in enumerate(["g1", "g2", "g3"]):
            members = data["y"][data["group"] == label]
            assert (pred[g] - est.beta_[0]) * (members.mean() - est.beta_[0]) >= 0

    def test_reference_trend_values(self):
        """Published point estimates for the original yearly index series,
        checked only when the user supplies the data."""
        path = os.environ.get("CORRBASIS_TREND_CSV")
        if not path:
            pytest.skip("set CORRBASIS_TREND_CSV to a year,count CSV to enable")
        raw = np.genfromtxt(path, delimiter=",", names=True)
        years = raw[raw.dtype.names[0]].astype(float)
        counts = raw[raw.dtype.names[1]].astype(float)
        ols = LinearMixedModel().fit(years.reshape(-1, 1), counts)
        assert abs(ols.beta_[1] - (-1.16)) < 0.02
        ci = ols.conf_int(0.95)[1]
        assert abs(ci[0] - (-1.88)) < 0.05 and abs(ci[1] - (-0.44)) < 0.05
        ar1 = LinearMixedModel(family="ar1").fit(years.reshape(-1, 1), counts,
                                                 coords=years)
        assert abs(ar1.beta_[1] - (-1.10)) < 0.02
        ci1 = ar1.conf_int(0.95)[1]
        assert abs(ci1[0] - (-2.61)) < 0.05 and abs(ci1[1] - 0.41) < 0.05
