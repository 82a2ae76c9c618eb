"""Seeded synthetic data generation for the supported model families.

Used by the command line (depth-profile, population-trend, and
presence-absence style stand-ins) and by recovery tests.  Everything is
drawn through a :class:`~corrbasis.linalg.RandomStream`, so a seed pins the
output exactly.
"""

import numpy as np

from .correlation import CorrelationModel, corr_matrix
from .linalg import RandomStream, sym_eigen
from .validation import as_coords


def draw_coords(stream, n, dim=1, extent=10.0):
    """Uniform coordinates on [0, extent]^dim; 1-D coordinates come sorted."""
    if dim == 1:
        return np.sort(stream.uniforms(n) * extent).reshape(-1, 1)
    return (stream.uniforms(n * dim) * extent).reshape(n, dim)


def draw_correlated_effect(stream, coords, family, phi, sigma2_alpha):
    """A draw of eta ~ N(0, sigma2_alpha * R(phi)) at the given coordinates."""
    if sigma2_alpha == 0.0:
        return np.zeros(as_coords(coords).shape[0])
    r = corr_matrix(coords, CorrelationModel(family, phi))
    values, vectors = sym_eigen(r, "correlation matrix")
    root = vectors * np.sqrt(np.maximum(values, 0.0))[None, :]
    return np.sqrt(sigma2_alpha) * (root @ stream.gaussians(r.shape[0]))


def draw_group_effect(stream, labels, sigma2_alpha):
    """Compound-symmetry effect: one shared N(0, sigma2_alpha) value per group."""
    labels = np.asarray(labels)
    _, first_idx = np.unique(labels, return_index=True)
    levels = labels[np.sort(first_idx)]
    values = np.sqrt(sigma2_alpha) * stream.gaussians(levels.size)
    lookup = {lev: values[i] for i, lev in enumerate(levels)}
    return np.array([lookup[lab] for lab in labels])


def simulate_dataset(n, beta, *, family=None, phi=None, sigma2_eps=1.0,
                     sigma2_alpha=1.0, seed=0, dim=1, extent=10.0,
                     trend=False, binary=False, n_groups=None, coords=None):
    """Simulate a regression dataset with optional autocorrelation.

    Parameters
    ----------
    n : int
        Number of observations.
    beta : sequence
        Fixed-effect coefficients; the first entry is the intercept, the
        rest pair with generated covariate columns.
    family, phi : str, float
        Correlation family of the random effect (``None`` for independent
        errors unless ``n_groups`` is given).
    trend : bool
        Use the coordinate itself as the single covariate (population-trend
        style data) instead of drawing covariates.
    binary : bool
        Emit 0/1 responses through the latent-threshold construction with
        unit latent noise.
    n_groups : int or None
        Adds a ``group`` label column and a shared per-group effect instead
        of a distance-based one.

    Returns
    -------
    dict with ``coords`` (n, d), ``X`` (n, p-1), ``y`` (n,), ``eta`` (n,),
    and optionally ``group`` labels.
    """
    beta = np.asarray(beta, dtype=float)
    stream = RandomStream(seed)
    if coords is None:
        coords = draw_coords(stream, n, dim=dim, extent=extent)
    else:
        coords = as_coords(coords)
    p_extra = beta.size - 1
    if trend:
        if dim != 1 or p_extra != 1:
            raise ValueError("trend data need 1-D coordinates and exactly one slope")
        X = coords.copy()
    elif p_extra > 0:
        X = stream.gaussians(n * p_extra).reshape(n, p_extra)
    else:
        X = np.empty((n, 0))

    out = {"coords": coords, "X": X}
    mean = beta[0] + X @ beta[1:]

    if n_groups is not None:
        labels = np.array([f"g{i % n_groups + 1}" for i in range(n)])
        eta = draw_group_effect(stream, labels, sigma2_alpha)
        out["group"] = labels
    elif family is not None:
        eta = draw_correlated_effect(stream, coords, family, phi, sigma2_alpha)
    else:
        eta = np.zeros(n)
    out["eta"] = eta

    if binary:
        latent = mean + eta + stream.gaussians(n)
        out["y"] = (latent > 0).astype(int)
    else:
        out["y"] = mean + eta + np.sqrt(sigma2_eps) * stream.gaussians(n)
    return out
