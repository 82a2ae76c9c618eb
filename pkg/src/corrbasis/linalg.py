"""Dense symmetric linear algebra and a reproducible random stream.

All matrix factorizations used by the package funnel through this module so
the jitter policy (one ridge retry on a failed Cholesky) and the eigenvector
sign convention are applied in exactly one place.
"""

import warnings
from typing import NamedTuple

import numpy as np
from numpy.random import PCG64
from scipy.linalg import LinAlgWarning, cho_factor, cho_solve
from scipy.special import ndtri

# Ridge added to the diagonal (relative to its largest entry) when a
# Cholesky factorization fails; exactly one retry is attempted.
JITTER_SCALE = 1e-10

# Eigenvalues below this fraction of the largest eigenvalue are treated as
# zero when a matrix square root is needed.
EIGENVALUE_CLAMP = 1e-12


class SingularMatrixError(np.linalg.LinAlgError):
    """A matrix stayed singular after the jitter retry."""


class EigenPair(NamedTuple):
    """Eigenvalues (descending) and unit-norm eigenvectors, column aligned."""

    values: np.ndarray
    vectors: np.ndarray


def check_symmetric(a, name="matrix"):
    """Validate a square, exactly symmetric, finite matrix."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    if not np.array_equal(a, a.T):
        raise ValueError(f"{name} is not symmetric")
    return a


def sym_eigen(a, name="matrix"):
    """Eigendecomposition of a symmetric matrix with a fixed sign convention.

    Parameters
    ----------
    a : (n, n) array
        Symmetric matrix with finite entries.

    Returns
    -------
    EigenPair
        ``values`` sorted in non-increasing order; ``vectors`` has the
        matching unit-norm eigenvectors as columns.  In every column the
        entry of largest absolute value is made positive (ties broken by
        the lowest row index), so the decomposition is deterministic.
    """
    a = check_symmetric(a, name)
    values, vectors = np.linalg.eigh(a)
    order = np.argsort(-values, kind="stable")  # stable: ties keep LAPACK order
    values = values[order]
    vectors = vectors[:, order]
    # np.argmax returns the first maximum, which implements the tie rule.
    lead = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[lead, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    vectors *= signs
    return EigenPair(values, vectors)


class SPDFactor:
    """Cholesky factor of a symmetric positive definite matrix.

    Not built directly; obtain one through :func:`spd_factor`.
    """

    def __init__(self, c_and_lower, logdet, jitter):
        self._c_and_lower = c_and_lower
        self.logdet = logdet
        self.jitter = jitter

    def solve(self, b):
        return cho_solve(self._c_and_lower, np.asarray(b, dtype=float))

    @property
    def lower(self):
        """Lower-triangular Cholesky factor as a clean matrix."""
        c, low = self._c_and_lower
        return np.tril(c) if low else np.triu(c).T


def symmetrize(a):
    """Average a nearly symmetric product with its transpose.

    Matrix products that are symmetric in exact arithmetic pick up
    last-bit asymmetries in floating point; the strict symmetry checks
    here require cleaning them up first.
    """
    a = np.asarray(a, dtype=float)
    return 0.5 * (a + a.T)


def spd_factor(a, name="matrix"):
    """Cholesky-factor a symmetric (semi-)definite matrix with one jitter retry.

    On a failed factorization a ridge of ``JITTER_SCALE * max(diag)`` is added
    to the diagonal and the factorization retried once; the retry is recorded
    through a :class:`scipy.linalg.LinAlgWarning`.  A failure after the retry
    raises :class:`SingularMatrixError` naming the offending matrix.
    """
    a = check_symmetric(a, name)
    try:
        c, low = cho_factor(a, lower=True)
        jitter = 0.0
    except np.linalg.LinAlgError:
        jitter = JITTER_SCALE * max(float(np.max(np.diag(a))), np.finfo(float).tiny)
        warnings.warn(
            f"{name}: Cholesky failed, retrying with ridge {jitter:.3e}",
            LinAlgWarning,
            stacklevel=2,
        )
        try:
            c, low = cho_factor(a + jitter * np.eye(a.shape[0]), lower=True)
        except np.linalg.LinAlgError as exc:
            raise SingularMatrixError(
                f"{name} is singular even after adding ridge {jitter:.3e}"
            ) from exc
    logdet = 2.0 * float(np.sum(np.log(np.diag(c))))
    return SPDFactor((c, low), logdet, jitter)


def spd_solve(a, b, name="matrix"):
    """Solve ``a @ x = b`` for symmetric positive definite ``a``.

    ``b`` may be a vector or a matrix; the result has the same shape.
    """
    return spd_factor(a, name).solve(b)


def clamp_eigenvalues(values):
    """Zero out eigenvalues that are negligible relative to the largest one.

    Prevents NaN from tiny negative eigenvalues introduced by rounding when a
    square root of the spectrum is taken downstream.
    """
    values = np.asarray(values, dtype=float).copy()
    top = values.max(initial=0.0)
    if top <= 0.0:
        return np.zeros_like(values)
    values[values < EIGENVALUE_CLAMP * top] = 0.0
    return values


class RandomStream:
    """Deterministic stream of uniform and Gaussian variates.

    Built on the raw 64-bit output of PCG64: every variate consumes exactly
    one raw draw, so the stream state is fully described by ``(seed,
    position)`` and can be serialized and resumed bit-exactly on any
    platform.  Gaussians are produced by the inverse CDF, which keeps the
    draw count deterministic (rejection samplers do not).
    """

    def __init__(self, seed, position=0):
        self.seed = int(seed)
        self.position = int(position)
        self._bitgen = PCG64(self.seed)
        if self.position:
            self._bitgen.advance(self.position)

    def _raw(self, size):
        out = self._bitgen.random_raw(size)
        self.position += int(np.size(out))
        return out

    def uniforms(self, size=None):
        """Draws on the open interval (0, 1)."""
        raw = self._raw(size if size is not None else 1)
        u = ((raw >> np.uint64(11)) + 0.5) * 2.0**-53
        return float(u[0]) if size is None else u

    def gaussians(self, size=None):
        """Standard normal draws via the inverse CDF."""
        u = self.uniforms(size if size is not None else 1)
        z = ndtri(u)
        return float(z[0]) if size is None else z

    def next_uniform(self):
        return self.uniforms()

    def next_gaussian(self):
        return self.gaussians()

    def integers(self, bound, size=None):
        """Draws from {0, ..., bound - 1} by scaling uniforms (one raw draw each)."""
        u = self.uniforms(size)
        out = np.minimum((np.asarray(u) * bound).astype(int), bound - 1)
        return int(out) if size is None else out

    @property
    def state(self):
        return (self.seed, self.position)

    @classmethod
    def from_state(cls, state):
        seed, position = state
        return cls(seed, position)

    def spawn(self, offset):
        """Independent stream with a seed derived from this one."""
        return RandomStream(self.seed + int(offset))
