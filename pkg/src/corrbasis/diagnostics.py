"""Residual-autocorrelation and collinearity diagnostics.

Collinearity between basis vectors and covariates is reported as pairwise
(simple-regression) R squared, matching how the problem is usually spotted:
one basis column regressed on one covariate at a time.  Multiple-regression
variance inflation factors are a possible extension, not implemented.
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class DiagnosticsReport:
    """Model-checking summary for a fitted regression."""

    residual_acf: dict
    collinearity_r2: np.ndarray | None
    max_collinearity_r2: float | None
    max_pairwise_basis_r2: float | None
    condition_number: float | None
    flagged_basis_columns: list = field(default_factory=list)

    def to_dict(self):
        def _num(v):
            return None if v is None or not np.isfinite(v) else float(v)

        out = {
            "residual_acf": {str(k): v for k, v in self.residual_acf.items()},
            "max_pairwise_basis_r2": _num(self.max_pairwise_basis_r2),
            "max_collinearity_r2": _num(self.max_collinearity_r2),
            "condition_number": _num(self.condition_number),
            "flagged_basis_columns": list(self.flagged_basis_columns),
        }
        if self.collinearity_r2 is not None:
            r2 = np.where(np.isnan(self.collinearity_r2), None, self.collinearity_r2)
            out["collinearity_r2"] = r2.tolist()
        else:
            out["collinearity_r2"] = None
        return out


def residual_acf(residuals, max_lag):
    """Sample autocorrelation of the residuals at lags ``0..max_lag``.

    Uses the biased (1/n) normalization standard in time-series
    diagnostics, so the lag-0 value is exactly 1.
    """
    r = np.asarray(residuals, dtype=float)
    n = r.size
    if max_lag >= n / 2:
        raise ValueError(f"max_lag must be below n/2 = {n / 2:g}, got {max_lag}")
    centered = r - r.mean()
    c0 = float(centered @ centered) / n
    if c0 == 0.0:
        raise ValueError("autocorrelation is undefined for constant residuals")
    acf = {0: 1.0}
    for lag in range(1, int(max_lag) + 1):
        ck = float(centered[:-lag] @ centered[lag:]) / n
        acf[lag] = ck / c0
    return acf


def _squared_correlation(a, b):
    """Pairwise R squared; NaN when either column has zero variance."""
    a = a - a.mean()
    b = b - b.mean()
    va = float(a @ a)
    vb = float(b @ b)
    if va == 0.0 or vb == 0.0:
        return float("nan")
    c = float(a @ b)
    return min(c * c / (va * vb), 1.0)


def collinearity_r2(basis_matrix, covariates):
    """R squared between every basis column and every covariate column.

    Entry ``(j, k)`` regresses basis column ``j`` on covariate column ``k``
    alone.  Zero-variance columns produce NaN entries (flagged, not an
    error).
    """
    z = np.asarray(basis_matrix, dtype=float)
    x = np.asarray(covariates, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    if z.ndim == 1:
        z = z.reshape(-1, 1)
    if z.shape[0] != x.shape[0]:
        raise ValueError(f"row mismatch: basis has {z.shape[0]}, covariates {x.shape[0]}")
    out = np.empty((z.shape[1], x.shape[1]))
    for j in range(z.shape[1]):
        for k in range(x.shape[1]):
            out[j, k] = _squared_correlation(z[:, j], x[:, k])
    return out


def max_pairwise_r2(basis_matrix):
    """Largest pairwise R squared among basis columns.

    Zero-variance columns are excluded from the maximum.
    """
    z = np.asarray(basis_matrix, dtype=float)
    if z.ndim != 2 or z.shape[1] < 2:
        raise ValueError("need at least two basis columns")
    best = 0.0
    for j in range(z.shape[1]):
        for k in range(j + 1, z.shape[1]):
            r2 = _squared_correlation(z[:, j], z[:, k])
            if not np.isnan(r2):
                best = max(best, r2)
    return best


def diagnostics_report(residuals, basis=None, covariates=None, max_lag=10):
    """Assemble a :class:`DiagnosticsReport` for a fitted model.

    ``basis`` may be a :class:`~corrbasis.basis.BasisExpansion` or a plain
    matrix; ``covariates`` is the fixed design whose columns are screened
    against the basis columns.

    Constant residuals (an exact fit) leave the autocorrelation undefined;
    the report then carries an empty map instead of failing.
    """
    try:
        acf = residual_acf(residuals, max_lag)
    except ValueError:
        acf = {}
    coll = None
    max_coll = None
    pair = None
    cond = None
    flagged = []
    if basis is not None:
        z = basis.matrix if hasattr(basis, "matrix") else np.asarray(basis, dtype=float)
        sv = np.linalg.svd(z, compute_uv=False)
        sv = sv[sv > sv[0] * 1e-15] if sv.size and sv[0] > 0 else sv
        cond = float(sv[0] / sv[-1]) if sv.size else None
        if z.shape[1] >= 2:
            pair = max_pairwise_r2(z)
        if covariates is not None:
            coll = collinearity_r2(z, covariates)
            flat = coll[~np.isnan(coll)]
            max_coll = float(flat.max()) if flat.size else None
            flagged = sorted({int(j) for j, k in zip(*np.where(np.isnan(coll)))})
    return DiagnosticsReport(
        residual_acf=acf,
        collinearity_r2=coll,
        max_collinearity_r2=max_coll,
        max_pairwise_basis_r2=pair,
        condition_number=cond,
        flagged_basis_columns=flagged,
    )
