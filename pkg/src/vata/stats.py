"""Shared statistical kernel: regression metrics, PCA, two-sample K-S,
confidence-interval widths, correlation matrices, and VIF.

Metric conventions (fixed, printed in every report):
  adjusted R2 = 1 - (1 - R2) (n - 1) / (n - k_eff - 1)
  AIC         = n ln(MSE) + 2 (k_eff + 1)
  BIC         = n ln(MSE) + (k_eff + 1) ln(n)
  MAPE        = mean(|y - yhat| / |y|) * 100
where k_eff counts nonzero coefficients, excluding the intercept.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigError,
    ConstantColumnError,
    DegenerateDofError,
    DegenerateError,
    MapeUndefinedError,
)

METRIC_CONVENTION = (
    "adjR2=1-(1-R2)(n-1)/(n-k-1); AIC=n*ln(MSE)+2(k+1); "
    "BIC=n*ln(MSE)+(k+1)*ln(n); MAPE=mean(|y-yhat|/|y|)*100; "
    "k = nonzero coefficients excluding intercept"
)


@dataclass
class RegressionReport:
    r2: float
    adjusted_r2: float
    mae: float
    mse: float
    rmse: float
    mape_pct: float
    aic: float
    bic: float
    n: int
    k_effective: int
    warnings: tuple[str, ...] = ()
    convention: str = METRIC_CONVENTION

    def to_dict(self) -> dict:
        return {
            "r2": self.r2,
            "adjusted_r2": self.adjusted_r2,
            "mae": self.mae,
            "mse": self.mse,
            "rmse": self.rmse,
            "mape_pct": self.mape_pct,
            "aic": self.aic,
            "bic": self.bic,
            "n": self.n,
            "k_effective": self.k_effective,
            "warnings": list(self.warnings),
            "convention": self.convention,
        }


def mape(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    """Mean absolute percentage error; undefined when any true value is 0."""
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if np.any(y_true == 0.0):
        raise MapeUndefinedError("y_true contains zero; MAPE undefined")
    return float(np.mean(np.abs(y_true - y_pred) / np.abs(y_true)) * 100.0)


def regression_metrics(y_true, y_pred, k_effective: int) -> RegressionReport:
    """Full metric report under the fixed conventions above.

    A zero in ``y_true`` leaves mape_pct as NaN with a warning instead of
    failing the whole report.
    """
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    n = y_true.size
    if n != y_pred.size:
        raise DegenerateError("y_true and y_pred lengths differ")
    if n < 2:
        raise DegenerateError("need at least 2 observations")
    if k_effective < 0:
        raise ConfigError("k_effective must be >= 0")
    if n - k_effective - 1 <= 0:
        raise DegenerateDofError(f"n={n}, k={k_effective}: no residual degrees of freedom")

    resid = y_true - y_pred
    mse = float(np.mean(resid**2))
    mae = float(np.mean(np.abs(resid)))
    rmse = math.sqrt(mse)
    ss_tot = float(np.sum((y_true - y_true.mean()) ** 2))
    if ss_tot == 0.0:
        raise DegenerateError("y_true is constant; R2 undefined")
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot
    adjusted = 1.0 - (1.0 - r2) * (n - 1) / (n - k_effective - 1)

    warnings: list[str] = []
    if np.any(y_true == 0.0):
        mape_pct = math.nan
        warnings.append("mape_undefined: y_true contains zero")
    else:
        mape_pct = float(np.mean(np.abs(resid) / np.abs(y_true)) * 100.0)

    if mse == 0.0:
        aic = bic = -math.inf
        warnings.append("aic_bic_neg_inf: zero MSE")
    else:
        aic = n * math.log(mse) + 2.0 * (k_effective + 1)
        bic = n * math.log(mse) + (k_effective + 1) * math.log(n)

    return RegressionReport(
        r2=r2, adjusted_r2=adjusted, mae=mae, mse=mse, rmse=rmse,
        mape_pct=mape_pct, aic=aic, bic=bic, n=n, k_effective=k_effective,
        warnings=tuple(warnings),
    )


def adjusted_r2(r2: float, n: int, k_effective: int) -> float:
    if n - k_effective - 1 <= 0:
        raise DegenerateDofError(f"n={n}, k={k_effective}")
    return 1.0 - (1.0 - r2) * (n - 1) / (n - k_effective - 1)


def aic_from_mse(mse: float, n: int, k_effective: int) -> float:
    return n * math.log(mse) + 2.0 * (k_effective + 1)


def bic_from_mse(mse: float, n: int, k_effective: int) -> float:
    return n * math.log(mse) + (k_effective + 1) * math.log(n)


# --- PCA ----------------------------------------------------------------------

@dataclass
class PcaModel:
    """Column-standardized PCA with deterministic component signs."""

    components: np.ndarray            # (n_components, n_kept_columns)
    explained_variance_ratio: np.ndarray
    means: np.ndarray                 # over kept columns
    scales: np.ndarray
    kept: tuple[int, ...]             # original column indices kept
    dropped: tuple[int, ...] = ()     # constant columns removed
    warnings: tuple[str, ...] = ()

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        Z = (X[:, self.kept] - self.means) / self.scales
        return Z @ self.components.T


def pca(X, n_components: int) -> PcaModel:
    """Principal components of column-standardized data.

    Constant columns are dropped (recorded as warnings) because they carry
    no variance and would make standardization undefined.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, d = X.shape
    stds = X.std(axis=0)
    kept = tuple(int(j) for j in range(d) if stds[j] > 0.0)
    dropped = tuple(int(j) for j in range(d) if stds[j] == 0.0)
    warnings = tuple(f"dropped constant column {j}" for j in dropped)
    if not kept:
        raise DegenerateError("all columns constant")
    if n_components > min(n, len(kept)):
        raise ConfigError(
            f"n_components={n_components} exceeds min(rows, usable columns)={min(n, len(kept))}"
        )
    means = X[:, kept].mean(axis=0)
    scales = stds[list(kept)]
    Z = (X[:, kept] - means) / scales
    _, s, vt = np.linalg.svd(Z, full_matrices=False)
    var = s**2
    ratios = var / var.sum()
    comps = vt[:n_components]
    # deterministic orientation: largest-|entry| coordinate is positive
    for i in range(comps.shape[0]):
        j = int(np.argmax(np.abs(comps[i])))
        if comps[i, j] < 0:
            comps[i] = -comps[i]
    return PcaModel(
        components=comps,
        explained_variance_ratio=ratios[:n_components].copy(),
        means=means,
        scales=scales,
        kept=kept,
        dropped=dropped,
        warnings=warnings,
    )


# --- two-sample Kolmogorov-Smirnov ---------------------------------------------

def ks_statistic(sample_a, sample_b) -> float:
    """Max absolute difference between the two empirical CDFs."""
    a = np.sort(np.asarray(sample_a, dtype=float))
    b = np.sort(np.asarray(sample_b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise DegenerateError("both samples must be non-empty")
    grid = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, grid, side="right") / a.size
    cdf_b = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(cdf_a - cdf_b)))


# --- confidence-interval width ---------------------------------------------------

def ci_halfwidth(sigma: float, n: int, z: float = 1.96) -> float:
    """Half-width of the z-interval for a mean: z * sigma / sqrt(n)."""
    if n < 1:
        raise ConfigError("n must be >= 1")
    if sigma < 0:
        raise ConfigError("sigma must be >= 0")
    return z * sigma / math.sqrt(n)


def ci_width_curve(sigma: float, sizes, z: float = 1.96) -> dict:
    """Half-widths over a grid of sample sizes plus discrete second
    differences (the flattening diagnostic used to justify a sample size)."""
    sizes = [int(s) for s in sizes]
    if sorted(sizes) != sizes:
        raise ConfigError("sizes must be ascending")
    widths = [ci_halfwidth(sigma, s, z) for s in sizes]
    second = [
        widths[i + 1] - 2.0 * widths[i] + widths[i - 1]
        for i in range(1, len(widths) - 1)
    ]
    return {"sizes": sizes, "halfwidths": widths, "second_differences": second, "z": z, "sigma": sigma}


# --- correlation -----------------------------------------------------------------

def pearson(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xc = x - x.mean()
    yc = y - y.mean()
    denom = math.sqrt(float(xc @ xc) * float(yc @ yc))
    if denom == 0.0:
        raise ConstantColumnError("<series>")
    return float((xc @ yc) / denom)


def pearson_matrix(columns: dict[str, "np.ndarray"]) -> tuple[list[str], np.ndarray]:
    """Symmetric Pearson matrix over named, equal-length, non-constant series."""
    names = list(columns)
    if len(names) < 1:
        raise DegenerateError("no columns")
    arrays = [np.asarray(columns[n], dtype=float) for n in names]
    length = arrays[0].size
    if length < 3:
        raise DegenerateError("need at least 3 observations")
    for name, arr in zip(names, arrays):
        if arr.size != length:
            raise DegenerateError(f"column {name!r} length differs")
        if arr.std() == 0.0:
            raise ConstantColumnError(name)
    M = np.corrcoef(np.vstack(arrays))
    M = np.atleast_2d(M)
    M = (M + M.T) / 2.0
    np.fill_diagonal(M, 1.0)
    np.clip(M, -1.0, 1.0, out=M)
    return names, M


# --- variance inflation factor ----------------------------------------------------

VIF_INFINITE = math.inf


def vif(X) -> np.ndarray:
    """VIF_j = 1 / (1 - R_j^2) from regressing column j on all others.

    Perfect collinearity is reported as +inf, never raised.
    """
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    if d < 2:
        raise ConfigError("VIF needs at least 2 columns")
    out = np.empty(d)
    ones = np.ones((n, 1))
    for j in range(d):
        others = np.delete(X, j, axis=1)
        A = np.hstack([ones, others])
        y = X[:, j]
        coef, _, _, _ = np.linalg.lstsq(A, y, rcond=None)
        resid = y - A @ coef
        ss_tot = float(np.sum((y - y.mean()) ** 2))
        if ss_tot == 0.0:
            out[j] = VIF_INFINITE
            continue
        r2 = 1.0 - float(np.sum(resid**2)) / ss_tot
        if r2 >= 1.0 - 1e-12:
            out[j] = VIF_INFINITE
        else:
            out[j] = 1.0 / (1.0 - r2)
    return out
