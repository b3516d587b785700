"""Field-data validation: exponential smoothing of path-ordered series,
affordance-vs-comfort fits across smoothing factors, and the multivariate
comfort-model comparison.

Smoothing recurrence (S_1 = X_1):  S_i = a * X_i + (1 - a) * S_{i-1}.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from . import stats
from .errors import ConfigError, DegenerateDofError, DegenerateError

HSNA_CHANNELS = ("heart_rate", "solar", "noise", "altitude")


@dataclass
class EmaSeries:
    alpha: float
    values: np.ndarray


def ema(series, alpha: float) -> EmaSeries:
    """Exponential moving average with S_1 = X_1."""
    if not 0.0 < alpha <= 1.0:
        raise ConfigError(f"smoothing alpha must be in (0, 1], got {alpha}")
    x = np.asarray(series, dtype=float)
    if x.size == 0:
        raise ConfigError("series must be non-empty")
    out = np.empty_like(x)
    out[0] = x[0]
    for i in range(1, x.size):
        out[i] = alpha * x[i] + (1.0 - alpha) * out[i - 1]
    return EmaSeries(alpha, out)


def _line_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float, float]:
    """(slope, intercept, r2, adjusted r2) of the least-squares line."""
    if x.std() == 0.0:
        raise DegenerateError("predictor has zero variance")
    n = x.size
    xc = x - x.mean()
    slope = float((xc @ (y - y.mean())) / (xc @ xc))
    intercept = float(y.mean() - slope * x.mean())
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        raise DegenerateError("response has zero variance")
    r2 = 1.0 - ss_res / ss_tot
    return slope, intercept, r2, stats.adjusted_r2(r2, n, 1)


def fit_vata_comfort(vata, comfort, alphas: Sequence[float]) -> list[dict]:
    """Line fits of comfort on the affordance score, raw and after smoothing
    both series with each alpha."""
    vata = np.asarray(vata, dtype=float)
    comfort = np.asarray(comfort, dtype=float)
    if vata.size != comfort.size or vata.size < 3:
        raise ConfigError("need equal-length series of >= 3 points")
    rows = []
    slope, intercept, r2, adj = _line_fit(vata, comfort)
    rows.append({"alpha": "raw", "slope": slope, "intercept": intercept,
                 "r2": r2, "adjusted_r2": adj})
    for alpha in alphas:
        sv = ema(vata, alpha).values
        sc = ema(comfort, alpha).values
        slope, intercept, r2, adj = _line_fit(sv, sc)
        rows.append({"alpha": float(alpha), "slope": slope, "intercept": intercept,
                     "r2": r2, "adjusted_r2": adj})
    return rows


def _ols_adjusted_r2(X: np.ndarray, y: np.ndarray) -> tuple[float, float, str]:
    """(r2, adjusted r2, estimator tag) via normal equations; ridge fallback
    for condition numbers above 1e10."""
    n, p = X.shape
    if n <= p + 1:
        raise DegenerateDofError(f"n={n} <= predictors+1={p + 1}")
    for j in range(p):
        if X[:, j].std() == 0.0:
            raise DegenerateError(f"predictor column {j} has zero variance")
    A = np.hstack([np.ones((n, 1)), X])
    G = A.T @ A
    estimator = "ols"
    if np.linalg.cond(G) > 1e10:
        G = G + 1e-8 * (np.trace(G) / G.shape[0]) * np.eye(G.shape[0])
        estimator = "ridge"
    coef = np.linalg.solve(G, A.T @ y)
    pred = A @ coef
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        raise DegenerateError("response has zero variance")
    r2 = 1.0 - ss_res / ss_tot
    return r2, stats.adjusted_r2(r2, n, p), estimator


def fit_multivariate(predictor_sets: Mapping[str, np.ndarray], comfort) -> list[dict]:
    """Adjusted-R2 comparison table over named predictor sets, sorted
    best-first."""
    y = np.asarray(comfort, dtype=float)
    rows = []
    for name in predictor_sets:
        X = np.asarray(predictor_sets[name], dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.shape[0] != y.size:
            raise ConfigError(f"predictor set {name!r} length mismatch")
        r2, adj, estimator = _ols_adjusted_r2(X, y)
        rows.append({"model": name, "r2": r2, "adjusted_r2": adj,
                     "k": X.shape[1], "n": int(y.size), "estimator": estimator})
    rows.sort(key=lambda r: -r["adjusted_r2"])
    return rows


def _zscore(X: np.ndarray) -> np.ndarray:
    sd = X.std(axis=0)
    sd[sd == 0.0] = 1.0
    return (X - X.mean(axis=0)) / sd


def standard_predictor_sets(
    vata: np.ndarray,
    hsna: np.ndarray,
    if_matrix: np.ndarray | None = None,
) -> dict[str, np.ndarray]:
    """The named comparison sets. HSNA columns (heart rate, solar, noise,
    altitude) are z-scored; a wide feature block is reduced to its leading
    principal components when wider than n/3."""
    vata = np.asarray(vata, dtype=float)[:, None]
    hsna = np.asarray(hsna, dtype=float)
    n = vata.shape[0]
    if hsna.shape != (n, 4):
        raise ConfigError(f"hsna must be (n, 4), got {hsna.shape}")
    hz = _zscore(hsna)
    sets: dict[str, np.ndarray] = {
        "vata+hsna": np.hstack([vata, hz]),
        "hsna": hz,
        "heart": hz[:, [0]],
        "solar": hz[:, [1]],
    }
    if if_matrix is not None:
        X = np.asarray(if_matrix, dtype=float)
        if X.shape[0] != n:
            raise ConfigError("feature block length mismatch")
        max_width = max(1, n // 3)
        if X.shape[1] > max_width:
            model = stats.pca(X, max_width)
            X = model.transform(X)
        sets["if+hsna"] = np.hstack([X, hz])
    return sets
