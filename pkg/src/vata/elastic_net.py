"""Elastic-net regression by cyclic coordinate descent, plus the two-stage
inference chain (52 interpretable features -> 19 perceptual indicators ->
thermal-affordance score) with weight decompositions and correlation
rankings.

Objective, with m rows and penalty split (l1 = alpha*r, l2 = alpha*(1-r)/2):

    min_b (1/2m) sum_i (y_i - x_i'b)^2 + l1*||b||_1 + l2*||b||_2^2

The 1/2 on the quadratic term makes the r = 0 limit standard ridge. Fits
run on column-standardized features with an unpenalized intercept; the
convention string is attached to every model.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from . import schema, stats
from .errors import ConfigError, ConstantColumnError, EmptyModelError, NumericError
from .records import IndicatorScores

PENALTY_CONVENTION = (
    "objective=(1/2m)RSS + l1*||b||_1 + l2*||b||_2^2 with l1=alpha*l1_ratio, "
    "l2=alpha*(1-l1_ratio)/2, on column-standardized features, intercept "
    "unpenalized; reported coefficients are raw-scale, standardized "
    "coefficients kept for weight decompositions"
)

NONZERO_TOL = 1e-10


@dataclass
class ElasticNetModel:
    feature_names: list[str]
    coefficients: np.ndarray          # raw-scale, aligned with feature_names
    intercept: float                  # raw-scale
    alpha: float
    l1_ratio: float
    feature_means: np.ndarray
    feature_scales: np.ndarray
    std_coefficients: np.ndarray      # standardized-space coefficients
    converged: bool
    n_iter: int
    objective: float
    y_center: float = 0.0             # train-time mean of y (standardized path)
    objective_path: list[float] = field(default_factory=list)
    convention: str = PENALTY_CONVENTION

    def predict(self, X, names: Sequence[str] | None = None) -> np.ndarray:
        """Predict; pass ``names`` to map arbitrary column order onto the
        model's features."""
        X = np.asarray(X, dtype=float)
        if names is not None:
            order = [list(names).index(n) for n in self.feature_names]
            X = X[:, order]
        if X.shape[1] != len(self.feature_names):
            raise ConfigError(
                f"expected {len(self.feature_names)} features, got {X.shape[1]}"
            )
        Z = (X - self.feature_means) / self.feature_scales
        return Z @ self.std_coefficients + self.y_center

    @property
    def nonzero_count(self) -> int:
        return int(np.sum(np.abs(self.std_coefficients) > NONZERO_TOL))

    def to_dict(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "coefficients": [float(v) for v in self.coefficients],
            "intercept": float(self.intercept),
            "alpha": self.alpha,
            "l1_ratio": self.l1_ratio,
            "feature_means": [float(v) for v in self.feature_means],
            "feature_scales": [float(v) for v in self.feature_scales],
            "std_coefficients": [float(v) for v in self.std_coefficients],
            "converged": self.converged,
            "n_iter": self.n_iter,
            "objective": self.objective,
            "y_center": self.y_center,
            "convention": self.convention,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ElasticNetModel":
        return cls(
            feature_names=list(d["feature_names"]),
            coefficients=np.array(d["coefficients"], dtype=float),
            intercept=float(d["intercept"]),
            alpha=float(d["alpha"]),
            l1_ratio=float(d["l1_ratio"]),
            feature_means=np.array(d["feature_means"], dtype=float),
            feature_scales=np.array(d["feature_scales"], dtype=float),
            std_coefficients=np.array(d["std_coefficients"], dtype=float),
            converged=bool(d["converged"]),
            n_iter=int(d["n_iter"]),
            objective=float(d["objective"]),
            y_center=float(d["y_center"]),
            convention=d.get("convention", PENALTY_CONVENTION),
        )


def elastic_net_objective(
    Z: np.ndarray, yc: np.ndarray, beta: np.ndarray, alpha: float, l1_ratio: float
) -> float:
    m = Z.shape[0]
    resid = yc - Z @ beta
    l1 = alpha * l1_ratio
    l2 = alpha * (1.0 - l1_ratio) / 2.0
    return float(
        (resid @ resid) / (2.0 * m)
        + l1 * np.abs(beta).sum()
        + l2 * (beta @ beta)
    )


def _soft_threshold(z: float, gamma: float) -> float:
    if z > gamma:
        return z - gamma
    if z < -gamma:
        return z + gamma
    return 0.0


def fit_elastic_net(
    X,
    y,
    alpha: float,
    l1_ratio: float,
    tol: float = 1e-9,
    max_iter: int = 10_000,
    feature_names: Sequence[str] | None = None,
    track_objective: bool = False,
) -> ElasticNetModel:
    """Cyclic coordinate descent on standardized features.

    Set ``track_objective`` to record (and check) the per-sweep objective;
    the objective is verified non-increasing whenever tracked.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.size or X.shape[0] < 2:
        raise ConfigError("X must be 2-D with rows(X) == len(y) >= 2")
    if alpha < 0:
        raise ConfigError("alpha must be >= 0")
    if not 0.0 <= l1_ratio <= 1.0:
        raise ConfigError("l1_ratio must be in [0, 1]")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise NumericError("non-finite entries in X or y")

    m, d = X.shape
    names = list(feature_names) if feature_names is not None else [f"x{j}" for j in range(d)]
    if len(names) != d:
        raise ConfigError("feature_names length mismatch")

    means = X.mean(axis=0)
    scales = X.std(axis=0)
    active = scales > 0.0
    scales_safe = np.where(active, scales, 1.0)
    Z = (X - means) / scales_safe
    y_center = float(y.mean())
    yc = y - y_center

    l1 = alpha * l1_ratio
    l2 = alpha * (1.0 - l1_ratio) / 2.0
    # covariance-update coordinate descent: per-coordinate work is O(d)
    G = Z.T @ Z / m
    c = Z.T @ yc / m
    diag = np.diag(G).copy()                  # == 1 for active columns
    denom = diag + 2.0 * l2

    beta = np.zeros(d)
    u = np.zeros(d)                           # u = G @ beta, kept incrementally
    objective_path: list[float] = []
    converged = False
    sweep = 0
    active_idx = [j for j in range(d) if active[j]]
    for sweep in range(1, max_iter + 1):
        max_delta = 0.0
        for j in active_idx:
            old = beta[j]
            rho = c[j] - u[j] + diag[j] * old
            new = _soft_threshold(rho, l1) / denom[j]
            if new != old:
                u += G[:, j] * (new - old)
                beta[j] = new
                delta = abs(new - old)
                if delta > max_delta:
                    max_delta = delta
        if track_objective:
            obj = elastic_net_objective(Z, yc, beta, alpha, l1_ratio)
            if objective_path and obj > objective_path[-1] + 1e-12:
                raise NumericError(f"objective increased on sweep {sweep}")
            objective_path.append(obj)
        if max_delta < tol:
            converged = True
            break

    std_coef = beta
    raw_coef = np.where(active, std_coef / scales_safe, 0.0)
    intercept = y_center - float(raw_coef @ means)
    return ElasticNetModel(
        feature_names=names,
        coefficients=raw_coef,
        intercept=intercept,
        alpha=alpha,
        l1_ratio=l1_ratio,
        feature_means=means,
        feature_scales=scales_safe,
        std_coefficients=std_coef,
        converged=converged,
        n_iter=sweep,
        objective=elastic_net_objective(Z, yc, beta, alpha, l1_ratio),
        y_center=y_center,
        objective_path=objective_path,
    )


def ridge_closed_form(X, y, alpha: float) -> np.ndarray:
    """Closed-form ridge on standardized data: (Z'Z/m + alpha I)^-1 Z'y/m.

    Independent oracle for the l1_ratio = 0 path; returns standardized-space
    coefficients.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    means = X.mean(axis=0)
    scales = X.std(axis=0)
    scales[scales == 0.0] = 1.0
    Z = (X - means) / scales
    yc = y - y.mean()
    m, d = Z.shape
    G = Z.T @ Z / m + alpha * np.eye(d)
    return np.linalg.solve(G, Z.T @ yc / m)


# --- cross-validated alpha selection -------------------------------------------


def _cv_folds(n: int, n_folds: int, seed: int) -> list[np.ndarray]:
    rng = np.random.default_rng([seed, 0x5D])
    order = rng.permutation(n)
    return [order[i::n_folds] for i in range(n_folds)]


def fit_with_cv(
    X,
    y,
    alpha_grid: Sequence[float],
    l1_ratio: float = 0.5,
    seed: int = 0,
    n_folds: int = 5,
    feature_names: Sequence[str] | None = None,
    tol: float = 1e-6,
) -> tuple[ElasticNetModel, list[dict]]:
    """Pick alpha by k-fold mean R2, refit on all rows at the winner."""
    alphas = list(alpha_grid)
    if not alphas or any(a < 0 for a in alphas):
        raise ConfigError("alpha grid must be non-empty with alphas >= 0")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    folds = _cv_folds(n, n_folds, seed)
    cv_table = []
    for alpha in alphas:
        scores = []
        for i, test_idx in enumerate(folds):
            mask = np.ones(n, dtype=bool)
            mask[test_idx] = False
            model = fit_elastic_net(
                X[mask], y[mask], alpha, l1_ratio, tol=tol, feature_names=feature_names
            )
            pred = model.predict(X[test_idx])
            ss_res = float(np.sum((y[test_idx] - pred) ** 2))
            ss_tot = float(np.sum((y[test_idx] - y[test_idx].mean()) ** 2))
            scores.append(1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0)
        cv_table.append({"alpha": alpha, "mean_r2": float(np.mean(scores))})
    best = max(cv_table, key=lambda row: row["mean_r2"])["alpha"]
    final = fit_elastic_net(X, y, best, l1_ratio, tol=tol, feature_names=feature_names)
    return final, cv_table


# --- two-stage inference chain ---------------------------------------------------


@dataclass
class TwoStageModel:
    stage1: dict[str, ElasticNetModel]   # one model per perceptual indicator
    stage2: ElasticNetModel              # 52 + 19 -> thermal-affordance score

    def __post_init__(self):
        expected = list(self.stage2.feature_names)
        if len(expected) != 71:
            raise ConfigError(f"stage2 must have 71 features, has {len(expected)}")


@dataclass
class TwoStageResult:
    model: TwoStageModel
    reports: dict                       # nested metric reports, labeled by scope
    cv_tables: dict


def _score_matrix(scores: Sequence[IndicatorScores]) -> tuple[np.ndarray, np.ndarray]:
    V = np.array([[s.vpi[n] for n in schema.VPI_NAMES] for s in scores])
    y = np.array([s.vata for s in scores])
    return V, y


def fit_two_stage(
    X_if,
    if_names: Sequence[str],
    scores: Sequence[IndicatorScores],
    alpha_grid: Sequence[float],
    l1_ratio: float = 0.5,
    seed: int = 0,
    holdout: tuple[Sequence[int], Sequence[int]] | None = None,
) -> TwoStageResult:
    """Fit the 19 stage-1 models and the 71-feature stage-2 model.

    Stage 2 consumes observed indicator scores (the inference models explain
    survey data, not predictions). When ``holdout`` is given, models fit on
    the train rows and metrics are reported for both scopes; otherwise on
    the full sample, labeled as such.
    """
    X_if = np.asarray(X_if, dtype=float)
    if_names = list(if_names)
    V, y = _score_matrix(scores)
    n = X_if.shape[0]
    if n != len(scores):
        raise ConfigError("features and scores must align")

    if holdout is None:
        fit_idx = np.arange(n)
        test_idx = None
    else:
        fit_idx = np.asarray(holdout[0], dtype=int)
        test_idx = np.asarray(holdout[1], dtype=int)

    stage1: dict[str, ElasticNetModel] = {}
    cv_tables: dict = {"stage1": {}, "stage2": None}
    stage1_reports: dict = {}
    for j, vpi in enumerate(schema.VPI_NAMES):
        model, cv = fit_with_cv(
            X_if[fit_idx], V[fit_idx, j], alpha_grid, l1_ratio, seed=seed + j,
            feature_names=if_names,
        )
        stage1[vpi] = model
        cv_tables["stage1"][vpi] = cv
        pred = model.predict(X_if[fit_idx])
        stage1_reports[vpi] = {
            "fit": stats.regression_metrics(V[fit_idx, j], pred, model.nonzero_count).to_dict()
        }
        if test_idx is not None:
            pred_t = model.predict(X_if[test_idx])
            stage1_reports[vpi]["held_out"] = stats.regression_metrics(
                V[test_idx, j], pred_t, model.nonzero_count
            ).to_dict()

    stage2_names = if_names + list(schema.VPI_NAMES)
    X2 = np.hstack([X_if, V])
    stage2, cv2 = fit_with_cv(
        X2[fit_idx], y[fit_idx], alpha_grid, l1_ratio, seed=seed + 100,
        feature_names=stage2_names,
    )
    cv_tables["stage2"] = cv2

    scope = "full_sample" if test_idx is None else "train"
    reports = {
        "stage1": stage1_reports,
        "stage2": {
            scope: stats.regression_metrics(
                y[fit_idx], stage2.predict(X2[fit_idx]), stage2.nonzero_count
            ).to_dict()
        },
    }
    if test_idx is not None:
        reports["stage2"]["held_out"] = stats.regression_metrics(
            y[test_idx], stage2.predict(X2[test_idx]), stage2.nonzero_count
        ).to_dict()
    return TwoStageResult(TwoStageModel(stage1, stage2), reports, cv_tables)


# --- weight decomposition ---------------------------------------------------------


def weight_report(model: ElasticNetModel) -> dict:
    """Split standardized coefficients by sign; each side normalized to
    proportions summing to 1 (Sankey-ready rows)."""
    coef = model.std_coefficients
    nz = np.abs(coef) > NONZERO_TOL
    if not np.any(nz):
        raise EmptyModelError("all coefficients are zero")
    pos = [(n, float(c)) for n, c in zip(model.feature_names, coef) if c > NONZERO_TOL]
    neg = [(n, float(c)) for n, c in zip(model.feature_names, coef) if c < -NONZERO_TOL]
    pos_total = sum(c for _, c in pos)
    neg_total = sum(-c for _, c in neg)
    rows = [
        {"feature": n, "sign": "positive", "weight": c, "proportion": c / pos_total}
        for n, c in pos
    ] + [
        {"feature": n, "sign": "negative", "weight": c, "proportion": -c / neg_total}
        for n, c in neg
    ]
    return {
        "weight_space": "standardized",
        "rows": sorted(rows, key=lambda r: (r["sign"], -abs(r["weight"]))),
    }


def two_stage_weight_report(model: TwoStageModel) -> dict:
    """Weight decompositions for the whole chain, keyed by target."""
    out = {"vata": weight_report(model.stage2)}
    for vpi, m in model.stage1.items():
        try:
            out[vpi] = weight_report(m)
        except EmptyModelError:
            out[vpi] = {"weight_space": "standardized", "rows": []}
    return out


# --- correlation rankings ----------------------------------------------------------


def correlation_ranking(
    scores: Sequence[IndicatorScores],
    X_if,
    if_names: Sequence[str],
    top_k: int = 6,
) -> dict:
    """Ranked correlations: score-vs-indicator (full ranking, descending r)
    and the ``top_k`` strongest |r| features per indicator."""
    if len(scores) < 3:
        raise ConfigError("need at least 3 images")
    X_if = np.asarray(X_if, dtype=float)
    if_names = list(if_names)
    V, y = _score_matrix(scores)
    warnings: list[str] = []

    vata_rows = []
    for j, vpi in enumerate(schema.VPI_NAMES):
        try:
            r = stats.pearson(y, V[:, j])
        except ConstantColumnError:
            warnings.append(f"constant indicator {vpi} excluded")
            continue
        vata_rows.append({"vpi": vpi, "r": r})
    vata_rows.sort(key=lambda row: -row["r"])

    usable = []
    for i, name in enumerate(if_names):
        if np.std(X_if[:, i]) == 0.0:
            warnings.append(f"constant feature {name} excluded")
        else:
            usable.append((i, name))

    per_vpi: dict[str, list[dict]] = {}
    for j, vpi in enumerate(schema.VPI_NAMES):
        if V[:, j].std() == 0.0:
            per_vpi[vpi] = []
            continue
        rows = [
            {"feature": name, "r": stats.pearson(V[:, j], X_if[:, i])}
            for i, name in usable
        ]
        rows.sort(key=lambda row: -abs(row["r"]))
        per_vpi[vpi] = rows[:top_k]

    return {"vata_vpi": vata_rows, "top_if_per_vpi": per_vpi, "warnings": warnings}
