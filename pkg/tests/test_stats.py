import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vata import stats
from vata.errors import (
    ConfigError,
    ConstantColumnError,
    DegenerateDofError,
    MapeUndefinedError,
)

# Published inference-model table: (R2, MSE, significant coefficients) with
# n = 500 must reproduce these adjusted R2 / AIC / BIC columns.
TABLE_COLUMNS = [
    # (r2, mse, k, adj_r2, aic, bic)
    (0.6587, 0.2832, 32, 0.6353, -564.8017, -425.7196),
    (0.6918, 0.2557, 15, 0.6823, -649.8209, -582.3871),
    (0.7576, 0.2011, 26, 0.7443, -747.8569, -634.0625),
]


@pytest.mark.parametrize("r2,mse,k,adj,aic,bic", TABLE_COLUMNS)
def test_metric_conventions_reproduce_reported_table(r2, mse, k, adj, aic, bic):
    assert stats.adjusted_r2(r2, 500, k) == pytest.approx(adj, abs=1e-3)
    assert stats.aic_from_mse(mse, 500, k) == pytest.approx(aic, abs=0.5)
    assert stats.bic_from_mse(mse, 500, k) == pytest.approx(bic, abs=0.5)


def test_perfect_prediction():
    y = np.array([1.0, 2.0, 3.0, 4.0])
    report = stats.regression_metrics(y, y, 1)
    assert report.r2 == 1.0
    assert report.adjusted_r2 == 1.0
    assert report.mae == 0.0
    assert report.mse == 0.0
    assert report.rmse == 0.0
    assert report.aic == -math.inf


def test_adjusted_r2_example():
    # r2 = 0.7576 with n=500, k=26 lands on 0.7443
    assert stats.adjusted_r2(0.7576, 500, 26) == pytest.approx(0.7443, abs=5e-4)


def test_aic_bic_example():
    assert stats.aic_from_mse(0.2832, 500, 32) == pytest.approx(-564.8, abs=0.5)
    assert stats.bic_from_mse(0.2832, 500, 32) == pytest.approx(-425.7, abs=0.5)


def test_rmse_is_sqrt_mse(rng):
    y = rng.normal(size=50)
    pred = y + rng.normal(size=50) * 0.3
    report = stats.regression_metrics(y, pred, 2)
    assert report.rmse == pytest.approx(math.sqrt(report.mse), abs=1e-12)


def test_degenerate_dof():
    y = np.arange(5.0)
    with pytest.raises(DegenerateDofError):
        stats.regression_metrics(y, y, 4)


def test_mape_undefined_leaves_other_metrics():
    y = np.array([0.0, 1.0, 2.0])
    pred = np.array([0.1, 1.1, 1.9])
    report = stats.regression_metrics(y, pred, 1)
    assert math.isnan(report.mape_pct)
    assert report.mae == pytest.approx(0.1)
    assert any("mape" in w for w in report.warnings)
    with pytest.raises(MapeUndefinedError):
        stats.mape(y, pred)


def test_mape_value():
    y = np.array([1.0, 2.0, 4.0])
    pred = np.array([1.1, 1.8, 4.0])
    # mean(0.1/1, 0.2/2, 0) * 100
    assert stats.mape(y, pred) == pytest.approx(100 * (0.1 + 0.1 + 0.0) / 3)


# --- pca ---------------------------------------------------------------------


def test_pca_collinear_line():
    t = np.linspace(-1, 1, 40)
    X = np.column_stack([t, 2 * t])
    model = stats.pca(X, 1)
    assert model.explained_variance_ratio[0] == pytest.approx(1.0, abs=1e-9)


def test_pca_isotropic_ratios(rng):
    X = rng.normal(size=(10_000, 2))
    model = stats.pca(X, 2)
    assert model.explained_variance_ratio[0] == pytest.approx(0.5, abs=0.03)
    assert model.explained_variance_ratio[1] == pytest.approx(0.5, abs=0.03)


def test_pca_1d_identity(rng):
    x = rng.normal(size=30)[:, None]
    model = stats.pca(x, 1)
    standardized = (x - x.mean()) / x.std()
    assert np.allclose(model.transform(x)[:, 0], standardized[:, 0], atol=1e-9)


def test_pca_orthonormal_components(rng):
    X = rng.normal(size=(200, 6))
    model = stats.pca(X, 4)
    gram = model.components @ model.components.T
    assert np.allclose(gram, np.eye(4), atol=1e-9)
    ratios = model.explained_variance_ratio
    assert np.all(np.diff(ratios) <= 1e-12)
    assert ratios.sum() <= 1 + 1e-9


def test_pca_drops_constant_column(rng):
    X = np.column_stack([rng.normal(size=50), np.full(50, 3.0)])
    model = stats.pca(X, 1)
    assert model.dropped == (1,)
    assert model.warnings


def test_pca_row_permutation_invariant(rng):
    X = rng.normal(size=(100, 5)) @ rng.normal(size=(5, 5))
    a = stats.pca(X, 3).explained_variance_ratio
    b = stats.pca(X[rng.permutation(100)], 3).explained_variance_ratio
    assert np.allclose(a, b, atol=1e-9)


def test_pca_ncomponents_validated(rng):
    with pytest.raises(ConfigError):
        stats.pca(rng.normal(size=(5, 3)), 4)


# --- Kolmogorov-Smirnov -------------------------------------------------------


def brute_force_ks(a, b):
    grid = sorted(set(a) | set(b))
    best = 0.0
    for v in grid:
        fa = sum(1 for x in a if x <= v) / len(a)
        fb = sum(1 for x in b if x <= v) / len(b)
        best = max(best, abs(fa - fb))
    return best


def test_ks_identical_zero():
    assert stats.ks_statistic([1, 2, 3], [1, 2, 3]) == 0.0


def test_ks_disjoint_one():
    assert stats.ks_statistic([0, 0], [1, 1]) == 1.0


def test_ks_shifted_third():
    assert stats.ks_statistic([1, 2, 3], [2, 3, 4]) == pytest.approx(1 / 3)


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.floats(-5, 5), min_size=1, max_size=20),
    st.lists(st.floats(-5, 5), min_size=1, max_size=20),
)
def test_ks_matches_bruteforce_and_symmetric(a, b):
    got = stats.ks_statistic(a, b)
    assert got == pytest.approx(brute_force_ks(a, b), abs=1e-12)
    assert got == pytest.approx(stats.ks_statistic(b, a), abs=1e-12)


# --- confidence intervals -------------------------------------------------------


def test_ci_halfwidth_example():
    hw = stats.ci_halfwidth(1.0, 300, 1.96)
    assert hw == pytest.approx(0.11316, abs=1e-5)
    assert hw / 2.5 == pytest.approx(0.0453, abs=1e-3)


def test_ci_quadruple_n_halves():
    assert stats.ci_halfwidth(2.0, 400) == pytest.approx(
        stats.ci_halfwidth(2.0, 100) / 2
    )


def test_ci_zero_sigma():
    assert stats.ci_halfwidth(0.0, 10) == 0.0


def test_ci_width_curve():
    curve = stats.ci_width_curve(1.0, [100, 200, 300, 400])
    assert len(curve["halfwidths"]) == 4
    assert len(curve["second_differences"]) == 2
    assert all(d > 0 for d in curve["second_differences"])   # convex decay


# --- correlation ------------------------------------------------------------------


def test_pearson_self_and_negation(rng):
    x = rng.normal(size=20)
    names, M = stats.pearson_matrix({"x": x, "neg": -x, "y": x + rng.normal(size=20)})
    i, j = names.index("x"), names.index("neg")
    assert M[i, i] == 1.0
    assert M[i, j] == pytest.approx(-1.0, abs=1e-12)
    assert np.allclose(M, M.T)
    assert np.all(np.abs(M) <= 1.0)


def test_pearson_hand_value():
    assert stats.pearson([1, 2, 3], [1, 2, 4]) == pytest.approx(0.98198, abs=1e-4)


def test_pearson_constant_column():
    with pytest.raises(ConstantColumnError) as err:
        stats.pearson_matrix({"x": [1, 2, 3], "c": [5, 5, 5]})
    assert err.value.column == "c"


# --- VIF ------------------------------------------------------------------------------


def test_vif_orthogonal_columns():
    # centered + QR -> columns exactly uncorrelated, so every VIF is 1
    X = np.random.default_rng(0).normal(size=(30, 3))
    q, _ = np.linalg.qr(X - X.mean(axis=0))
    got = stats.vif(q)
    assert np.allclose(got, 1.0, atol=1e-6)


def test_vif_duplicated_column_infinite(rng):
    x = rng.normal(size=40)
    X = np.column_stack([x, x, rng.normal(size=40)])
    got = stats.vif(X)
    assert math.isinf(got[0]) and math.isinf(got[1])
    assert math.isfinite(got[2])


def test_vif_correlated_matches_direct_oracle(rng):
    cov = np.full((3, 3), 0.8) + 0.2 * np.eye(3)
    X = rng.multivariate_normal(np.zeros(3), cov, size=2000)
    got = stats.vif(X)
    for j in range(3):
        others = np.delete(X, j, axis=1)
        A = np.hstack([np.ones((X.shape[0], 1)), others])
        coef, _, _, _ = np.linalg.lstsq(A, X[:, j], rcond=None)
        resid = X[:, j] - A @ coef
        r2 = 1 - resid @ resid / np.sum((X[:, j] - X[:, j].mean()) ** 2)
        assert got[j] == pytest.approx(1 / (1 - r2), rel=0.1)
