import numpy as np
import pytest

from vata import elastic_net, schema, synth
from vata.errors import ConfigError, EmptyModelError, NumericError


def test_alpha_zero_exact_line():
    X = np.array([[0.0], [1.0], [2.0]])
    y = np.array([0.0, 1.0, 2.0])
    model = elastic_net.fit_elastic_net(X, y, 0.0, 0.5, tol=1e-13, max_iter=100_000)
    assert model.coefficients[0] == pytest.approx(1.0, abs=1e-8)
    assert model.intercept == pytest.approx(0.0, abs=1e-8)
    assert np.allclose(model.predict(X), y, atol=1e-8)


def test_huge_alpha_full_shrinkage(rng):
    X = rng.normal(size=(40, 5))
    y = rng.normal(size=40) + 3.0
    model = elastic_net.fit_elastic_net(X, y, 1e6, 1.0)
    assert np.all(model.coefficients == 0.0)
    assert model.intercept == pytest.approx(y.mean(), abs=1e-12)
    assert model.nonzero_count == 0


def test_ridge_limit_matches_closed_form(rng):
    X = rng.normal(size=(40, 5))
    y = X @ rng.normal(size=5) + 0.1 * rng.normal(size=40)
    for alpha in (0.1, 1.0):
        model = elastic_net.fit_elastic_net(X, y, alpha, 0.0, tol=1e-12, max_iter=200_000)
        oracle = elastic_net.ridge_closed_form(X, y, alpha)
        assert np.allclose(model.std_coefficients, oracle, atol=1e-6)


def test_ols_limit_matches_lstsq(rng):
    X = rng.normal(size=(50, 4))
    y = X @ np.array([1.0, -2.0, 0.5, 0.0]) + 0.05 * rng.normal(size=50)
    model = elastic_net.fit_elastic_net(X, y, 0.0, 0.5, tol=1e-13, max_iter=200_000)
    Z = (X - X.mean(axis=0)) / X.std(axis=0)
    ols = np.linalg.lstsq(Z, y - y.mean(), rcond=None)[0]
    assert np.allclose(model.std_coefficients, ols, atol=1e-6)


def test_objective_non_increasing_on_random_instances(rng):
    for _ in range(100):
        n = int(rng.integers(10, 30))
        d = int(rng.integers(2, 8))
        X = rng.normal(size=(n, d))
        y = rng.normal(size=n)
        alpha = float(rng.uniform(0.001, 0.5))
        model = elastic_net.fit_elastic_net(
            X, y, alpha, 0.5, max_iter=60, track_objective=True
        )
        path = model.objective_path
        assert all(b <= a + 1e-12 for a, b in zip(path, path[1:]))


def test_nonzero_count_non_increasing_in_alpha(rng):
    X = rng.normal(size=(60, 10))
    y = X @ (rng.normal(size=10) * (rng.random(10) > 0.4)) + 0.1 * rng.normal(size=60)
    counts = []
    for alpha in (0.001, 0.01, 0.05, 0.2, 1.0):
        model = elastic_net.fit_elastic_net(X, y, alpha, 0.5)
        counts.append(model.nonzero_count)
    assert all(b <= a for a, b in zip(counts, counts[1:]))


def test_prediction_invariant_to_column_order(rng):
    X = rng.normal(size=(30, 4))
    y = rng.normal(size=30)
    names = ["a", "b", "c", "d"]
    model = elastic_net.fit_elastic_net(X, y, 0.05, 0.5, feature_names=names)
    base = model.predict(X)
    shuffled_names = ["c", "a", "d", "b"]
    idx = [names.index(n) for n in shuffled_names]
    shuffled = model.predict(X[:, idx], names=shuffled_names)
    assert np.allclose(base, shuffled, atol=1e-12)


def test_non_finite_rejected():
    X = np.array([[1.0], [np.nan]])
    with pytest.raises(NumericError):
        elastic_net.fit_elastic_net(X, np.array([1.0, 2.0]), 0.1, 0.5)


def test_model_json_roundtrip(rng):
    X = rng.normal(size=(25, 3))
    y = rng.normal(size=25)
    model = elastic_net.fit_elastic_net(X, y, 0.02, 0.5, feature_names=["p", "q", "r"])
    clone = elastic_net.ElasticNetModel.from_dict(model.to_dict())
    assert np.array_equal(clone.predict(X), model.predict(X))


def test_two_stage_noise_free_near_perfect(small_pop):
    X = np.vstack([f.interpretable_52 for f in small_pop.features])
    result = elastic_net.fit_two_stage(
        X, list(schema.interpretable_names()), small_pop.latent_scores, [1e-4], seed=0
    )
    assert result.reports["stage2"]["full_sample"]["r2"] >= 0.999


def test_two_stage_structure(small_pop):
    X = np.vstack([f.interpretable_52 for f in small_pop.features])
    result = elastic_net.fit_two_stage(
        X, list(schema.interpretable_names()), small_pop.latent_scores, [0.01], seed=0
    )
    assert set(result.model.stage1) == set(schema.VPI_NAMES)
    assert len(result.model.stage2.feature_names) == 71
    assert result.model.stage2.feature_names[:52] == list(schema.interpretable_names())


def test_two_stage_rejects_empty_grid(small_pop):
    X = np.vstack([f.interpretable_52 for f in small_pop.features])
    with pytest.raises(ConfigError):
        elastic_net.fit_two_stage(
            X, list(schema.interpretable_names()), small_pop.latent_scores, [], seed=0
        )


def test_support_recovery_on_sparse_truth():
    cfg = synth.SynthConfig(
        n_images=400, seed=23, vpi_noise_sd=0.0, vata_noise_sd=0.0, sparsity=0.5
    )
    pop = synth.generate_population(cfg)
    X = np.vstack([f.interpretable_52 for f in pop.features])
    y = np.array([s.vpi["safe"] for s in pop.latent_scores])
    j = list(schema.VPI_NAMES).index("safe")
    truth = pop.truth.stage1_weights[:, j]
    model = elastic_net.fit_elastic_net(X, y, 0.01, 0.5)
    true_zero = np.abs(truth) == 0.0
    recovered_zero = np.abs(model.std_coefficients) <= elastic_net.NONZERO_TOL
    assert true_zero.sum() > 0
    frac = (true_zero & recovered_zero).sum() / true_zero.sum()
    assert frac >= 0.8


def test_weight_report_proportions():
    model = elastic_net.ElasticNetModel(
        feature_names=["a", "b", "c"],
        coefficients=np.array([2.0, 2.0, -1.0]),
        intercept=0.0,
        alpha=0.1,
        l1_ratio=0.5,
        feature_means=np.zeros(3),
        feature_scales=np.ones(3),
        std_coefficients=np.array([2.0, 2.0, -1.0]),
        converged=True,
        n_iter=1,
        objective=0.0,
    )
    report = elastic_net.weight_report(model)
    pos = [r for r in report["rows"] if r["sign"] == "positive"]
    neg = [r for r in report["rows"] if r["sign"] == "negative"]
    assert [r["proportion"] for r in pos] == [0.5, 0.5]
    assert [r["proportion"] for r in neg] == [1.0]


def test_weight_report_single_positive():
    model = elastic_net.ElasticNetModel(
        feature_names=["only"],
        coefficients=np.array([0.7]),
        intercept=0.0,
        alpha=0.0,
        l1_ratio=0.5,
        feature_means=np.zeros(1),
        feature_scales=np.ones(1),
        std_coefficients=np.array([0.7]),
        converged=True,
        n_iter=1,
        objective=0.0,
    )
    report = elastic_net.weight_report(model)
    assert report["rows"][0]["proportion"] == 1.0


def test_weight_report_empty_model():
    model = elastic_net.ElasticNetModel(
        feature_names=["a"],
        coefficients=np.zeros(1),
        intercept=1.0,
        alpha=9.0,
        l1_ratio=1.0,
        feature_means=np.zeros(1),
        feature_scales=np.ones(1),
        std_coefficients=np.zeros(1),
        converged=True,
        n_iter=1,
        objective=0.0,
    )
    with pytest.raises(EmptyModelError):
        elastic_net.weight_report(model)


def test_weight_report_sides_sum_to_one(small_pop):
    X = np.vstack([f.interpretable_52 for f in small_pop.features])
    result = elastic_net.fit_two_stage(
        X, list(schema.interpretable_names()), small_pop.latent_scores, [0.01], seed=0
    )
    report = elastic_net.weight_report(result.model.stage2)
    pos = sum(r["proportion"] for r in report["rows"] if r["sign"] == "positive")
    neg = sum(r["proportion"] for r in report["rows"] if r["sign"] == "negative")
    assert pos == pytest.approx(1.0, abs=1e-9)
    assert neg == pytest.approx(1.0, abs=1e-9)


def test_correlation_ranking_duplicated_vata(small_pop):
    X = np.vstack([f.interpretable_52 for f in small_pop.features])
    doctored = []
    for s in small_pop.latent_scores:
        vpi = dict(s.vpi)
        vpi["safe"] = s.vata            # duplicate the response as an indicator
        doctored.append(synth.IndicatorScores(s.image_id, s.vata, vpi))
    ranking = elastic_net.correlation_ranking(
        doctored, X, list(schema.interpretable_names())
    )
    assert ranking["vata_vpi"][0]["vpi"] == "safe"
    assert ranking["vata_vpi"][0]["r"] == pytest.approx(1.0, abs=1e-12)


def test_correlation_ranking_independent_noise(rng):
    n = 10_000
    scores = []
    for i in range(n):
        vpi = {name: 2.5 for name in schema.VPI_NAMES}
        vpi["boring"] = float(rng.uniform(0, 5))
        scores.append(
            synth.IndicatorScores(f"i{i}", float(rng.uniform(0, 5)), vpi)
        )
    X = rng.normal(size=(n, 3))
    ranking = elastic_net.correlation_ranking(scores, X, ["f1", "f2", "f3"])
    boring = next(r for r in ranking["vata_vpi"] if r["vpi"] == "boring")
    assert abs(boring["r"]) < 0.05
    # constant indicators excluded with warnings, not errors
    assert len(ranking["warnings"]) == 18


def test_correlation_ranking_top6(small_pop):
    X = np.vstack([f.interpretable_52 for f in small_pop.features])
    ranking = elastic_net.correlation_ranking(
        small_pop.latent_scores, X, list(schema.interpretable_names())
    )
    for vpi, rows in ranking["top_if_per_vpi"].items():
        assert len(rows) == 6
        strengths = [abs(r["r"]) for r in rows]
        assert strengths == sorted(strengths, reverse=True)
