import numpy as np
import pytest

from vata import network, schema
from vata.errors import ConfigError, ShapeError, StratumTooSmallError

N_VPI = network.N_VPI


def tiny_config(**kwargs):
    defaults = dict(
        input_dim=6, hidden_f=(8, 5), hidden_g=(7, 4), activation="tanh",
        epochs=5, batch_size=8, seed=3,
    )
    defaults.update(kwargs)
    return network.NetworkConfig(**defaults)


# --- split -----------------------------------------------------------------------


def test_split_5x100_gives_300_100_100():
    ids = [f"i{k:04d}" for k in range(500)]
    labels = {i: k % 5 for k, i in enumerate(ids)}
    plan = network.split(ids, labels, seed=1)
    assert len(plan.train_ids) == 300
    assert len(plan.val_ids) == 100
    assert len(plan.test_ids) == 100
    for part in (plan.train_ids, plan.val_ids, plan.test_ids):
        counts = {}
        for i in part:
            counts[labels[i]] = counts.get(labels[i], 0) + 1
        assert set(counts.values()) == {len(part) // 5}
    # disjoint and exhaustive
    union = set(plan.train_ids) | set(plan.val_ids) | set(plan.test_ids)
    assert union == set(ids)
    assert len(plan.train_ids) + len(plan.val_ids) + len(plan.test_ids) == 500


def test_split_all_train():
    ids = [f"i{k}" for k in range(20)]
    labels = {i: 0 for i in ids}
    plan = network.split(ids, labels, ratios=(1.0, 0.0, 0.0), seed=0)
    assert sorted(plan.train_ids) == sorted(ids)
    assert plan.val_ids == [] and plan.test_ids == []


def test_split_two_seeds_differ_same_counts():
    ids = [f"i{k:03d}" for k in range(100)]
    labels = {i: k % 4 for k, i in enumerate(ids)}
    a = network.split(ids, labels, seed=1)
    b = network.split(ids, labels, seed=2)
    assert a.train_ids != b.train_ids
    assert len(a.train_ids) == len(b.train_ids)
    assert len(a.test_ids) == len(b.test_ids)


def test_split_fold_counts_within_one():
    ids = [f"i{k:03d}" for k in range(137)]
    labels = {i: k % 3 for k, i in enumerate(ids)}
    plan = network.split(ids, labels, seed=5)
    for stratum in set(labels.values()):
        members = [i for i in ids if labels[i] == stratum]
        fold_counts = {}
        for i in members:
            fold_counts[plan.folds[i]] = fold_counts.get(plan.folds[i], 0) + 1
        assert max(fold_counts.values()) - min(fold_counts.values()) <= 1


def test_split_small_stratum_rejected():
    ids = ["a", "b", "c", "d", "e", "f"]
    labels = {i: (0 if i < "e" else 1) for i in ids}
    with pytest.raises(StratumTooSmallError):
        network.split(ids, labels, seed=0)


def test_split_bad_ratios():
    with pytest.raises(ConfigError):
        network.split(["a"], {"a": 0}, ratios=(0.5, 0.2, 0.2), seed=0)


# --- forward ---------------------------------------------------------------------


def straight_line_forward(params, config, X, vpi_true=None):
    """Independent re-implementation of the same matrix algebra."""
    def act(z):
        return np.maximum(z, 0) if config.activation == "relu" else np.tanh(z)

    a = X
    n_f = len(config.hidden_f) + 1
    for i in range(n_f):
        z = a @ params[f"f.W{i}"] + params[f"f.b{i}"]
        a = z if i == n_f - 1 else act(z)
    vpi = a
    u = np.hstack([X, vpi_true if vpi_true is not None else vpi])
    n_g = len(config.hidden_g) + 1
    for i in range(n_g):
        z = u @ params[f"g.W{i}"] + params[f"g.b{i}"]
        u = z if i == n_g - 1 else act(z)
    return vpi, u[:, 0]


def test_forward_zero_params_zero_output(rng):
    config = tiny_config()
    params = network.zero_params(config)
    X = rng.normal(size=(4, config.input_dim))
    vpi, vata = network.forward(params, config, X)
    assert np.all(vpi == 0.0)
    assert np.all(vata == 0.0)


def test_forward_deterministic():
    config = tiny_config()
    rng1 = np.random.default_rng(9)
    rng2 = np.random.default_rng(9)
    p1 = network.init_params(config, rng1)
    p2 = network.init_params(config, rng2)
    X = np.random.default_rng(0).normal(size=(3, config.input_dim))
    a = network.forward(p1, config, X)
    b = network.forward(p2, config, X)
    assert np.array_equal(a[0], b[0])
    assert np.array_equal(a[1], b[1])


@pytest.mark.parametrize("activation", ["relu", "tanh"])
def test_forward_matches_straight_line_oracle(activation, rng):
    config = tiny_config(activation=activation)
    params = network.init_params(config, rng)
    X = rng.normal(size=(7, config.input_dim))
    V = rng.normal(size=(7, N_VPI))
    for vpi_true in (None, V):
        got_vpi, got_vata = network.forward(params, config, X, vpi_true=vpi_true)
        exp_vpi, exp_vata = straight_line_forward(params, config, X, vpi_true)
        assert np.allclose(got_vpi, exp_vpi, atol=1e-10)
        assert np.allclose(got_vata, exp_vata, atol=1e-10)


def test_forward_width_mismatch():
    config = tiny_config()
    params = network.zero_params(config)
    with pytest.raises(ShapeError):
        network.forward(params, config, np.zeros((2, config.input_dim + 1)))


# --- loss -------------------------------------------------------------------------


def test_loss_endpoints(rng):
    vpi_pred = rng.normal(size=(6, N_VPI))
    vpi_true = rng.normal(size=(6, N_VPI))
    vata_pred = rng.normal(size=6)
    vata_true = rng.normal(size=6)
    total1, l_f, _ = network.loss(vpi_pred, vpi_true, vata_pred, vata_true, 1.0)
    assert total1 == l_f
    total0, _, l_g = network.loss(vpi_pred, vpi_true, vata_pred, vata_true, 0.0)
    assert total0 == l_g
    perfect, _, _ = network.loss(vpi_true, vpi_true, vata_true, vata_true, 0.5)
    assert perfect == 0.0


def test_loss_affine_in_alpha(rng):
    vpi_pred = rng.normal(size=(5, N_VPI))
    vpi_true = rng.normal(size=(5, N_VPI))
    vata_pred = rng.normal(size=5)
    vata_true = rng.normal(size=5)
    l0, _, _ = network.loss(vpi_pred, vpi_true, vata_pred, vata_true, 0.0)
    l1, _, _ = network.loss(vpi_pred, vpi_true, vata_pred, vata_true, 1.0)
    lhalf, _, _ = network.loss(vpi_pred, vpi_true, vata_pred, vata_true, 0.5)
    assert lhalf == pytest.approx((l0 + l1) / 2, abs=1e-12)


# --- gradient checks -----------------------------------------------------------------


def test_gradient_check_tanh():
    config = tiny_config(activation="tanh")
    assert network.gradient_check(config) < 1e-6


def test_gradient_check_relu_off_kink():
    config = tiny_config(activation="relu")
    assert network.gradient_check(config, avoid_relu_kinks=True) < 1e-5


def test_gradient_check_zero_weights_tanh():
    config = tiny_config(activation="tanh")
    assert network.gradient_check(config, zero_weights=True) < 1e-6


@pytest.mark.parametrize(
    "shape",
    [((4,), (3,)), ((8, 5), (7, 4)), ((16, 8, 4), (8, 4))],
)
def test_gradient_check_shapes(shape):
    hf, hg = shape
    config = tiny_config(hidden_f=hf, hidden_g=hg, activation="tanh")
    assert network.gradient_check(config) < 1e-6


# --- training ---------------------------------------------------------------------------


def make_linear_world(rng, n=80, d=6):
    X = rng.normal(size=(n, d))
    A = rng.normal(size=(d, N_VPI)) / np.sqrt(d)
    V = X @ A
    w = rng.normal(size=N_VPI) / np.sqrt(N_VPI)
    y = V @ w
    return X, V, y


def test_train_noise_free_reaches_low_loss(rng):
    X, V, y = make_linear_world(rng)
    config = tiny_config(
        hidden_f=(16, 8), hidden_g=(12, 6), activation="relu",
        epochs=500, learning_rate=3e-3, seed=0,
    )
    trained = network.train(config, X, V, y, (np.arange(60), np.arange(60, 80)))
    assert trained.history[-1]["train_loss"] < 0.01


def test_train_zero_learning_rate_flat(rng):
    X, V, y = make_linear_world(rng, n=40)
    config = tiny_config(learning_rate=0.0, epochs=4)
    init = network.init_params(config, np.random.default_rng(config.seed))
    trained = network.train(config, X, V, y, (np.arange(30), np.arange(30, 40)))
    for key in init:
        assert np.array_equal(trained.params[key], init[key])
    losses = [row["train_loss"] for row in trained.history]
    assert max(losses) == min(losses)


def test_train_best_checkpoint_not_worse_than_final(rng):
    X, V, y = make_linear_world(rng, n=60)
    config = tiny_config(epochs=40, learning_rate=5e-3)
    trained = network.train(config, X, V, y, (np.arange(45), np.arange(45, 60)))
    best_val = min(row["val_loss"] for row in trained.history)
    assert trained.history[trained.best_epoch - 1]["val_loss"] == best_val
    assert best_val <= trained.history[-1]["val_loss"]


def test_train_deterministic(rng):
    X, V, y = make_linear_world(rng, n=50)
    config = tiny_config(epochs=6)
    idx = (np.arange(40), np.arange(40, 50))
    a = network.train(config, X, V, y, idx)
    b = network.train(config, X, V, y, idx)
    for key in a.params:
        assert np.array_equal(a.params[key], b.params[key])
    assert a.history == b.history


def test_inference_differs_from_teacher_forcing_when_stage1_imperfect(rng):
    X, V, y = make_linear_world(rng, n=30)
    config = tiny_config(epochs=10)
    trained = network.train(config, X, V, y, (np.arange(25), np.arange(25, 30)))
    vpi_pred, vata_inference = network.forward(trained.params, config, X)
    _, vata_forced = network.forward(trained.params, config, X, vpi_true=V)
    assert not np.allclose(vpi_pred, V, atol=1e-6)      # stage-1 error is nonzero
    assert not np.allclose(vata_inference, vata_forced, atol=1e-9)


def test_evaluate_reports(rng):
    X, V, y = make_linear_world(rng, n=220, d=6)
    config = tiny_config(hidden_f=(16, 8), hidden_g=(12, 6), activation="relu",
                         epochs=400, learning_rate=3e-3)
    trained = network.train(config, X, V, y, (np.arange(160), np.arange(160, 200)))
    result = network.evaluate(trained, X[:160], V[:160], y[:160])
    assert result["vata"].r2 >= 0.95
    assert "neural" in result["vata"].convention
    assert set(result["vpi"]) == set(schema.VPI_NAMES)


def test_evaluate_constant_predictor_r2_zero(rng):
    X, V, y = make_linear_world(rng, n=60)
    config = tiny_config()
    params = network.zero_params(config)
    # bias of the last g layer set to the mean response
    params[f"g.b{len(config.hidden_g)}"] = np.array([y.mean()])
    trained = network.TrainedNetwork(params, config, [], 0)
    result = network.evaluate(trained, X, V, y)
    assert result["vata"].r2 == pytest.approx(0.0, abs=1e-9)


def test_bundle_roundtrip(rng):
    X, V, y = make_linear_world(rng, n=40)
    config = tiny_config(epochs=3)
    trained = network.train(config, X, V, y, (np.arange(30), np.arange(30, 40)))
    clone = network.TrainedNetwork.from_dict(trained.to_dict())
    a = network.forward(trained.params, config, X)
    b = network.forward(clone.params, clone.config, X)
    assert np.array_equal(a[1], b[1])


def test_single_task_baseline_trains(rng):
    X, V, y = make_linear_world(rng, n=80)
    config = tiny_config(hidden_f=(12, 6), hidden_g=(8, 4), activation="relu",
                         epochs=300, learning_rate=3e-3)
    trained = network.train_single_task(config, X, y, (np.arange(60), np.arange(60, 80)))
    pred = network.predict_single_task(trained, X[:60])
    ss_res = np.sum((y[:60] - pred) ** 2)
    ss_tot = np.sum((y[:60] - y[:60].mean()) ** 2)
    assert 1 - ss_res / ss_tot > 0.9
