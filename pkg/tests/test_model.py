import numpy as np
import pytest

from valopt.model import ModelConfig, SharedBottomModel, fd_gradient

# frozen from an independent hand-rolled recomputation of the same seeded
# init and forward pass (scratch script, pure-python loops)
GOLDEN_FORWARD = 0.3119016103565278


def small_model(**kw):
    base = dict(
        num_tasks=2,
        window=2,
        feature_dim=3,
        hidden=4,
        encoder_layers=2,
        head_layers=1,
        activation="tanh",
        init_seed=42,
    )
    base.update(kw)
    return SharedBottomModel.create(ModelConfig(**base))


def test_forward_zero_params_is_zero():
    m = small_model()
    m = m.with_params(m.params.with_values(np.zeros(m.params.size)))
    assert m.forward(1, np.ones((2, 3)), 1.0) == 0.0


def test_forward_identity_composition():
    m = small_model(
        num_tasks=1, window=1, feature_dim=1, hidden=1, encoder_layers=1, activation="identity"
    )
    p = m.params.with_values(np.zeros(m.params.size))
    p.tensor("enc0.w")[0, 0] = 1.0
    p.tensor("head0.0.w")[:, 0] = [1.0, 0.0]
    m = m.with_params(p)
    for x in (-2.5, 0.0, 3.7):
        assert m.forward(0, np.array([[x]]), 0.0) == pytest.approx(x, abs=0)


def test_forward_golden_seed42():
    m = small_model()
    assert m.forward(0, np.ones((2, 3)), 1.0) == pytest.approx(GOLDEN_FORWARD, abs=1e-15)


def test_forward_validates_task_and_shape():
    m = small_model()
    with pytest.raises(ValueError, match="unknown task"):
        m.forward(2, np.ones((2, 3)), 0.0)
    with pytest.raises(ValueError, match="shape"):
        m.forward(0, np.ones((3, 3)), 0.0)


def test_loss_zero_when_prediction_matches_target():
    m = small_model()
    windows = np.stack([np.ones((2, 3)), np.zeros((2, 3))])
    quals = np.array([1.0, 0.5])
    preds = m.predict(0, windows, quals)
    loss, grad = m.loss_and_grad(0, windows, quals, preds)
    assert loss == 0.0
    assert np.all(grad.values == 0.0)


def test_loss_and_grad_hand_linear_case():
    # p = w * x with x = 2, target 0, w = 1: loss (wx)^2 = 4, dloss/dw = 2*w*x^2 = 8
    m = small_model(
        num_tasks=1, window=1, feature_dim=1, hidden=1, encoder_layers=1, activation="identity"
    )
    p = m.params.with_values(np.zeros(m.params.size))
    p.tensor("enc0.w")[0, 0] = 1.0
    p.tensor("head0.0.w")[:, 0] = [1.0, 0.0]
    m = m.with_params(p)
    loss, grad = m.loss_and_grad(
        0, np.array([[[2.0]]]), np.zeros(1), np.zeros(1)
    )
    assert loss == pytest.approx(4.0)
    # d loss / d enc weight: chain through both unit weights
    assert grad.tensor("enc0.w")[0, 0] == pytest.approx(8.0)
    assert grad.tensor("head0.0.w")[0, 0] == pytest.approx(8.0)


def test_empty_batch_rejected():
    m = small_model()
    with pytest.raises(ValueError, match="empty batch"):
        m.loss_and_grad(0, np.zeros((0, 2, 3)), np.zeros(0), np.zeros(0))


def test_task_isolation_exact_zeros():
    m = small_model(num_tasks=3)
    rng = np.random.default_rng(5)
    loss, grad = m.loss_and_grad(
        1, rng.standard_normal((4, 2, 3)), rng.standard_normal(4), rng.standard_normal(4)
    )
    for name, _ in m.params.layout:
        block = grad.values[grad.slot(name)]
        if name.startswith("head1.") or name.startswith("enc"):
            assert np.any(block != 0.0), name
        else:
            assert np.all(block == 0.0), name


def test_fd_gradient_validates_step_and_matches_quadratic():
    m = small_model(
        num_tasks=1, window=1, feature_dim=1, hidden=1, encoder_layers=1, activation="identity"
    )
    with pytest.raises(ValueError, match="step"):
        fd_gradient(m, 0, np.ones((1, 1, 1)), np.zeros(1), np.zeros(1), step=0.0)
    # w = 3 on a pure 1-parameter quadratic: derivative 2w = 6
    p = m.params.with_values(np.zeros(m.params.size))
    p.tensor("enc0.w")[0, 0] = 3.0
    p.tensor("head0.0.w")[:, 0] = [1.0, 0.0]
    m = m.with_params(p)
    g = fd_gradient(m, 0, np.array([[[1.0]]]), np.zeros(1), np.zeros(1), step=1e-5)
    assert g.tensor("enc0.w")[0, 0] == pytest.approx(6.0, abs=1e-6)


def test_fd_gradient_constant_loss_is_zero():
    m = small_model()
    p = m.params.copy()
    p.values[p.slot("head0.0.w")] = 0.0
    p.values[p.slot("head0.0.b")] = 0.0
    m = m.with_params(p)
    g = fd_gradient(m, 0, np.ones((2, 2, 3)), np.zeros(2), np.zeros(2), step=1e-5)
    enc_block = g.values[g.slot("enc0.w")]
    assert np.max(np.abs(enc_block)) < 1e-8


def _random_case(rng):
    cfg = ModelConfig(
        num_tasks=int(rng.integers(1, 4)),
        window=int(rng.integers(1, 4)),
        feature_dim=int(rng.integers(1, 4)),
        hidden=int(rng.integers(2, 6)),
        encoder_layers=int(rng.integers(1, 3)),
        head_layers=int(rng.integers(1, 3)),
        head_hidden=3,
        activation=["tanh", "sigmoid", "identity"][int(rng.integers(0, 3))],
        init_seed=int(rng.integers(0, 2**31)),
    )
    model = SharedBottomModel.create(cfg)
    n = int(rng.integers(1, 5))
    windows = rng.standard_normal((n, cfg.window, cfg.feature_dim))
    quals = rng.standard_normal(n)
    targets = rng.standard_normal(n)
    task = int(rng.integers(0, cfg.num_tasks))
    return model, task, windows, quals, targets


def grad_rel_error(analytic, numeric):
    """Relative error per entry; near-zero entries compared absolutely."""
    diff = np.abs(analytic - numeric)
    small = np.abs(numeric) < 1e-8
    rel = np.where(small, diff, diff / np.maximum(np.abs(numeric), 1e-300))
    return float(rel.max())


def test_gradient_matches_finite_differences_seed7():
    rng = np.random.default_rng(7)
    model, task, windows, quals, targets = _random_case(rng)
    _, grad = model.loss_and_grad(task, windows, quals, targets)
    fd = fd_gradient(model, task, windows, quals, targets, step=1e-5)
    assert grad_rel_error(grad.values, fd.values) <= 1e-4


def test_gradient_correctness_100_random_pairs():
    rng = np.random.default_rng(1234)
    worst = 0.0
    for _ in range(100):
        model, task, windows, quals, targets = _random_case(rng)
        _, grad = model.loss_and_grad(task, windows, quals, targets)
        fd = fd_gradient(model, task, windows, quals, targets, step=1e-5)
        worst = max(worst, grad_rel_error(grad.values, fd.values))
    assert worst <= 1e-4
