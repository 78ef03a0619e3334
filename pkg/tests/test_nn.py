import math

import numpy as np
import pytest

from jacobnet.exceptions import DegenerateColumn, DomainError, ShapeMismatch, UnknownAlgo
from jacobnet.nn import (ALGOS, BatchNorm, ColumnScaler, Dense, Dropout, Optimizer, PReLU,
                         Sequential, Sigmoid, block, checksum, fit_scaler, grad_check, loss_bce,
                         loss_mse)


def small_stack(rng, dropout=0.0, out=2, sigmoid=False):
    layers = block(4, 6, rng, batchnorm=True, dropout=dropout)
    layers += block(6, 5, rng, batchnorm=True, dropout=dropout)
    layers.append(Dense(5, out, rng=rng))
    if sigmoid:
        layers.append(Sigmoid())
    return Sequential(layers)


# --- forward ----------------------------------------------------------------

def test_dense_identity():
    d = Dense(3, 3)
    d.params["W"] = np.eye(3)
    x = np.arange(6.0).reshape(2, 3)
    np.testing.assert_array_equal(d.forward(x), x)


def test_dense_width_check():
    with pytest.raises(ShapeMismatch):
        Dense(3, 2).forward(np.zeros((1, 4)))


def test_prelu_definition():
    np.testing.assert_array_equal(PReLU(2).forward(np.array([[-1.0, 2.0]])), [[-0.25, 2.0]])


def test_dropout_infer_identity(rng):
    x = rng.normal(size=(5, 4))
    out = Dropout(0.5).forward(x, train=False)
    assert out is x


def test_dropout_train_scaling(rng):
    x = np.ones((2000, 50))
    out = Dropout(0.4).forward(x, train=True, rng=rng)
    kept = out != 0
    np.testing.assert_allclose(out[kept], 1 / 0.6)
    assert abs(kept.mean() - 0.6) < 0.01


def test_dropout_rate_validation():
    with pytest.raises(ValueError):
        Dropout(1.0)


def test_batchnorm_modes(rng):
    bn = BatchNorm(3)
    x = rng.normal(2.0, 3.0, size=(64, 3))
    y = bn.forward(x, train=True)
    np.testing.assert_allclose(y.mean(axis=0), 0, atol=1e-12)
    # infer mode is an affine map of the input
    a = rng.normal(size=(4, 3))
    b = rng.normal(size=(4, 3))
    fa, fb, fab = bn.forward(a), bn.forward(b), bn.forward(0.5 * (a + b))
    np.testing.assert_allclose(fab, 0.5 * (fa + fb), atol=1e-12)


def test_batchnorm_running_stats_update(rng):
    bn = BatchNorm(2, momentum=0.9)
    x = rng.normal(size=(10, 2))
    bn.forward(x, train=True)
    np.testing.assert_allclose(bn.buffers["mean"], 0.1 * x.mean(axis=0))
    np.testing.assert_allclose(bn.buffers["var"], 0.9 + 0.1 * x.var(axis=0))


def test_batchnorm_eps_validation():
    with pytest.raises(ValueError):
        BatchNorm(2, eps=0.0)


# --- backward ---------------------------------------------------------------

def test_dense_mse_scalar_gradient():
    d = Dense(1, 1, use_bias=False)
    d.params["W"][:] = 0.3
    x, y = np.array([[2.0]]), np.array([[1.0]])
    yhat = d.forward(x)
    _, g = loss_mse(y, yhat)
    d.backward(g)
    np.testing.assert_allclose(d.grads["W"], 2 * (yhat - y) * x)


def test_zero_error_zero_gradient(rng):
    net = Sequential([Dense(3, 4, rng=rng), PReLU(4), Dense(4, 2, rng=rng)])
    x = rng.normal(size=(5, 3))
    y = net.forward(x)
    _, g = loss_mse(y, y)
    net.backward(g)
    for v in net.named_grads().values():
        np.testing.assert_array_equal(v, 0)


def test_grad_check_linear_mse(rng):
    net = Sequential([Dense(3, 2, rng=rng)])
    X, Y = rng.normal(size=(6, 3)), rng.normal(size=(6, 2))
    assert grad_check(net, X, Y, "mse") < 1e-8


@pytest.mark.parametrize("loss", ["mse", "bce"])
def test_grad_check_full_stack(rng, loss):
    net = small_stack(rng, dropout=0.0, out=1 if loss == "bce" else 2, sigmoid=loss == "bce")
    X = rng.normal(size=(8, 4))
    Y = (rng.random((8, 1)) > 0.5).astype(float) if loss == "bce" else rng.normal(size=(8, 2))
    assert grad_check(net, X, Y, loss) < 1e-4


@pytest.mark.parametrize("loss", ["mse", "bce"])
def test_grad_check_with_dropout_replay(rng, loss):
    net = small_stack(rng, dropout=0.3, out=1 if loss == "bce" else 2, sigmoid=loss == "bce")
    X = rng.normal(size=(8, 4))
    Y = (rng.random((8, 1)) > 0.5).astype(float) if loss == "bce" else rng.normal(size=(8, 2))
    assert grad_check(net, X, Y, loss, replay=True) < 1e-4


def test_grad_check_without_replay_fails(rng):
    net = small_stack(rng, dropout=0.3)
    X, Y = rng.normal(size=(8, 4)), rng.normal(size=(8, 2))
    assert grad_check(net, X, Y, "mse", replay=False) > 1e-2


def test_grad_check_restores_buffers(rng):
    net = small_stack(rng)
    before = checksum(net.named_buffers())
    grad_check(net, rng.normal(size=(8, 4)), rng.normal(size=(8, 2)))
    assert checksum(net.named_buffers()) == before


# --- losses -----------------------------------------------------------------

def test_bce_values():
    assert loss_bce(np.array([1.0]), np.array([1.0]))[0] == pytest.approx(0.0, abs=1e-11)
    assert loss_bce(np.array([1.0]), np.array([0.5]))[0] == pytest.approx(math.log(2), abs=1e-12)
    v, _ = loss_bce(np.array([1.0, 0.0]), np.array([0.9, 0.1]))
    assert v == pytest.approx(0.105361, abs=1e-6)


def test_bce_domain():
    with pytest.raises(DomainError):
        loss_bce(np.array([0.5]), np.array([0.5]))


def test_bce_minimised_at_target():
    grid = np.linspace(0.01, 0.99, 99)
    vals = [loss_bce(np.array([1.0]), np.array([p]))[0] for p in grid]
    assert np.argmin(vals) == len(grid) - 1


def test_mse_values(rng):
    assert loss_mse(np.ones(3), np.ones(3))[0] == 0.0
    assert loss_mse(np.array([0.0, 2.0]), np.array([1.0, 1.0]))[0] == 1.0
    y, yh = rng.normal(size=10), rng.normal(size=10)
    base = loss_mse(y, yh)[0]
    assert loss_mse(y, y + 3 * (yh - y))[0] == pytest.approx(9 * base)
    with pytest.raises(ShapeMismatch):
        loss_mse(np.ones(3), np.ones(4))


# --- optimizers -------------------------------------------------------------

def _one_step(algo, theta, g, **kw):
    p = {"w": np.array([theta], dtype=float)}
    Optimizer(algo, **kw).step(p, {"w": np.array([g], dtype=float)})
    return p["w"][0]


def test_sgd_step():
    assert _one_step("sgd", 1.0, 0.5, lr=0.1) == pytest.approx(0.95, abs=1e-12)


def test_adam_first_step():
    assert abs(_one_step("adam", 0.0, 1.0) - (-0.001 / (1 + 1e-8))) < 1e-12


def test_adamax_first_step():
    assert abs(_one_step("adamax", 0.0, 1.0) - (-0.001)) < 1e-12


def test_nadam_first_step():
    # m_hat = 1, lookahead = 0.9 * 1 + 0.1 * 1 / 0.1 = 1.9
    assert abs(_one_step("nadam", 0.0, 1.0) - (-0.001 * 1.9 / (1 + 1e-8))) < 1e-12


def test_rmsprop_first_step():
    expected = -0.001 * 1.0 / math.sqrt(0.1 + 1e-8)
    assert abs(_one_step("rmsprop", 0.0, 1.0) - expected) < 1e-12


def test_adagrad_first_step():
    assert abs(_one_step("adagrad", 0.0, 2.0) - (-0.01 * 2 / (2 + 1e-8))) < 1e-12


def test_adadelta_first_step():
    eg = 0.05 * 1.0
    dx = math.sqrt(1e-6) / math.sqrt(eg + 1e-6)
    assert abs(_one_step("adadelta", 0.0, 1.0) - (-dx)) < 1e-12


@pytest.mark.parametrize("algo", ALGOS)
def test_zero_gradient_is_noop(algo, rng):
    w = rng.normal(size=(3, 2))
    p = {"w": w.copy()}
    opt = Optimizer(algo)
    for _ in range(3):
        opt.step(p, {"w": np.zeros_like(w)})
    np.testing.assert_array_equal(p["w"], w)


def test_adam_step_bounded_by_lr(rng):
    w = rng.normal(size=100)
    p = {"w": w.copy()}
    Optimizer("adam").step(p, {"w": rng.normal(size=100) * 1e3})
    assert np.abs(p["w"] - w).max() <= 0.001 + 1e-12


def test_unknown_algo():
    with pytest.raises(UnknownAlgo):
        Optimizer("lbfgs")


def test_optimizer_validation():
    with pytest.raises(ValueError):
        Optimizer("adam", lr=-1.0)
    with pytest.raises(ValueError):
        Optimizer("adam", beta1=1.0)


# --- scaling ----------------------------------------------------------------

def test_standardize(rng):
    X = rng.normal(3.0, 2.0, size=(200, 4))
    Z = ColumnScaler("standardize").fit_transform(X)
    np.testing.assert_allclose(Z.mean(axis=0), 0, atol=1e-10)
    np.testing.assert_allclose(Z.std(axis=0), 1, atol=1e-10)


def test_minmax_range(rng):
    X = rng.uniform(-5, 9, size=(100, 3))
    Z = ColumnScaler("minmax", (-1, 1)).fit_transform(X)
    np.testing.assert_allclose(Z.min(axis=0), -1, atol=1e-15)
    np.testing.assert_allclose(Z.max(axis=0), 1, atol=1e-15)


@pytest.mark.parametrize("kind", ["standardize", "minmax"])
def test_scaler_roundtrip(rng, kind):
    X = rng.normal(size=(50, 5)) * [1, 10, 0.1, 3, 7]
    sc = fit_scaler(kind, X)
    np.testing.assert_allclose(sc.inverse_transform(sc.transform(X)), X, atol=1e-12)


def test_scaler_degenerate_column(rng):
    X = np.column_stack([rng.normal(size=20), np.full(20, 4.2),
                         1.0 + 1e-17 * rng.normal(size=20)])
    with pytest.warns(DegenerateColumn):
        sc = ColumnScaler("minmax").fit(X)
    assert sc.degenerate_.tolist() == [False, True, True]
    np.testing.assert_array_equal(sc.transform(X)[:, 1], 4.2)


def test_scaler_state_roundtrip(rng):
    X = rng.normal(size=(30, 3))
    sc = ColumnScaler("minmax", (-1, 1)).fit(X)
    sc2 = ColumnScaler.from_state("minmax", (-1, 1), sc.get_state())
    np.testing.assert_array_equal(sc.transform(X), sc2.transform(X))


def test_scaler_needs_two_rows():
    with pytest.raises(ValueError):
        ColumnScaler().fit(np.ones((1, 3)))
