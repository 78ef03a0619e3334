"""Layers with explicit parameter slots and hand-written backward passes."""

import numpy as np

from ..exceptions import ShapeMismatch


class Layer:
    kind = "layer"

    def __init__(self):
        self.params = {}
        self.grads = {}
        self.buffers = {}

    def forward(self, x, train=False, rng=None):
        raise NotImplementedError

    def backward(self, dout):
        raise NotImplementedError

    def config(self):
        return {}


class Dense(Layer):
    kind = "dense"

    def __init__(self, in_dim, out_dim, rng=None, use_bias=True):
        super().__init__()
        rng = np.random.default_rng(rng)
        limit = np.sqrt(6.0 / (in_dim + out_dim))
        self.params["W"] = rng.uniform(-limit, limit, size=(in_dim, out_dim))
        if use_bias:
            self.params["b"] = np.zeros(out_dim)
        self.in_dim, self.out_dim, self.use_bias = in_dim, out_dim, use_bias
        self._x = None

    def forward(self, x, train=False, rng=None):
        if x.shape[-1] != self.in_dim:
            raise ShapeMismatch(f"dense layer expects width {self.in_dim}, got {x.shape[-1]}")
        self._x = x
        out = x @ self.params["W"]
        if self.use_bias:
            out += self.params["b"]
        return out

    def backward(self, dout):
        self.grads["W"] = self._x.T @ dout
        if self.use_bias:
            self.grads["b"] = dout.sum(axis=0)
        return dout @ self.params["W"].T

    def config(self):
        return {"in_dim": self.in_dim, "out_dim": self.out_dim, "use_bias": self.use_bias}


class PReLU(Layer):
    kind = "prelu"

    def __init__(self, units, init=0.25):
        super().__init__()
        self.params["a"] = np.full(units, float(init))
        self.units = units
        self._x = None

    def forward(self, x, train=False, rng=None):
        self._x = x
        return np.where(x > 0, x, self.params["a"] * x)

    def backward(self, dout):
        x = self._x
        neg = x <= 0
        self.grads["a"] = np.sum(dout * x * neg, axis=0)
        return np.where(neg, self.params["a"] * dout, dout)

    def config(self):
        return {"units": self.units}


class BatchNorm(Layer):
    """Batch normalisation; train mode uses batch statistics (biased variance)."""

    kind = "batchnorm"

    def __init__(self, units, momentum=0.99, eps=1e-3):
        super().__init__()
        if eps <= 0:
            raise ValueError("batchnorm eps must be positive")
        self.params["gamma"] = np.ones(units)
        self.params["beta"] = np.zeros(units)
        self.buffers["mean"] = np.zeros(units)
        self.buffers["var"] = np.ones(units)
        self.units, self.momentum, self.eps = units, momentum, eps
        self._cache = None

    def forward(self, x, train=False, rng=None):
        if train:
            mu = x.mean(axis=0)
            xc = x - mu
            var = np.mean(xc * xc, axis=0)
            inv = 1.0 / np.sqrt(var + self.eps)
            xhat = xc * inv
            self._cache = (xhat, inv)
            m = self.momentum
            self.buffers["mean"] = m * self.buffers["mean"] + (1.0 - m) * mu
            self.buffers["var"] = m * self.buffers["var"] + (1.0 - m) * var
        else:
            inv = 1.0 / np.sqrt(self.buffers["var"] + self.eps)
            xhat = (x - self.buffers["mean"]) * inv
            self._cache = (xhat, inv, "infer")
        return xhat * self.params["gamma"] + self.params["beta"]

    def backward(self, dout):
        xhat, inv = self._cache[:2]
        gamma = self.params["gamma"]
        self.grads["gamma"] = np.sum(dout * xhat, axis=0)
        self.grads["beta"] = dout.sum(axis=0)
        dxhat = dout * gamma
        if len(self._cache) == 3:
            return dxhat * inv
        n = dout.shape[0]
        return (inv / n) * (n * dxhat - dxhat.sum(axis=0) - xhat * np.sum(dxhat * xhat, axis=0))

    def config(self):
        return {"units": self.units, "momentum": self.momentum, "eps": self.eps}


class Dropout(Layer):
    """Inverted dropout.  With ``replay`` set, the last mask is reused."""

    kind = "dropout"

    def __init__(self, rate=0.5):
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise ValueError("dropout rate must lie in [0, 1)")
        self.rate = rate
        self.replay = False
        self._mask = None

    def forward(self, x, train=False, rng=None):
        if not train or self.rate == 0.0:
            self._mask = None
            return x
        if not (self.replay and self._mask is not None and self._mask.shape == x.shape):
            rng = np.random.default_rng(rng)
            self._mask = (rng.random(x.shape) >= self.rate) / (1.0 - self.rate)
        return x * self._mask

    def backward(self, dout):
        return dout if self._mask is None else dout * self._mask

    def config(self):
        return {"rate": self.rate}


class Sigmoid(Layer):
    kind = "sigmoid"

    def forward(self, x, train=False, rng=None):
        # split by sign to avoid overflow in exp
        out = np.empty_like(x)
        pos = x >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        out[~pos] = ex / (1.0 + ex)
        self._y = out
        return out

    def backward(self, dout):
        y = self._y
        return dout * y * (1.0 - y)


LAYER_TYPES = {cls.kind: cls for cls in (Dense, PReLU, BatchNorm, Dropout, Sigmoid)}


def layer_from_config(kind, cfg):
    if kind == "dense":
        return Dense(cfg["in_dim"], cfg["out_dim"], rng=0, use_bias=cfg.get("use_bias", True))
    if kind == "prelu":
        return PReLU(cfg["units"])
    if kind == "batchnorm":
        return BatchNorm(cfg["units"], cfg["momentum"], cfg["eps"])
    if kind == "dropout":
        return Dropout(cfg["rate"])
    if kind == "sigmoid":
        return Sigmoid()
    raise ValueError(f"unknown layer kind {kind!r}")
