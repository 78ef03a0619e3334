"""Sequential container, parameter bookkeeping and gradient checking."""

import hashlib

import numpy as np

from ..exceptions import ShapeMismatch
from .layers import BatchNorm, Dense, Dropout, PReLU, Sigmoid
from .losses import get_loss


class Sequential:
    def __init__(self, layers=()):
        self.layers = list(layers)

    def __iter__(self):
        return iter(self.layers)

    def __len__(self):
        return len(self.layers)

    @property
    def input_dim(self):
        for layer in self.layers:
            if isinstance(layer, Dense):
                return layer.in_dim
        return None

    @property
    def output_dim(self):
        for layer in reversed(self.layers):
            if isinstance(layer, Dense):
                return layer.out_dim
        return None

    def forward(self, x, train=False, rng=None):
        """Run every layer; ``rng`` feeds the dropout masks in train mode."""
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or (self.input_dim is not None and x.shape[1] != self.input_dim):
            raise ShapeMismatch(f"network expects (batch, {self.input_dim}), got {x.shape}")
        if train:
            rng = np.random.default_rng(rng)
        for layer in self.layers:
            x = layer.forward(x, train=train, rng=rng)
        return x

    def backward(self, dout):
        for layer in reversed(self.layers):
            dout = layer.backward(dout)
        return dout

    def named_params(self, prefix=""):
        out = {}
        for i, layer in enumerate(self.layers):
            for k, v in layer.params.items():
                out[f"{prefix}{i}.{k}"] = v
        return out

    def named_grads(self, prefix=""):
        out = {}
        for i, layer in enumerate(self.layers):
            for k, v in layer.grads.items():
                out[f"{prefix}{i}.{k}"] = v
        return out

    def named_buffers(self, prefix=""):
        out = {}
        for i, layer in enumerate(self.layers):
            for k, v in layer.buffers.items():
                out[f"{prefix}{i}.{k}"] = v
        return out

    def n_params(self):
        return sum(v.size for v in self.named_params().values())

    def set_replay(self, flag):
        for layer in self.layers:
            if isinstance(layer, Dropout):
                layer.replay = flag

    def manifest(self):
        return [{"kind": layer.kind, "config": layer.config(),
                 "params": {k: list(v.shape) for k, v in layer.params.items()},
                 "buffers": {k: list(v.shape) for k, v in layer.buffers.items()}}
                for layer in self.layers]


def checksum(arrays):
    """SHA-256 over the raw bytes of a name -> array mapping, in key order."""
    h = hashlib.sha256()
    for k in sorted(arrays):
        h.update(k.encode())
        h.update(np.ascontiguousarray(arrays[k], dtype=np.float64).tobytes())
    return h.hexdigest()


def block(in_dim, out_dim, rng, batchnorm=False, dropout=0.0, momentum=0.99, eps=1e-3,
          activation="prelu"):
    """Dense layer optionally followed by batchnorm, PReLU and dropout.

    A dense layer feeding batchnorm carries no bias; the batchnorm shift
    replaces it.
    """
    layers = [Dense(in_dim, out_dim, rng=rng, use_bias=not batchnorm)]
    if batchnorm:
        layers.append(BatchNorm(out_dim, momentum, eps))
    if activation == "prelu":
        layers.append(PReLU(out_dim))
    elif activation == "sigmoid":
        layers.append(Sigmoid())
    if dropout > 0:
        layers.append(Dropout(dropout))
    return layers


def grad_check(net, X, Y, loss="mse", step=1e-6, seed=0, replay=True):
    """Largest relative error between backprop and central differences.

    The relative error of one parameter is
    ``|analytic - fd| / max(|analytic|, |fd|, 1e-12)``.  Dropout masks from
    the analytic pass are replayed during differencing unless ``replay`` is
    false (which is expected to fail).  Batchnorm buffers are restored.
    """
    loss_fn = get_loss(loss)
    saved = {k: v.copy() for k, v in net.named_buffers().items()}

    def restore():
        for i, layer in enumerate(net.layers):
            for k in layer.buffers:
                layer.buffers[k] = saved[f"{i}.{k}"].copy()

    rng = np.random.default_rng(seed)
    net.set_replay(False)
    out = net.forward(X, train=True, rng=rng)
    _, dout = loss_fn(Y, out)
    net.backward(dout)
    analytic = {k: v.copy() for k, v in net.named_grads().items()}
    net.set_replay(replay)

    def f():
        return loss_fn(Y, net.forward(X, train=True, rng=rng))[0]

    worst = 0.0
    try:
        for key, p in net.named_params().items():
            g = analytic[key]
            it = np.nditer(p, flags=["multi_index"])
            for _ in it:
                ix = it.multi_index
                orig = p[ix]
                p[ix] = orig + step
                fp = f()
                p[ix] = orig - step
                fm = f()
                p[ix] = orig
                fd = (fp - fm) / (2 * step)
                a = g[ix]
                rel = abs(a - fd) / max(abs(a), abs(fd), 1e-12)
                worst = max(worst, rel)
    finally:
        net.set_replay(False)
        restore()
    return worst
