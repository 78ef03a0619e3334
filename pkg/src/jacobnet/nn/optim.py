"""First-order update rules operating in place on named parameter arrays."""

import numpy as np

from ..exceptions import UnknownAlgo

ALGOS = ("sgd", "adam", "nadam", "adamax", "rmsprop", "adagrad", "adadelta")

DEFAULT_LR = {
    "sgd": 0.01,
    "adam": 0.001,
    "nadam": 0.001,
    "adamax": 0.001,
    "rmsprop": 0.001,
    "adagrad": 0.01,
    "adadelta": 1.0,
}


class Optimizer:
    """One of the seven update rules with per-parameter state.

    Parameters
    ----------
    algo : str
        ``sgd``, ``adam``, ``nadam``, ``adamax``, ``rmsprop``, ``adagrad`` or
        ``adadelta``.
    lr : float, optional
        Step size; defaults depend on ``algo`` (see ``DEFAULT_LR``).
    beta1, beta2 : float
        Moment decay rates for the Adam family.
    eps : float
        Stabiliser.  Adadelta uses ``1e-6`` when left at the default.
    rho : float
        Decay rate for RMSprop (0.9) and Adadelta (0.95) when left unset.
    """

    def __init__(self, algo="adam", lr=None, beta1=0.9, beta2=0.999, eps=1e-8, rho=None):
        if algo not in ALGOS:
            raise UnknownAlgo(f"unknown optimizer {algo!r}; choose from {ALGOS}")
        self.algo = algo
        self.lr = DEFAULT_LR[algo] if lr is None else float(lr)
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if not (0 <= beta1 < 1 and 0 <= beta2 < 1) or eps <= 0:
            raise ValueError("need 0 <= beta1, beta2 < 1 and eps > 0")
        self.beta1, self.beta2 = beta1, beta2
        self.eps = 1e-6 if algo == "adadelta" and eps == 1e-8 else eps
        self.rho = rho if rho is not None else (0.95 if algo == "adadelta" else 0.9)
        self.t = 0
        self.state = {}

    def get_config(self):
        return {"algo": self.algo, "lr": self.lr, "beta1": self.beta1, "beta2": self.beta2,
                "eps": self.eps, "rho": self.rho}

    def _slots(self, key, like, names):
        st = self.state.get(key)
        if st is None:
            st = {n: np.zeros_like(like) for n in names}
            self.state[key] = st
        return st

    def step(self, params, grads):
        """Apply one update to every ``params[k]`` that has ``grads[k]``."""
        self.t += 1
        t = self.t
        for key, g in grads.items():
            p = params[key]
            getattr(self, "_" + self.algo)(key, p, g, t)

    def _sgd(self, key, p, g, t):
        p -= self.lr * g

    def _adam(self, key, p, g, t):
        s = self._slots(key, p, ("m", "v"))
        b1, b2 = self.beta1, self.beta2
        s["m"] = b1 * s["m"] + (1 - b1) * g
        s["v"] = b2 * s["v"] + (1 - b2) * g * g
        mhat = s["m"] / (1 - b1 ** t)
        vhat = s["v"] / (1 - b2 ** t)
        p -= self.lr * mhat / (np.sqrt(vhat) + self.eps)

    def _nadam(self, key, p, g, t):
        s = self._slots(key, p, ("m", "v"))
        b1, b2 = self.beta1, self.beta2
        s["m"] = b1 * s["m"] + (1 - b1) * g
        s["v"] = b2 * s["v"] + (1 - b2) * g * g
        mhat = s["m"] / (1 - b1 ** t)
        vhat = s["v"] / (1 - b2 ** t)
        look = b1 * mhat + (1 - b1) * g / (1 - b1 ** t)
        p -= self.lr * look / (np.sqrt(vhat) + self.eps)

    def _adamax(self, key, p, g, t):
        s = self._slots(key, p, ("m", "u"))
        b1 = self.beta1
        s["m"] = b1 * s["m"] + (1 - b1) * g
        s["u"] = np.maximum(self.beta2 * s["u"], np.abs(g))
        mhat = s["m"] / (1 - b1 ** t)
        # u == 0 only where every gradient so far was zero, so the step is zero too
        step = np.divide(mhat, s["u"], out=np.zeros_like(p), where=s["u"] > 0)
        p -= self.lr * step

    def _rmsprop(self, key, p, g, t):
        s = self._slots(key, p, ("sq",))
        s["sq"] = self.rho * s["sq"] + (1 - self.rho) * g * g
        p -= self.lr * g / np.sqrt(s["sq"] + self.eps)

    def _adagrad(self, key, p, g, t):
        s = self._slots(key, p, ("acc",))
        s["acc"] += g * g
        p -= self.lr * g / (np.sqrt(s["acc"]) + self.eps)

    def _adadelta(self, key, p, g, t):
        s = self._slots(key, p, ("sq", "dx"))
        rho, eps = self.rho, self.eps
        s["sq"] = rho * s["sq"] + (1 - rho) * g * g
        dx = np.sqrt(s["dx"] + eps) / np.sqrt(s["sq"] + eps) * g
        s["dx"] = rho * s["dx"] + (1 - rho) * dx * dx
        p -= self.lr * dx
