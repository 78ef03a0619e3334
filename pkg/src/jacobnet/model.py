"""Shared-encoder confidence/estimation network, its training schedule and I/O.

The encoder maps scaled manipulator+pose features to a 2150-wide code.  The
confidence head turns the code into a reachability probability; the
estimation head regresses the 36 Jacobian entries (min-max scaled to
``[-1, 1]``).  Jacobians are only reported where the confidence clears the
gating threshold.
"""

from __future__ import annotations

import csv
import json
import struct
import time
import zlib
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import (BadPlan, CorruptContainer, EmptyDataset, UnsupportedVersion,
                         WidthMismatch)
from .nn import ColumnScaler, Optimizer, Sequential, block, checksum
from .nn.layers import Dense, Sigmoid, layer_from_config
from .nn.losses import loss_bce, loss_mse

ENCODING_WIDTH = 2150
N_TARGETS = 36

FULL_PLAN = {
    "encoder": (256, 512, 1024, 2048, ENCODING_WIDTH),
    "head": (1024, 512, 256, 128, 64, 32, 16),
}
# lighter hidden widths for single-machine runs; the 2150-wide code is kept
DESK_PLAN = {
    "encoder": (128, 128, 128, 128, ENCODING_WIDTH),
    "head": (128, 128, 64, 64, 32, 32, 16),
}


@dataclass
class TrainConfig:
    batch_size: int = 4096
    epochs: int = 25
    pretrain_epochs: int = 5
    validation_split: float = 0.2
    optimizer: str = "adam"
    learning_rate: Optional[float] = None
    conf_passes: int = 2
    est_passes: int = 1
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.validation_split < 1:
            raise ValueError("validation_split must lie in (0, 1)")
        if self.batch_size < 1 or self.epochs < 0 or self.pretrain_epochs < 0:
            raise ValueError("batch_size must be >= 1 and epoch counts >= 0")

    def make_optimizer(self):
        return Optimizer(self.optimizer, lr=self.learning_rate)


class EpochRecord(NamedTuple):
    epoch: int
    phase: str
    train_loss: float
    val_loss: float
    wall_ms: float
    metrics: dict


@dataclass
class TrainHistory:
    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def phases(self):
        return [r.phase for r in self.records]

    def extend(self, other):
        for r in other.records:
            self.append(r.phase, r.train_loss, r.val_loss, r.wall_ms, r.metrics)
        return self

    def append(self, phase, train_loss, val_loss, wall_ms, metrics=None):
        self.records.append(EpochRecord(len(self.records) + 1, phase, float(train_loss),
                                        float(val_loss), float(wall_ms), metrics or {}))

    def losses(self, phase=None):
        return [r.train_loss for r in self.records if phase is None or r.phase == phase]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "phase", "train_loss", "val_loss", "wall_ms"])
            for r in self.records:
                w.writerow([r.epoch, r.phase, repr(r.train_loss), repr(r.val_loss),
                            f"{r.wall_ms:.3f}"])


class Prediction(NamedTuple):
    confidence: float
    jacobian: Optional[np.ndarray]


class CombinedModel:
    """Encoder plus confidence and estimation heads with their scalers."""

    def __init__(self, encoder, conf_head, est_head, threshold=0.5, plan=None,
                 x_scaler=None, y_scaler=None, info=None):
        if not 0 < threshold < 1:
            raise ValueError("threshold must lie in (0, 1)")
        if conf_head.input_dim != encoder.output_dim or est_head.input_dim != encoder.output_dim:
            raise BadPlan("both heads must consume the encoder output")
        self.encoder, self.conf_head, self.est_head = encoder, conf_head, est_head
        self.threshold = float(threshold)
        self.plan = plan
        self.x_scaler = x_scaler
        self.y_scaler = y_scaler
        self.info = dict(info or {})

    @property
    def input_dim(self):
        return self.encoder.input_dim

    def parts(self):
        return {"encoder": self.encoder, "conf": self.conf_head, "est": self.est_head}

    def encoder_checksum(self):
        e = self.encoder
        return checksum({**e.named_params(), **e.named_buffers()})

    # -- inference ---------------------------------------------------------
    def _inputs(self, X):
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.input_dim:
            raise WidthMismatch(f"model expects {self.input_dim} features, got {X.shape[1]}")
        return self.x_scaler.transform(X) if self.x_scaler is not None else X

    def _batched(self, X, fn, batch=4096):
        return np.vstack([fn(X[i:i + batch]) for i in range(0, X.shape[0], batch)]) \
            if X.shape[0] else np.empty((0, 0))

    def confidence(self, X, batch=4096):
        Z = self._inputs(X)
        out = self._batched(Z, lambda b: self.conf_head.forward(self.encoder.forward(b)), batch)
        return out[:, 0] if out.size else np.empty(0)

    def estimate(self, X, batch=4096):
        """Raw Jacobian estimates ``(N, 6, 6)`` regardless of the gate."""
        Z = self._inputs(X)
        out = self._batched(Z, lambda b: self.est_head.forward(self.encoder.forward(b)), batch)
        if self.y_scaler is not None and out.size:
            out = self.y_scaler.inverse_transform(out)
        return out.reshape(-1, 6, 6)

    def predict(self, X, threshold=None):
        """Gated predictions: a 6x6 Jacobian only where confidence >= threshold."""
        thr = self.threshold if threshold is None else threshold
        Z = self._inputs(X)
        records = []
        for i in range(0, Z.shape[0], 4096):
            code = self.encoder.forward(Z[i:i + 4096])
            conf = self.conf_head.forward(code)[:, 0]
            keep = conf >= thr
            J = None
            if keep.any():
                J = self.est_head.forward(code[keep])
                if self.y_scaler is not None:
                    J = self.y_scaler.inverse_transform(J)
                J = J.reshape(-1, 6, 6)
            k = 0
            for c, flag in zip(conf, keep):
                if flag:
                    records.append(Prediction(float(c), J[k]))
                    k += 1
                else:
                    records.append(Prediction(float(c), None))
        return records


# --------------------------------------------------------------------------- #
# Construction
# --------------------------------------------------------------------------- #

def _head(width, hidden, out_dim, rng, dropout, momentum, eps, sigmoid):
    layers = []
    prev = width
    for i, w in enumerate(hidden):
        layers += block(prev, w, rng, batchnorm=i < 4, dropout=dropout if i < 4 else 0.0,
                        momentum=momentum, eps=eps)
        prev = w
    layers.append(Dense(prev, out_dim, rng=rng))
    if sigmoid:
        layers.append(Sigmoid())
    return Sequential(layers)


def build_combined(input_dim, plan=None, seed=0, dropout=0.5, threshold=0.5,
                   bn_momentum=0.99, bn_eps=1e-3):
    """Build an untrained :class:`CombinedModel`.

    The encoder's last four hidden layers and its output layer carry
    batchnorm + PReLU + dropout; each head has 8 dense layers whose first
    four carry the same treatment.
    """
    plan = dict(FULL_PLAN if plan is None else plan)
    enc_w = tuple(int(w) for w in plan.get("encoder", ()))
    head_w = tuple(int(w) for w in plan.get("head", ()))
    if not enc_w or min(enc_w) < 1 or len(head_w) != 7 or min(head_w) < 1:
        raise BadPlan("plan needs >= 1 positive encoder width and exactly 7 head widths")
    if input_dim < 1:
        raise BadPlan("input_dim must be positive")
    rng = np.random.default_rng(seed)
    layers = []
    prev = int(input_dim)
    n_bn = min(5, len(enc_w))
    for i, w in enumerate(enc_w):
        bn = i >= len(enc_w) - n_bn
        layers += block(prev, w, rng, batchnorm=bn, dropout=dropout if bn else 0.0,
                        momentum=bn_momentum, eps=bn_eps)
        prev = w
    encoder = Sequential(layers)
    conf = _head(prev, head_w, 1, rng, dropout, bn_momentum, bn_eps, sigmoid=True)
    est = _head(prev, head_w, N_TARGETS, rng, dropout, bn_momentum, bn_eps, sigmoid=False)
    plan = {"encoder": list(enc_w), "head": list(head_w)}
    info = {"dropout": dropout, "bn_momentum": bn_momentum, "bn_eps": bn_eps, "seed": seed}
    return CombinedModel(encoder, conf, est, threshold, plan, info=info)


# --------------------------------------------------------------------------- #
# Training
# --------------------------------------------------------------------------- #

def _validation_split(n, frac, seed):
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xA11]))
    perm = rng.permutation(n)
    n_val = int(round(n * frac))
    if n - n_val < 1:
        n_val = n - 1
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def _regression_rows(X, Y):
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float).reshape(len(X), -1)
    keep = np.all(np.isfinite(Y), axis=1)
    return X[keep], Y[keep]


def _ensure_scalers(model, X_parts, Y=None):
    if model.x_scaler is None:
        model.x_scaler = ColumnScaler("standardize").fit(np.vstack(X_parts))
    if model.y_scaler is None and Y is not None:
        model.y_scaler = ColumnScaler("minmax", (-1.0, 1.0)).fit(Y)


def _epoch(nets, X, Y, loss_fn, opt, batch_size, rng, frozen=None):
    """One pass over shuffled mini-batches.

    ``nets`` are trained in sequence; ``frozen`` (if given) is run first in
    inference mode and never updated.  Returns the mean mini-batch loss.
    """
    n = X.shape[0]
    order = rng.permutation(n)
    total, count = 0.0, 0
    for s in range(0, n, batch_size):
        idx = order[s:s + batch_size]
        if idx.size < 2 and any(_has_bn(net) for net in nets):
            continue
        h = X[idx]
        if frozen is not None:
            h = frozen.forward(h)
        for net in nets:
            h = net.forward(h, train=True, rng=rng)
        value, dout = loss_fn(Y[idx], h)
        for net in reversed(nets):
            dout = net.backward(dout)
        params, grads = {}, {}
        for j, net in enumerate(nets):
            params.update(net.named_params(f"{j}/"))
            grads.update(net.named_grads(f"{j}/"))
        opt.step(params, grads)
        total += value * idx.size
        count += idx.size
    return total / max(count, 1)


def _has_bn(net):
    return any(layer.kind == "batchnorm" for layer in net.layers)


def _eval_loss(nets, X, Y, loss_fn, frozen=None, batch=4096):
    if X.shape[0] == 0:
        return float("nan")
    total = 0.0
    for s in range(0, X.shape[0], batch):
        h = X[s:s + batch]
        if frozen is not None:
            h = frozen.forward(h)
        for net in nets:
            h = net.forward(h)
        total += loss_fn(Y[s:s + batch], h)[0] * h.shape[0]
    return total / X.shape[0]


class _Phase:
    """Per-phase training state: data split and a persistent optimizer."""

    def __init__(self, X, Y, cfg, seed_tag):
        tr, va = _validation_split(X.shape[0], cfg.validation_split, cfg.seed + seed_tag)
        self.Xtr, self.Ytr, self.Xva, self.Yva = X[tr], Y[tr], X[va], Y[va]
        self.opt = cfg.make_optimizer()


def _est_phase(model, cfg):
    Xs, Ys = model._est_data
    return _Phase(model.x_scaler.transform(Xs), model.y_scaler.transform(Ys), cfg, 1)


def pretrain_encoder(model, X, Y, cfg=None, epochs=None, rng=None, history=None,
                     phase_tag="pretrain"):
    """Train encoder + estimation head jointly with MSE on scaled targets.

    Rows whose label is the no-solution sentinel are dropped first.
    """
    cfg = cfg or TrainConfig()
    epochs = cfg.pretrain_epochs if epochs is None else epochs
    X, Y = _regression_rows(X, Y)
    if X.shape[0] < 2:
        raise EmptyDataset("no reachable rows to train the estimation head on")
    if X.shape[1] != model.input_dim:
        raise WidthMismatch(f"model expects {model.input_dim} features, got {X.shape[1]}")
    _ensure_scalers(model, [X], Y)
    model._est_data = (X, Y)
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    history = TrainHistory() if history is None else history
    st = getattr(model, "_est_state", None)
    if st is None:
        st = model._est_state = _est_phase(model, cfg)
    for _ in range(epochs):
        _run_est_epoch(model, st, cfg, rng, history, phase_tag)
    return history


def _run_est_epoch(model, st, cfg, rng, history, tag):
    t0 = time.perf_counter()
    nets = [model.encoder, model.est_head]
    loss = _epoch(nets, st.Xtr, st.Ytr, loss_mse, st.opt, cfg.batch_size, rng)
    val = _eval_loss(nets, st.Xva, st.Yva, loss_mse)
    history.append(tag, loss, val, 1e3 * (time.perf_counter() - t0))


def _run_conf_epoch(model, st, cfg, rng, history):
    t0 = time.perf_counter()
    loss = _epoch([model.conf_head], st.Xtr, st.Ytr, loss_bce, st.opt, cfg.batch_size, rng,
                  frozen=model.encoder)
    val = _eval_loss([model.conf_head], st.Xva, st.Yva, loss_bce, frozen=model.encoder)
    history.append("conf", loss, val, 1e3 * (time.perf_counter() - t0))


def train_cycle(model, X_conf, y_conf, X_jac, Y_jac, cfg=None, rng=None, history=None):
    """Alternate confidence and estimation epochs until ``cfg.epochs`` are spent.

    Each cycle runs ``cfg.conf_passes`` confidence epochs with the encoder
    frozen (inference mode, no updates) and then ``cfg.est_passes``
    estimation epochs with encoder and estimation head trained together.
    """
    cfg = cfg or TrainConfig()
    X_conf = np.asarray(X_conf, dtype=float)
    y_conf = np.asarray(y_conf, dtype=float).reshape(-1, 1)
    Xj, Yj = _regression_rows(X_jac, Y_jac)
    for X in (X_conf, Xj):
        if X.ndim != 2 or X.shape[1] != model.input_dim:
            raise WidthMismatch(f"model expects {model.input_dim} features, got {X.shape}")
    if X_conf.shape[0] < 2 or Xj.shape[0] < 2:
        raise EmptyDataset("cycle training needs confidence rows and reachable Jacobian rows")
    _ensure_scalers(model, [X_conf, Xj], Yj)
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    history = TrainHistory() if history is None else history
    prev = getattr(model, "_est_data", None)
    same = prev is not None and prev[0].shape == Xj.shape and np.array_equal(prev[0], Xj) \
        and np.array_equal(prev[1], Yj)
    if getattr(model, "_est_state", None) is None or not same:
        model._est_data = (Xj, Yj)
        model._est_state = _est_phase(model, cfg)
    conf_state = _Phase(model.x_scaler.transform(X_conf), y_conf, cfg, 2)
    pattern = ["conf"] * cfg.conf_passes + ["est"] * cfg.est_passes
    if not pattern:
        raise ValueError("a cycle needs at least one pass")
    for k in range(cfg.epochs):
        if pattern[k % len(pattern)] == "conf":
            _run_conf_epoch(model, conf_state, cfg, rng, history)
        else:
            _run_est_epoch(model, model._est_state, cfg, rng, history, "est")
    return history


def optimizer_curves(X, Y, algos, target="est", plan=None, cfg=None, dropout=0.5,
                     learning_rates=None):
    """Loss curves of one network trained separately with each optimizer.

    Every run starts from the same initial weights and uses the same
    train/validation split and batch order.  ``target="est"`` trains encoder
    plus estimation head on the reachable rows of ``Y`` (MSE, scaled);
    ``target="conf"`` trains encoder plus confidence head on 0/1 labels
    (BCE).  Record 0 is evaluated before any update, later records after
    each epoch; both losses are computed in inference mode.

    Returns ``{algo: [(epoch, train_loss, val_loss), ...]}``.
    """
    cfg = cfg or TrainConfig()
    learning_rates = learning_rates or {}
    X = np.asarray(X, dtype=float)
    if target == "est":
        X, Y = _regression_rows(X, Y)
        loss_fn = loss_mse
    elif target == "conf":
        Y = np.asarray(Y, dtype=float).reshape(-1, 1)
        loss_fn = loss_bce
    else:
        raise ValueError("target must be 'est' or 'conf'")
    if X.shape[0] < 2:
        raise EmptyDataset("not enough rows for an optimizer comparison")
    curves = {}
    for algo in algos:
        model = build_combined(X.shape[1], plan, cfg.seed, dropout)
        _ensure_scalers(model, [X], Y if target == "est" else None)
        Ys = model.y_scaler.transform(Y) if target == "est" else Y
        run_cfg = replace(cfg, optimizer=algo, learning_rate=learning_rates.get(algo))
        st = _Phase(model.x_scaler.transform(X), Ys, run_cfg, 3)
        nets = [model.encoder, model.est_head if target == "est" else model.conf_head]
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x0B7]))
        rows = [(0, _eval_loss(nets, st.Xtr, st.Ytr, loss_fn),
                 _eval_loss(nets, st.Xva, st.Yva, loss_fn))]
        for ep in range(1, cfg.epochs + 1):
            _epoch(nets, st.Xtr, st.Ytr, loss_fn, st.opt, cfg.batch_size, rng)
            rows.append((ep, _eval_loss(nets, st.Xtr, st.Ytr, loss_fn),
                         _eval_loss(nets, st.Xva, st.Yva, loss_fn)))
        curves[algo] = rows
    return curves


class JacobianNet(BaseEstimator):
    """Estimator wrapper: pretrain the encoder, then cycle-train both heads.

    ``fit(X, Y)`` takes features and 36-wide Jacobian labels in which
    unreachable rows carry ``inf``.  Confidence labels default to the
    finiteness of ``Y``; a separate confidence dataset can be passed through
    ``X_conf`` / ``y_conf``.
    """

    def __init__(self, plan=None, dropout=0.5, threshold=0.5, batch_size=4096, epochs=25,
                 pretrain_epochs=5, validation_split=0.2, optimizer="adam",
                 learning_rate=None, conf_passes=2, est_passes=1, bn_momentum=0.99,
                 bn_eps=1e-3, random_state=0):
        self.plan = plan
        self.dropout = dropout
        self.threshold = threshold
        self.batch_size = batch_size
        self.epochs = epochs
        self.pretrain_epochs = pretrain_epochs
        self.validation_split = validation_split
        self.optimizer = optimizer
        self.learning_rate = learning_rate
        self.conf_passes = conf_passes
        self.est_passes = est_passes
        self.bn_momentum = bn_momentum
        self.bn_eps = bn_eps
        self.random_state = random_state

    def train_config(self):
        return TrainConfig(self.batch_size, self.epochs, self.pretrain_epochs,
                           self.validation_split, self.optimizer, self.learning_rate,
                           self.conf_passes, self.est_passes, self.random_state)

    def fit(self, X, Y, X_conf=None, y_conf=None):
        X = check_array(X, dtype=np.float64, ensure_all_finite=True)
        Y = np.asarray(Y, dtype=np.float64).reshape(X.shape[0], -1)
        if Y.shape[1] != N_TARGETS:
            raise WidthMismatch(f"Jacobian labels need {N_TARGETS} columns, got {Y.shape[1]}")
        if X_conf is None:
            X_conf, y_conf = X, np.all(np.isfinite(Y), axis=1).astype(float)
        cfg = self.train_config()
        model = build_combined(X.shape[1], self.plan, self.random_state, self.dropout,
                               self.threshold, self.bn_momentum, self.bn_eps)
        _ensure_scalers(model, [np.asarray(X_conf, float), X], _regression_rows(X, Y)[1])
        rng = np.random.default_rng(cfg.seed)
        history = pretrain_encoder(model, X, Y, cfg, rng=rng)
        train_cycle(model, X_conf, y_conf, X, Y, cfg, rng=rng, history=history)
        self.model_ = model
        self.history_ = history
        self.n_features_in_ = X.shape[1]
        return self

    def predict_confidence(self, X):
        check_is_fitted(self, "model_")
        return self.model_.confidence(X)

    def predict_proba(self, X):
        p = self.predict_confidence(X)
        return np.column_stack([1.0 - p, p])

    def predict_jacobian(self, X):
        check_is_fitted(self, "model_")
        return self.model_.estimate(X)

    def predict(self, X):
        check_is_fitted(self, "model_")
        return self.model_.predict(X, self.threshold)


# --------------------------------------------------------------------------- #
# Container format
# --------------------------------------------------------------------------- #
#
#   magic    8 bytes   b"JCBNET\r\n"
#   version  u16 LE
#   mlen     u64 LE    manifest length
#   manifest mlen      UTF-8 JSON: architecture, scaler settings, blob index
#   blen     u64 LE    parameter blob length
#   blob     blen      float64 LE arrays, concatenated in index order
#   crc      u32 LE    CRC-32 of blob

MAGIC = b"JCBNET\r\n"
FORMAT_VERSION = 1


def _arrays(model):
    out = {}
    for name, net in model.parts().items():
        for k, v in net.named_params(f"{name}.").items():
            out["p:" + k] = v
        for k, v in net.named_buffers(f"{name}.").items():
            out["b:" + k] = v
    for tag, sc in (("x", model.x_scaler), ("y", model.y_scaler)):
        if sc is not None:
            for k, v in sc.get_state().items():
                out[f"s:{tag}.{k}"] = np.asarray(v, dtype=float)
    return out


def save_model(model, path):
    arrays = _arrays(model)
    index, chunks, offset = [], [], 0
    for name, arr in arrays.items():
        raw = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        index.append({"name": name, "shape": list(arr.shape), "offset": offset,
                      "nbytes": len(raw)})
        chunks.append(raw)
        offset += len(raw)
    blob = b"".join(chunks)
    manifest = {
        "input_dim": model.input_dim,
        "threshold": model.threshold,
        "plan": model.plan,
        "info": model.info,
        "layers": {name: net.manifest() for name, net in model.parts().items()},
        "scalers": {tag: ({"kind": sc.kind, "feature_range": list(sc.feature_range)}
                          if sc is not None else None)
                    for tag, sc in (("x", model.x_scaler), ("y", model.y_scaler))},
        "arrays": index,
    }
    mbytes = json.dumps(manifest, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HQ", FORMAT_VERSION, len(mbytes)))
        fh.write(mbytes)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        fh.write(struct.pack("<I", zlib.crc32(blob) & 0xFFFFFFFF))


def load_model(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < len(MAGIC) + 10 or data[:len(MAGIC)] != MAGIC:
        raise CorruptContainer("bad magic or truncated header", "header")
    pos = len(MAGIC)
    version, mlen = struct.unpack_from("<HQ", data, pos)
    if version != FORMAT_VERSION:
        raise UnsupportedVersion(f"container version {version}, reader supports "
                                 f"{FORMAT_VERSION}", "header")
    pos += 10
    if pos + mlen > len(data):
        raise CorruptContainer("manifest truncated", "manifest")
    try:
        manifest = json.loads(data[pos:pos + mlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptContainer(f"manifest unreadable: {exc}", "manifest") from None
    pos += mlen
    if pos + 8 > len(data):
        raise CorruptContainer("parameter length missing", "parameters")
    (blen,) = struct.unpack_from("<Q", data, pos)
    pos += 8
    if pos + blen + 4 > len(data):
        raise CorruptContainer("parameter blob truncated", "parameters")
    blob = data[pos:pos + blen]
    (crc,) = struct.unpack_from("<I", data, pos + blen)
    if zlib.crc32(blob) & 0xFFFFFFFF != crc:
        raise CorruptContainer("parameter checksum mismatch", "parameters")
    try:
        return _rebuild(manifest, blob)
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptContainer(f"inconsistent manifest: {exc}", "manifest") from None


def _rebuild(manifest, blob):
    arrays = {}
    for entry in manifest["arrays"]:
        a = np.frombuffer(blob, dtype="<f8", count=int(np.prod(entry["shape"], dtype=int)),
                          offset=entry["offset"])
        arrays[entry["name"]] = a.reshape(entry["shape"]).astype(np.float64)
    nets = {}
    for name, layers in manifest["layers"].items():
        seq = Sequential([layer_from_config(item["kind"], item["config"]) for item in layers])
        for i, layer in enumerate(seq.layers):
            for k in layer.params:
                layer.params[k] = arrays[f"p:{name}.{i}.{k}"].copy()
            for k in layer.buffers:
                layer.buffers[k] = arrays[f"b:{name}.{i}.{k}"].copy()
        nets[name] = seq
    scalers = {}
    for tag, spec in manifest["scalers"].items():
        if spec is None:
            scalers[tag] = None
            continue
        state = {k: arrays[f"s:{tag}.{k}"] for k in ("offset", "scale", "out_lo", "degenerate")}
        scalers[tag] = ColumnScaler.from_state(spec["kind"], spec["feature_range"], state)
    return CombinedModel(nets["encoder"], nets["conf"], nets["est"], manifest["threshold"],
                         manifest["plan"], scalers["x"], scalers["y"], manifest.get("info"))
