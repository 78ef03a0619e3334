"""Loss functions returning ``(value, d value / d prediction)``."""

import numpy as np

from ..exceptions import DomainError, ShapeMismatch

CLIP = 1e-12


def loss_bce(y, p):
    """Binary cross entropy averaged over the batch.

    Uses both terms, ``-(y log p + (1 - y) log(1 - p))``; the single-term form
    carries no signal from negative rows.  ``p`` is clipped to
    ``[1e-12, 1 - 1e-12]``.
    """
    y = np.asarray(y, dtype=float)
    p = np.asarray(p, dtype=float)
    if y.shape != p.shape:
        raise ShapeMismatch(f"target shape {y.shape} != prediction shape {p.shape}")
    if np.any((y != 0) & (y != 1)):
        raise DomainError("binary cross entropy needs targets in {0, 1}")
    pc = np.clip(p, CLIP, 1.0 - CLIP)
    n = y.shape[0] if y.ndim else 1
    value = -np.sum(y * np.log(pc) + (1.0 - y) * np.log1p(-pc)) / n
    grad = (pc - y) / (pc * (1.0 - pc)) / n
    return float(value), grad


def loss_mse(y, yhat):
    """Mean of squared residuals over every entry."""
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    if y.shape != yhat.shape:
        raise ShapeMismatch(f"target shape {y.shape} != prediction shape {yhat.shape}")
    diff = yhat - y
    value = np.mean(diff * diff)
    return float(value), 2.0 * diff / diff.size


LOSSES = {"bce": loss_bce, "mse": loss_mse}


def get_loss(name):
    try:
        return LOSSES[name]
    except KeyError:
        raise ValueError(f"unknown loss {name!r}") from None
