"""Dense neural network engine written directly against numpy."""

from .layers import BatchNorm, Dense, Dropout, PReLU, Sigmoid
from .losses import loss_bce, loss_mse
from .network import Sequential, block, checksum, grad_check
from .optim import ALGOS, Optimizer
from .scaling import ColumnScaler, fit_scaler

__all__ = [
    "ALGOS", "BatchNorm", "ColumnScaler", "Dense", "Dropout", "Optimizer", "PReLU",
    "Sequential", "Sigmoid", "block", "checksum", "fit_scaler", "grad_check", "loss_bce",
    "loss_mse",
]
