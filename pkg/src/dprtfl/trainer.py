"""Binary logistic regression trained with mini-batch SGD.

Stands in for a linear ``SGDClassifier`` with log loss. The objective is

    mean_i logloss(y_i, sigmoid(w.x_i + b)) + (l2_reg / 2) * ||w||^2

with the intercept left unregularized. The step size is constant and batch
order is a seeded permutation drawn fresh for every epoch, so ``train`` is a
pure function of its arguments.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import InvalidConfigError, InvalidInputError
from .model import ParamVector

PROB_CLAMP = 1e-12


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        x = np.array(self.features, dtype=np.float64, copy=True)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        y = np.array(self.labels, copy=True).reshape(-1)
        if x.ndim != 2 or x.shape[0] != y.shape[0]:
            raise InvalidInputError(f"features {x.shape} do not match labels {y.shape}")
        if x.shape[0] < 1:
            raise InvalidInputError("dataset must have at least one row")
        if np.isnan(x).any():
            raise InvalidInputError("features contain NaN")
        if not np.isin(y, (0, 1)).all():
            raise InvalidInputError("labels must be 0 or 1")
        y = y.astype(np.float64)
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return int(self.features.shape[0])

    @property
    def dim(self) -> int:
        return int(self.features.shape[1])

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx])

    @staticmethod
    def concat(parts) -> "Dataset":
        parts = list(parts)
        return Dataset(np.vstack([p.features for p in parts]), np.concatenate([p.labels for p in parts]))


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 3
    learning_rate: float = 0.1
    batch_size: int = 32
    l2_reg: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if int(self.epochs) < 1:
            raise InvalidConfigError("epochs must be >= 1")
        if not self.learning_rate >= 0:
            raise InvalidConfigError("learning_rate must be non-negative")
        if int(self.batch_size) < 1:
            raise InvalidConfigError("batch_size must be >= 1")
        if not self.l2_reg >= 0:
            raise InvalidConfigError("l2_reg must be non-negative")


def sigmoid(z):
    # split by sign so exp never overflows
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _check_dims(params: ParamVector, dim: int):
    if params.dim != dim:
        raise InvalidInputError(f"parameter dimension {params.dim} does not match feature dimension {dim}")


def predict_proba(params: ParamVector, features) -> np.ndarray | float:
    """Return sigmoid(w.x + b) for one row (float) or a matrix of rows (array)."""
    x = np.asarray(features, dtype=np.float64)
    single = x.ndim == 1
    x2 = x.reshape(1, -1) if single else x
    _check_dims(params, x2.shape[1])
    p = sigmoid(x2 @ params.coef + params.intercept)
    return float(p[0]) if single else p


def log_loss(params: ParamVector, data: Dataset) -> float:
    _check_dims(params, data.dim)
    p = np.clip(predict_proba(params, data.features), PROB_CLAMP, 1.0 - PROB_CLAMP)
    y = data.labels
    return float(np.mean(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))))


def objective(params: ParamVector, data: Dataset, l2_reg: float) -> float:
    """Regularized log loss that SGD minimizes."""
    return log_loss(params, data) + 0.5 * l2_reg * float(params.coef @ params.coef)


def gradient(flat: np.ndarray, x: np.ndarray, y: np.ndarray, l2_reg: float) -> np.ndarray:
    """Analytic gradient of the regularized objective w.r.t. the flat vector [w, b]."""
    w, b = flat[:-1], flat[-1]
    resid = sigmoid(x @ w + b) - y
    g = np.empty_like(flat)
    g[:-1] = x.T @ resid / x.shape[0] + l2_reg * w
    g[-1] = resid.mean()
    return g


def epoch_order(seed: int, epoch: int, n: int) -> np.ndarray:
    """Row order for one epoch: a PCG64 permutation keyed on (seed, epoch)."""
    return np.random.default_rng([int(seed), int(epoch)]).permutation(n)


def train_epoch(flat: np.ndarray, data: Dataset, cfg: TrainConfig, epoch: int) -> np.ndarray:
    flat = np.array(flat, dtype=np.float64, copy=True)
    x, y = data.features, data.labels
    order = epoch_order(cfg.seed, epoch, data.n)
    for start in range(0, data.n, cfg.batch_size):
        idx = order[start:start + cfg.batch_size]
        flat -= cfg.learning_rate * gradient(flat, x[idx], y[idx], cfg.l2_reg)
    return flat


def train(
    start: ParamVector,
    data: Dataset,
    cfg: TrainConfig,
    on_epoch: Optional[Callable[[int, ParamVector], bool]] = None,
) -> ParamVector:
    """Run ``cfg.epochs`` passes of mini-batch SGD from ``start``.

    ``on_epoch(epoch, params)`` is called after every epoch; returning True
    stops training early (used for client-side early stopping).
    """
    _check_dims(start, data.dim)
    flat = start.flat()
    current = start
    for epoch in range(cfg.epochs):
        flat = train_epoch(flat, data, cfg, epoch)
        current = ParamVector.from_flat(flat)
        if on_epoch is not None and on_epoch(epoch, current):
            break
    return current
