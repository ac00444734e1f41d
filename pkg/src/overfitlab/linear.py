"""Homogeneous linear classifier: logistic loss, its gradient, and margins."""

from __future__ import annotations

import json
import math

import numpy as np

from .gmm import Dataset


def _check_dims(w, x):
    w = np.asarray(w, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if w.shape != x.shape or w.ndim != 1:
        raise ValueError(f"dimension mismatch: w{w.shape} vs x{x.shape}")
    return w, x


def softplus_neg(m: float) -> float:
    """log(1 + exp(-m)) without overflow."""
    if m >= 0:
        return math.log1p(math.exp(-m))
    return -m + math.log1p(math.exp(m))


def sigmoid_neg(m: float) -> float:
    """1 / (1 + exp(m)), the logistic weight a point with margin ``m`` receives."""
    if m >= 0:
        e = math.exp(-m)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(m))


def logistic_loss(w, x, y: int) -> float:
    w, x = _check_dims(w, x)
    return softplus_neg(y * float(x @ w))


def logistic_grad(w, x, y: int) -> np.ndarray:
    w, x = _check_dims(w, x)
    return -y * sigmoid_neg(y * float(x @ w)) * x


def margins(w, dataset: Dataset, label_mode: str = "observed") -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (dataset.p,):
        raise ValueError(f"dimension mismatch: w{w.shape} vs p={dataset.p}")
    return dataset.labels(label_mode) * (dataset.X @ w)


def dataset_margin(w, dataset: Dataset, label_mode: str = "observed") -> float:
    """min_i y_i x_i^T w; negative when some point is misclassified."""
    return float(np.min(margins(w, dataset, label_mode)))


def softplus_neg_array(m: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, -m)


def mean_train_loss(w, dataset: Dataset) -> float:
    return float(np.mean(softplus_neg_array(margins(w, dataset))))


def weights_to_csv(w) -> str:
    return ",".join(repr(float(v)) for v in np.asarray(w).reshape(-1)) + "\n"


def weights_from_csv(text: str) -> np.ndarray:
    return np.array([float(v) for v in text.strip().split(",")])


def weights_to_json(w) -> str:
    return json.dumps([float(v) for v in np.asarray(w).reshape(-1)])


def weights_from_json(text: str) -> np.ndarray:
    return np.array(json.loads(text), dtype=np.float64)
