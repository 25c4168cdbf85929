"""Multinomial logistic regression on flattened image features.

Weights live as a flat float64 vector of length num_features * num_classes
so they drop straight into the sign codec; matrix work happens in the dtype
of the feature array (float32 features keep the training loop fast, float64
features give full precision for gradient checks).
"""
from __future__ import annotations

import numpy as np

__all__ = [
    "init_weights",
    "softmax_probabilities",
    "softmax_loss",
    "softmax_gradient",
    "loss_accuracy_gradient",
    "accuracy",
]


def _check(w: np.ndarray, X: np.ndarray, y: np.ndarray) -> tuple[int, int]:
    if X.ndim != 2:
        raise ValueError("features must be 2-D (samples x features)")
    if y.ndim != 1 or y.shape[0] != X.shape[0]:
        raise ValueError("labels must be 1-D and match the sample count")
    if w.ndim != 1 or w.size % X.shape[1] != 0:
        raise ValueError("flat weight length must be a multiple of the feature count")
    n_feat = X.shape[1]
    n_cls = w.size // n_feat
    if n_cls < 2:
        raise ValueError("need at least two classes")
    return n_feat, n_cls


def init_weights(num_features: int, num_classes: int) -> np.ndarray:
    """All-zero flat weight vector; at this point the model predicts the
    uniform distribution over classes."""
    if num_features <= 0 or num_classes <= 1:
        raise ValueError("need num_features >= 1 and num_classes >= 2")
    return np.zeros(num_features * num_classes, dtype=np.float64)


def _logits(w: np.ndarray, X: np.ndarray, n_feat: int, n_cls: int) -> np.ndarray:
    W = w.reshape(n_feat, n_cls).astype(X.dtype, copy=False)
    return X @ W


def softmax_probabilities(w, X) -> np.ndarray:
    """Class probabilities for each row of X."""
    w = np.asarray(w, dtype=np.float64)
    X = np.asarray(X)
    n_feat, n_cls = _check(w, X, np.zeros(X.shape[0], dtype=np.int64))
    z = _logits(w, X, n_feat, n_cls)
    z = z - z.max(axis=1, keepdims=True)
    np.exp(z, out=z)
    z /= z.sum(axis=1, keepdims=True)
    return z


def softmax_loss(w, X, y) -> float:
    """Mean cross-entropy of the label under the predicted distribution."""
    loss, _, _ = loss_accuracy_gradient(w, X, y, want_gradient=False)
    return loss


def softmax_gradient(w, X, y) -> np.ndarray:
    """Flat mean cross-entropy gradient over the batch."""
    _, _, grad = loss_accuracy_gradient(w, X, y)
    return grad


def loss_accuracy_gradient(
    w, X, y, want_gradient: bool = True
) -> tuple[float, float, np.ndarray | None]:
    """Mean cross-entropy, batch accuracy, and (optionally) the flat
    gradient, from a single forward pass."""
    w = np.asarray(w, dtype=np.float64)
    X = np.asarray(X)
    y = np.asarray(y, dtype=np.int64)
    n_feat, n_cls = _check(w, X, y)
    if y.min() < 0 or y.max() >= n_cls:
        raise ValueError("label outside the class range")
    n = X.shape[0]

    z = _logits(w, X, n_feat, n_cls)
    zmax = z.max(axis=1, keepdims=True)
    z -= zmax
    ez = np.exp(z)
    denom = ez.sum(axis=1)
    # cross-entropy via the log-sum-exp form, accumulated in float64
    idx = np.arange(n)
    loss = float(np.mean(np.log(denom.astype(np.float64)) - z[idx, y].astype(np.float64)))
    acc = float(np.mean(z.argmax(axis=1) == y))
    if not want_gradient:
        return loss, acc, None

    probs = ez / denom[:, None]
    probs[idx, y] -= 1.0
    grad = (X.T @ probs) / n
    return loss, acc, grad.astype(np.float64).ravel()


def accuracy(w, X, y) -> float:
    """Fraction of rows whose argmax logit matches the label."""
    w = np.asarray(w, dtype=np.float64)
    X = np.asarray(X)
    y = np.asarray(y, dtype=np.int64)
    n_feat, n_cls = _check(w, X, y)
    z = _logits(w, X, n_feat, n_cls)
    return float(np.mean(z.argmax(axis=1) == y))
