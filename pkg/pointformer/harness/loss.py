from typing import Tuple

import numpy as np

from pointformer.nn.layers import Module
from pointformer.util.errors import InvalidInput


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    Mean over rows of -log softmax(logits)[label], unweighted.
    Returns (loss, dloss/dlogits).
    """
    if logits.ndim != 2:
        raise InvalidInput(f"expected (n, C) logits, got {logits.shape}")
    n, c = logits.shape
    labels = np.asarray(labels).reshape(-1)
    if labels.shape != (n,):
        raise InvalidInput(f"expected {n} labels, got {labels.shape[0]}")
    if not np.issubdtype(labels.dtype, np.integer) or labels.min() < 0 or labels.max() >= c:
        raise InvalidInput(f"labels must be integers in [0, {c})")
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_p = shifted - log_z
    rows = np.arange(n)
    loss = float(-log_p[rows, labels].mean())
    grad = np.exp(log_p)
    grad[rows, labels] -= 1.0
    return loss, grad / n


class CrossEntropy(Module):
    """Cross-entropy against fixed labels as a module: forward(logits) -> 0-d loss."""

    def __init__(self, labels: np.ndarray) -> None:
        super().__init__()
        self.labels = np.asarray(labels)

    def forward(self, logits: np.ndarray) -> np.ndarray:
        loss, self._grad = cross_entropy(logits, self.labels)
        return np.asarray(loss, dtype=logits.dtype)

    def backward(self, dloss) -> np.ndarray:
        return self._grad * dloss
