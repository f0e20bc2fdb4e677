"""
Forward/backward pairs for the fixed set of ops used by the point transformer.

Backward functions take the upstream gradient plus whatever the forward cached and
return gradients; they never touch parameter storage.
"""

from typing import Tuple

import numpy as np

from pointformer.util.errors import InvalidArgument, InvalidState

NORM_EPS = 1e-5


def linear(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """x (..., d_in) @ W (d_in, d_out) + b (d_out,)."""
    if x.shape[-1] != weight.shape[0] or bias.shape != (weight.shape[1],):
        raise InvalidArgument(
            f"linear shapes disagree: x {x.shape}, W {weight.shape}, b {bias.shape}"
        )
    flat = x.reshape(-1, weight.shape[0])
    return (flat @ weight + bias).reshape(x.shape[:-1] + (weight.shape[1],))


def linear_backward(
    dy: np.ndarray, x: np.ndarray, weight: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (dx, dW, db)."""
    flat_x = x.reshape(-1, weight.shape[0])
    flat_dy = dy.reshape(-1, weight.shape[1])
    dx = (flat_dy @ weight.T).reshape(x.shape)
    return dx, flat_x.T @ flat_dy, flat_dy.sum(axis=0)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def relu_backward(dy: np.ndarray, x: np.ndarray) -> np.ndarray:
    return dy * (x > 0)


def softmax_over_neighbors(logits: np.ndarray) -> np.ndarray:
    """Softmax over axis 1 of (n, k, c) logits, independently per point and channel."""
    if logits.ndim != 3 or logits.shape[1] == 0:
        raise InvalidArgument(f"expected (n, k>=1, c) logits, got {logits.shape}")
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_backward(dy: np.ndarray, y: np.ndarray) -> np.ndarray:
    return y * (dy - (dy * y).sum(axis=1, keepdims=True))


def max_pool_neighbors(features: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Max over axis 1 of (n, k, c) features; returns (n, c) values and (n, c) argmax."""
    if features.ndim != 3 or features.shape[1] == 0:
        raise InvalidArgument(f"expected (n, k>=1, c) features, got {features.shape}")
    arg = features.argmax(axis=1)
    return np.take_along_axis(features, arg[:, None, :], axis=1)[:, 0, :], arg


def max_pool_backward(dy: np.ndarray, arg: np.ndarray, k: int) -> np.ndarray:
    n, c = dy.shape
    df = np.zeros((n, k, c), dtype=dy.dtype)
    np.put_along_axis(df, arg[:, None, :], dy[:, None, :], axis=1)
    return df


def global_avg_pool(x: np.ndarray) -> np.ndarray:
    """(n, c) -> (1, c) mean over points."""
    if x.ndim != 2 or x.shape[0] == 0:
        raise InvalidArgument(f"expected (n>=1, c) features, got {x.shape}")
    return x.mean(axis=0, keepdims=True)


def global_avg_pool_backward(dy: np.ndarray, n: int) -> np.ndarray:
    return np.broadcast_to(dy / n, (n, dy.shape[1])).copy()


def point_norm(
    x: np.ndarray,
    gain: np.ndarray,
    bias: np.ndarray,
    mean: np.ndarray = None,
    var: np.ndarray = None,
    eps: float = NORM_EPS,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Standardize each channel of (n, c) features over the point axis, then apply gain
    and bias. With mean/var given those statistics are used instead of the batch ones.
    Returns (y, xhat, inv_std).
    """
    if x.ndim != 2 or gain.shape != (x.shape[1],) or bias.shape != (x.shape[1],):
        raise InvalidArgument(f"point_norm shapes disagree: x {x.shape}, gain {gain.shape}")
    if mean is None:
        if x.shape[0] < 2:
            raise InvalidState("point_norm needs at least 2 points in training mode")
        mean = x.mean(axis=0)
        var = x.var(axis=0)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean) * inv_std
    return gain * xhat + bias, xhat, inv_std


def point_norm_backward(
    dy: np.ndarray, xhat: np.ndarray, inv_std: np.ndarray, gain: np.ndarray, batch_stats: bool
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (dx, dgain, dbias)."""
    dgain = (dy * xhat).sum(axis=0)
    dbias = dy.sum(axis=0)
    dxhat = dy * gain
    if not batch_stats:
        return dxhat * inv_std, dgain, dbias
    n = dy.shape[0]
    dx = (inv_std / n) * (n * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0))
    return dx, dgain, dbias


def gather_neighbors(x: np.ndarray, indices: np.ndarray) -> np.ndarray:
    """(n, d) rows gathered by (m, k) indices into (m, k, d)."""
    return x[indices]


def scatter_neighbors(dg: np.ndarray, indices: np.ndarray, n: int) -> np.ndarray:
    """Adjoint of gather_neighbors: sum (m, k, d) gradients back into (n, d) rows."""
    d = dg.shape[-1]
    out = np.zeros((n, d), dtype=dg.dtype)
    np.add.at(out, indices.reshape(-1), dg.reshape(-1, d))
    return out
