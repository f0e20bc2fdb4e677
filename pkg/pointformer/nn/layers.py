"""
Layer modules with explicit forward and backward passes.

A module caches what its backward needs during forward, so one forward must be followed
by at most one backward before the next forward. Parameter gradients accumulate.
"""

from collections import OrderedDict
from typing import Iterator, Optional, Tuple

import numpy as np

from pointformer.nn import functional as F
from pointformer.nn.grid import LayerParams, Parameter, uniform_init
from pointformer.util.errors import InvalidState


class Module:
    def __init__(self) -> None:
        self.training = True
        self._params: "OrderedDict[str, Parameter]" = OrderedDict()
        self._children: "OrderedDict[str, Module]" = OrderedDict()
        self._buffers: "OrderedDict[str, np.ndarray]" = OrderedDict()

    def add_param(self, name: str, value: np.ndarray) -> Parameter:
        p = Parameter(value)
        self._params[name] = p
        return p

    def add_child(self, name: str, module: "Module") -> "Module":
        self._children[name] = module
        return module

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Parameter]]:
        for name, p in self._params.items():
            yield prefix + name, p
        for name, child in self._children.items():
            yield from child.named_parameters(f"{prefix}{name}.")

    def named_buffers(self, prefix: str = "") -> Iterator[Tuple[str, np.ndarray]]:
        for name, b in self._buffers.items():
            yield prefix + name, b
        for name, child in self._children.items():
            yield from child.named_buffers(f"{prefix}{name}.")

    def parameters(self) -> LayerParams:
        return LayerParams(self.named_parameters())

    def modules(self) -> Iterator["Module"]:
        yield self
        for child in self._children.values():
            yield from child.modules()

    def branch_pattern(self) -> Optional[np.ndarray]:
        """Which side of each kink the last forward took; None for smooth modules."""
        return None

    def set_buffer(self, name: str, value: np.ndarray) -> None:
        """Set a buffer by dotted path (used when restoring checkpoints)."""
        head, _, rest = name.partition(".")
        if rest:
            self._children[head].set_buffer(rest, value)
        else:
            if head not in self._buffers or self._buffers[head].shape != value.shape:
                raise InvalidState(f"unknown buffer or shape mismatch: {name}")
            self._buffers[head][...] = value

    def train(self, mode: bool = True) -> "Module":
        self.training = mode
        for child in self._children.values():
            child.train(mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self) -> None:
        for _, p in self.named_parameters():
            p.zero_grad()

    def clear_grads(self) -> None:
        for _, p in self.named_parameters():
            p.grad = None

    def astype(self, dtype) -> "Module":
        """Cast parameters, momentum and buffers in place (e.g. to float64 for checks)."""
        for _, p in self.named_parameters():
            p.data = p.data.astype(dtype)
            p.momentum = p.momentum.astype(dtype)
            p.grad = None
        self._cast_buffers(dtype)
        return self

    def _cast_buffers(self, dtype) -> None:
        for name in self._buffers:
            self._buffers[name] = self._buffers[name].astype(dtype)
        for child in self._children.values():
            child._cast_buffers(dtype)


class Linear(Module):
    def __init__(
        self,
        d_in: int,
        d_out: int,
        rng: np.random.Generator,
        dtype=np.float32,
        zero: bool = False,
    ) -> None:
        super().__init__()
        if zero:
            self.weight = self.add_param("weight", np.zeros((d_in, d_out), dtype=dtype))
            self.bias = self.add_param("bias", np.zeros(d_out, dtype=dtype))
        else:
            self.weight = self.add_param("weight", uniform_init(rng, (d_in, d_out), d_in, dtype))
            self.bias = self.add_param("bias", uniform_init(rng, (d_out,), d_in, dtype))
        self._x: Optional[np.ndarray] = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._x = x
        return F.linear(x, self.weight.data, self.bias.data)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        dx, dw, db = F.linear_backward(dy, self._x, self.weight.data)
        self.weight.accumulate(dw)
        self.bias.accumulate(db)
        return dx


class ReLU(Module):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self._x = x
        return F.relu(x)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        return F.relu_backward(dy, self._x)

    def branch_pattern(self) -> Optional[np.ndarray]:
        x = getattr(self, "_x", None)
        return None if x is None else x > 0


class MLP(Module):
    """linear -> ReLU -> linear."""

    def __init__(
        self, d_in: int, d_hidden: int, d_out: int, rng: np.random.Generator, dtype=np.float32
    ) -> None:
        super().__init__()
        self.fc1 = self.add_child("fc1", Linear(d_in, d_hidden, rng, dtype))
        self.act = self.add_child("act", ReLU())
        self.fc2 = self.add_child("fc2", Linear(d_hidden, d_out, rng, dtype))

    def forward(self, x: np.ndarray) -> np.ndarray:
        return self.fc2.forward(self.act.forward(self.fc1.forward(x)))

    def backward(self, dy: np.ndarray) -> np.ndarray:
        return self.fc1.backward(self.act.backward(self.fc2.backward(dy)))


class PointNorm(Module):
    """
    Per-channel standardization over the point axis of one cloud, with running
    statistics for evaluation mode.
    """

    def __init__(
        self, channels: int, dtype=np.float32, eps: float = F.NORM_EPS, momentum: float = 0.1
    ) -> None:
        super().__init__()
        self.eps = eps
        self.momentum = momentum
        self.gain = self.add_param("gain", np.ones(channels, dtype=dtype))
        self.bias = self.add_param("bias", np.zeros(channels, dtype=dtype))
        self._buffers["running_mean"] = np.zeros(channels, dtype=dtype)
        self._buffers["running_var"] = np.ones(channels, dtype=dtype)

    def forward(self, x: np.ndarray, use_running: bool = False) -> np.ndarray:
        """
        Training mode uses this cloud's statistics and updates the running ones;
        evaluation mode (or use_running=True) uses the running statistics.
        """
        self._batch_stats = self.training and not use_running
        if self._batch_stats:
            y, self._xhat, self._inv_std = F.point_norm(
                x, self.gain.data, self.bias.data, eps=self.eps
            )
            n = x.shape[0]
            m = self.momentum
            rm, rv = self._buffers["running_mean"], self._buffers["running_var"]
            rm *= 1 - m
            rm += m * x.mean(axis=0)
            rv *= 1 - m
            rv += m * x.var(axis=0) * (n / (n - 1))
        else:
            y, self._xhat, self._inv_std = F.point_norm(
                x,
                self.gain.data,
                self.bias.data,
                self._buffers["running_mean"],
                self._buffers["running_var"],
                self.eps,
            )
        return y

    def backward(self, dy: np.ndarray) -> np.ndarray:
        dx, dgain, dbias = F.point_norm_backward(
            dy, self._xhat, self._inv_std, self.gain.data, self._batch_stats
        )
        self.gain.accumulate(dgain)
        self.bias.accumulate(dbias)
        return dx


class SoftmaxNeighbors(Module):
    def forward(self, logits: np.ndarray) -> np.ndarray:
        self._y = F.softmax_over_neighbors(logits)
        return self._y

    def backward(self, dy: np.ndarray) -> np.ndarray:
        return F.softmax_backward(dy, self._y)


class MaxPoolNeighbors(Module):
    def forward(self, features: np.ndarray) -> np.ndarray:
        out, self.argmax = F.max_pool_neighbors(features)
        self._k = features.shape[1]
        return out

    def backward(self, dy: np.ndarray) -> np.ndarray:
        return F.max_pool_backward(dy, self.argmax, self._k)

    def branch_pattern(self) -> Optional[np.ndarray]:
        return getattr(self, "argmax", None)


class GlobalAvgPool(Module):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self._n = x.shape[0]
        return F.global_avg_pool(x)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        return F.global_avg_pool_backward(dy, self._n)
