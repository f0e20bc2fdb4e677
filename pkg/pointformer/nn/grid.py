"""Value grids, learnable parameters and parameter collections."""

from collections import OrderedDict
from typing import Optional, Sequence

import numpy as np

from pointformer.util.errors import InvalidArgument, InvalidInput


class ValueGrid:
    """
    Dense numeric array with an optional same-shape gradient slot.

    Gradients accumulate: `accumulate` adds into the slot, creating it on first use.
    """

    __slots__ = ("data", "grad")

    def __init__(
        self, data: np.ndarray, grad: Optional[np.ndarray] = None, allow_nonfinite: bool = False
    ) -> None:
        data = np.asarray(data)
        if not allow_nonfinite and data.size and not np.all(np.isfinite(data)):
            raise InvalidInput(f"grid of shape {data.shape} holds non-finite values")
        if grad is not None and np.shape(grad) != data.shape:
            raise InvalidArgument(f"grad shape {np.shape(grad)} != data shape {data.shape}")
        self.data = data
        self.grad = grad

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def accumulate(self, g: np.ndarray) -> None:
        if g.shape != self.data.shape:
            raise InvalidArgument(f"gradient shape {g.shape} != {self.data.shape}")
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True)
        else:
            self.grad += g

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad.fill(0)


class Parameter(ValueGrid):
    """A learnable grid with its SGD momentum buffer."""

    __slots__ = ("momentum",)

    def __init__(self, data: np.ndarray) -> None:
        super().__init__(data)
        self.momentum = np.zeros_like(self.data)

    @property
    def value(self) -> np.ndarray:
        return self.data


class LayerParams(OrderedDict):
    """Named parameters (dotted paths) of a layer or a whole network, in build order."""

    def total_size(self) -> int:
        return int(sum(p.data.size for p in self.values()))

    def zero_grad(self) -> None:
        for p in self.values():
            p.zero_grad()

    def snapshot(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict((name, p.data.copy()) for name, p in self.items())


def uniform_init(
    rng: np.random.Generator, shape: Sequence[int], fan_in: int, dtype=np.float32
) -> np.ndarray:
    """Uniform in [-s, s] with s = sqrt(1 / fan_in)."""
    s = np.sqrt(1.0 / max(fan_in, 1))
    return rng.uniform(-s, s, size=tuple(shape)).astype(dtype)
