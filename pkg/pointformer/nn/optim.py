"""SGD with momentum, L2 weight decay and a step learning-rate schedule."""

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

from pointformer.nn.grid import LayerParams
from pointformer.util.errors import InvalidArgument, InvalidState

DEFAULT_MOMENTUM = 0.9
DEFAULT_WEIGHT_DECAY = 1e-4


@dataclass
class OptimizerState:
    """
    learning_rate is the base rate; schedule entries (step, multiplier) scale it from
    that step on, cumulatively.
    """

    learning_rate: float
    momentum: float = DEFAULT_MOMENTUM
    weight_decay: float = DEFAULT_WEIGHT_DECAY
    step_count: int = 0
    schedule: List[Tuple[int, float]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.learning_rate < 0:
            raise InvalidArgument(f"learning_rate must be >= 0, got {self.learning_rate}")
        if not 0 <= self.momentum < 1:
            raise InvalidArgument(f"momentum must be in [0, 1), got {self.momentum}")
        if self.weight_decay < 0:
            raise InvalidArgument(f"weight_decay must be >= 0, got {self.weight_decay}")
        self.schedule = sorted((int(s), float(m)) for s, m in self.schedule)

    def current_lr(self) -> float:
        lr = self.learning_rate
        for step, multiplier in self.schedule:
            if self.step_count >= step:
                lr *= multiplier
        return lr


def step_schedule(
    iterations: int, milestones: Sequence[float] = (0.6, 0.8), gamma: float = 0.1
) -> List[Tuple[int, float]]:
    """Multiply the rate by gamma at each milestone fraction of the run (24K/32K of 40K)."""
    return [(int(round(f * iterations)), gamma) for f in milestones]


def sgd_step(params: LayerParams, state: OptimizerState) -> LayerParams:
    """
    v <- momentum * v + (grad + weight_decay * value); value <- value - lr * v.
    Gradients are zeroed afterwards and the step counter advances.
    """
    missing = [name for name, p in params.items() if p.grad is None]
    if missing:
        raise InvalidState(f"no gradient for {len(missing)} parameter(s), e.g. {missing[0]}")
    lr = state.current_lr()
    for p in params.values():
        g = p.grad
        if state.weight_decay:
            g = g + state.weight_decay * p.data
        p.momentum *= state.momentum
        p.momentum += g
        p.data -= lr * p.momentum
        p.grad.fill(0)
    state.step_count += 1
    return params
