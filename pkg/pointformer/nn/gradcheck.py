"""
Finite-difference verification of analytic backward passes.

The checked scalar is L = sum(R * f(inputs)) for a fixed random projection R. For every
differentiable input and every parameter tensor, central-difference directional
derivatives (L(v + h*u) - L(v - h*u)) / 2h are compared with <grad, u>. Small tensors are
probed along every coordinate axis, larger ones along random Gaussian directions.

A probe whose +h or -h evaluation flips any ReLU sign or max-pool argmax straddles a kink
and says nothing about the derivative; it is skipped, and a random direction is redrawn.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from pointformer.util.errors import InvalidInput, InvalidState

logger = logging.getLogger(__name__)

DEFAULT_STEP = 1e-5
DEFAULT_TOL = 1e-4
# Floor for the error denominator; derivatives below it are compared absolutely.
ABS_FLOOR = 1e-5
REDRAWS = 8


@dataclass
class GradCheckReport:
    component: str
    variant: str
    tol: float
    errors: Dict[str, float] = field(default_factory=dict)
    skipped: int = 0

    @property
    def max_error(self) -> float:
        return max(self.errors.values()) if self.errors else 0.0

    @property
    def passed(self) -> bool:
        return all(np.isfinite(e) and e <= self.tol for e in self.errors.values())

    def worst(self) -> Tuple[str, float]:
        if not self.errors:
            return "", 0.0
        name = max(self.errors, key=self.errors.get)
        return name, self.errors[name]


def branch_patterns(module) -> List[np.ndarray]:
    """Kink sides taken by every ReLU and max-pool under `module` in its last forward."""
    modules = getattr(module, "modules", None)
    if modules is None:
        return []
    patterns = (m.branch_pattern() for m in modules())
    return [p.copy() for p in patterns if p is not None]


def same_branches(a: List[np.ndarray], b: List[np.ndarray]) -> bool:
    return len(a) == len(b) and all(
        x.shape == y.shape and np.array_equal(x, y) for x, y in zip(a, b)
    )


def grad_check(
    module,
    inputs: Sequence[np.ndarray],
    wrt: Sequence[int] = (0,),
    h: float = DEFAULT_STEP,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
    probes: int = 3,
    full_limit: int = 24,
    component: str = "",
    variant: str = "",
) -> GradCheckReport:
    """
    Check module.backward against central differences.

    `module` needs forward(*inputs) -> array (or tuple whose first item is the output),
    backward(dout) -> gradient(s) of the inputs listed in `wrt`, and named_parameters().
    Everything must be float64.
    """
    params = list(module.named_parameters())
    for name, p in params:
        if p.data.dtype != np.float64:
            raise InvalidState(
                f"gradient checks need float64 parameters ({name} is {p.data.dtype})"
            )
    for i in wrt:
        if inputs[i].dtype != np.float64:
            raise InvalidState(f"gradient checks need float64 inputs (input{i})")

    # running statistics are reset before every evaluation
    buffers = [(name, b.copy()) for name, b in getattr(module, "named_buffers", list)()]

    def run():
        for name, b in buffers:
            module.set_buffer(name, b)
        return _output(module.forward(*inputs))

    rng = np.random.default_rng(seed)
    out = run()
    again = run()
    if out.shape != again.shape or not np.array_equal(out, again):
        raise InvalidInput("function is not deterministic: two identical calls differ")
    base = branch_patterns(module)
    proj = np.asarray(rng.standard_normal(np.shape(out)))

    def loss() -> Tuple[float, bool]:
        value = float(np.sum(proj * run()))
        return value, same_branches(base, branch_patterns(module))

    module.clear_grads()
    run()
    in_grads = module.backward(proj.copy())
    if not isinstance(in_grads, tuple):
        in_grads = (in_grads,)

    report = GradCheckReport(component, variant, tol)
    targets: List[Tuple[str, np.ndarray, Optional[np.ndarray]]] = []
    for slot, i in enumerate(wrt):
        targets.append((f"input{i}", inputs[i], in_grads[slot]))
    for name, p in params:
        targets.append((name, p.data, p.grad))

    for name, value, grad in targets:
        if grad is None:
            grad = np.zeros_like(value)
        error, skipped = _check_tensor(value, grad, loss, h, rng, probes, full_limit)
        report.errors[name] = error
        report.skipped += skipped
    if report.skipped:
        logger.debug(f"{component} [{variant}]: {report.skipped} probe(s) crossed a kink")
    if not report.passed:
        worst, err = report.worst()
        logger.warning(f"{component} [{variant}] failed: {worst} rel. error {err:.3g} > {tol}")
    return report


def _output(result):
    return result[0] if isinstance(result, tuple) else result


def _directions(shape, rng, probes: int, full_limit: int):
    size = int(np.prod(shape)) if shape else 1
    if size <= full_limit:
        for j in range(size):
            u = np.zeros(size)
            u[j] = 1.0
            yield u.reshape(shape)
    else:
        for _ in range(probes * REDRAWS):
            yield rng.standard_normal(shape)


def _check_tensor(
    value: np.ndarray,
    grad: np.ndarray,
    loss: Callable[[], Tuple[float, bool]],
    h,
    rng,
    probes,
    full_limit,
) -> Tuple[float, int]:
    """Worst relative error over the smooth probes, and how many probes were skipped."""
    worst, skipped, checked = 0.0, 0, 0
    saved = value.copy()
    random_probes = value.size > full_limit
    for u in _directions(value.shape, rng, probes, full_limit):
        value[...] = saved + h * u
        plus, plus_smooth = loss()
        value[...] = saved - h * u
        minus, minus_smooth = loss()
        value[...] = saved
        if not (plus_smooth and minus_smooth):
            skipped += 1
            continue
        numeric = (plus - minus) / (2 * h)
        analytic = float(np.sum(grad * u))
        denom = max(abs(numeric), abs(analytic), ABS_FLOOR)
        worst = max(worst, abs(numeric - analytic) / denom)
        checked += 1
        if random_probes and checked == probes:
            break
    return worst, skipped


def away_from_kinks(
    x: np.ndarray, rng: np.random.Generator, h: float = DEFAULT_STEP
) -> np.ndarray:
    """Resample entries with |x| < 10h so a probe of size h never crosses the ReLU kink."""
    x = x.copy()
    close = np.abs(x) < 10 * h
    while close.any():
        x[close] = rng.standard_normal(int(close.sum()))
        close = np.abs(x) < 10 * h
    return x
