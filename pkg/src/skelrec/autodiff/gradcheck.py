"""Central-difference verification of analytic gradients.

The checker perturbs parameter entries one at a time and compares the
numeric slope (f(w+h) - f(w-h)) / 2h against the gradient produced by
``backward``. Everything runs in float64; float32 graphs lose too much
precision for a 1e-3 relative bound.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor

DEFAULT_EPS = 1e-5
DEFAULT_TOLERANCE = 1e-3


@dataclass
class BlockResult:
    name: str
    checked: int
    max_rel_err: float
    worst_index: int
    analytic_at_worst: float
    numeric_at_worst: float


@dataclass
class GradCheckReport:
    tolerance: float
    eps: float
    blocks: list[BlockResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(b.max_rel_err < self.tolerance for b in self.blocks)

    @property
    def max_rel_err(self) -> float:
        return max((b.max_rel_err for b in self.blocks), default=0.0)

    def failures(self) -> list[BlockResult]:
        return [b for b in self.blocks if b.max_rel_err >= self.tolerance]

    def summary(self) -> str:
        lines = [f"gradient check: eps={self.eps:g} tolerance={self.tolerance:g}"]
        for b in self.blocks:
            status = "ok" if b.max_rel_err < self.tolerance else "FAIL"
            lines.append(
                f"  [{status}] {b.name}: max_rel_err={b.max_rel_err:.3e} over {b.checked} entries"
            )
        return "\n".join(lines)


def _rel_err(a: float, n: float) -> float:
    denom = max(abs(a) + abs(n), 1e-8)
    return abs(a - n) / denom


def grad_check(
    forward_fn,
    params: dict[str, Tensor],
    eps: float = DEFAULT_EPS,
    tolerance: float = DEFAULT_TOLERANCE,
    entries_per_block: int | None = None,
    seed: int = 0,
) -> GradCheckReport:
    """Compare analytic and central-difference gradients per parameter block.

    ``forward_fn`` must rebuild the graph from the live ``params`` tensors and
    return a scalar loss, deterministically (no dropout). When a block holds
    more entries than ``entries_per_block``, a seeded subsample is checked;
    subsample indices depend only on ``seed`` and the block name, never on
    timing or dict order.
    """
    for name, p in params.items():
        if p.data.dtype != np.float64:
            raise ValueError(f"grad_check requires float64 parameters; {name!r} is {p.data.dtype}")
        p.grad = None

    loss = forward_fn()
    loss.backward()
    analytic = {}
    for name, p in params.items():
        if p.grad is None:
            raise ValueError(f"backward left no gradient on {name!r}")
        analytic[name] = p.grad.reshape(-1).copy()

    report = GradCheckReport(tolerance=tolerance, eps=eps)
    for name in sorted(params):
        p = params[name]
        flat = p.data.reshape(-1)
        n = flat.size
        if entries_per_block is not None and n > entries_per_block:
            rng = np.random.default_rng(
                np.random.SeedSequence(entropy=seed, spawn_key=tuple(name.encode()))
            )
            indices = rng.choice(n, size=entries_per_block, replace=False)
            indices.sort()
        else:
            indices = np.arange(n)

        worst = BlockResult(name, len(indices), 0.0, -1, 0.0, 0.0)
        for i in indices:
            i = int(i)
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = float(forward_fn().data)
            flat[i] = orig - eps
            f_minus = float(forward_fn().data)
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * eps)
            a = float(analytic[name][i])
            err = _rel_err(a, numeric)
            if err > worst.max_rel_err or worst.worst_index < 0:
                worst.max_rel_err = err
                worst.worst_index = i
                worst.analytic_at_worst = a
                worst.numeric_at_worst = numeric
        report.blocks.append(worst)
    return report
