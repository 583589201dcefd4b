"""Finite-difference verification of analytic gradients.

The check runs the supplied loss closure twice per parameter element
(central differences, h = 1e-5 by default) and compares against the
gradients produced by one reverse-mode sweep.  Parameters must be
float64; float32 round-off would drown the comparison.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NumericError, ParameterError
from .tensor import Parameter, Tensor


@dataclass
class GradCheckReport:
    passed: bool
    max_rel_err: float
    tolerance: float
    worst_param: str
    per_param: dict[str, float] = field(default_factory=dict)

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        return (f"gradient check {status}: max rel err {self.max_rel_err:.3e} "
                f"(tol {self.tolerance:.1e}, worst {self.worst_param})")


def _rel_err(a: float, n: float) -> float:
    denom = max(abs(a), abs(n), 1e-8)
    return abs(a - n) / denom


def gradient_check(loss_fn: Callable[[], Tensor],
                   params: list[Parameter],
                   tolerance: float = 1e-4,
                   h: float = 1e-5,
                   max_per_param: int | None = None,
                   sample_seed: int = 0) -> GradCheckReport:
    """Compare analytic gradients of `loss_fn` against central differences.

    `loss_fn` must rebuild the forward graph on every call (the parameter
    values are perturbed in place between calls).  By default every element
    of every parameter is checked; `max_per_param` caps the number of
    elements per parameter (a seeded sample) for large compositions.

    The comparison is only meaningful at a differentiable point: parameters
    sitting exactly on a ReLU/max kink (e.g. all-zero biases feeding dead
    activations) make the two-sided difference disagree with the documented
    subgradient.
    """
    for p in params:
        if p.dtype != np.float64:
            raise ParameterError(f"gradient_check requires float64 parameters ({p.name} is {p.dtype})")

    for p in params:
        p.zero_grad()
    loss = loss_fn()
    if not np.isfinite(loss.data).all():
        raise NumericError("loss is not finite")
    loss.backward()
    analytic = {p.name: p.grad.copy() for p in params}

    sampler = np.random.default_rng(sample_seed)
    per_param: dict[str, float] = {}
    worst = ("", 0.0)
    for p in params:
        flat = p.data.reshape(-1)
        if max_per_param is not None and flat.size > max_per_param:
            indices = sampler.choice(flat.size, size=max_per_param, replace=False)
        else:
            indices = range(flat.size)
        worst_here = 0.0
        for i in indices:
            orig = flat[i]
            flat[i] = orig + h
            lp = float(loss_fn().data)
            flat[i] = orig - h
            lm = float(loss_fn().data)
            flat[i] = orig
            numeric = (lp - lm) / (2.0 * h)
            err = _rel_err(float(analytic[p.name].reshape(-1)[i]), numeric)
            if err > worst_here:
                worst_here = err
        per_param[p.name] = worst_here
        if worst_here > worst[1]:
            worst = (p.name, worst_here)

    return GradCheckReport(
        passed=worst[1] < tolerance,
        max_rel_err=worst[1],
        tolerance=tolerance,
        worst_param=worst[0],
        per_param=per_param,
    )
