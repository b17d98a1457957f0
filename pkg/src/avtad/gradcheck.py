"""Central-difference gradient verification for the autodiff core."""

import numpy as np

from .errors import ContractError
from .tensor import backward


def finite_diff_check(fn, tensors, h=1e-6):
    """Compare analytic gradients of a scalar-valued `fn` against central
    differences.

    `fn` must be deterministic and must rebuild its graph from the current
    values of `tensors` on every call. Returns the worst relative error
    max |analytic - numeric| / max(1, |numeric|) over every coordinate of
    every tensor in the list.
    """
    if not (1e-7 <= h <= 1e-3):
        raise ContractError(f"step size h must lie in [1e-7, 1e-3], got {h}")
    tensors = list(tensors)
    if not tensors:
        raise ContractError("finite_diff_check needs at least one tensor")

    base = fn().item()
    if fn().item() != base:
        raise ContractError("fn is not deterministic: two evaluations disagree")

    for t in tensors:
        t.grad = None
    loss = fn()
    backward(loss)

    worst = 0.0
    for t in tensors:
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        flat = t.data.reshape(-1)
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + h
            up = fn().item()
            flat[i] = saved - h
            down = fn().item()
            flat[i] = saved
            numeric = (up - down) / (2.0 * h)
            err = abs(analytic.reshape(-1)[i] - numeric) / max(1.0, abs(numeric))
            if err > worst:
                worst = err
    return worst
