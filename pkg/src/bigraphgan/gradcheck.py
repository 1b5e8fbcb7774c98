"""Central finite-difference gradient checks for the autodiff engine.

The scalar being differentiated is ``sum(f(inputs) * R)`` for a fixed random
projection ``R``, so a vector-valued function is checked along a generic
direction rather than through one output at a time.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from . import tensor as T
from .tensor import Tensor


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> float:
    """max |a - n| / max(max |n|, floor): error scaled by the gradient's largest entry."""
    scale = max(float(np.max(np.abs(numeric), initial=0.0)), floor)
    return float(np.max(np.abs(analytic - numeric), initial=0.0)) / scale


def _scalar(fn, inputs, proj):
    out = fn(*inputs)
    out = out if isinstance(out, (tuple, list)) else (out,)
    total = 0.0
    for o, r in zip(out, proj):
        total += float(np.sum(o.data * r))
    return total


def check_gradients(fn: Callable, inputs: Sequence[Tensor], eps: float = 1e-5, seed: int = 0,
                    max_entries: Optional[int] = None, wrt: Optional[Sequence[Tensor]] = None) -> float:
    """Largest relative error over every tensor in ``wrt`` (default: ``inputs``).

    Must be called inside ``precision("float64")``. With ``max_entries`` only a
    random subset of coordinates per tensor is perturbed.
    """
    rng = np.random.default_rng(seed)
    wrt = list(inputs if wrt is None else wrt)
    for t in wrt:
        t.grad = None
        t.requires_grad = True
    out = fn(*inputs)
    outs = out if isinstance(out, (tuple, list)) else (out,)
    proj = [rng.uniform(-1.0, 1.0, o.shape) for o in outs]
    loss = None
    for o, r in zip(outs, proj):
        term = T.tsum(T.mul(o, Tensor(r)))
        loss = term if loss is None else T.add(loss, term)
    T.backward(loss)
    worst = 0.0
    for t in wrt:
        analytic = np.zeros_like(t.data) if t.grad is None else t.grad.copy()
        flat = t.data.reshape(-1)
        idx = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            idx = rng.choice(flat.size, max_entries, replace=False)
        numeric = np.empty(len(idx))
        with T.no_grad():
            for k, i in enumerate(idx):
                orig = flat[i]
                flat[i] = orig + eps
                up = _scalar(fn, inputs, proj)
                flat[i] = orig - eps
                down = _scalar(fn, inputs, proj)
                flat[i] = orig
                numeric[k] = (up - down) / (2 * eps)
        worst = max(worst, relative_error(analytic.reshape(-1)[idx], numeric))
    return worst
