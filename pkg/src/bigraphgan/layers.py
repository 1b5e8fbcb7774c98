"""Parameter containers and initializers shared by the network modules."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from . import tensor as T
from .tensor import Tensor


@dataclass
class Conv:
    weight: Tensor
    bias: Optional[Tensor] = None
    stride: int = 1
    pad: int = 0
    transposed: bool = False

    def __call__(self, x: Tensor) -> Tensor:
        if self.transposed:
            return T.conv_transpose2d(x, self.weight, self.bias, self.stride, self.pad)
        return T.conv2d(x, self.weight, self.bias, self.stride, self.pad)


@dataclass
class Norm:
    gamma: Tensor
    beta: Tensor

    def __call__(self, x: Tensor) -> Tensor:
        return T.instance_norm(x, self.gamma, self.beta)


def uniform_fan_in(rng: np.random.Generator, shape: tuple, fan_in: int, trainable: bool = True) -> Tensor:
    bound = 1.0 / np.sqrt(fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=trainable)


def conv(rng, cin: int, cout: int, k: int, stride: int = 1, pad: int = 0,
         bias: bool = True, transposed: bool = False, trainable: bool = True) -> Conv:
    shape = (cin, cout, k, k) if transposed else (cout, cin, k, k)
    fan_in = cin * k * k
    w = uniform_fan_in(rng, shape, fan_in, trainable)
    b = uniform_fan_in(rng, (cout,), fan_in, trainable) if bias else None
    return Conv(w, b, stride, pad, transposed)


def norm(channels: int) -> Norm:
    return Norm(Tensor(np.ones(channels), requires_grad=True), Tensor(np.zeros(channels), requires_grad=True))


def named_parameters(obj, prefix: str = "") -> Iterator[tuple]:
    """Yield ``(dotted_name, tensor)`` for every tensor reachable from ``obj``.

    A tensor referenced from several places (tied weights) is reported once,
    under the first name encountered.
    """
    seen = set()
    for name, t in _walk(obj, prefix):
        if id(t) not in seen:
            seen.add(id(t))
            yield name, t


def _walk(obj, prefix):
    if isinstance(obj, Tensor):
        yield prefix, obj
    elif dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        for f in dataclasses.fields(obj):
            if f.metadata.get("skip"):
                continue
            yield from _walk(getattr(obj, f.name), _join(prefix, f.name))
    elif isinstance(obj, (list, tuple)):
        for i, item in enumerate(obj):
            yield from _walk(item, _join(prefix, str(i)))
    elif isinstance(obj, dict):
        for k, item in obj.items():
            yield from _walk(item, _join(prefix, str(k)))


def _join(prefix, name):
    return f"{prefix}.{name}" if prefix else name


def parameters(obj) -> list:
    return [t for _, t in named_parameters(obj) if t.requires_grad]


def count_parameters(obj) -> int:
    return sum(t.size for _, t in named_parameters(obj))
