"""Pose-to-appearance interaction blocks and the attention-based fusion head."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import tensor as T
from .errors import ConfigurationError, ContractError, DimensionError
from .layers import Conv, conv, norm
from .tensor import Tensor


@dataclass
class IABlockParams:
    attn1: Conv  # 2C -> C
    attn2: Conv  # C -> C, followed by sigmoid
    update1: Conv  # 3C -> 2C
    update2: Conv  # 2C -> 2C, split into two C-channel codes

    @property
    def channels(self) -> int:
        return self.attn2.weight.shape[0]


def init_ia_block(rng: np.random.Generator, channels: int) -> IABlockParams:
    c = channels
    return IABlockParams(
        attn1=conv(rng, 2 * c, c, 3, pad=1),
        attn2=conv(rng, c, c, 3, pad=1),
        update1=conv(rng, 3 * c, 2 * c, 3, pad=1),
        update2=conv(rng, 2 * c, 2 * c, 3, pad=1),
    )


def pose_attention(F_pa: Tensor, F_pb: Tensor, params: IABlockParams) -> Tensor:
    if F_pa.shape != F_pb.shape:
        raise DimensionError(f"shape codes differ: {F_pa.shape} vs {F_pb.shape}")
    if 2 * F_pa.shape[1] != params.attn1.weight.shape[1]:
        raise DimensionError(
            f"pose attention expects {params.attn1.weight.shape[1] // 2}-channel codes, got {F_pa.shape[1]}"
        )
    h = T.relu(params.attn1(T.concat([F_pa, F_pb], axis=1)))
    return T.sigmoid(params.attn2(h))


def enhance_appearance(F_i: Tensor, A_p: Tensor) -> Tensor:
    if F_i.shape != A_p.shape:
        raise DimensionError(f"appearance code {F_i.shape} and attention {A_p.shape} differ")
    return T.add(T.mul(A_p, F_i), F_i)


def update_shape_codes(F_i_new: Tensor, F_pa: Tensor, F_pb: Tensor, params: IABlockParams):
    if params.update2.weight.shape[0] % 2:
        raise ConfigurationError("shape-code update must produce an even channel count")
    if not (F_i_new.shape == F_pa.shape == F_pb.shape):
        raise DimensionError(f"codes differ in shape: {F_i_new.shape}, {F_pa.shape}, {F_pb.shape}")
    h = T.relu(params.update1(T.concat([F_i_new, F_pa, F_pb], axis=1)))
    out = params.update2(h)
    new_pa, new_pb = T.split(out, 2, axis=1)
    return new_pa, new_pb


def ia_forward(F_i: Tensor, F_pa_tilde: Tensor, F_pb_tilde: Tensor, params: IABlockParams):
    """Return ``(F_i_next, F_pa_next, F_pb_next)``."""
    A_p = pose_attention(F_pa_tilde, F_pb_tilde, params)
    F_i_next = enhance_appearance(F_i, A_p)
    F_pa_next, F_pb_next = update_shape_codes(F_i_next, F_pa_tilde, F_pb_tilde, params)
    return F_i_next, F_pa_next, F_pb_next


@dataclass
class Decoder:
    """Stride-2 transposed convolutions back to image resolution."""

    ups: list
    norms: list
    head: Conv
    activation: str  # "tanh" or "sigmoid"

    def __call__(self, x: Tensor) -> Tensor:
        for up, nrm in zip(self.ups, self.norms):
            x = T.relu(nrm(up(x)))
        x = self.head(x)
        return T.tanh(x) if self.activation == "tanh" else T.sigmoid(x)


def init_decoder(rng, channels: int, out_channels: int, n_up: int, activation: str) -> Decoder:
    ups, norms = [], []
    c = channels
    for _ in range(n_up):
        nxt = max(c // 2, 1)
        ups.append(conv(rng, c, nxt, 4, stride=2, pad=1, bias=False, transposed=True))
        norms.append(norm(nxt))
        c = nxt
    head = conv(rng, c, out_channels, 7, stride=1, pad=3, transposed=True)
    return Decoder(ups, norms, head, activation)


@dataclass
class AIFParams:
    image_decoder: Decoder
    attention_decoder: Optional[Decoder]


def init_aif(rng, channels: int, n_up: int = 2, use_attention: bool = True) -> AIFParams:
    image = init_decoder(rng, channels, 3, n_up, "tanh")
    attention = init_decoder(rng, channels, 1, n_up, "sigmoid") if use_attention else None
    return AIFParams(image, attention)


def attention_fuse(I_a: Tensor, I_b_tilde: Tensor, A_i: Tensor, check_range: bool = True) -> Tensor:
    """I_a ⊙ A_i + Ĩ_b ⊙ (1 − A_i) with a single-channel mask broadcast over colour."""
    if I_a.shape != I_b_tilde.shape:
        raise DimensionError(f"images differ in shape: {I_a.shape} vs {I_b_tilde.shape}")
    if A_i.ndim != 4 or A_i.shape[1] != 1 or A_i.shape[2:] != I_a.shape[2:] or A_i.shape[0] != I_a.shape[0]:
        raise DimensionError(f"mask {A_i.shape} is not a single-channel map for images {I_a.shape}")
    if check_range and (np.any(A_i.data < 0) or np.any(A_i.data > 1)):
        raise ContractError("attention mask values must lie in [0, 1]")
    return T.add(T.mul(I_a, A_i), T.mul(I_b_tilde, T.sub(1.0, A_i)))


def aif_forward(F_T: Tensor, I_a: Tensor, params: AIFParams):
    """Decode the final appearance code; return ``(I_b_prime, I_b_tilde, A_i)``.

    Without an attention decoder the intermediate image is the output and
    ``A_i`` is ``None``.
    """
    I_b_tilde = params.image_decoder(F_T)
    if I_b_tilde.shape != I_a.shape:
        raise DimensionError(f"decoded image {I_b_tilde.shape} does not match input image {I_a.shape}")
    if params.attention_decoder is None:
        return I_b_tilde, I_b_tilde, None
    A_i = params.attention_decoder(F_T)
    return attention_fuse(I_a, I_b_tilde, A_i), I_b_tilde, A_i
