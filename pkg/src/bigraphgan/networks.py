"""Graph generator and the appearance / shape patch discriminators."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from . import tensor as T
from .errors import ConfigurationError, DimensionError
from .graph_blocks import bgr_forward, init_bgr_block
from .interaction import AIFParams, aif_forward, ia_forward, init_aif, init_ia_block
from .layers import Conv, Norm, conv, count_parameters, named_parameters, norm
from .tensor import Tensor

N_JOINTS = 18


@dataclass
class Encoder:
    """7×7 stem followed by two 4×4 stride-2 downsampling convolutions."""

    stem: Conv
    stem_norm: Norm
    down1: Conv
    down1_norm: Norm
    down2: Conv
    down2_norm: Norm

    def __call__(self, x: Tensor) -> Tensor:
        x = T.relu(self.stem_norm(self.stem(x)))
        x = T.relu(self.down1_norm(self.down1(x)))
        return T.relu(self.down2_norm(self.down2(x)))

    @property
    def in_channels(self) -> int:
        return self.stem.weight.shape[1]


def init_encoder(rng, in_channels: int, channels: int) -> Encoder:
    c1, c2 = max(channels // 4, 1), max(channels // 2, 1)
    return Encoder(
        conv(rng, in_channels, c1, 7, pad=3, bias=False), norm(c1),
        conv(rng, c1, c2, 4, stride=2, pad=1, bias=False), norm(c2),
        conv(rng, c2, channels, 4, stride=2, pad=1, bias=False), norm(channels),
    )


@dataclass
class Switches:
    use_b2a: bool = True
    use_a2b: bool = True
    share_gcn: bool = False
    use_aif: bool = True


@dataclass
class GeneratorParams:
    appearance_encoder: Encoder
    shape_encoder: Encoder
    bgr: list
    ia: list
    aif: AIFParams
    switches: Switches = field(default_factory=Switches, metadata={"skip": True})

    @property
    def depth(self) -> int:
        return len(self.ia)


class GeneratorState(NamedTuple):
    F_i: Tensor
    F_pa: Tensor
    F_pb: Tensor
    t: int = 0


class GeneratorOutput(NamedTuple):
    I_b_prime: Tensor
    I_b_tilde: Tensor
    A_i: Optional[Tensor]


def init_generator(rng: np.random.Generator, *, depth: int = 3, channels: int = 32, n_nodes: int = 16,
                   d_state: int = 32, switches: Optional[Switches] = None,
                   n_nodes_a2b: Optional[int] = None, graph_normalize: bool = True) -> GeneratorParams:
    if depth < 1:
        raise ConfigurationError("generator needs at least one stage")
    sw = switches or Switches()
    app = init_encoder(rng, 3, channels)
    shape = init_encoder(rng, N_JOINTS, channels)
    bgr, ia = [], []
    for _ in range(depth):
        bgr.append(init_bgr_block(rng, channels, n_nodes, d_state, use_b2a=sw.use_b2a, use_a2b=sw.use_a2b,
                                  share_gcn=sw.share_gcn, n_nodes_a2b=n_nodes_a2b,
                                  normalize=graph_normalize))
        ia.append(init_ia_block(rng, channels))
    aif = init_aif(rng, channels, n_up=2, use_attention=sw.use_aif)
    return GeneratorParams(app, shape, bgr, ia, aif, sw)


def encode(I_a: Tensor, P_a: Tensor, P_b: Tensor, params: GeneratorParams) -> GeneratorState:
    if I_a.ndim != 4 or I_a.shape[1] != 3:
        raise DimensionError(f"source image must be b×3×h×w, got {I_a.shape}")
    for name, p in (("P_a", P_a), ("P_b", P_b)):
        if p.ndim != 4 or p.shape[1] != N_JOINTS:
            raise DimensionError(f"{name} must be b×{N_JOINTS}×h×w, got {p.shape}")
    F_i = params.appearance_encoder(I_a)
    F_pa = params.shape_encoder(P_a)
    F_pb = params.shape_encoder(P_b)
    return GeneratorState(F_i, F_pa, F_pb, 0)


def run_stages(state: GeneratorState, params: GeneratorParams) -> GeneratorState:
    F_i, F_pa, F_pb = state.F_i, state.F_pa, state.F_pb
    for bgr, ia in zip(params.bgr, params.ia):
        F_pa, F_pb = bgr_forward(F_pa, F_pb, bgr)
        F_i, F_pa, F_pb = ia_forward(F_i, F_pa, F_pb, ia)
    return GeneratorState(F_i, F_pa, F_pb, params.depth)


def generator_forward(I_a: Tensor, P_a: Tensor, P_b: Tensor, params: GeneratorParams) -> GeneratorOutput:
    state = run_stages(encode(I_a, P_a, P_b, params), params)
    return GeneratorOutput(*aif_forward(state.F_i, I_a, params.aif))


@dataclass
class PatchDiscriminator:
    """Three stride-2 4×4 convolutions and a 3×3 scoring head."""

    convs: list
    norms: list

    def __call__(self, x: Tensor) -> Tensor:
        n = len(self.convs)
        for i, (c, nrm) in enumerate(zip(self.convs, self.norms)):
            x = c(x)
            if i == n - 1:
                break
            if nrm is not None:
                x = nrm(x)
            x = T.leaky_relu(x, 0.2)
        return x

    @property
    def in_channels(self) -> int:
        return self.convs[0].weight.shape[1]

    @property
    def n_strided(self) -> int:
        return sum(1 for c in self.convs if c.stride == 2)


def init_patch_discriminator(rng, in_channels: int, width: int = 16) -> PatchDiscriminator:
    w = width
    convs = [
        conv(rng, in_channels, w, 4, stride=2, pad=1),
        conv(rng, w, 2 * w, 4, stride=2, pad=1, bias=False),
        conv(rng, 2 * w, 4 * w, 4, stride=2, pad=1, bias=False),
        conv(rng, 4 * w, 1, 3, stride=1, pad=1),
    ]
    norms = [None, norm(2 * w), norm(4 * w), None]
    return PatchDiscriminator(convs, norms)


@dataclass
class DiscriminatorParams:
    app: PatchDiscriminator
    shape: PatchDiscriminator


def init_discriminators(rng, width: int = 16) -> DiscriminatorParams:
    return DiscriminatorParams(
        app=init_patch_discriminator(rng, 6, width),
        shape=init_patch_discriminator(rng, N_JOINTS + 3, width),
    )


def discriminate(pair: Tensor, params: PatchDiscriminator) -> Tensor:
    if pair.ndim != 4 or pair.shape[1] != params.in_channels:
        raise DimensionError(f"discriminator expects {params.in_channels} input channels, got {pair.shape}")
    return params(pair)


def appearance_pair(I_a: Tensor, image: Tensor) -> Tensor:
    return T.concat([I_a, image], axis=1)


def shape_pair(P_b: Tensor, image: Tensor) -> Tensor:
    return T.concat([P_b, image], axis=1)


def generator_parameter_names(params: GeneratorParams) -> list:
    return [n for n, _ in named_parameters(params, "gen")]


def generator_parameter_count(params: GeneratorParams) -> int:
    return count_parameters(params)
