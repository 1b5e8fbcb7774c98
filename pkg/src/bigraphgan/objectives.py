"""Adversarial, pixel L1 and feature-space L1 losses and their weighted sum."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import tensor as T
from .errors import ConfigurationError, ContractError, DimensionError, TrainingAbort
from .layers import Conv, conv
from .tensor import Tensor


@dataclass
class LossWeights:
    lambda_gan: float = 5.0
    lambda_l1: float = 10.0
    lambda_per: float = 10.0

    def __post_init__(self):
        for name in ("lambda_gan", "lambda_l1", "lambda_per"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be nonnegative")


def adversarial_loss(real_scores, fake_scores, side: str) -> Tensor:
    """Non-saturating binary cross-entropy on patch logits.

    ``side="generator"`` scores the fakes against the real label and ignores
    ``real_scores``; ``side="discriminator"`` averages the real and fake terms.
    """
    if fake_scores is None or fake_scores.size == 0:
        raise ContractError("empty fake score map")
    if side == "generator":
        return T.mean(T.softplus(T.mul(fake_scores, -1.0)))
    if side == "discriminator":
        if real_scores is None or real_scores.size == 0:
            raise ContractError("empty real score map")
        real_term = T.mean(T.softplus(T.mul(real_scores, -1.0)))
        fake_term = T.mean(T.softplus(fake_scores))
        return T.mul(T.add(real_term, fake_term), 0.5)
    raise ValueError(f"side must be 'generator' or 'discriminator', got {side!r}")


def l1_loss(I_b_prime: Tensor, I_b: Tensor) -> Tensor:
    if I_b_prime.shape != I_b.shape:
        raise DimensionError(f"l1_loss: shapes {I_b_prime.shape} and {I_b.shape} differ")
    return T.mean(T.absolute(T.sub(I_b_prime, I_b)))


@dataclass
class PerceptualExtractor:
    """Frozen two-layer conv+ReLU feature stack with seeded random weights."""

    conv1: Conv
    conv2: Conv
    seed: int = 0

    def __call__(self, x: Tensor) -> Tensor:
        return T.relu(self.conv2(T.relu(self.conv1(x))))


def build_extractor(seed: int, width: int = 16, dtype=None) -> PerceptualExtractor:
    rng = np.random.default_rng(seed)
    with T.precision(dtype or T.get_default_dtype()):
        c1 = conv(rng, 3, width, 3, pad=1, trainable=False)
        c2 = conv(rng, width, width, 3, pad=1, trainable=False)
    return PerceptualExtractor(c1, c2, seed)


def perceptual_loss(I_b_prime: Tensor, I_b: Tensor, extractor: PerceptualExtractor) -> Tensor:
    if I_b_prime.shape != I_b.shape:
        raise DimensionError(f"perceptual_loss: shapes {I_b_prime.shape} and {I_b.shape} differ")
    return T.mean(T.absolute(T.sub(extractor(I_b_prime), extractor(I_b))))


def full_objective(components: Mapping[str, object], weights: LossWeights):
    """λ_gan·L_gan + λ_l1·L_l1 + λ_per·L_per.

    Components may be tensors or plain floats; a non-finite component raises
    :class:`TrainingAbort` naming it.
    """
    terms = (("gan", weights.lambda_gan), ("l1", weights.lambda_l1), ("per", weights.lambda_per))
    total = None
    for name, lam in terms:
        value = components[name]
        scalar = value.item() if isinstance(value, Tensor) else float(value)
        if not math.isfinite(scalar):
            raise TrainingAbort(f"loss component {name!r} is not finite ({scalar})", component=name)
        term = value * lam
        total = term if total is None else total + term
    return total
