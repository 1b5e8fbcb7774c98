import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bigraphgan import tensor as T
from bigraphgan.errors import ConfigurationError, ContractError, DimensionError, TrainingAbort
from bigraphgan.gradcheck import check_gradients
from bigraphgan.objectives import (
    LossWeights,
    adversarial_loss,
    build_extractor,
    full_objective,
    l1_loss,
    perceptual_loss,
)
from bigraphgan.tensor import Tensor

from conftest import uniform


# -- adversarial ------------------------------------------------------------------------
def test_zero_scores_give_ln2():
    z = Tensor(np.zeros((2, 1, 8, 4)), dtype=np.float64)
    assert abs(adversarial_loss(z, z, "discriminator").item() - math.log(2)) < 1e-15
    assert abs(adversarial_loss(None, z, "generator").item() - math.log(2)) < 1e-15


def test_perfect_separation_limit():
    real = Tensor(np.full((1, 1, 4, 2), 50.0), dtype=np.float64)
    fake = Tensor(np.full((1, 1, 4, 2), -50.0), dtype=np.float64)
    assert adversarial_loss(real, fake, "discriminator").item() < 1e-20
    assert adversarial_loss(None, real, "generator").item() < 1e-20


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_discriminator_loss_swap_symmetry(seed):
    # exchanging which map is "real" and which is "fake" (each logit read with
    # the opposite sign, as the label flip implies) leaves the loss unchanged
    rng = np.random.default_rng(seed)
    r, f = rng.normal(0, 3, (2, 1, 4, 2)), rng.normal(0, 3, (2, 1, 4, 2))
    a = adversarial_loss(Tensor(r, dtype=np.float64), Tensor(f, dtype=np.float64), "discriminator").item()
    b = adversarial_loss(Tensor(-f, dtype=np.float64), Tensor(-r, dtype=np.float64), "discriminator").item()
    assert abs(a - b) < 1e-14


def test_adversarial_errors():
    z = Tensor(np.zeros((1, 1, 2, 2)))
    with pytest.raises(ContractError):
        adversarial_loss(z, Tensor(np.zeros((0,))), "discriminator")
    with pytest.raises(ValueError):
        adversarial_loss(z, z, "both")


def test_adversarial_gradients(rng, f64):
    r, f = uniform(rng, (2, 1, 4, 2)), uniform(rng, (2, 1, 4, 2))
    assert check_gradients(lambda a, b: adversarial_loss(a, b, "discriminator"), [r, f]) < 1e-4
    assert check_gradients(lambda b: adversarial_loss(None, b, "generator"), [f]) < 1e-4


# -- L1 ----------------------------------------------------------------------------------
def test_l1_cases(rng):
    x = rng.uniform(-1, 1, (2, 3, 8, 4))
    assert l1_loss(Tensor(x), Tensor(x)).item() == 0.0
    with T.precision("float64"):
        assert abs(l1_loss(Tensor(x + 0.25), Tensor(x)).item() - 0.25) < 1e-12


def test_l1_matches_loop(rng):
    x, y = rng.normal(size=(2, 3, 4, 2)), rng.normal(size=(2, 3, 4, 2))
    total = 0.0
    for idx in np.ndindex(x.shape):
        total += abs(x[idx] - y[idx])
    with T.precision("float64"):
        assert abs(l1_loss(Tensor(x), Tensor(y)).item() - total / x.size) < 1e-12


def test_l1_shape_mismatch():
    with pytest.raises(DimensionError):
        l1_loss(Tensor(np.zeros((1, 3, 2, 2))), Tensor(np.zeros((1, 3, 2, 3))))


def test_l1_gradients(rng, f64):
    x, y = uniform(rng, (2, 3, 6, 4)), uniform(rng, (2, 3, 6, 4))
    assert check_gradients(l1_loss, [x, y]) < 1e-4


# -- perceptual ------------------------------------------------------------------------------
def test_perceptual_identical_zero_and_nonnegative(rng):
    ext = build_extractor(1234)
    x = Tensor(rng.uniform(-1, 1, (2, 3, 16, 8)))
    y = Tensor(rng.uniform(-1, 1, (2, 3, 16, 8)))
    assert perceptual_loss(x, x, ext).item() == 0.0
    assert perceptual_loss(x, y, ext).item() >= 0.0


def test_perceptual_reproducible_from_seed(rng):
    x = Tensor(rng.uniform(-1, 1, (2, 3, 16, 8)))
    y = Tensor(rng.uniform(-1, 1, (2, 3, 16, 8)))
    a = perceptual_loss(x, y, build_extractor(7)).item()
    b = perceptual_loss(x, y, build_extractor(7)).item()
    c = perceptual_loss(x, y, build_extractor(8)).item()
    assert a == b and a != c


def test_extractor_is_frozen():
    ext = build_extractor(0)
    for c in (ext.conv1, ext.conv2):
        assert not c.weight.requires_grad and not c.bias.requires_grad


def test_perceptual_gradients(rng, f64):
    ext = build_extractor(3, width=4, dtype=np.float64)
    x, y = uniform(rng, (2, 3, 6, 4)), uniform(rng, (2, 3, 6, 4))
    assert check_gradients(lambda a, b: perceptual_loss(a, b, ext), [x, y]) < 1e-4


# -- weighted sum ---------------------------------------------------------------------------
def test_full_objective_unit_components():
    assert full_objective({"gan": 1.0, "l1": 1.0, "per": 1.0}, LossWeights()) == 25.0


def test_full_objective_zero_weights():
    assert full_objective({"gan": 3.0, "l1": 2.0, "per": 1.0}, LossWeights(0, 0, 0)) == 0.0


@given(st.floats(0, 10), st.floats(0, 10), st.floats(0, 10), st.floats(-5, 5))
def test_full_objective_linear(g, l, p, delta):
    w = LossWeights()
    base = full_objective({"gan": g, "l1": l, "per": p}, w)
    moved = full_objective({"gan": g, "l1": l + delta, "per": p}, w)
    assert abs((moved - base) - w.lambda_l1 * delta) < 1e-9


def test_full_objective_nan_aborts():
    with pytest.raises(TrainingAbort) as info:
        full_objective({"gan": 1.0, "l1": float("nan"), "per": 1.0}, LossWeights())
    assert info.value.component == "l1"


def test_negative_weight_rejected():
    with pytest.raises(ConfigurationError):
        LossWeights(-1.0, 10, 10)


def test_full_objective_tensor_gradient(f64):
    a, b, c = (Tensor(np.array(v), requires_grad=True) for v in (0.3, 0.2, 0.1))
    loss = full_objective({"gan": a, "l1": b, "per": c}, LossWeights())
    T.backward(loss)
    assert (a.grad, b.grad, c.grad) == (5.0, 10.0, 10.0)
