import numpy as np
import pytest

from bigraphgan import tensor as T
from bigraphgan.errors import DimensionError
from bigraphgan.gradcheck import check_gradients
from bigraphgan.layers import count_parameters, named_parameters, parameters
from bigraphgan.networks import (
    Switches,
    appearance_pair,
    discriminate,
    encode,
    generator_forward,
    init_discriminators,
    init_generator,
    init_patch_discriminator,
    run_stages,
    shape_pair,
)
from bigraphgan.tensor import Tensor

from conftest import uniform


def inputs(rng, b=2, h=16, w=8, dtype=np.float32):
    I_a = Tensor(rng.uniform(-1, 1, (b, 3, h, w)), dtype=dtype)
    P_a = Tensor((rng.random((b, 18, h, w)) > 0.9).astype(float), dtype=dtype)
    P_b = Tensor((rng.random((b, 18, h, w)) > 0.9).astype(float), dtype=dtype)
    return I_a, P_a, P_b


# -- encoders ------------------------------------------------------------------------
def test_shared_shape_encoder_equal_codes(rng):
    gen = init_generator(rng, depth=1, channels=8)
    I_a, P_a, _ = inputs(rng)
    state = encode(I_a, P_a, P_a, gen)
    assert np.array_equal(state.F_pa.data, state.F_pb.data)


def test_encoder_downsamples_by_four(rng):
    gen = init_generator(rng, depth=1, channels=8)
    state = encode(*inputs(rng, h=64, w=32), gen)
    for code in state[:3]:
        assert code.shape == (2, 8, 16, 8)


def test_channel_permutation_changes_code(rng):
    gen = init_generator(rng, depth=1, channels=8)
    I_a, P_a, _ = inputs(rng)
    perm = Tensor(P_a.data[:, ::-1].copy())
    assert not np.allclose(gen.shape_encoder(P_a).data, gen.shape_encoder(perm).data)


def test_exactly_one_shape_encoder(rng):
    gen = init_generator(rng, depth=2, channels=8)
    names = [n for n, _ in named_parameters(gen)]
    assert sum(n.startswith("shape_encoder.") for n in names) == len(parameters(gen.shape_encoder))
    assert not any("pb_encoder" in n for n in names)


def test_shared_encoder_gradient_is_sum_of_paths(rng, f64):
    # one shared encoder gets the sum of the gradients two separate copies would get
    gen = init_generator(rng, depth=1, channels=8)
    I_a, P_a, P_b = inputs(rng, dtype=np.float64)
    enc = gen.shape_encoder
    T.backward(T.add(T.tsum(T.square(enc(P_a))), T.tsum(enc(P_b))))
    shared = [p.grad.copy() for p in parameters(enc)]
    T.zero_grad(parameters(enc))
    T.backward(T.tsum(T.square(enc(P_a))))
    g1 = [p.grad.copy() for p in parameters(enc)]
    T.zero_grad(parameters(enc))
    T.backward(T.tsum(enc(P_b)))
    g2 = [p.grad.copy() for p in parameters(enc)]
    for s, a, b in zip(shared, g1, g2):
        np.testing.assert_allclose(s, a + b, rtol=1e-10, atol=1e-12)


def test_encode_rejects_wrong_channels(rng):
    gen = init_generator(rng, depth=1, channels=8)
    I_a, P_a, P_b = inputs(rng)
    with pytest.raises(DimensionError):
        encode(I_a, Tensor(P_a.data[:, :17]), P_b, gen)


# -- generator -------------------------------------------------------------------------
@pytest.mark.parametrize("use_aif", [True, False])
def test_generator_output_shape(rng, use_aif):
    gen = init_generator(rng, depth=2, channels=8, switches=Switches(use_aif=use_aif))
    I_a, P_a, P_b = inputs(rng)
    out = generator_forward(I_a, P_a, P_b, gen)
    assert out.I_b_prime.shape == I_a.shape
    assert (out.A_i is None) == (not use_aif)


def test_degenerate_stages_leave_pose_codes(rng):
    gen = init_generator(rng, depth=3, channels=8)
    for blk in gen.bgr:
        blk.b2a.phi_back.data[...] = 0
        blk.a2b.phi_back.data[...] = 0
    state0 = encode(*inputs(rng), gen)
    for ia in gen.ia:
        for c in (ia.update1, ia.update2):
            c.weight.data[...] = 0
            c.bias.data[...] = 0
    state = run_stages(state0, gen)
    # with zero updates the first IA stage sets both codes to zero; later stages keep them there
    assert state.t == 3
    one = run_stages(state0, type(gen)(gen.appearance_encoder, gen.shape_encoder, gen.bgr[:1], gen.ia[:1],
                                       gen.aif, gen.switches))
    assert np.array_equal(state.F_pa.data, one.F_pa.data) and np.array_equal(state.F_pb.data, one.F_pb.data)


def test_full_scale_generator_runs():
    rng = np.random.default_rng(0)
    gen = init_generator(rng, depth=9, channels=128, n_nodes=16, d_state=32)
    I_a, P_a, P_b = inputs(rng, b=1, h=128, w=64)
    with T.no_grad():
        out = generator_forward(I_a, P_a, P_b, gen)
    assert out.I_b_prime.shape == (1, 3, 128, 64)
    assert np.all(np.isfinite(out.I_b_prime.data))
    assert gen.depth == 9


def test_generator_gradients_end_to_end(rng, f64):
    gen = init_generator(rng, depth=1, channels=8, n_nodes=3, d_state=4)
    I_a, P_a, P_b = inputs(rng, b=2, h=8, w=4, dtype=np.float64)
    wrt = [I_a] + parameters(gen)
    err = check_gradients(lambda i, a, b: generator_forward(i, a, b, gen).I_b_prime, [I_a, P_a, P_b], wrt=wrt,
                          max_entries=6)
    assert err < 1e-4


# -- discriminators ------------------------------------------------------------------------
def test_score_map_size(rng):
    disc = init_discriminators(rng, 8)
    I, P = Tensor(np.zeros((2, 3, 64, 32))), Tensor(np.zeros((2, 18, 64, 32)))
    s_app = discriminate(appearance_pair(I, I), disc.app)
    s_shape = discriminate(shape_pair(P, I), disc.shape)
    assert disc.app.n_strided == 3
    assert s_app.shape == s_shape.shape == (2, 1, 64 // 2 ** 3, 32 // 2 ** 3)


def test_discriminator_deterministic(rng):
    disc = init_discriminators(rng, 8)
    x = Tensor(rng.normal(size=(2, 6, 16, 8)))
    assert np.array_equal(discriminate(x, disc.app).data, discriminate(x, disc.app).data)


def test_discriminator_channel_check(rng):
    disc = init_discriminators(rng, 8)
    with pytest.raises(DimensionError):
        discriminate(Tensor(np.zeros((1, 5, 16, 8))), disc.app)


@pytest.mark.parametrize("in_ch", [6, 21])
def test_discriminator_gradients(rng, f64, in_ch):
    d = init_patch_discriminator(rng, in_ch, width=4)
    x = uniform(rng, (2, in_ch, 16, 8))
    assert check_gradients(lambda t: discriminate(t, d), [x], wrt=[x] + parameters(d), max_entries=25) < 1e-4


def test_disabled_switches_remove_parameters(rng):
    full = count_parameters(init_generator(np.random.default_rng(0), depth=2, channels=8))
    none = count_parameters(init_generator(np.random.default_rng(0), depth=2, channels=8,
                                           switches=Switches(False, False, False, False)))
    assert none < full
