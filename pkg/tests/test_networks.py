import numpy as np
import pytest
import torch
from hypothesis import given, settings, strategies as st

from platerec.adversary import Discriminator, DiscriminatorConfig, discriminate
from platerec.errors import NumericError, ShapeError
from platerec.losses import loss_3d, loss_adv_discriminator
from platerec.reconstructor import (
    DecoderBlock,
    RecNet,
    RecNetConfig,
    count_parameters,
    full_config,
    reconstruct,
    reduced_config,
)

import gradcheck


@pytest.fixture(scope="module")
def recnet():
    torch.manual_seed(0)
    return RecNet(full_config())


def test_output_shape_full(recnet):
    img = np.random.default_rng(0).integers(0, 256, (224, 224, 3), dtype=np.uint8)
    out = reconstruct(recnet, img)
    assert out.points.shape == (73, 73, 3)
    assert np.isfinite(out.points).all()


def test_output_shape_reduced():
    torch.manual_seed(0)
    net = RecNet(reduced_config())
    assert net.config.latent_shape == (11, 11, 256)
    assert net(torch.rand(2, 3, 224, 224)).shape == (2, 31, 31, 3)


def test_latent_full():
    assert full_config().latent_shape[:2] == (7, 7)


def test_reconstruct_deterministic(recnet):
    img = np.random.default_rng(1).integers(0, 256, (224, 224, 3), dtype=np.uint8)
    np.testing.assert_array_equal(reconstruct(recnet, img).points, reconstruct(recnet, img).points)


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 255), st.integers(0, 2**31 - 1))
def test_output_shape_any_content(recnet, level, seed):
    rng = np.random.default_rng(seed)
    img = np.clip(rng.normal(level, 40, (224, 224, 3)), 0, 255).astype(np.uint8)
    assert reconstruct(recnet, img).points.shape == (73, 73, 3)


def test_wrong_input_shape(recnet):
    with pytest.raises(ShapeError):
        recnet(torch.zeros(1, 3, 200, 200))
    with pytest.raises(ShapeError):
        reconstruct(recnet, np.zeros((224, 224), np.uint8))


def test_non_finite_activation_named():
    torch.manual_seed(0)
    net = RecNet(full_config(4))
    with torch.no_grad():
        net.decoder[1][0].weight.fill_(float("nan"))
    with pytest.raises(NumericError, match=r"decoder\[1\]"):
        reconstruct(net, np.zeros((224, 224, 3), np.uint8))


def test_parameter_counts():
    full, red = count_parameters(full_config()), count_parameters(reduced_config())
    assert red < full
    assert count_parameters(full_config()) == full


def test_parameter_count_closed_form():
    # one encoder block (3x3 conv without bias + BN) and one decoder block
    # (2x2 transposed conv without bias + BN) plus the 1x1 linear head and
    # the 8x8x3 template
    cfg = RecNetConfig(variant="tiny", in_size=8, enc_channels=(4,), enc_pools=(2,),
                       dec_blocks=(DecoderBlock(4, 2, 2),), out_grid=8)
    expected = (3 * 4 * 9 + 2 * 4) + (4 * 4 * 4 + 2 * 4) + (4 * 3 + 3)
    assert count_parameters(cfg) == expected + 8 * 8 * 3
    assert count_parameters(RecNetConfig(**{**cfg.__dict__, "template": False})) == expected


def test_decoder_shape_mismatch_detected():
    with pytest.raises(ShapeError):
        RecNet(RecNetConfig(dec_blocks=(DecoderBlock(8, 2, 2),), out_grid=73))


def test_skip_connections_carry_signal():
    torch.manual_seed(0)
    net = RecNet(full_config(4)).eval()
    assert net.skips  # at least one encoder/decoder resolution match
    x = torch.rand(2, 3, 224, 224)
    # cut the deep path: zero the latent so only skip paths see the input
    hook = net.encoder[-1].register_forward_hook(lambda m, i, o: torch.zeros_like(o))
    with torch.no_grad():
        a, b = net(x[:1]), net(x[1:])
        net.use_skips = False
        c, d = net(x[:1]), net(x[1:])
    hook.remove()
    assert not torch.allclose(a, b)
    assert torch.allclose(c, d)


def test_recnet_gradient_matches_finite_differences():
    torch.manual_seed(0)
    net = RecNet(full_config(4)).double()
    x = torch.rand(2, 3, 224, 224, dtype=torch.float64)
    gt = torch.rand(2, 73, 73, 3, dtype=torch.float64)
    params = list(net.parameters())
    # the summed loss is ~1e4, so refining below 1e-6 drowns in roundoff
    res = gradcheck.check(lambda: loss_3d(net(x), gt), params, fraction=0.002, seed=1,
                          refine=(1e-5, 1e-6))
    assert res["ok"], res
    assert res["kinks"] < 0.2 * res["probes"]


# ----------------------------------------------------------- discriminator


@pytest.fixture(scope="module")
def disc():
    torch.manual_seed(0)
    return Discriminator()


def test_pre_head_shape(disc):
    assert DiscriminatorConfig().activation_shape() == (7, 7, 64)
    assert disc.activations(torch.zeros(1, 73, 73, 3)).shape == (1, 64, 7, 7)
    assert disc.head.in_features == 3136 and disc.head.out_features == 1


def test_first_block_has_no_batch_norm(disc):
    first = list(disc.features.children())[:3]
    assert not any(isinstance(m, torch.nn.BatchNorm2d) for m in first[:2])
    assert sum(isinstance(m, torch.nn.BatchNorm2d) for m in disc.features) == 3


def test_discriminate_range_and_determinism(disc):
    s = np.random.default_rng(0).normal(size=(73, 73, 3))
    p = discriminate(disc, s)
    assert 0.0 < p < 1.0
    assert p == discriminate(disc, s)


@settings(max_examples=20, deadline=None)
@given(st.floats(-1e6, 1e6), st.integers(0, 2**31 - 1))
def test_discriminator_output_open_interval(disc, scale, seed):
    x = torch.from_numpy(np.random.default_rng(seed).normal(size=(2, 73, 73, 3)) * scale).float()
    with torch.no_grad():
        p = disc.eval()(x)
    assert (p > 0).all() and (p < 1).all()


def test_discriminator_shape_error(disc):
    with pytest.raises(ShapeError):
        disc(torch.zeros(1, 31, 31, 3))


def test_discriminator_gradient_matches_finite_differences():
    torch.manual_seed(0)
    d = Discriminator().double()
    real = torch.rand(4, 73, 73, 3, dtype=torch.float64)
    fake = torch.rand(4, 73, 73, 3, dtype=torch.float64) * 2 - 1
    params = list(d.parameters())
    res = gradcheck.check(lambda: loss_adv_discriminator(d(real), d(fake)), params, fraction=0.01)
    assert res["ok"], res
    assert res["kinks"] < 0.2 * res["probes"]


def test_template_starts_at_rest_plate():
    torch.manual_seed(0)
    net = RecNet(full_config(4)).eval()
    with torch.no_grad():
        net.head.weight.zero_()
        net.head.bias.zero_()
        out = net(torch.rand(1, 3, 224, 224))[0].double().numpy()
    from platerec.synth import rest_grid

    np.testing.assert_allclose(out, rest_grid(), atol=1e-6)
