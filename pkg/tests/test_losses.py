import math
import warnings

import numpy as np
import pytest
import torch
from hypothesis import given, settings, strategies as st

from platerec.errors import NumericError, ShapeError
from platerec.losses import (
    IsometryConfig,
    LossBreakdown,
    gaussian_kernel,
    loss_3d,
    loss_3d_squared,
    loss_adv_discriminator,
    loss_adv_generator,
    loss_iso,
    loss_total,
    smooth_surface,
)
from platerec.synth.deform import rest_grid

from oracles import bce_disc_oracle, bce_gen_oracle, iso_oracle, sad_oracle


def t64(a):
    return torch.as_tensor(np.asarray(a), dtype=torch.float64)


def test_loss_3d_identity_is_zero():
    x = t64(np.random.default_rng(0).normal(size=(2, 73, 73, 3)))
    assert loss_3d(x, x).item() == 0.0


def test_loss_3d_ones_vs_zeros_sums_every_entry():
    # sum over the 73*73*3 entries of one surface, averaged over a batch of one
    gt = torch.zeros(1, 73, 73, 3, dtype=torch.float64)
    assert loss_3d(torch.ones_like(gt), gt).item() == 15987.0
    assert sad_oracle(np.ones((1, 73, 73, 3)), np.zeros((1, 73, 73, 3))) == 15987.0


def test_loss_3d_homogeneous_and_symmetric():
    rng = np.random.default_rng(1)
    a, b = t64(rng.normal(size=(3, 9, 9, 3))), t64(rng.normal(size=(3, 9, 9, 3)))
    base = loss_3d(a, b).item()
    assert loss_3d(b, a).item() == pytest.approx(base, rel=1e-15)
    assert loss_3d(b + 2 * (a - b), b).item() == pytest.approx(2 * base, rel=1e-12)


def test_loss_3d_shape_mismatch():
    with pytest.raises(ShapeError):
        loss_3d(torch.zeros(1, 73, 73, 3), torch.zeros(1, 31, 31, 3))


@pytest.mark.parametrize("seed", range(5))
def test_loss_3d_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    p, g = rng.normal(size=(3, 6, 7, 3)), rng.normal(size=(3, 6, 7, 3))
    assert loss_3d(t64(p), t64(g)).item() == pytest.approx(sad_oracle(p, g), rel=1e-9)


def test_loss_3d_squared_sums_squares():
    rng = np.random.default_rng(7)
    p, g = rng.normal(size=(2, 5, 5, 3)), rng.normal(size=(2, 5, 5, 3))
    expected = np.mean([np.sum((p[i] - g[i]) ** 2) for i in range(2)])
    assert loss_3d_squared(t64(p), t64(g)).item() == pytest.approx(expected, rel=1e-12)
    assert loss_3d_squared(t64(2 * p), t64(2 * g)).item() == pytest.approx(4 * expected, rel=1e-12)


def test_kernel_normalized():
    for sigma, size in [(1.0, 5), (0.5, 3), (2.0, 9)]:
        assert abs(gaussian_kernel(sigma, size).sum().item() - 1.0) < 1e-12


def test_kernel_rejects_even_size():
    with pytest.raises(ValueError):
        IsometryConfig(kernel_size=4)


def test_smoothing_affine_plane_interior_fixed():
    plane = t64(rest_grid())
    plane[..., 2] = 0.3 * plane[..., 0] - 0.2 * plane[..., 1] + 0.1
    sm = smooth_surface(plane)
    r = 2
    assert (sm - plane)[r:-r, r:-r].abs().max().item() < 1e-6


def test_smoothing_spike_loses_center_deficit():
    surf = torch.zeros(21, 21, 3, dtype=torch.float64)
    surf[10, 10, 2] = 1.0
    w0 = gaussian_kernel(1.0, 5)[2, 2].item()
    sm = smooth_surface(surf)
    assert sm[10, 10, 2].item() == pytest.approx(w0, abs=1e-15)
    assert (surf[10, 10, 2] - sm[10, 10, 2]).item() == pytest.approx(1.0 - w0, abs=1e-15)


def test_smoothing_delta_kernel_is_identity():
    x = t64(np.random.default_rng(2).normal(size=(2, 11, 11, 3)))
    assert torch.equal(smooth_surface(x, IsometryConfig(sigma=0.0)), x)


def test_iso_zero_for_constant_surfaces():
    x = torch.full((2, 73, 73, 3), 0.7, dtype=torch.float64)
    assert loss_iso(x).item() == pytest.approx(0.0, abs=1e-12)


def test_iso_flat_plate_interior_and_height_channel():
    # x/y of the rest grid are affine: the interior is a fixed point and the
    # constant height channel is exact everywhere; only the replicate-padded
    # border rows of x/y move
    plate = t64(rest_grid())[None]
    gap = (smooth_surface(plate) - plate).abs()[0]
    assert gap[2:-2, 2:-2].max().item() < 1e-12
    assert gap[..., 2].max().item() == 0.0


def test_iso_grows_with_checkerboard_amplitude():
    plate = t64(rest_grid())[None]
    i, j = np.meshgrid(np.arange(73), np.arange(73), indexing="ij")
    checker = t64((-1.0) ** (i + j))
    vals = []
    for a in (0.01, 0.02, 0.04):
        p = plate.clone()
        p[0, ..., 2] += a * checker
        vals.append(loss_iso(p).item())
    assert vals[0] < vals[1] < vals[2]


@pytest.mark.parametrize("seed", range(3))
def test_iso_matches_oracle(seed):
    p = np.random.default_rng(seed).normal(size=(2, 7, 6, 3))
    assert loss_iso(t64(p)).item() == pytest.approx(iso_oracle(p, 1.0, 5), rel=1e-9)


def test_iso_detach_same_value_different_gradient():
    p = t64(np.random.default_rng(3).normal(size=(1, 9, 9, 3))).requires_grad_()
    a = loss_iso(p)
    ga, = torch.autograd.grad(a, p)
    b = loss_iso(p, IsometryConfig(detach_target=True))
    gb, = torch.autograd.grad(b, p)
    assert a.item() == b.item()
    assert not torch.allclose(ga, gb)


def test_bce_generator_spot_values():
    assert loss_adv_generator(torch.full((4,), 0.5)).item() == pytest.approx(0.6931, abs=1e-4)
    assert loss_adv_generator(t64([0.5, 0.25])).item() == pytest.approx(1.0397, abs=1e-4)
    assert loss_adv_generator(t64([1 - 1e-7] * 3)).item() < 1e-6


def test_bce_generator_decreasing():
    ps = np.linspace(0.05, 0.95, 10)
    vals = [loss_adv_generator(t64([p])).item() for p in ps]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_bce_discriminator_spot_values():
    half = torch.full((4,), 0.5, dtype=torch.float64)
    assert loss_adv_discriminator(half, half).item() == pytest.approx(1.3863, abs=1e-4)
    assert loss_adv_discriminator(t64([1 - 1e-7]), t64([1e-7])).item() < 1e-6


@given(st.lists(st.floats(0.01, 0.99), min_size=1, max_size=8),
       st.lists(st.floats(0.01, 0.99), min_size=1, max_size=8))
def test_bce_discriminator_swap_symmetry(real, fake):
    r, f = t64(real), t64(fake)
    assert loss_adv_discriminator(r, f).item() == pytest.approx(
        loss_adv_discriminator(1 - f, 1 - r).item(), rel=1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_bce_match_oracles(seed):
    rng = np.random.default_rng(seed)
    r, f = rng.uniform(0.01, 0.99, 6), rng.uniform(0.01, 0.99, 6)
    assert loss_adv_generator(t64(f)).item() == pytest.approx(bce_gen_oracle(f), rel=1e-9)
    assert loss_adv_discriminator(t64(r), t64(f)).item() == pytest.approx(bce_disc_oracle(r, f), rel=1e-9)


def test_bce_clamps_and_warns():
    with pytest.warns(RuntimeWarning):
        v = loss_adv_generator(t64([0.0, 0.5]))
    assert math.isfinite(v.item())


def test_bce_clamp_silent_on_sigmoid_outputs():
    p = torch.sigmoid(t64(np.random.default_rng(5).normal(scale=5, size=64)))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        loss_adv_generator(p)
        loss_adv_discriminator(p, p)


def test_total_is_plain_sum():
    assert loss_total(LossBreakdown(0, 0, 0, 0)) == 0
    assert loss_total(LossBreakdown(1, 2, 3, 4)) == 10
    assert LossBreakdown(1, 2, 3, 4).total == 10


@given(st.lists(st.floats(0, 1e6), min_size=4, max_size=4))
def test_total_matches_summation(vals):
    expected = 0.0
    for v in vals:
        expected += v
    assert loss_total(LossBreakdown(*vals)) == pytest.approx(expected, rel=1e-12)


def test_total_rejects_non_finite():
    with pytest.raises(NumericError):
        loss_total(LossBreakdown(1.0, float("nan"), 0.0, 0.0))


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_geometric_losses_gradcheck(seed):
    rng = np.random.default_rng(seed)
    p = t64(rng.normal(size=(2, 6, 6, 3))).requires_grad_()
    g = t64(rng.normal(size=(2, 6, 6, 3)))
    assert torch.autograd.gradcheck(lambda x: loss_3d(x, g) + loss_iso(x), (p,), eps=1e-6, atol=1e-6)
