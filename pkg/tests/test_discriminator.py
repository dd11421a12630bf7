"""Multi-scale patch discriminator structure and least-squares objectives."""

import pytest
import torch
import torch.nn as nn

from beautykit import DiscriminatorConfig, MultiScaleDiscriminator
from beautykit.models.discriminator import lsgan_d_loss, lsgan_g_loss
from beautykit.models.layers import ConvBlock

from conftest import TINY_DISCRIMINATOR


@pytest.fixture(scope="module")
def tiny_disc():
    torch.manual_seed(0)
    return MultiScaleDiscriminator(TINY_DISCRIMINATOR)


@pytest.fixture(scope="module")
def full_disc():
    torch.manual_seed(0)
    return MultiScaleDiscriminator(DiscriminatorConfig())


def test_judgment_count_and_shrinking_areas(tiny_disc):
    maps = tiny_disc.judge(torch.rand(2, 3, 32, 32))
    assert len(maps) == TINY_DISCRIMINATOR.n_scales
    areas = [m.shape[-1] * m.shape[-2] for m in maps]
    assert all(a > b for a, b in zip(areas, areas[1:]))
    for m in maps:
        assert m.shape[0] == 2 and m.shape[1] == 1


def test_full_scale_map_geometry(full_disc):
    with torch.no_grad():
        maps = full_disc.judge(torch.rand(1, 3, 128, 128))
    assert [tuple(m.shape) for m in maps] == [(1, 1, 8, 8), (1, 1, 4, 4), (1, 1, 2, 2)]


def test_full_scale_parameter_count(full_disc):
    per_scale = 2_757_057
    assert full_disc.parameter_count() == 3 * per_scale
    scales = list(full_disc.scales)
    assert len(scales) == 3
    for scale in scales:
        assert sum(p.numel() for p in scale.parameters()) == per_scale


def test_minimum_input_size_enforced(tiny_disc):
    minimum = TINY_DISCRIMINATOR.min_input_size
    too_small = minimum // 2
    with pytest.raises(ValueError, match=str(minimum)):
        tiny_disc.judge(torch.rand(1, 3, too_small, too_small))
    tiny_disc.judge(torch.rand(1, 3, minimum, minimum))  # boundary size works


def test_min_input_size_formula():
    assert TINY_DISCRIMINATOR.min_input_size == 2 ** (
        TINY_DISCRIMINATOR.n_layers + TINY_DISCRIMINATOR.n_scales)
    assert DiscriminatorConfig().min_input_size == 128


def test_first_block_per_scale_is_norm_free(tiny_disc):
    for scale in tiny_disc.scales:
        blocks = [m for m in scale.modules() if isinstance(m, ConvBlock)]
        assert len(blocks) == TINY_DISCRIMINATOR.n_layers
        first_norms = [m for m in blocks[0].modules() if isinstance(m, nn.InstanceNorm2d)]
        assert first_norms == []
        for later in blocks[1:]:
            assert any(isinstance(m, nn.InstanceNorm2d) for m in later.modules())


def test_activations_are_leaky(tiny_disc):
    leakies = [m for m in tiny_disc.modules() if isinstance(m, nn.LeakyReLU)]
    assert leakies and all(m.negative_slope == pytest.approx(0.2) for m in leakies)
    assert not any(isinstance(m, nn.ReLU) for m in tiny_disc.modules())


def test_scales_see_downsampled_views(tiny_disc):
    """Coarser scales judge average-pooled copies, so feeding the pooled
    image to scale k+1 directly reproduces scale k+2's view."""
    image = torch.rand(1, 3, 32, 32)
    maps_full = tiny_disc.judge(image)
    pooled = torch.nn.functional.avg_pool2d(image, 2, stride=2)
    scales = list(tiny_disc.scales)
    direct = scales[1](pooled)
    assert torch.equal(maps_full[1], direct)


# -- objectives -----------------------------------------------------------------


def constant_maps(value, shapes=((1, 1, 4, 4), (1, 1, 2, 2))):
    return [torch.full(s, float(value)) for s in shapes]


def test_lsgan_trivial_values():
    ones, zeros = constant_maps(1.0), constant_maps(0.0)
    # perfect discriminator: real→1, fake→0
    assert float(lsgan_d_loss(ones, zeros)) == pytest.approx(0.0)
    # fully fooled discriminator scores fakes at 1
    assert float(lsgan_g_loss(ones)) == pytest.approx(0.0)
    # worst cases: (0-1)^2 + (1-0)^2 averaged over scales
    assert float(lsgan_d_loss(zeros, ones)) == pytest.approx(2.0)
    assert float(lsgan_g_loss(zeros)) == pytest.approx(1.0)


def test_lsgan_matches_brute_force():
    g = torch.Generator().manual_seed(3)
    real = [torch.rand(s, generator=g, dtype=torch.float64) for s in ((2, 1, 4, 4), (2, 1, 2, 2))]
    fake = [torch.rand(s, generator=g, dtype=torch.float64) for s in ((2, 1, 4, 4), (2, 1, 2, 2))]
    expected_d = sum(((r - 1) ** 2).mean() + (f ** 2).mean() for r, f in zip(real, fake)) / 2
    expected_g = sum(((f - 1) ** 2).mean() for f in fake) / 2
    assert float(lsgan_d_loss(real, fake)) == pytest.approx(float(expected_d), abs=1e-12)
    assert float(lsgan_g_loss(fake)) == pytest.approx(float(expected_g), abs=1e-12)


def test_generator_loss_pushes_fakes_toward_real():
    fake = [torch.full((1, 1, 2, 2), 0.3, requires_grad=True)]
    lsgan_g_loss(fake).backward()
    # d/df (f-1)^2 = 2(f-1) < 0 for f < 1: gradient descent raises the score
    assert (fake[0].grad < 0).all()


def test_logistic_mode_differs_and_is_finite():
    g = torch.Generator().manual_seed(4)
    real = [torch.rand((1, 1, 4, 4), generator=g)]
    fake = [torch.rand((1, 1, 4, 4), generator=g)]
    ls_d = float(lsgan_d_loss(real, fake, mode="lsgan"))
    lg_d = float(lsgan_d_loss(real, fake, mode="logistic"))
    assert ls_d != lg_d
    assert torch.isfinite(torch.tensor([lg_d])).all()
    assert torch.isfinite(lsgan_g_loss(fake, mode="logistic"))


def test_unknown_mode_rejected():
    with pytest.raises(ValueError, match="mode"):
        lsgan_g_loss(constant_maps(0.5), mode="wasserstein")


def test_judgments_differentiable(tiny_disc):
    image = torch.rand(1, 3, 32, 32, requires_grad=True)
    loss = lsgan_g_loss(tiny_disc.judge(image))
    loss.backward()
    assert image.grad is not None and torch.isfinite(image.grad).all()
