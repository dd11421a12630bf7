"""Translation network structure: encoders, AdaIN decoder, and style plumbing."""

import pytest
import torch
import torch.nn as nn
from hypothesis import given, settings
from hypothesis import strategies as st

from beautykit import Generator, GeneratorConfig
from beautykit.models.layers import (
    AdaIN2d,
    adain,
    adain_layers,
    assign_adain_params,
    num_adain_params,
)

from conftest import TINY_GENERATOR


@pytest.fixture(scope="module")
def tiny_gen():
    torch.manual_seed(0)
    gen = Generator(TINY_GENERATOR)
    gen.init_weights()
    gen.eval()
    return gen


def images(n=2, size=16, seed=0, channels=3):
    g = torch.Generator().manual_seed(seed)
    return torch.rand((n, channels, size, size), generator=g) * 2 - 1


# -- code shapes ---------------------------------------------------------------


def test_content_code_shape(tiny_gen):
    content = tiny_gen.encode_content(images(size=16))
    assert content.shape == (2, TINY_GENERATOR.content_channels, 4, 4)


def test_style_code_shape(tiny_gen):
    style = tiny_gen.encode_style(images(size=16))
    assert style.shape == (2, TINY_GENERATOR.style_dim)


def test_decode_output_range_and_shape(tiny_gen):
    batch = images(size=16)
    out = tiny_gen.decode(tiny_gen.encode_content(batch), tiny_gen.encode_style(batch))
    assert out.shape == batch.shape
    assert out.min() >= -1.0 and out.max() <= 1.0  # tanh output


def test_reconstruct_matches_manual_path(tiny_gen):
    batch = images(size=16, seed=1)
    manual = tiny_gen.decode(tiny_gen.encode_content(batch), tiny_gen.encode_style(batch))
    assert torch.equal(tiny_gen.reconstruct(batch), manual)


def test_translate_uses_reference_style(tiny_gen):
    a, b = images(seed=2), images(seed=3)
    out = tiny_gen.translate(a, b)
    manual = tiny_gen.decode(tiny_gen.encode_content(a), tiny_gen.encode_style(b))
    assert torch.equal(out, manual)


def test_spatial_validation(tiny_gen):
    with pytest.raises(ValueError, match="divisible"):
        tiny_gen.encode_content(images(size=18))
    with pytest.raises(ValueError, match="N, C, H, W"):
        tiny_gen.encode_content(torch.rand(3, 16, 16))


def test_decode_validation(tiny_gen):
    batch = images(size=16)
    content = tiny_gen.encode_content(batch)
    style = tiny_gen.encode_style(batch)
    with pytest.raises(ValueError, match="style code"):
        tiny_gen.decode(content, torch.rand(2, TINY_GENERATOR.style_dim + 1))
    with pytest.raises(ValueError, match="content code"):
        tiny_gen.decode(torch.rand(2, 7, 4, 4), style)
    with pytest.raises(ValueError, match="batch mismatch"):
        tiny_gen.decode(content, style[:1])


# -- AdaIN oracle ---------------------------------------------------------------


def test_adain_imposes_requested_moments():
    g = torch.Generator().manual_seed(5)
    z = torch.rand((3, 8, 12, 12), generator=g) * 4 - 2
    gamma = torch.rand((3, 8), generator=g) * 3 - 1.5
    beta = torch.rand((3, 8), generator=g) * 2 - 1
    out = adain(z, gamma, beta)
    mean = out.mean(dim=(2, 3))
    std = out.std(dim=(2, 3), unbiased=False)
    assert torch.allclose(mean, beta, atol=1e-4)
    assert torch.allclose(std, gamma.abs(), atol=1e-3)


def test_adain_rejects_bad_inputs():
    with pytest.raises(ValueError, match="4D"):
        adain(torch.rand(4, 8, 8), torch.rand(4), torch.rand(4))
    with pytest.raises((ValueError, RuntimeError)):
        adain(torch.rand(1, 4, 8, 8), torch.rand(1, 5), torch.rand(1, 5))


def test_adain_broadcast_shared_params():
    """A (C,) parameter vector applies to every sample in the batch."""
    z = torch.rand(2, 4, 8, 8)
    gamma, beta = torch.rand(4), torch.rand(4)
    shared = adain(z, gamma, beta)
    per_sample = adain(z, gamma.expand(2, 4), beta.expand(2, 4))
    assert torch.equal(shared, per_sample)


@settings(max_examples=30, deadline=None)
@given(
    n=st.integers(1, 3),
    c=st.integers(1, 6),
    hw=st.integers(2, 10),
    seed=st.integers(0, 2**31 - 1),
)
def test_adain_moments_property(n, c, hw, seed):
    g = torch.Generator().manual_seed(seed)
    z = torch.rand((n, c, hw, hw), generator=g, dtype=torch.float64) * 6 - 3
    gamma = torch.rand((n, c), generator=g, dtype=torch.float64) * 4 - 2
    beta = torch.rand((n, c), generator=g, dtype=torch.float64) * 4 - 2
    out = adain(z, gamma, beta)
    if hw * hw > 1:
        assert torch.allclose(out.mean(dim=(2, 3)), beta, atol=1e-6)
        var = out.var(dim=(2, 3), unbiased=False)
        # eps in the denominator shrinks the imposed std very slightly
        assert torch.allclose(var.sqrt(), gamma.abs(), atol=1e-3)


def test_adain_layer_requires_assignment():
    layer = AdaIN2d(4)
    with pytest.raises(RuntimeError, match="assign"):
        layer(torch.rand(1, 4, 8, 8))


# -- style pathway structure ------------------------------------------------------


def test_style_encoder_has_no_normalization(tiny_gen):
    norms = [m for m in tiny_gen.style_encoder.modules()
             if isinstance(m, (nn.InstanceNorm2d, nn.BatchNorm2d, nn.LayerNorm, AdaIN2d))]
    assert norms == []


def test_content_encoder_is_instance_normalized(tiny_gen):
    norms = [m for m in tiny_gen.content_encoder.modules()
             if isinstance(m, nn.InstanceNorm2d)]
    assert len(norms) >= 3


def test_style_code_sensitive_to_global_rescale(tiny_gen):
    """Without normalization the style pathway keeps magnitude information."""
    batch = images(size=16, seed=6)
    a = tiny_gen.encode_style(batch)
    b = tiny_gen.encode_style(batch * 0.5)
    assert not torch.allclose(a, b, atol=1e-3)


def test_content_code_ignores_constant_shift(tiny_gen):
    """Instance normalization in the content pathway strips global offsets."""
    batch = images(size=16, seed=7) * 0.5  # headroom for the shift
    a = tiny_gen.encode_content(batch)
    b = tiny_gen.encode_content(batch + 0.2)
    assert torch.allclose(a, b, atol=1e-4)


def test_decoder_norms_are_all_adain(tiny_gen):
    layers = adain_layers(tiny_gen.decoder)
    others = [m for m in tiny_gen.decoder.modules()
              if isinstance(m, (nn.InstanceNorm2d, nn.BatchNorm2d))]
    assert len(layers) > 0 and others == []


def test_mlp_output_covers_every_adain_site(tiny_gen):
    needed = num_adain_params(tiny_gen.decoder)
    out = tiny_gen.mlp(torch.rand(2, TINY_GENERATOR.style_dim))
    assert out.shape == (2, needed)


def test_assign_adain_rejects_wrong_width(tiny_gen):
    needed = num_adain_params(tiny_gen.decoder)
    with pytest.raises(ValueError, match=str(needed)):
        assign_adain_params(tiny_gen.decoder, torch.rand(2, needed + 2))


def test_style_actually_conditions_output(tiny_gen):
    batch = images(size=16, seed=8)
    content = tiny_gen.encode_content(batch)
    g = torch.Generator().manual_seed(9)
    s1 = torch.rand((2, TINY_GENERATOR.style_dim), generator=g)
    s2 = torch.rand((2, TINY_GENERATOR.style_dim), generator=g)
    out1 = tiny_gen.decode(content, s1)
    out2 = tiny_gen.decode(content, s2)
    assert not torch.allclose(out1, out2, atol=1e-4)


def test_batch_independence(tiny_gen):
    """Each sample's reconstruction is unaffected by its batch neighbours."""
    batch = images(n=3, size=16, seed=10)
    together = tiny_gen.reconstruct(batch)
    alone = tiny_gen.reconstruct(batch[1:2])
    # batched convs reassociate float sums, so allow a few ulps of drift
    assert torch.allclose(together[1:2], alone, atol=5e-5)


def test_activations_are_relu_family(tiny_gen):
    acts = [m for m in tiny_gen.modules()
            if isinstance(m, (nn.ReLU, nn.LeakyReLU, nn.Tanh))]
    assert any(isinstance(m, nn.ReLU) for m in acts)
    assert any(isinstance(m, nn.Tanh) for m in acts)
    assert not any(isinstance(m, (nn.Sigmoid, nn.ELU, nn.GELU)) for m in tiny_gen.modules())


def test_reflection_padding_only(tiny_gen):
    for module in tiny_gen.modules():
        if isinstance(module, nn.Conv2d):
            assert module.padding == (0, 0)  # padding handled by explicit reflection


# -- full-scale arithmetic ---------------------------------------------------------


@pytest.fixture(scope="module")
def full_gen():
    torch.manual_seed(0)
    return Generator(GeneratorConfig())


def test_full_scale_code_shapes(full_gen):
    batch = torch.rand(1, 3, 128, 128)
    with torch.no_grad():
        content = full_gen.encode_content(batch)
        style = full_gen.encode_style(batch)
    assert content.shape == (1, 256, 32, 32)
    assert style.shape == (1, 64)


def test_full_scale_parameter_counts(full_gen):
    counts = full_gen.parameter_counts()
    assert counts == {
        "content_encoder": 4_205_696,
        "style_encoder": 2_779_328,
        "decoder": 5_754_243,
        "mlp": 1_233_792,
    }


def test_full_scale_adain_width(full_gen):
    # 8 res-block sites at 256ch + upsample sites at 128 and 64, gamma and beta each
    assert num_adain_params(full_gen.decoder) == 2 * (8 * 256 + 128 + 64)
