"""Translation core: content encoder, style encoder, and conditioned decoder.

The content encoder is a strided-conv + residual stack with instance
normalization everywhere (stripping global style statistics); the style
encoder is the same front end without any normalization, collapsed by global
average pooling into a fixed-length style code; the decoder renders a content
map back to an image, conditioned on the style code through adaptive instance
normalization parameters produced by a small MLP.

Content codes are (N, 4*base_dim, H/4, W/4) feature tensors; style codes are
(N, style_dim) vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import torch
import torch.nn as nn

from .layers import (
    ConvBlock,
    ResBlock,
    StyleMLP,
    UpsampleBlock,
    assign_adain_params,
    kaiming_init,
    num_adain_params,
)

# Two stride-2 downsamplings in the content encoder.
CONTENT_DOWNSCALE = 4


@dataclass(frozen=True)
class GeneratorConfig:
    """Dimensions of the translation networks.

    Defaults reproduce the full-scale recipe; tests shrink ``base_dim`` for
    desk-scale runs. The content code has ``4 * base_dim`` channels.
    """

    in_channels: int = 3
    base_dim: int = 64
    style_dim: int = 64
    content_res_blocks: int = 3
    decoder_res_blocks: int = 4
    mlp_hidden: int = 256

    @property
    def content_channels(self) -> int:
        return 4 * self.base_dim

    def to_dict(self) -> dict:
        return asdict(self)


class ContentEncoder(nn.Module):
    """Identity-bearing spatial encoder: downsampling convs + residual blocks.

    Every convolution is followed by instance normalization, so per-channel
    global statistics of the input (the style) are removed.
    """

    def __init__(self, config: GeneratorConfig):
        super().__init__()
        k = config.base_dim
        layers: list[nn.Module] = [
            ConvBlock(config.in_channels, k, 7, 1, norm="in", activation="relu"),
            ConvBlock(k, 2 * k, 4, 2, norm="in", activation="relu"),
            ConvBlock(2 * k, 4 * k, 4, 2, norm="in", activation="relu"),
        ]
        layers += [ResBlock(4 * k, norm="in") for _ in range(config.content_res_blocks)]
        self.model = nn.Sequential(*layers)
        self.out_channels = 4 * k

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.model(x)


class StyleEncoder(nn.Module):
    """Style encoder: strided convs, global average pooling, linear head.

    Deliberately contains no normalization layers; normalizing would erase
    the very statistics the style code must carry.
    """

    def __init__(self, config: GeneratorConfig):
        super().__init__()
        k = config.base_dim
        self.model = nn.Sequential(
            ConvBlock(config.in_channels, k, 7, 1, norm="none", activation="relu"),
            ConvBlock(k, 2 * k, 4, 2, norm="none", activation="relu"),
            ConvBlock(2 * k, 4 * k, 4, 2, norm="none", activation="relu"),
            ConvBlock(4 * k, 4 * k, 4, 2, norm="none", activation="relu"),
            ConvBlock(4 * k, 4 * k, 4, 2, norm="none", activation="relu"),
            nn.AdaptiveAvgPool2d(1),
            nn.Flatten(),
            nn.Linear(4 * k, config.style_dim),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.model(x)


class Decoder(nn.Module):
    """Residual + upsampling decoder conditioned through adaptive instance norm.

    All normalization in the decoder is adaptive: per-channel (gamma, beta)
    pairs come from the style MLP, never from learned norm parameters. The
    output conv saturates with tanh into [-1, 1].
    """

    def __init__(self, config: GeneratorConfig):
        super().__init__()
        k = config.base_dim
        blocks: list[nn.Module] = [
            ResBlock(4 * k, norm="adain") for _ in range(config.decoder_res_blocks)
        ]
        blocks += [
            UpsampleBlock(4 * k, 2 * k, norm="adain"),
            UpsampleBlock(2 * k, k, norm="adain"),
            ConvBlock(k, config.in_channels, 7, 1, norm="none", activation="tanh"),
        ]
        self.model = nn.Sequential(*blocks)

    def forward(self, content: torch.Tensor) -> torch.Tensor:
        return self.model(content)


class Generator(nn.Module):
    """Bundles the two encoders, the decoder, and its conditioning MLP."""

    def __init__(self, config: GeneratorConfig | None = None):
        super().__init__()
        self.config = config or GeneratorConfig()
        self.content_encoder = ContentEncoder(self.config)
        self.style_encoder = StyleEncoder(self.config)
        self.decoder = Decoder(self.config)
        self.mlp = StyleMLP(
            self.config.style_dim,
            num_adain_params(self.decoder),
            hidden_dim=self.config.mlp_hidden,
        )

    def init_weights(self) -> None:
        kaiming_init(self)

    def _check_spatial(self, image: torch.Tensor) -> None:
        if image.dim() != 4:
            raise ValueError(f"expected (N, C, H, W) input, got shape {tuple(image.shape)}")
        h, w = image.shape[-2:]
        if h % CONTENT_DOWNSCALE or w % CONTENT_DOWNSCALE:
            raise ValueError(
                f"input spatial dims must be divisible by {CONTENT_DOWNSCALE}, got {h}x{w}")

    def encode_content(self, image: torch.Tensor) -> torch.Tensor:
        """Spatial content code, (N, 4*base_dim, H/4, W/4)."""
        self._check_spatial(image)
        return self.content_encoder(image)

    def encode_style(self, image: torch.Tensor) -> torch.Tensor:
        """Global style code, (N, style_dim)."""
        self._check_spatial(image)
        return self.style_encoder(image)

    def decode(self, content: torch.Tensor, style: torch.Tensor) -> torch.Tensor:
        """Render an image from a content map under the given style code."""
        if content.dim() != 4 or content.shape[1] != self.config.content_channels:
            raise ValueError(
                f"content code must have {self.config.content_channels} channels, "
                f"got shape {tuple(content.shape)}")
        if style.dim() != 2 or style.shape[1] != self.config.style_dim:
            raise ValueError(
                f"style code must be (N, {self.config.style_dim}), "
                f"got shape {tuple(style.shape)}")
        if content.shape[0] != style.shape[0]:
            raise ValueError(
                f"batch mismatch: {content.shape[0]} content codes, "
                f"{style.shape[0]} style codes")
        assign_adain_params(self.decoder, self.mlp(style))
        return self.decoder(content)

    def reconstruct(self, image: torch.Tensor) -> torch.Tensor:
        """Auto-encode an image through its own content and style codes."""
        return self.decode(self.encode_content(image), self.encode_style(image))

    def translate(self, target: torch.Tensor, reference: torch.Tensor) -> torch.Tensor:
        """Re-render ``target`` content under the reference's full style code.

        This is the training-time path; weighted style mixing for inference
        lives in the inference engine.
        """
        return self.decode(self.encode_content(target), self.encode_style(reference))

    def parameter_counts(self) -> dict[str, int]:
        """Learnable parameter totals per sub-network."""
        count = lambda m: sum(p.numel() for p in m.parameters())
        return {
            "content_encoder": count(self.content_encoder),
            "style_encoder": count(self.style_encoder),
            "decoder": count(self.decoder),
            "mlp": count(self.mlp),
        }
