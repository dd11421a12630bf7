"""Multi-scale patch discriminator with least-squares objectives.

Each scale runs the same stack of stride-2 leaky-ReLU conv blocks (no
normalization in the first block) ending in a 1x1 conv that emits a
patch-level score map. Scale k sees the input average-pooled k times, so the
three maps shrink strictly in area.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import torch
import torch.nn as nn
import torch.nn.functional as F

from .layers import ConvBlock, kaiming_init


@dataclass(frozen=True)
class DiscriminatorConfig:
    in_channels: int = 3
    base_dim: int = 64
    n_layers: int = 4
    n_scales: int = 3

    @property
    def min_input_size(self) -> int:
        # The coarsest pyramid level shrinks by 2**n_layers through the conv
        # stack, and the deepest normalized map still needs >= 2 spatial
        # elements per side for its instance statistics to exist.
        return 2 ** (self.n_layers + self.n_scales)

    def to_dict(self) -> dict:
        return asdict(self)


class PatchDiscriminator(nn.Module):
    """Single-scale patch critic: stride-2 conv stack + 1x1 score head."""

    def __init__(self, config: DiscriminatorConfig):
        super().__init__()
        dims = [config.base_dim * 2 ** i for i in range(config.n_layers)]
        layers: list[nn.Module] = [
            ConvBlock(config.in_channels, dims[0], 4, 2, norm="none", activation="lrelu"),
        ]
        for d_in, d_out in zip(dims[:-1], dims[1:]):
            layers.append(ConvBlock(d_in, d_out, 4, 2, norm="in", activation="lrelu"))
        layers.append(nn.Conv2d(dims[-1], 1, 1, 1, 0))
        self.model = nn.Sequential(*layers)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.model(x)


class MultiScaleDiscriminator(nn.Module):
    """Runs architecturally identical patch critics on an average-pool pyramid."""

    def __init__(self, config: DiscriminatorConfig | None = None):
        super().__init__()
        self.config = config or DiscriminatorConfig()
        self.scales = nn.ModuleList(
            PatchDiscriminator(self.config) for _ in range(self.config.n_scales)
        )

    def init_weights(self) -> None:
        kaiming_init(self)

    def judge(self, image: torch.Tensor) -> list[torch.Tensor]:
        """Score maps for every pyramid level, finest first."""
        h, w = image.shape[-2:]
        min_size = self.config.min_input_size
        if h < min_size or w < min_size:
            raise ValueError(
                f"input {h}x{w} too small for {self.config.n_scales} scales: "
                f"minimum is {min_size}x{min_size}")
        maps = []
        for i, critic in enumerate(self.scales):
            maps.append(critic(image))
            if i + 1 < len(self.scales):
                image = F.avg_pool2d(image, 2, stride=2)
        return maps

    forward = judge

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())


def _check_same_scales(real: list[torch.Tensor], fake: list[torch.Tensor]) -> None:
    if len(real) != len(fake):
        raise ValueError(f"scale count mismatch: {len(real)} real vs {len(fake)} fake maps")


def lsgan_d_loss(real: list[torch.Tensor], fake: list[torch.Tensor],
                 mode: str = "lsgan") -> torch.Tensor:
    """Critic objective over multi-scale score maps.

    Least-squares form: mean of (real - 1)^2 + (fake - 0)^2 across scales and
    positions. ``mode="logistic"`` switches to the saturating log form with a
    sigmoid on the raw scores.
    """
    _check_same_scales(real, fake)
    total = real[0].new_zeros(())
    for r, f in zip(real, fake):
        if mode == "lsgan":
            total = total + ((r - 1) ** 2).mean() + (f ** 2).mean()
        elif mode == "logistic":
            total = total - torch.log(torch.sigmoid(r) + 1e-8).mean() \
                          - torch.log(1 - torch.sigmoid(f) + 1e-8).mean()
        else:
            raise ValueError(f"unknown adversarial mode {mode!r}")
    return total / len(real)


def lsgan_g_loss(fake: list[torch.Tensor], mode: str = "lsgan") -> torch.Tensor:
    """Generator-side objective: push fake score maps toward the real target."""
    total = fake[0].new_zeros(())
    for f in fake:
        if mode == "lsgan":
            total = total + ((f - 1) ** 2).mean()
        elif mode == "logistic":
            total = total - torch.log(torch.sigmoid(f) + 1e-8).mean()
        else:
            raise ValueError(f"unknown adversarial mode {mode!r}")
    return total / len(fake)
