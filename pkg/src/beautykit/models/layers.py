"""Building blocks shared by the translation networks.

Layer vocabulary (all convolutions use reflection padding):
  - 7x7 stride-1 conv block ("c7s1-k")
  - 4x4 stride-2 downsampling conv block ("dk")
  - residual block of two 3x3 convs ("rk")
  - 2x nearest-neighbor upsample + 5x5 conv ("uk")
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F


def adain(z: torch.Tensor, gamma: torch.Tensor, beta: torch.Tensor,
          eps: float = 1e-5) -> torch.Tensor:
    """Adaptive instance normalization.

    Renormalizes every channel of ``z`` so its per-instance mean becomes
    ``beta`` and its standard deviation becomes ``|gamma|``. Statistics are
    population (biased) moments over the spatial dimensions, stabilized by
    ``eps`` inside the square root.

    ``z`` is (N, C, H, W); ``gamma`` and ``beta`` are broadcastable to
    (N, C) or plain (C,) vectors.
    """
    if z.dim() != 4:
        raise ValueError(f"expected a 4D feature tensor, got shape {tuple(z.shape)}")
    n, c = z.shape[:2]
    gamma = gamma.reshape(-1, c) if gamma.dim() > 1 else gamma.expand(n, c)
    beta = beta.reshape(-1, c) if beta.dim() > 1 else beta.expand(n, c)
    if gamma.shape[-1] != c or beta.shape[-1] != c:
        raise ValueError(
            f"channel mismatch: features have {c} channels, "
            f"gamma has {gamma.shape[-1]}, beta has {beta.shape[-1]}")
    flat = z.reshape(n, c, -1)
    mean = flat.mean(dim=2).reshape(n, c, 1, 1)
    var = flat.var(dim=2, unbiased=False).reshape(n, c, 1, 1)
    normalized = (z - mean) / torch.sqrt(var + eps)
    return gamma.reshape(-1, c, 1, 1) * normalized + beta.reshape(-1, c, 1, 1)


class AdaIN2d(nn.Module):
    """Adaptive instance norm layer whose (gamma, beta) are assigned externally.

    The conditioning MLP writes per-channel parameters into ``gamma``/``beta``
    before each decode; the layer itself owns no learnable parameters.
    """

    def __init__(self, num_channels: int, eps: float = 1e-5):
        super().__init__()
        self.num_channels = num_channels
        self.eps = eps
        self.gamma: torch.Tensor | None = None
        self.beta: torch.Tensor | None = None

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if self.gamma is None or self.beta is None:
            raise RuntimeError("adaptive norm parameters have not been assigned")
        return adain(x, self.gamma, self.beta, self.eps)


class ConvBlock(nn.Module):
    """Reflection-padded convolution + optional instance norm + activation."""

    def __init__(self, in_dim: int, out_dim: int, kernel: int, stride: int,
                 norm: str = "none", activation: str = "relu"):
        super().__init__()
        self.pad = nn.ReflectionPad2d((kernel - stride + 1) // 2 if stride > 1 else kernel // 2)
        self.conv = nn.Conv2d(in_dim, out_dim, kernel, stride)
        if norm == "in":
            self.norm: nn.Module | None = nn.InstanceNorm2d(out_dim, affine=False)
        elif norm == "adain":
            self.norm = AdaIN2d(out_dim)
        elif norm == "none":
            self.norm = None
        else:
            raise ValueError(f"unknown norm {norm!r}")
        if activation == "relu":
            self.activation: nn.Module | None = nn.ReLU(inplace=False)
        elif activation == "lrelu":
            self.activation = nn.LeakyReLU(0.2, inplace=False)
        elif activation == "tanh":
            self.activation = nn.Tanh()
        elif activation == "none":
            self.activation = None
        else:
            raise ValueError(f"unknown activation {activation!r}")

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = self.conv(self.pad(x))
        if self.norm is not None:
            x = self.norm(x)
        if self.activation is not None:
            x = self.activation(x)
        return x


class ResBlock(nn.Module):
    """Residual block: conv-norm-relu-conv-norm plus identity skip."""

    def __init__(self, dim: int, norm: str = "in"):
        super().__init__()
        self.block = nn.Sequential(
            ConvBlock(dim, dim, 3, 1, norm=norm, activation="relu"),
            ConvBlock(dim, dim, 3, 1, norm=norm, activation="none"),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.block(x)


class UpsampleBlock(nn.Module):
    """2x nearest-neighbor upsampling followed by a 5x5 stride-1 conv block."""

    def __init__(self, in_dim: int, out_dim: int, norm: str = "adain"):
        super().__init__()
        self.upsample = nn.Upsample(scale_factor=2, mode="nearest")
        self.conv = ConvBlock(in_dim, out_dim, 5, 1, norm=norm, activation="relu")

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.conv(self.upsample(x))


class StyleMLP(nn.Module):
    """Maps a style code to the flat vector of decoder adaptive-norm parameters."""

    def __init__(self, style_dim: int, out_dim: int, hidden_dim: int = 256,
                 n_hidden: int = 2):
        super().__init__()
        layers: list[nn.Module] = []
        dim = style_dim
        for _ in range(n_hidden):
            layers += [nn.Linear(dim, hidden_dim), nn.ReLU(inplace=False)]
            dim = hidden_dim
        layers += [nn.Linear(dim, out_dim)]
        self.model = nn.Sequential(*layers)

    def forward(self, style: torch.Tensor) -> torch.Tensor:
        return self.model(style)


def adain_layers(module: nn.Module) -> list[AdaIN2d]:
    """All adaptive instance norm layers of a module, in traversal order."""
    return [m for m in module.modules() if isinstance(m, AdaIN2d)]


def num_adain_params(module: nn.Module) -> int:
    """Total count of (gamma, beta) scalars the conditioning MLP must emit."""
    return sum(2 * m.num_channels for m in adain_layers(module))


def assign_adain_params(module: nn.Module, params: torch.Tensor) -> None:
    """Distribute a flat (N, P) parameter tensor over the adaptive norm layers.

    Chunks are consumed in module traversal order: for each layer, gamma for
    its channels first, then beta.
    """
    expected = num_adain_params(module)
    if params.shape[-1] != expected:
        raise ValueError(
            f"adaptive norm parameter mismatch: got {params.shape[-1]}, "
            f"decoder needs {expected}")
    offset = 0
    for layer in adain_layers(module):
        c = layer.num_channels
        layer.gamma = params[..., offset:offset + c]
        layer.beta = params[..., offset + c:offset + 2 * c]
        offset += 2 * c


def kaiming_init(module: nn.Module) -> None:
    """Fan-in Kaiming initialization for conv and linear weights, zero biases."""
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.Linear)):
            nn.init.kaiming_normal_(m.weight, a=0, mode="fan_in")
            if m.bias is not None:
                nn.init.zeros_(m.bias)
