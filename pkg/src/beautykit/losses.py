"""The five training objectives and their weighted combination.

Pixel reconstruction, identity-feature and beauty-feature distances, the
perceptual distance on instance-normalized deep features, and the
generator-side adversarial term are combined as

    total = w1*(rec_A + rec_B) + w2*(id_A + id_B + id_AB)
          + w3*(bt_A + bt_B + bt_AB) + w4*gan_AB + w5*perc_AB

All L1 terms use mean reduction so the default weights are resolution
independent; the perceptual term is a per-stage root-mean-square distance for
the same reason.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import torch

from .errors import ValidationError

FEATURE_NORM_EPS = 1e-5


@dataclass(frozen=True)
class LossWeights:
    """Nonnegative weights of the five objective terms.

    Setting a weight to zero removes the term's gradient entirely, which is
    how the single-loss ablations are expressed.
    """

    reconstruction: float = 10.0
    identity: float = 1.0
    beauty: float = 1.0
    adversarial: float = 1.0
    perceptual: float = 1.0

    def __post_init__(self):
        for name, value in asdict(self).items():
            if value < 0:
                raise ValidationError(f"loss weight {name} must be >= 0, got {value}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "LossWeights":
        return cls(**d)


@dataclass(frozen=True)
class LossBundle:
    """Per-iteration named loss values (floats, for logging and inspection)."""

    rec_A: float
    rec_B: float
    id_A: float
    id_B: float
    id_AB: float
    bt_A: float
    bt_B: float
    bt_AB: float
    gan_AB: float
    perc_AB: float
    total: float

    @classmethod
    def from_components(cls, weights: LossWeights, **terms: float) -> "LossBundle":
        total = combine_terms(weights, terms)
        return cls(total=float(total), **{k: float(v) for k, v in terms.items()})

    def to_dict(self) -> dict:
        return asdict(self)


def combine_terms(weights: LossWeights, terms: dict):
    """Weighted total; works on floats and on tensors alike."""
    return (
        weights.reconstruction * (terms["rec_A"] + terms["rec_B"])
        + weights.identity * (terms["id_A"] + terms["id_B"] + terms["id_AB"])
        + weights.beauty * (terms["bt_A"] + terms["bt_B"] + terms["bt_AB"])
        + weights.adversarial * terms["gan_AB"]
        + weights.perceptual * terms["perc_AB"]
    )


def reconstruction_loss(recon: torch.Tensor, original: torch.Tensor) -> torch.Tensor:
    """Mean absolute pixel difference."""
    if recon.shape != original.shape:
        raise ValidationError(
            f"shape mismatch: {tuple(recon.shape)} vs {tuple(original.shape)}")
    return (recon - original).abs().mean()


def identity_loss(generated: torch.Tensor, anchor: torch.Tensor, backbone) -> torch.Tensor:
    """Mean absolute distance between identity feature vectors.

    For the beautified image the anchor is the source face, so identity is
    pulled back toward the person being edited.
    """
    gen_feat = backbone.identity_features(generated)
    anchor_feat = backbone.identity_features(anchor)
    return (gen_feat - anchor_feat).abs().mean()


def beauty_loss(generated: torch.Tensor, target: torch.Tensor, backbone) -> torch.Tensor:
    """Mean absolute distance between beauty feature vectors."""
    gen_feat = backbone.beauty_features(generated)
    target_feat = backbone.beauty_features(target)
    return (gen_feat - target_feat).abs().mean()


def _instance_normalize(feat: torch.Tensor, eps: float = FEATURE_NORM_EPS) -> torch.Tensor:
    flat = feat.reshape(feat.shape[0], feat.shape[1], -1)
    mean = flat.mean(dim=2, keepdim=True)
    var = flat.var(dim=2, unbiased=False, keepdim=True)
    return ((flat - mean) / torch.sqrt(var + eps)).reshape(feat.shape)


def perceptual_loss(generated: torch.Tensor, reference: torch.Tensor,
                    feature_net) -> torch.Tensor:
    """Distance between instance-normalized deep features.

    ``feature_net`` maps an image batch to a list of (N, C, H, W) feature
    maps and must be fixed (never trained here). Each map is instance
    normalized, then compared by per-sample root-mean-square Euclidean
    distance; stages are summed and the batch is averaged.
    """
    if feature_net is None:
        raise ValidationError(
            "perceptual loss needs a feature extractor; configure one or "
            "reuse the perception backbone trunk")
    feats_g = feature_net(generated)
    feats_r = feature_net(reference)
    total = generated.new_zeros(())
    for fg, fr in zip(feats_g, feats_r):
        diff = _instance_normalize(fg) - _instance_normalize(fr)
        sq = diff.reshape(diff.shape[0], -1).pow(2).mean(dim=1)
        total = total + torch.sqrt(sq).mean()
    return total
