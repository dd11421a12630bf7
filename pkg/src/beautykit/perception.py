"""Piggybacked perception model: one backbone, two feature taps, one score.

A small recognition-style convolutional trunk feeds a wide fully connected
layer (FC1) whose activations serve as identity features. A second fully
connected layer (FC2) maps those to a compact beauty feature vector, and a
linear head regresses the scalar beauty score on a [1, 5] scale. Everything
up to and including FC1 is frozen after initialization; only FC2 and the
scorer ever train.

At desk scale the "pretrained" trunk is a seeded network optionally warmed
up on a self-supervised statistics-prediction task; a checkpoint from a real
recognition model can be dropped in through ``load``.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, asdict, field
from pathlib import Path

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import NotReadyError, ValidationError
from .models.layers import kaiming_init

SCORE_MIN = 1.0
SCORE_MAX = 5.0

CHECKPOINT_FORMAT = "beautykit-backbone/1"


def clamp_score(score: float) -> float:
    """Reporting-only clamp of a raw regression output onto [1, 5]."""
    return min(max(score, SCORE_MIN), SCORE_MAX)


@dataclass(frozen=True)
class BackboneConfig:
    in_channels: int = 3
    input_size: tuple[int, int] = (128, 128)
    trunk_dims: tuple[int, ...] = (32, 64, 128, 128)
    identity_dim: int = 8192
    beauty_dim: int = 256

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "BackboneConfig":
        d = dict(d)
        d["input_size"] = tuple(d["input_size"])
        d["trunk_dims"] = tuple(d["trunk_dims"])
        return cls(**d)


@dataclass
class PerceptionFeatures:
    """Joint output of one forward pass: identity + beauty vectors, raw score."""

    identity: torch.Tensor   # (N, identity_dim), FC1 activations
    beauty: torch.Tensor     # (N, beauty_dim), FC2 outputs
    score: torch.Tensor      # (N,), raw regression output (unclamped)


class _Trunk(nn.Module):
    """Stride-2 conv stack + global average pooling + FC1 (frozen after init)."""

    def __init__(self, config: BackboneConfig):
        super().__init__()
        dims = config.trunk_dims
        convs = []
        d_in = config.in_channels
        for d_out in dims:
            convs.append(nn.Conv2d(d_in, d_out, 3, 2))
            d_in = d_out
        self.convs = nn.ModuleList(convs)
        self.fc1 = nn.Linear(dims[-1], config.identity_dim)

    def stage_maps(self, x: torch.Tensor) -> list[torch.Tensor]:
        """Pre-activation feature map of every conv stage."""
        maps = []
        for conv in self.convs:
            x = conv(F.pad(x, (1, 1, 1, 1), mode="reflect"))
            maps.append(x)
            x = F.relu(x)
        return maps

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        for conv in self.convs:
            x = F.relu(conv(F.pad(x, (1, 1, 1, 1), mode="reflect")))
        pooled = F.adaptive_avg_pool2d(x, 1).flatten(1)
        return F.relu(self.fc1(pooled))


class _BeautyHead(nn.Module):
    """FC2 + linear scorer; the only trainable part of the backbone."""

    def __init__(self, config: BackboneConfig):
        super().__init__()
        self.fc2 = nn.Linear(config.identity_dim, config.beauty_dim)
        self.scorer = nn.Linear(config.beauty_dim, 1)

    def forward(self, identity: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        beauty = self.fc2(identity)
        score = self.scorer(beauty).squeeze(-1)
        return beauty, score


@dataclass
class FinetuneConfig:
    """Optimizer settings for fitting the beauty head."""

    epochs: int = 20
    batch_size: int = 16
    # Head-only training: two linear layers tolerate a much larger step than
    # the GAN nets, and the scorer bias has to travel to the score mean.
    learning_rate: float = 1e-2
    betas: tuple[float, float] = (0.5, 0.999)
    seed: int = 0
    image_size: tuple[int, int] | None = None  # defaults to backbone input size


class PerceptionBackbone:
    """Frozen feature extractor with a fine-tunable beauty head.

    Lifecycle: construct -> ``initialize`` (or ``load``) -> optionally
    ``finetune_beauty_head`` -> extract/score. Feature extraction before
    initialization raises; scoring before fine-tuning raises.
    """

    def __init__(self, config: BackboneConfig | None = None):
        self.config = config or BackboneConfig()
        self.trunk = _Trunk(self.config)
        self.head = _BeautyHead(self.config)
        self.ready = False
        self.finetuned = False
        self.provenance: dict = {}

    # -- lifecycle -----------------------------------------------------------

    def initialize(self, seed: int = 0, warmup_images: torch.Tensor | None = None,
                   warmup_steps: int = 0) -> None:
        """Seeded weight init standing in for an externally pretrained model.

        With ``warmup_images`` the trunk is briefly trained on a
        self-supervised task (predicting per-channel mean and spread of its
        input) before freezing, so pooled features carry global statistics.
        """
        with torch.random.fork_rng():
            torch.manual_seed(seed)
            kaiming_init(self.trunk)
            kaiming_init(self.head)
            if warmup_images is not None and warmup_steps > 0:
                self._warmup(warmup_images, warmup_steps)
        for p in self.trunk.parameters():
            p.requires_grad_(False)
        self.trunk.eval()
        self.head.eval()
        self.ready = True
        self.provenance = {"init_seed": seed, "warmup_steps": warmup_steps}

    def _warmup(self, images: torch.Tensor, steps: int) -> None:
        c = self.config.in_channels
        probe = nn.Linear(self.config.identity_dim, 2 * c)
        opt = torch.optim.Adam(
            list(self.trunk.parameters()) + list(probe.parameters()), lr=1e-3)
        flat = images.flatten(2)
        target = torch.cat([flat.mean(dim=2), flat.std(dim=2)], dim=1)
        for _ in range(steps):
            opt.zero_grad()
            pred = probe(self.trunk(self._fit(images)))
            loss = F.mse_loss(pred, target)
            loss.backward()
            opt.step()

    def load(self, path: str | Path) -> None:
        state = torch.load(path, map_location="cpu", weights_only=False)
        if state.get("format") != CHECKPOINT_FORMAT:
            raise ValidationError(
                f"{path}: not a backbone checkpoint (format={state.get('format')!r})")
        self.config = BackboneConfig.from_dict(state["config"])
        self.trunk = _Trunk(self.config)
        self.head = _BeautyHead(self.config)
        self.trunk.load_state_dict(state["trunk"])
        self.head.load_state_dict(state["head"])
        for p in self.trunk.parameters():
            p.requires_grad_(False)
        self.trunk.eval()
        self.head.eval()
        self.ready = state["ready"]
        self.finetuned = state["finetuned"]
        self.provenance = state.get("provenance", {})

    def save(self, path: str | Path) -> None:
        torch.save({
            "format": CHECKPOINT_FORMAT,
            "config": self.config.to_dict(),
            "trunk": self.trunk.state_dict(),
            "head": self.head.state_dict(),
            "ready": self.ready,
            "finetuned": self.finetuned,
            "provenance": self.provenance,
        }, path)

    @classmethod
    def from_checkpoint(cls, path: str | Path) -> "PerceptionBackbone":
        backbone = cls()
        backbone.load(path)
        return backbone

    # -- feature extraction --------------------------------------------------

    def _require_ready(self) -> None:
        if not self.ready:
            raise NotReadyError(
                "backbone weights are uninitialized; call initialize() or load() "
                "before extracting features")

    def _fit(self, image: torch.Tensor) -> torch.Tensor:
        if image.dim() == 3:
            image = image.unsqueeze(0)
        if tuple(image.shape[-2:]) != self.config.input_size:
            image = F.interpolate(image, size=self.config.input_size,
                                  mode="bilinear", align_corners=False)
        return image

    def extract_features(self, image: torch.Tensor) -> PerceptionFeatures:
        """Identity, beauty, and raw score from a single forward pass."""
        self._require_ready()
        identity = self.trunk(self._fit(image))
        beauty, score = self.head(identity)
        return PerceptionFeatures(identity=identity, beauty=beauty, score=score)

    def identity_features(self, image: torch.Tensor) -> torch.Tensor:
        return self.extract_features(image).identity

    def beauty_features(self, image: torch.Tensor) -> torch.Tensor:
        return self.extract_features(image).beauty

    def trunk_feature_maps(self, image: torch.Tensor) -> list[torch.Tensor]:
        """Pre-activation conv maps, the default deep-feature tap for
        perceptual distances."""
        self._require_ready()
        return self.trunk.stage_maps(self._fit(image))

    def predict_score(self, image: torch.Tensor) -> torch.Tensor:
        """Raw beauty score(s); clamp with ``clamp_score`` for display only.

        Inference-only: runs without autograd. Training paths that need
        gradients through scores use ``extract_features`` directly.
        """
        self._require_ready()
        if not self.finetuned:
            raise NotReadyError(
                "beauty head has not been fine-tuned; scores would be meaningless")
        with torch.no_grad():
            return self.extract_features(image).score

    # -- freezing ------------------------------------------------------------

    def frozen_parameters(self):
        return self.trunk.parameters()

    def trainable_parameters(self):
        return self.head.parameters()

    def frozen_checksum(self) -> str:
        """Digest over all frozen parameter bytes; stable iff weights untouched."""
        h = hashlib.sha256()
        for p in self.trunk.parameters():
            h.update(p.detach().cpu().contiguous().numpy().tobytes())
        return h.hexdigest()

    # -- fine-tuning ---------------------------------------------------------

    def finetune_beauty_head(self, train_manifest, config: FinetuneConfig | None = None,
                             test_manifest=None) -> dict:
        """Fit FC2 + scorer on a scored manifest; frozen layers never move.

        Returns a log dict with per-epoch train MAE (and test MAE when a test
        manifest is given). Gradients are confined to the head: the fine-tune
        optimizer only ever sees head parameters, and frozen parameters carry
        no grad at all.
        """
        from .data.loader import BatchSpec, iterate_batches

        self._require_ready()
        config = config or FinetuneConfig()
        if not train_manifest.has_scores():
            raise ValidationError("fine-tuning needs a regression manifest with beauty scores")

        image_size = config.image_size or self.config.input_size
        spec = BatchSpec(batch_size=config.batch_size, image_size=image_size,
                         shuffle_seed=config.seed)
        n = len(train_manifest)
        batches_per_epoch = max(1, (n + config.batch_size - 1) // config.batch_size)

        # The trainer freezes every backbone parameter while translation runs;
        # undo that for the head here or the optimizer below would be a no-op.
        for p in self.head.parameters():
            p.requires_grad_(True)
        opt = torch.optim.Adam(self.head.parameters(), lr=config.learning_rate,
                               betas=config.betas)
        log: dict = {"epochs": [], "config": asdict(config)}
        start = time.monotonic()
        self.head.train()
        stream = iterate_batches(train_manifest, spec, with_scores=True)
        for epoch in range(config.epochs):
            abs_err_sum, count = 0.0, 0
            for _ in range(batches_per_epoch):
                images, scores = next(stream)
                opt.zero_grad()
                pred = self.extract_features(images).score
                loss = F.l1_loss(pred, scores)
                loss.backward()
                opt.step()
                abs_err_sum += float(loss.detach()) * len(scores)
                count += len(scores)
            entry = {"epoch": epoch, "train_mae": abs_err_sum / count}
            if test_manifest is not None:
                entry["test_mae"] = self.evaluate_mae(test_manifest, image_size)
            log["epochs"].append(entry)
        self.head.eval()
        self.finetuned = True
        log["seconds"] = time.monotonic() - start
        self.provenance["finetune"] = {"entries": len(train_manifest),
                                       "epochs": config.epochs}
        return log

    def evaluate_mae(self, manifest, image_size: tuple[int, int] | None = None) -> float:
        """Mean absolute error of raw scores over a scored manifest."""
        from .data.loader import BatchSpec, iterate_batches

        if not manifest.has_scores():
            raise ValidationError("MAE evaluation needs a manifest with beauty scores")
        image_size = image_size or self.config.input_size
        spec = BatchSpec(batch_size=32, image_size=image_size, shuffle_seed=0)
        total, count = 0.0, 0
        with torch.no_grad():
            for images, scores in iterate_batches(manifest, spec, with_scores=True,
                                                  epochs=1, shuffle=False,
                                                  pad_final=False):
                pred = self.extract_features(images).score
                total += float((pred - scores).abs().sum())
                count += len(scores)
        return total / count
