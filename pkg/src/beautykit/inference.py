"""Inference engine: weighted style mixing and beautification sequences.

A beautified output is decoded from the target's content code and the convex
combination w1 * style(target) + w2 * style(reference). Sweeping w2 from 0
to 1 produces a sequence from pure reconstruction to full style transfer;
w2 = 0 reuses the exact reconstruction path, so that frame is the target's
auto-encode, bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .data.loader import BatchSpec, denormalize_image, iterate_batches, load_image
from .data.manifest import DatasetManifest
from .errors import ConfigurationError, ValidationError
from .models.generator import Generator
from .perception import PerceptionBackbone
from .training import CHECKPOINT_FORMAT, TrainConfig

WEIGHT_SUM_TOL = 1e-6


def mix_styles(style_a: torch.Tensor, style_b: torch.Tensor,
               w1: float, w2: float) -> torch.Tensor:
    """Convex combination of two style codes.

    Requires w1 + w2 = 1 with both weights in [0, 1]. The endpoints return
    the corresponding input code unchanged (bitwise), so w2 = 0 degenerates
    into reconstruction and w2 = 1 into full style transfer.
    """
    if not (0.0 <= w1 <= 1.0 and 0.0 <= w2 <= 1.0):
        raise ValidationError(
            f"style weights must lie in [0, 1], got w1={w1}, w2={w2}")
    if abs(w1 + w2 - 1.0) > WEIGHT_SUM_TOL:
        raise ValidationError(
            f"style weights must satisfy w1 + w2 = 1, got w1={w1}, w2={w2}")
    if style_a.shape != style_b.shape:
        raise ValidationError(
            f"style code shapes differ: {tuple(style_a.shape)} vs {tuple(style_b.shape)}")
    if w2 == 0.0:
        return style_a.clone()
    if w2 == 1.0:
        return style_b.clone()
    return w1 * style_a + w2 * style_b


def weight_schedule(steps: int) -> list[float]:
    """Default w2 ladder: uniform spacing over [0, 1] inclusive.

    A single step jumps straight to full transfer.
    """
    if steps < 1:
        raise ValidationError(f"steps must be >= 1, got {steps}")
    if steps == 1:
        return [1.0]
    return [i / (steps - 1) for i in range(steps)]


def transfer_fraction_to_weight(q_percent: float) -> float:
    """Map a 0-100 'percent toward the reference' knob onto w2."""
    if not 0 <= q_percent <= 100:
        raise ValidationError(f"percent must be in [0, 100], got {q_percent}")
    return q_percent / 100.0


@dataclass(frozen=True)
class BeautifyRequest:
    """One beautification job: target image, reference image, weight ladder."""

    target: torch.Tensor
    reference: torch.Tensor
    w2_values: tuple[float, ...] = (1.0,)
    score_outputs: bool = False

    def __post_init__(self):
        if not self.w2_values:
            raise ValidationError("at least one style weight is required")
        for w2 in self.w2_values:
            if not 0.0 <= w2 <= 1.0:
                raise ValidationError(f"w2 must lie in [0, 1], got {w2}")
        if len(self.w2_values) > 1:
            diffs = np.diff(self.w2_values)
            if not (diffs > 0).all():
                raise ValidationError(
                    f"w2 ladder must be strictly increasing, got {self.w2_values}")

    @classmethod
    def from_pair(cls, target, reference, w1: float, w2: float,
                  score_outputs: bool = False) -> "BeautifyRequest":
        if not (0.0 <= w1 <= 1.0 and 0.0 <= w2 <= 1.0) \
                or abs(w1 + w2 - 1.0) > WEIGHT_SUM_TOL:
            raise ValidationError(
                f"weights must satisfy w1 + w2 = 1 with both in [0, 1], "
                f"got w1={w1}, w2={w2}")
        return cls(target=target, reference=reference, w2_values=(w2,),
                   score_outputs=score_outputs)


@dataclass(frozen=True)
class Frame:
    w2: float
    image: torch.Tensor
    score: float | None = None


@dataclass(frozen=True)
class BeautifySequence:
    frames: tuple[Frame, ...]

    def __iter__(self):
        return iter(self.frames)

    def __len__(self):
        return len(self.frames)

    def images(self) -> list[torch.Tensor]:
        return [f.image for f in self.frames]


class BeautifyEngine:
    """Loaded generator (+ optional scorer) serving beautification requests.

    Forward passes are read-only over the weights, so one engine may serve
    concurrent requests.
    """

    def __init__(self, generator: Generator, backbone: PerceptionBackbone | None = None,
                 image_size: tuple[int, int] | None = None):
        self.generator = generator
        self.generator.eval()
        self.backbone = backbone
        self.image_size = image_size

    @classmethod
    def from_checkpoint(cls, train_checkpoint: str | Path,
                        backbone_checkpoint: str | Path | None = None) -> "BeautifyEngine":
        payload = torch.load(train_checkpoint, map_location="cpu", weights_only=False)
        if payload.get("format") != CHECKPOINT_FORMAT:
            raise ConfigurationError(
                f"{train_checkpoint}: not a training checkpoint "
                f"(format={payload.get('format')!r})")
        config = TrainConfig.from_dict(payload["config"])
        generator = Generator(config.generator)
        generator.load_state_dict(payload["models"]["generator"])
        backbone = None
        if backbone_checkpoint is not None:
            backbone = PerceptionBackbone.from_checkpoint(backbone_checkpoint)
        return cls(generator, backbone, image_size=tuple(config.image_size))

    def _as_batch(self, image: torch.Tensor) -> torch.Tensor:
        return image.unsqueeze(0) if image.dim() == 3 else image

    def score(self, image: torch.Tensor) -> float:
        if self.backbone is None:
            raise ConfigurationError("no perception backbone attached; cannot score")
        with torch.no_grad():
            return float(self.backbone.predict_score(self._as_batch(image))[0])

    def _iter_frames(self, request: BeautifyRequest):
        """Lazily decode frames; the two inputs are encoded exactly once."""
        gen = self.generator
        target = self._as_batch(request.target)
        reference = self._as_batch(request.reference)
        if request.score_outputs and self.backbone is None:
            raise ConfigurationError(
                "scores requested but no perception backbone is attached")
        with torch.no_grad():
            content = gen.encode_content(target)
            style_target = gen.encode_style(target)
            style_reference = gen.encode_style(reference)
            for w2 in request.w2_values:
                mixed = mix_styles(style_target, style_reference, 1.0 - w2, w2)
                image = gen.decode(content, mixed)[0]
                score = None
                if request.score_outputs:
                    score = float(self.backbone.predict_score(image.unsqueeze(0))[0])
                yield Frame(w2=w2, image=image, score=score)

    def beautify(self, request: BeautifyRequest) -> BeautifySequence:
        """Decode one frame per requested weight, sharing the encodings."""
        return BeautifySequence(frames=tuple(self._iter_frames(request)))

    def beautify_to_dir(self, request: BeautifyRequest, out_dir: str | Path,
                        prefix: str = "frame") -> dict:
        """Stream frames to disk one decode at a time; returns the metadata record."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        meta: dict = {"frames": []}
        for i, frame in enumerate(self._iter_frames(request)):
            name = f"{prefix}_{i:03d}_w{frame.w2:.2f}.png"
            save_image(frame.image, out_dir / name)
            meta["frames"].append({"index": i, "w2": frame.w2, "file": name,
                                   "score": frame.score})
        (out_dir / f"{prefix}_metadata.json").write_text(json.dumps(meta, indent=2))
        return meta

    def find_weight_for_score(self, target: torch.Tensor, reference: torch.Tensor,
                              score_target: float, tol: float = 0.05,
                              max_steps: int = 12) -> tuple[float, float]:
        """Optional bisection mode: search w2 whose output score hits a target.

        Assumes the score is monotone along the weight ladder, which is an
        empirical property of a trained model, not a guarantee. Returns
        (w2, achieved score).
        """
        lo, hi = 0.0, 1.0
        score_lo = self._frame_score(target, reference, lo)
        score_hi = self._frame_score(target, reference, hi)
        increasing = score_hi >= score_lo
        for _ in range(max_steps):
            mid = (lo + hi) / 2
            score_mid = self._frame_score(target, reference, mid)
            if abs(score_mid - score_target) <= tol:
                return mid, score_mid
            if (score_mid < score_target) == increasing:
                lo = mid
            else:
                hi = mid
        mid = (lo + hi) / 2
        return mid, self._frame_score(target, reference, mid)

    def _frame_score(self, target, reference, w2: float) -> float:
        request = BeautifyRequest(target=target, reference=reference,
                                  w2_values=(w2,), score_outputs=True)
        return self.beautify(request).frames[0].score


def gain_percent(mean_before: float, mean_after: float) -> float:
    """Relative improvement of the mean score, in percent."""
    if mean_before == 0:
        raise ValidationError("mean score before beautification is zero; gain undefined")
    return 100.0 * (mean_after - mean_before) / mean_before


def evaluate_gain(originals: DatasetManifest, beautified: list[torch.Tensor],
                  backbone: PerceptionBackbone) -> tuple[float, float, float]:
    """Mean raw score before and after beautification, plus the percent gain.

    ``beautified`` must hold exactly one output per manifest entry, in order.
    """
    if len(beautified) != len(originals):
        raise ValidationError(
            f"{len(originals)} originals but {len(beautified)} beautified images")
    h, w = backbone.config.input_size
    spec = BatchSpec(batch_size=16, image_size=(h, w), shuffle_seed=0)
    before_scores: list[float] = []
    with torch.no_grad():
        for batch in iterate_batches(originals, spec, epochs=1, shuffle=False,
                                     pad_final=False):
            before_scores.extend(backbone.predict_score(batch).tolist())
        after_scores = [float(backbone.predict_score(img.unsqueeze(0))[0])
                        for img in beautified]
    mean_before = float(np.mean(before_scores))
    mean_after = float(np.mean(after_scores))
    return mean_before, mean_after, gain_percent(mean_before, mean_after)


def compose_strip(images: list[torch.Tensor], gap: int = 2) -> np.ndarray:
    """Lay frames out horizontally into one uint8 image, left to right."""
    if not images:
        raise ValidationError("cannot compose an empty strip")
    arrays = [denormalize_image(img) for img in images]
    h = max(a.shape[0] for a in arrays)
    c = arrays[0].shape[2]
    padded = []
    for a in arrays:
        if a.shape[0] < h:
            pad = np.zeros((h - a.shape[0], a.shape[1], c), dtype=np.uint8)
            a = np.concatenate([a, pad], axis=0)
        padded.append(a)
    spacer = np.full((h, gap, c), 255, dtype=np.uint8)
    parts: list[np.ndarray] = []
    for i, a in enumerate(padded):
        if i:
            parts.append(spacer)
        parts.append(a)
    return np.concatenate(parts, axis=1)


def save_image(image: torch.Tensor, path: str | Path) -> None:
    """Write a [-1, 1] CHW tensor to disk as lossless PNG."""
    Image.fromarray(denormalize_image(image)).save(path, format="PNG")


def open_image(path: str | Path, image_size: tuple[int, int]) -> torch.Tensor:
    """Load an image file as a normalized CHW tensor at the given size."""
    return load_image(str(path), image_size)
