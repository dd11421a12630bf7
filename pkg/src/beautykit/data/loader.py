"""Manifest-driven batch loading with deterministic order and wraparound.

Images are decoded with PIL, resized, and normalized to [-1, 1] float32
tensors in (N, C, H, W) layout. Batch order is a pure function of
(shuffle seed, epoch index), so two loaders with the same seed deliver
bitwise-identical sequences and a cursor fully captures iteration state.
"""

from __future__ import annotations

import logging
import queue
import threading
from dataclasses import dataclass
from typing import Iterator

import numpy as np
import torch
from PIL import Image

from ..errors import ValidationError
from .manifest import DatasetManifest

log = logging.getLogger(__name__)

# Two stride-2 downsamplings in the content encoder require /4 divisibility.
SIZE_MULTIPLE = 4


@dataclass(frozen=True)
class BatchSpec:
    """How batches are assembled: size, target resolution, shuffle seed."""

    batch_size: int
    image_size: tuple[int, int] = (128, 128)
    shuffle_seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValidationError(f"batch_size must be >= 1, got {self.batch_size}")
        h, w = self.image_size
        if h % SIZE_MULTIPLE or w % SIZE_MULTIPLE:
            raise ValidationError(
                f"image size must be divisible by {SIZE_MULTIPLE}, got {h}x{w}")


@dataclass(frozen=True)
class Cursor:
    """Iteration state: which epoch and how far into its permutation."""

    epoch: int = 0
    position: int = 0

    def to_dict(self) -> dict:
        return {"epoch": self.epoch, "position": self.position}

    @classmethod
    def from_dict(cls, d: dict) -> "Cursor":
        return cls(epoch=d["epoch"], position=d["position"])


def normalize_image(array: np.ndarray) -> torch.Tensor:
    """uint8 HWC image -> float32 CHW tensor in [-1, 1]."""
    chw = np.transpose(array.astype(np.float32), (2, 0, 1))
    return torch.from_numpy(chw / 127.5 - 1.0)


def denormalize_image(tensor: torch.Tensor) -> np.ndarray:
    """float CHW tensor in [-1, 1] -> uint8 HWC array."""
    array = (tensor.detach().cpu().numpy() + 1.0) * 127.5
    array = np.clip(np.rint(array), 0, 255).astype(np.uint8)
    return np.transpose(array, (1, 2, 0))


def load_image(path: str, image_size: tuple[int, int]) -> torch.Tensor:
    """Decode one image to a normalized tensor at the requested (H, W)."""
    with Image.open(path) as img:
        img = img.convert("RGB")
        h, w = image_size
        if img.size != (w, h):
            img = img.resize((w, h), Image.BILINEAR)
        return normalize_image(np.asarray(img))


def epoch_order(n: int, seed: int, epoch: int, shuffle: bool = True) -> np.ndarray:
    """Deterministic permutation of [0, n) for a given (seed, epoch)."""
    if not shuffle:
        return np.arange(n)
    return np.random.default_rng([seed, epoch]).permutation(n)


def load_batch(
    manifest: DatasetManifest,
    spec: BatchSpec,
    cursor: Cursor = Cursor(),
    shuffle: bool = True,
    on_error: str = "fail",
) -> tuple[torch.Tensor, Cursor]:
    """Assemble the next batch, wrapping into the following epoch when exhausted.

    The batch dimension is always exactly ``spec.batch_size``. Undecodable
    images either abort (``on_error="fail"``) or are skipped with a warning
    (``on_error="skip"``).
    """
    images, scores, cursor = _collect(manifest, spec, cursor, spec.batch_size,
                                      shuffle, on_error, with_scores=False)
    return torch.stack(images), cursor


def _collect(manifest, spec, cursor, count, shuffle, on_error, with_scores):
    if len(manifest) == 0:
        raise ValidationError("cannot load batches from an empty manifest")
    if on_error not in ("fail", "skip"):
        raise ValidationError(f"on_error must be 'fail' or 'skip', got {on_error!r}")
    images: list[torch.Tensor] = []
    scores: list[float] = []
    epoch, pos = cursor.epoch, cursor.position
    order = epoch_order(len(manifest), spec.shuffle_seed, epoch, shuffle)
    guard = 0
    while len(images) < count:
        if pos >= len(order):
            epoch, pos = epoch + 1, 0
            order = epoch_order(len(manifest), spec.shuffle_seed, epoch, shuffle)
        entry = manifest[int(order[pos])]
        pos += 1
        try:
            images.append(load_image(entry.path, spec.image_size))
            if with_scores:
                scores.append(entry.beauty_score)
        except (OSError, ValueError) as exc:
            if on_error == "fail":
                raise ValidationError(f"{entry.path}: cannot decode image ({exc})") from exc
            log.warning("skipping undecodable image %s (%s)", entry.path, exc)
            guard += 1
            if guard > 2 * len(manifest):
                raise ValidationError(
                    "no decodable images found while assembling a batch") from exc
    return images, scores, Cursor(epoch=epoch, position=pos)


def iterate_batches(
    manifest: DatasetManifest,
    spec: BatchSpec,
    with_scores: bool = False,
    epochs: int | None = None,
    shuffle: bool = True,
    pad_final: bool = True,
    on_error: str = "fail",
    start: Cursor = Cursor(),
) -> Iterator:
    """Yield batches forever (``epochs=None``) or for a fixed number of epochs.

    With ``pad_final=False`` the last batch of a bounded run may be smaller
    than ``spec.batch_size`` instead of wrapping around; this is the
    evaluation mode where each entry appears exactly once per epoch.
    """
    if with_scores and not manifest.has_scores():
        raise ValidationError("with_scores requires a regression manifest")
    cursor = start
    while True:
        if epochs is not None and cursor.epoch >= epochs:
            return
        if pad_final:
            count = spec.batch_size
        else:
            remaining = len(manifest) - cursor.position
            count = min(spec.batch_size, remaining)
            if count <= 0:
                cursor = Cursor(epoch=cursor.epoch + 1, position=0)
                continue
        images, scores, cursor = _collect(manifest, spec, cursor, count,
                                          shuffle, on_error, with_scores)
        batch = torch.stack(images)
        if with_scores:
            yield batch, torch.tensor(scores, dtype=torch.float32)
        else:
            yield batch


def prefetch(batches: Iterator, depth: int = 2) -> Iterator:
    """Run a batch iterator in a background thread, preserving order exactly.

    A single worker fills a bounded FIFO queue, so the delivered sequence is
    identical to serial iteration.
    """
    q: queue.Queue = queue.Queue(maxsize=depth)
    sentinel = object()

    def worker():
        try:
            for item in batches:
                q.put(item)
            q.put(sentinel)
        except BaseException as exc:  # surfaced on the consumer side
            q.put(exc)

    thread = threading.Thread(target=worker, daemon=True)
    thread.start()
    while True:
        item = q.get()
        if item is sentinel:
            return
        if isinstance(item, BaseException):
            raise item
        yield item
