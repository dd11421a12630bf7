"""Alternating min-max training of the translation networks.

Each iteration performs one discriminator update on (real reference batch,
detached beautified batch), then one generator-side update of the full
weighted objective. The perception backbone is a frozen bystander: gradients
flow through it into the generator, never into it.

Determinism contract: given the same config, manifests, and seed, two runs
produce bitwise-identical loss logs, and resuming from a checkpoint matches
the uninterrupted run step for step.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, asdict, replace
from pathlib import Path
from typing import Callable

import torch

from .data.loader import BatchSpec, Cursor, load_batch
from .data.manifest import DatasetManifest
from .errors import ConfigurationError, NotReadyError, TrainingDiverged
from .losses import LossBundle, LossWeights, combine_terms, reconstruction_loss, \
    identity_loss, beauty_loss, perceptual_loss
from .models.discriminator import DiscriminatorConfig, MultiScaleDiscriminator, \
    lsgan_d_loss, lsgan_g_loss
from .models.generator import Generator, GeneratorConfig
from .perception import PerceptionBackbone

CHECKPOINT_FORMAT = "beautykit-train/1"

ABLATABLE_TERMS = ("identity", "beauty", "perceptual")


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of a training run."""

    batch_size: int = 4
    total_iterations: int = 360_000
    learning_rate: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.999
    lr_decay_factor: float = 0.5
    lr_decay_interval: int = 100_000
    image_size: tuple[int, int] = (128, 128)
    seed: int = 0
    weights: LossWeights = field(default_factory=LossWeights)
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    discriminator: DiscriminatorConfig = field(default_factory=DiscriminatorConfig)
    adversarial_mode: str = "lsgan"
    # Which image the beautified output's beauty features are pulled toward.
    beauty_target: str = "reference"  # or "source"
    checkpoint_interval: int = 10_000
    allow_stub_backbone: bool = False

    def __post_init__(self):
        if self.beauty_target not in ("reference", "source"):
            raise ConfigurationError(
                f"beauty_target must be 'reference' or 'source', got {self.beauty_target!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["weights"] = self.weights.to_dict()
        d["generator"] = self.generator.to_dict()
        d["discriminator"] = self.discriminator.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        d["weights"] = LossWeights.from_dict(d.get("weights", {}))
        d["generator"] = GeneratorConfig(**d.get("generator", {}))
        d["discriminator"] = DiscriminatorConfig(**d.get("discriminator", {}))
        d["image_size"] = tuple(d.get("image_size", (128, 128)))
        return cls(**d)


def learning_rate_at(iteration: int, base: float = 1e-4, factor: float = 0.5,
                     interval: int = 100_000) -> float:
    """Stepwise-decayed learning rate: base * factor ** (iteration // interval)."""
    return base * factor ** (iteration // interval)


def ablate(weights: LossWeights, term: str) -> LossWeights:
    """Zero out one feature-loss term (identity, beauty, or perceptual)."""
    if term not in ABLATABLE_TERMS:
        raise ConfigurationError(
            f"unknown ablation {term!r}; choose from {ABLATABLE_TERMS}")
    return replace(weights, **{term: 0.0})


@dataclass
class TrainState:
    """Everything mutable during a run; checkpoints snapshot all of it."""

    config: TrainConfig
    generator: Generator
    discriminator: MultiScaleDiscriminator
    gen_opt: torch.optim.Adam
    dis_opt: torch.optim.Adam
    backbone: PerceptionBackbone
    feature_net: Callable
    iteration: int = 0
    cursor_a: Cursor = field(default_factory=Cursor)
    cursor_b: Cursor = field(default_factory=Cursor)


def init_state(config: TrainConfig, backbone: PerceptionBackbone,
               feature_net: Callable | None = None) -> TrainState:
    """Seeded construction of models and optimizers."""
    if not backbone.ready:
        raise NotReadyError("perception backbone must be initialized before training")
    if not backbone.finetuned and not config.allow_stub_backbone:
        raise NotReadyError(
            "perception backbone is not fine-tuned; pass allow_stub_backbone=True "
            "to train against raw features")
    min_size = config.discriminator.min_input_size
    if min(config.image_size) < min_size:
        raise ConfigurationError(
            f"image size {config.image_size} below the discriminator minimum "
            f"{min_size}x{min_size}")

    with torch.random.fork_rng():
        torch.manual_seed(config.seed)
        generator = Generator(config.generator)
        discriminator = MultiScaleDiscriminator(config.discriminator)
        generator.init_weights()
        discriminator.init_weights()

    betas = (config.beta1, config.beta2)
    gen_opt = torch.optim.Adam(generator.parameters(), lr=config.learning_rate, betas=betas)
    dis_opt = torch.optim.Adam(discriminator.parameters(), lr=config.learning_rate, betas=betas)

    # The backbone is read-only during the run; gradients still flow through it.
    for p in backbone.trunk.parameters():
        p.requires_grad_(False)
    for p in backbone.head.parameters():
        p.requires_grad_(False)

    return TrainState(
        config=config,
        generator=generator,
        discriminator=discriminator,
        gen_opt=gen_opt,
        dis_opt=dis_opt,
        backbone=backbone,
        feature_net=feature_net or backbone.trunk_feature_maps,
    )


def _set_lr(optimizer: torch.optim.Optimizer, lr: float) -> None:
    for group in optimizer.param_groups:
        group["lr"] = lr


def _term(weight: float, fn, *args) -> torch.Tensor:
    # Zero-weight terms are still evaluated for the log, but outside the
    # graph, so their gradient contribution is exactly absent.
    if weight == 0.0:
        with torch.no_grad():
            return fn(*args)
    return fn(*args)


def train_step(state: TrainState, batch_a: torch.Tensor,
               batch_b: torch.Tensor) -> tuple[LossBundle, float]:
    """One alternating update: discriminator first, then the generator side.

    Returns the generator-side loss bundle and the discriminator loss value.
    Raises TrainingDiverged with the offending values if anything goes
    non-finite.
    """
    config = state.config
    w = config.weights
    gen, dis = state.generator, state.discriminator

    lr = learning_rate_at(state.iteration, config.learning_rate,
                          config.lr_decay_factor, config.lr_decay_interval)
    _set_lr(state.gen_opt, lr)
    _set_lr(state.dis_opt, lr)

    content_a = gen.encode_content(batch_a)
    style_a = gen.encode_style(batch_a)
    content_b = gen.encode_content(batch_b)
    style_b = gen.encode_style(batch_b)

    recon_a = gen.decode(content_a, style_a)
    recon_b = gen.decode(content_b, style_b)
    # Training-time beautification uses the reference style code unmixed.
    beautified = gen.decode(content_a, style_b)

    # -- discriminator update -------------------------------------------------
    state.dis_opt.zero_grad()
    d_loss = lsgan_d_loss(dis.judge(batch_b), dis.judge(beautified.detach()),
                          mode=config.adversarial_mode)
    d_loss.backward()
    state.dis_opt.step()

    # -- generator-side update ------------------------------------------------
    bt_target = batch_b if config.beauty_target == "reference" else batch_a
    terms = {
        "rec_A": _term(w.reconstruction, reconstruction_loss, recon_a, batch_a),
        "rec_B": _term(w.reconstruction, reconstruction_loss, recon_b, batch_b),
        "id_A": _term(w.identity, identity_loss, recon_a, batch_a, state.backbone),
        "id_B": _term(w.identity, identity_loss, recon_b, batch_b, state.backbone),
        "id_AB": _term(w.identity, identity_loss, beautified, batch_a, state.backbone),
        "bt_A": _term(w.beauty, beauty_loss, recon_a, batch_a, state.backbone),
        "bt_B": _term(w.beauty, beauty_loss, recon_b, batch_b, state.backbone),
        "bt_AB": _term(w.beauty, beauty_loss, beautified, bt_target, state.backbone),
        "gan_AB": _term(w.adversarial, lambda img: lsgan_g_loss(
            dis.judge(img), mode=config.adversarial_mode), beautified),
        "perc_AB": _term(w.perceptual, perceptual_loss, beautified, batch_b,
                         state.feature_net),
    }
    state.gen_opt.zero_grad()
    total = combine_terms(w, terms)
    values = {k: float(v.detach()) for k, v in terms.items()}
    if not all(math.isfinite(v) for v in values.values()) \
            or not math.isfinite(float(total.detach())):
        raise TrainingDiverged(
            f"non-finite loss at iteration {state.iteration}: "
            + ", ".join(f"{k}={v}" for k, v in values.items() if not math.isfinite(v)),
            terms=values)
    total.backward()
    state.gen_opt.step()

    state.iteration += 1
    return LossBundle.from_components(w, **values), float(d_loss.detach())


def save_checkpoint(state: TrainState, path: str | Path,
                    manifest_digests: dict | None = None) -> None:
    """Snapshot weights, optimizers, cursors, config, and RNG state."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save({
        "format": CHECKPOINT_FORMAT,
        "iteration": state.iteration,
        "config": state.config.to_dict(),
        "models": {
            "generator": state.generator.state_dict(),
            "discriminator": state.discriminator.state_dict(),
        },
        "optimizers": {
            "generator": state.gen_opt.state_dict(),
            "discriminator": state.dis_opt.state_dict(),
        },
        "cursors": {"a": state.cursor_a.to_dict(), "b": state.cursor_b.to_dict()},
        "manifest_digests": manifest_digests or {},
        "torch_rng": torch.get_rng_state(),
    }, path)


def load_checkpoint(path: str | Path, backbone: PerceptionBackbone,
                    feature_net: Callable | None = None,
                    total_iterations: int | None = None) -> TrainState:
    """Rebuild a TrainState from a checkpoint; optionally extend the horizon."""
    payload = torch.load(path, map_location="cpu", weights_only=False)
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ConfigurationError(
            f"{path}: not a training checkpoint (format={payload.get('format')!r})")
    config = TrainConfig.from_dict(payload["config"])
    if total_iterations is not None:
        config = replace(config, total_iterations=total_iterations)
    state = init_state(config, backbone, feature_net)
    state.generator.load_state_dict(payload["models"]["generator"])
    state.discriminator.load_state_dict(payload["models"]["discriminator"])
    state.gen_opt.load_state_dict(payload["optimizers"]["generator"])
    state.dis_opt.load_state_dict(payload["optimizers"]["discriminator"])
    state.iteration = payload["iteration"]
    state.cursor_a = Cursor.from_dict(payload["cursors"]["a"])
    state.cursor_b = Cursor.from_dict(payload["cursors"]["b"])
    torch.set_rng_state(payload["torch_rng"])
    return state


def run_training(
    config: TrainConfig,
    manifest_a: DatasetManifest,
    manifest_b: DatasetManifest,
    backbone: PerceptionBackbone,
    out_dir: str | Path | None = None,
    callbacks: list[Callable[[dict], None]] | None = None,
    resume: str | Path | None = None,
    feature_net: Callable | None = None,
) -> tuple[TrainState, list[dict]]:
    """Drive train_step over the manifests until total_iterations.

    Writes ``train_log.jsonl`` (one record per iteration) and periodic +
    final checkpoints under ``out_dir`` when given. Callbacks receive a copy
    of each log record.
    """
    if resume is not None:
        state = load_checkpoint(resume, backbone, feature_net,
                                total_iterations=config.total_iterations)
    else:
        state = init_state(config, backbone, feature_net)
    config = state.config

    spec_a = BatchSpec(batch_size=config.batch_size, image_size=config.image_size,
                       shuffle_seed=config.seed)
    spec_b = BatchSpec(batch_size=config.batch_size, image_size=config.image_size,
                       shuffle_seed=config.seed + 1)
    digests = {"manifest_a": manifest_a.digest(), "manifest_b": manifest_b.digest()}

    out_dir = Path(out_dir) if out_dir else None
    log_fh = None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
        log_fh = (out_dir / "train_log.jsonl").open("a", encoding="utf-8")

    records: list[dict] = []
    start = time.monotonic()
    try:
        while state.iteration < config.total_iterations:
            batch_a, state.cursor_a = load_batch(manifest_a, spec_a, state.cursor_a)
            batch_b, state.cursor_b = load_batch(manifest_b, spec_b, state.cursor_b)
            iteration = state.iteration
            bundle, d_loss = train_step(state, batch_a, batch_b)
            record = {
                "iteration": iteration,
                "lr": learning_rate_at(iteration, config.learning_rate,
                                       config.lr_decay_factor, config.lr_decay_interval),
                "d_loss": d_loss,
                **bundle.to_dict(),
            }
            records.append(record)
            if log_fh:
                log_fh.write(json.dumps(record) + "\n")
            for cb in callbacks or ():
                cb(dict(record))
            if out_dir and config.checkpoint_interval > 0 \
                    and state.iteration % config.checkpoint_interval == 0:
                save_checkpoint(state, out_dir / f"ckpt_{state.iteration:08d}.pt", digests)
        if out_dir:
            save_checkpoint(state, out_dir / "ckpt_final.pt", digests)
    finally:
        if log_fh:
            log_fh.close()
    if out_dir:
        meta = {
            "config": config.to_dict(),
            "data": digests,
            "iterations": state.iteration,
            "seconds": time.monotonic() - start,
        }
        (out_dir / "run_meta.json").write_text(json.dumps(meta, indent=2))
    return state, records
