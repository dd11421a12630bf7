"""Shared fixtures: toy corpora, a tiny fine-tuned backbone, and a trained
miniature checkpoint that the engine/service/CLI tests all reuse.

Everything expensive is session-scoped and written to disk once; consumers
load their own copies so mutation never leaks between tests.
"""

from __future__ import annotations

import numpy as np
import pytest
import torch
from PIL import Image

from beautykit import (
    DatasetManifest,
    DiscriminatorConfig,
    GeneratorConfig,
    ManifestEntry,
    PerceptionBackbone,
    TrainConfig,
)
from beautykit.data.splits import build_regression_split
from beautykit.perception import BackboneConfig, FinetuneConfig
from beautykit.training import run_training

TINY_BACKBONE = BackboneConfig(
    input_size=(32, 32), trunk_dims=(8, 16, 16, 16), identity_dim=64, beauty_dim=16,
)

TINY_GENERATOR = GeneratorConfig(
    base_dim=4, style_dim=8, content_res_blocks=1, decoder_res_blocks=1, mlp_hidden=16,
)

TINY_DISCRIMINATOR = DiscriminatorConfig(base_dim=4, n_layers=2, n_scales=2)


def write_image(path, rng, size=32, kind="texture"):
    """Structured random image: blobs and gradients, not white noise."""
    yy, xx = np.mgrid[0:size, 0:size] / max(size - 1, 1)
    cx, cy = rng.uniform(0.2, 0.8, size=2)
    r = rng.uniform(0.15, 0.4)
    blob = np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / r ** 2)
    img = np.stack([
        0.5 + 0.5 * np.sin(2 * np.pi * (xx * rng.uniform(0.5, 2.0) + rng.uniform())),
        blob,
        yy * rng.uniform(0.4, 1.0) + rng.uniform(0, 0.3),
    ], axis=-1)
    arr = np.clip(img * 255, 0, 255).astype(np.uint8)
    Image.fromarray(arr).save(path)
    return arr


def brightness_corpus(directory, count, rng, size=32):
    """Images whose beauty score is affine in their mean brightness."""
    directory.mkdir(parents=True, exist_ok=True)
    pairs = []
    for i in range(count):
        brightness = rng.uniform(0.15, 0.85)
        noise = rng.normal(0, 0.05, size=(size, size, 3))
        arr = np.clip((brightness + noise) * 255, 0, 255).astype(np.uint8)
        path = directory / f"b_{i:04d}.png"
        Image.fromarray(arr).save(path)
        true_b = arr.mean() / 255.0
        score = float(np.clip(1.0 + 4.0 * (true_b - 0.1) / 0.8, 1.0, 5.0))
        pairs.append((str(path), score))
    return pairs


@pytest.fixture(scope="session")
def workspace(tmp_path_factory):
    return tmp_path_factory.mktemp("fixtures")


@pytest.fixture(scope="session")
def corpus(workspace):
    """16 structured images plus an attribute table and per-image scores."""
    image_dir = workspace / "images"
    image_dir.mkdir()
    rng = np.random.default_rng(11)
    attrs = ["Arched_Eyebrows", "Heavy_Makeup", "High_Cheekbones",
             "Wearing_Lipstick", "Smiling"]
    table = {}
    for i in range(16):
        name = f"face_{i:03d}.png"
        write_image(image_dir / name, rng)
        if i < 6:  # domain A: no positive attributes
            present = {"Smiling"} if rng.random() < 0.5 else set()
        else:      # domain B: at least one positive attribute
            positives = [a for a in attrs if a != "Smiling"]
            k = 1 + int(rng.random() * 3)
            present = set(rng.choice(positives, size=k, replace=False))
            if rng.random() < 0.3:
                present.add("Smiling")
        table[name] = present
    csv_path = workspace / "attrs.csv"
    with csv_path.open("w") as fh:
        fh.write("image," + ",".join(attrs) + "\n")
        for name, present in table.items():
            fh.write(name + ","
                     + ",".join(str(int(a in present)) for a in attrs) + "\n")
    return {"dir": image_dir, "table": table, "csv": csv_path, "attrs": attrs}


@pytest.fixture(scope="session")
def scored_manifests(workspace):
    """60-image brightness-scored train/test manifests for head fine-tuning."""
    rng = np.random.default_rng(23)
    pairs = brightness_corpus(workspace / "scored", 60, rng)
    return build_regression_split(pairs, train_fraction=0.6, seed=0)


@pytest.fixture(scope="session")
def backbone_ckpt(workspace, scored_manifests):
    """Tiny backbone: seeded init + brightness warm-up + fine-tuned head."""
    from beautykit.data.loader import BatchSpec, Cursor, load_batch

    train, test = scored_manifests
    backbone = PerceptionBackbone(TINY_BACKBONE)
    spec = BatchSpec(batch_size=min(36, len(train)), image_size=(32, 32), shuffle_seed=0)
    warm, _ = load_batch(train, spec, Cursor())
    backbone.initialize(seed=1, warmup_images=warm, warmup_steps=50)
    backbone.finetune_beauty_head(
        train, FinetuneConfig(epochs=15, batch_size=16, seed=0), test_manifest=test)
    path = workspace / "backbone.pt"
    backbone.save(path)
    return path


@pytest.fixture()
def backbone(backbone_ckpt):
    """Fresh copy per test; mutations never leak."""
    return PerceptionBackbone.from_checkpoint(backbone_ckpt)


@pytest.fixture(scope="session")
def ab_manifests(corpus):
    """Six images per domain from the toy corpus, 16x16-trainable."""
    entries_a, entries_b = [], []
    for name in sorted(corpus["table"]):
        path = str(corpus["dir"] / name)
        positives = corpus["table"][name] & {
            "Arched_Eyebrows", "Heavy_Makeup", "High_Cheekbones", "Wearing_Lipstick"}
        (entries_b if positives else entries_a).append(
            ManifestEntry(path=path, domain="B" if positives else "A",
                          attributes=frozenset(corpus["table"][name])))
    return (DatasetManifest(entries_a), DatasetManifest(entries_b))


def tiny_train_config(**overrides) -> TrainConfig:
    base = dict(
        batch_size=2,
        total_iterations=4,
        image_size=(16, 16),
        seed=7,
        generator=TINY_GENERATOR,
        discriminator=TINY_DISCRIMINATOR,
        checkpoint_interval=0,
    )
    base.update(overrides)
    return TrainConfig(**base)


@pytest.fixture(scope="session")
def trained_run(workspace, ab_manifests, backbone_ckpt):
    """A real (tiny) training run: 4 iterations, final checkpoint on disk."""
    manifest_a, manifest_b = ab_manifests
    backbone = PerceptionBackbone.from_checkpoint(backbone_ckpt)
    out_dir = workspace / "run"
    config = tiny_train_config()
    state, records = run_training(config, manifest_a, manifest_b, backbone,
                                  out_dir=out_dir)
    return {"dir": out_dir, "checkpoint": out_dir / "ckpt_final.pt",
            "records": records, "config": config}


@pytest.fixture(scope="session")
def gallery_dir(workspace, corpus):
    gallery = workspace / "gallery"
    gallery.mkdir()
    for name in sorted(corpus["table"])[:3]:
        Image.open(corpus["dir"] / name).save(gallery / name)
    return gallery


@pytest.fixture(scope="session")
def service_client(trained_run, backbone_ckpt, gallery_dir):
    from fastapi.testclient import TestClient

    from beautykit.service import ServiceConfig, create_app

    config = ServiceConfig(
        checkpoint=str(trained_run["checkpoint"]),
        backbone_checkpoint=str(backbone_ckpt),
        gallery_dir=str(gallery_dir),
        max_image_bytes=100_000,
    )
    app = create_app(config)
    with TestClient(app) as client:
        client.service_config = config
        yield client


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One PASS/FAIL line per acceptance criterion at the end of the run."""
    results: dict[str, bool] = {}
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py" not in nodeid:
                continue
            if outcome == "passed" and getattr(report, "when", "call") != "call":
                continue
            name = nodeid.split("::")[-1]
            ok = outcome == "passed"
            results[name] = results.get(name, True) and ok
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok in results.items():
        label = "PASS" if ok else "FAIL"
        pretty = name.removeprefix("test_").replace("_", " ")
        terminalreporter.write_line(f"[{label}] {pretty}")
