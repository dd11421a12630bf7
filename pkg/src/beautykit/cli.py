"""Command-line entry points.

The ``beautykit`` umbrella command groups the workflow end to end: manifest
construction (``data``), beauty-head fine-tuning and scoring (``beauty``),
translation training (``train``), offline beautification (``beautify``),
score-gain evaluation (``eval gain``), and the HTTP service (``serve``).
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .data.manifest import DatasetManifest
from .data.splits import (
    DEFAULT_POSITIVE_ATTRIBUTES,
    build_regression_split,
    build_translation_split,
    parse_attribute_table,
    read_partition_file,
    read_score_file,
)
from .errors import BeautykitError
from .perception import BackboneConfig, FinetuneConfig, PerceptionBackbone, clamp_score


def _fail(exc: Exception) -> None:
    raise click.ClickException(str(exc))


@click.group()
@click.version_option(package_name="beautykit")
def cli():
    """Reference-guided face beautification toolkit."""


# --------------------------------------------------------------------------
# data


@cli.group()
def data():
    """Build dataset manifests."""


@data.command("split-translation")
@click.option("--attributes", "attributes_file", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Attribute table (CSV, JSON, or count-header text).")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False),
              help="Directory receiving domain_a.jsonl and domain_b.jsonl.")
@click.option("--image-root", type=click.Path(file_okay=False),
              help="Directory prefixed to every image name.")
@click.option("--positive", "positive", multiple=True,
              help="Attribute marking the reference domain; repeatable. "
                   f"Default: {', '.join(sorted(DEFAULT_POSITIVE_ATTRIBUTES))}.")
@click.option("--partitions", "partitions_file",
              type=click.Path(exists=True, dir_okay=False),
              help="Optional image -> partition id map (0=train, 1=val, 2=test).")
@click.option("--include-partition", "include", multiple=True, type=int,
              help="Partition ids to keep (default 0 and 1, merging train+val).")
@click.option("--check-files/--no-check-files", default=True,
              help="Verify every listed image exists.")
def split_translation(attributes_file, out_dir, image_root, positive,
                      partitions_file, include, check_files):
    """Split images into target domain A and reference domain B by attributes."""
    try:
        table = parse_attribute_table(attributes_file)
        manifest_a, manifest_b = build_translation_split(
            table,
            positive_attributes=frozenset(positive) or DEFAULT_POSITIVE_ATTRIBUTES,
            image_root=image_root,
            partitions=read_partition_file(partitions_file) if partitions_file else None,
            include_partitions=tuple(include) or (0, 1),
            check_files=check_files,
        )
    except BeautykitError as exc:
        _fail(exc)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest_a.save(out / "domain_a.jsonl")
    manifest_b.save(out / "domain_b.jsonl")
    click.echo(f"domain A: {len(manifest_a)} images -> {out / 'domain_a.jsonl'}")
    click.echo(f"domain B: {len(manifest_b)} images -> {out / 'domain_b.jsonl'}")


@data.command("split-regression")
@click.option("--scores", "scores_file", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Scored image list (CSV path,score or JSON mapping).")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False),
              help="Directory receiving train.jsonl and test.jsonl.")
@click.option("--fraction", default=0.6, show_default=True,
              help="Fraction of images assigned to the training split.")
@click.option("--seed", default=0, show_default=True,
              help="Seed fixing the shuffled partition.")
@click.option("--image-root", type=click.Path(file_okay=False),
              help="Directory prefixed to every image name.")
@click.option("--check-files/--no-check-files", default=True)
def split_regression(scores_file, out_dir, fraction, seed, image_root, check_files):
    """Deterministic train/test split of beauty-scored images."""
    try:
        pairs = read_score_file(scores_file)
        if image_root:
            pairs = [(str(Path(image_root) / p), s) for p, s in pairs]
        train, test = build_regression_split(pairs, train_fraction=fraction,
                                             seed=seed, check_files=check_files)
    except BeautykitError as exc:
        _fail(exc)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    train.save(out / "train.jsonl")
    test.save(out / "test.jsonl")
    click.echo(f"train: {len(train)} images -> {out / 'train.jsonl'}")
    click.echo(f"test:  {len(test)} images -> {out / 'test.jsonl'}")


# --------------------------------------------------------------------------
# beauty


@cli.group()
def beauty():
    """Beauty-score prediction."""


@beauty.command("finetune")
@click.option("--train", "train_file", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Scored training manifest (JSONL).")
@click.option("--out", "out_file", required=True, type=click.Path(dir_okay=False),
              help="Where the fine-tuned backbone checkpoint is written.")
@click.option("--test", "test_file", type=click.Path(exists=True, dir_okay=False),
              help="Scored held-out manifest; logs per-epoch test MAE.")
@click.option("--backbone", "backbone_file", type=click.Path(exists=True, dir_okay=False),
              help="Existing backbone checkpoint to start from; a fresh "
                   "seeded backbone is built when omitted.")
@click.option("--epochs", default=20, show_default=True)
@click.option("--batch-size", default=16, show_default=True)
@click.option("--lr", default=1e-2, show_default=True)
@click.option("--seed", default=0, show_default=True,
              help="Shuffle seed for fine-tuning batches.")
@click.option("--init-seed", default=0, show_default=True,
              help="Weight seed when building a fresh backbone.")
@click.option("--warmup-steps", default=0, show_default=True,
              help="Self-supervised trunk warm-up steps on a fresh backbone.")
def beauty_finetune(train_file, out_file, test_file, backbone_file, epochs,
                    batch_size, lr, seed, init_seed, warmup_steps):
    """Fit the trainable scoring head on a scored manifest; the trunk stays frozen."""
    try:
        train_manifest = DatasetManifest.load(train_file)
        test_manifest = DatasetManifest.load(test_file) if test_file else None
        if backbone_file:
            backbone = PerceptionBackbone.from_checkpoint(backbone_file)
        else:
            backbone = PerceptionBackbone(BackboneConfig())
            warmup = None
            if warmup_steps > 0:
                from .data.loader import BatchSpec, load_batch, Cursor
                spec = BatchSpec(batch_size=min(64, len(train_manifest)),
                                 image_size=backbone.config.input_size,
                                 shuffle_seed=init_seed)
                warmup, _ = load_batch(train_manifest, spec, Cursor())
            backbone.initialize(seed=init_seed, warmup_images=warmup,
                                warmup_steps=warmup_steps)
        config = FinetuneConfig(epochs=epochs, batch_size=batch_size,
                                learning_rate=lr, seed=seed)
        log = backbone.finetune_beauty_head(train_manifest, config, test_manifest)
    except BeautykitError as exc:
        _fail(exc)
    backbone.save(out_file)
    for entry in log["epochs"]:
        line = f"epoch {entry['epoch']:3d}  train MAE {entry['train_mae']:.4f}"
        if "test_mae" in entry:
            line += f"  test MAE {entry['test_mae']:.4f}"
        click.echo(line)
    click.echo(f"saved fine-tuned backbone -> {out_file}")


@beauty.command("score")
@click.argument("images", nargs=-1, required=True,
                type=click.Path(exists=True, dir_okay=False))
@click.option("--backbone", "backbone_file", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--json", "as_json", is_flag=True, help="Emit one JSON object.")
def beauty_score(images, backbone_file, as_json):
    """Predict beauty scores for image files."""
    from .inference import open_image

    try:
        backbone = PerceptionBackbone.from_checkpoint(backbone_file)
        results = []
        for path in images:
            tensor = open_image(path, backbone.config.input_size)
            raw = float(backbone.predict_score(tensor.unsqueeze(0))[0])
            results.append({"image": path, "score": raw,
                            "display_score": clamp_score(raw)})
    except BeautykitError as exc:
        _fail(exc)
    if as_json:
        click.echo(json.dumps({"scores": results}, indent=2))
    else:
        for r in results:
            click.echo(f"{r['image']}: {r['display_score']:.3f} (raw {r['score']:.4f})")


# --------------------------------------------------------------------------
# train


@cli.command("train")
@click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False),
              help="YAML training configuration; defaults apply when omitted.")
@click.option("--data-a", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Target-domain manifest (JSONL).")
@click.option("--data-b", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Reference-domain manifest (JSONL).")
@click.option("--backbone", "backbone_file", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Fine-tuned perception backbone checkpoint.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False),
              help="Run directory for checkpoints and the training log.")
@click.option("--resume", "resume_file", type=click.Path(exists=True, dir_okay=False),
              help="Checkpoint to resume from.")
@click.option("--ablate", "ablations", multiple=True,
              type=click.Choice(["id", "identity", "beauty", "perceptual"]),
              help="Zero a feature loss term; repeatable.")
@click.option("--iterations", type=int, help="Override total iterations.")
@click.option("--log-every", default=1, show_default=True,
              help="Print every Nth iteration to stderr.")
def train_cmd(config_file, data_a, data_b, backbone_file, out_dir, resume_file,
              ablations, iterations, log_every):
    """Train the translation networks on two domain manifests."""
    from dataclasses import replace

    import yaml

    from .training import TrainConfig, ablate, run_training

    try:
        raw = {}
        if config_file:
            raw = yaml.safe_load(Path(config_file).read_text()) or {}
        config = TrainConfig.from_dict(raw)
        if iterations is not None:
            config = replace(config, total_iterations=iterations)
        weights = config.weights
        for term in ablations:
            weights = ablate(weights, "identity" if term == "id" else term)
        if ablations:
            config = replace(config, weights=weights)

        manifest_a = DatasetManifest.load(data_a)
        manifest_b = DatasetManifest.load(data_b)
        backbone = PerceptionBackbone.from_checkpoint(backbone_file)

        def progress(record: dict) -> None:
            if record["iteration"] % log_every == 0:
                click.echo(
                    f"iter {record['iteration']:>8d}  lr {record['lr']:.2e}  "
                    f"g {record['total']:.4f}  d {record['d_loss']:.4f}",
                    err=True)

        state, _ = run_training(config, manifest_a, manifest_b, backbone,
                                out_dir=out_dir, callbacks=[progress],
                                resume=resume_file)
    except BeautykitError as exc:
        _fail(exc)
    click.echo(f"finished at iteration {state.iteration}; "
               f"checkpoints in {out_dir}")


# --------------------------------------------------------------------------
# beautify


@cli.command("beautify")
@click.option("--target", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Face to beautify.")
@click.option("--reference", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Face providing the beauty style.")
@click.option("--checkpoint", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Training checkpoint holding the generator.")
@click.option("--backbone", "backbone_file", type=click.Path(exists=True, dir_okay=False),
              help="Perception backbone; required with --scores.")
@click.option("--steps", default=5, show_default=True,
              help="Number of evenly spaced blend weights from 0 to 1.")
@click.option("--weights", "weights_csv",
              help="Explicit comma-separated w2 values, overriding --steps.")
@click.option("--scores", "want_scores", is_flag=True,
              help="Score every output frame.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False),
              help="Directory receiving the frames and metadata.")
@click.option("--strip/--no-strip", default=True, show_default=True,
              help="Also write all frames side by side as strip.png.")
def beautify_cmd(target, reference, checkpoint, backbone_file, steps,
                 weights_csv, want_scores, out_dir, strip):
    """Blend a target toward a reference across a ladder of weights."""
    from .inference import (BeautifyEngine, BeautifyRequest, compose_strip,
                            open_image, save_image, weight_schedule)
    from PIL import Image

    try:
        engine = BeautifyEngine.from_checkpoint(checkpoint, backbone_file)
        size = engine.image_size
        if weights_csv:
            w2_values = tuple(float(v) for v in weights_csv.split(","))
        else:
            w2_values = tuple(weight_schedule(steps))
        request = BeautifyRequest(
            target=open_image(target, size),
            reference=open_image(reference, size),
            w2_values=w2_values,
            score_outputs=want_scores,
        )
        out = Path(out_dir)
        meta = engine.beautify_to_dir(request, out)
        if strip:
            frames = [open_image(out / f["file"], size) for f in meta["frames"]]
            Image.fromarray(compose_strip(frames)).save(out / "strip.png")
    except BeautykitError as exc:
        _fail(exc)
    for f in meta["frames"]:
        line = f"w2={f['w2']:.3f} -> {f['file']}"
        if f["score"] is not None:
            line += f"  score {clamp_score(f['score']):.3f}"
        click.echo(line)


# --------------------------------------------------------------------------
# eval


@cli.group("eval")
def eval_group():
    """Evaluation utilities."""


@eval_group.command("gain")
@click.option("--originals", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Manifest of the images before beautification.")
@click.option("--beautified", "beautified_dir", required=True,
              type=click.Path(exists=True, file_okay=False),
              help="Directory of beautified outputs, one per original, "
                   "matched in sorted-name order.")
@click.option("--backbone", "backbone_file", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--json", "as_json", is_flag=True)
def eval_gain(originals, beautified_dir, backbone_file, as_json):
    """Mean beauty score before vs. after beautification."""
    from .inference import evaluate_gain, open_image
    from .service import GALLERY_EXTENSIONS

    try:
        manifest = DatasetManifest.load(originals)
        backbone = PerceptionBackbone.from_checkpoint(backbone_file)
        size = backbone.config.input_size
        files = sorted(p for p in Path(beautified_dir).iterdir()
                       if p.suffix.lower() in GALLERY_EXTENSIONS)
        images = [open_image(p, size) for p in files]
        before, after, gain = evaluate_gain(manifest, images, backbone)
    except BeautykitError as exc:
        _fail(exc)
    if as_json:
        click.echo(json.dumps({"mean_before": before, "mean_after": after,
                               "gain_percent": gain}))
    else:
        click.echo(f"mean score before: {before:.4f}")
        click.echo(f"mean score after:  {after:.4f}")
        click.echo(f"gain:              {gain:+.2f}%")


# --------------------------------------------------------------------------
# serve


@cli.command("serve")
@click.option("--checkpoint", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--backbone", "backbone_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--gallery", "gallery_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--max-concurrent", default=4, show_default=True,
              help="Simultaneous beautify requests.")
@click.option("--max-image-bytes", default=8 * 2 ** 20, show_default=True)
def serve_cmd(checkpoint, backbone_file, gallery_dir, host, port,
              max_concurrent, max_image_bytes):
    """Run the HTTP inference service."""
    from .service import ServiceConfig, serve

    try:
        config = ServiceConfig(
            checkpoint=checkpoint,
            backbone_checkpoint=backbone_file,
            gallery_dir=gallery_dir,
            host=host,
            port=port,
            max_concurrent_requests=max_concurrent,
            max_image_bytes=max_image_bytes,
        )
    except BeautykitError as exc:
        _fail(exc)
    click.echo(f"serving on {config.host}:{config.port}", err=True)
    serve(config)


def main():
    try:
        cli(standalone_mode=True)
    except BeautykitError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
