from .manifest import DatasetManifest, ManifestEntry
from .splits import (
    DEFAULT_POSITIVE_ATTRIBUTES,
    AttributeTable,
    build_regression_split,
    build_translation_split,
    parse_attribute_table,
    read_partition_file,
    read_score_file,
)
from .loader import (
    BatchSpec,
    Cursor,
    denormalize_image,
    epoch_order,
    iterate_batches,
    load_batch,
    load_image,
    normalize_image,
    prefetch,
)

__all__ = [
    "AttributeTable",
    "BatchSpec",
    "Cursor",
    "DatasetManifest",
    "DEFAULT_POSITIVE_ATTRIBUTES",
    "ManifestEntry",
    "build_regression_split",
    "build_translation_split",
    "denormalize_image",
    "epoch_order",
    "iterate_batches",
    "load_batch",
    "load_image",
    "normalize_image",
    "parse_attribute_table",
    "prefetch",
    "read_partition_file",
    "read_score_file",
]
