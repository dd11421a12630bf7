"""beautykit: reference-guided face beautification.

Content/style-disentangled translation with adaptive instance normalization,
a piggybacked identity/beauty feature extractor, five-term adversarial
training, and fine-granularity beautification by weighted style mixing.
"""

from .errors import (
    BeautykitError,
    ConfigurationError,
    NotReadyError,
    TrainingDiverged,
    ValidationError,
)
from .data.manifest import DatasetManifest, ManifestEntry
from .losses import LossBundle, LossWeights
from .models.discriminator import DiscriminatorConfig, MultiScaleDiscriminator
from .models.generator import Generator, GeneratorConfig
from .perception import (
    BackboneConfig,
    FinetuneConfig,
    PerceptionBackbone,
    clamp_score,
)
from .training import TrainConfig, ablate, init_state, learning_rate_at, run_training, train_step
from .inference import (
    BeautifyEngine,
    BeautifyRequest,
    BeautifySequence,
    Frame,
    evaluate_gain,
    gain_percent,
    mix_styles,
    transfer_fraction_to_weight,
    weight_schedule,
)

__version__ = "0.1.0"

__all__ = [
    "BackboneConfig",
    "BeautifyEngine",
    "BeautifyRequest",
    "BeautifySequence",
    "BeautykitError",
    "ConfigurationError",
    "DatasetManifest",
    "DiscriminatorConfig",
    "FinetuneConfig",
    "Frame",
    "Generator",
    "GeneratorConfig",
    "LossBundle",
    "LossWeights",
    "ManifestEntry",
    "MultiScaleDiscriminator",
    "NotReadyError",
    "PerceptionBackbone",
    "TrainConfig",
    "TrainingDiverged",
    "ValidationError",
    "ablate",
    "clamp_score",
    "evaluate_gain",
    "gain_percent",
    "init_state",
    "learning_rate_at",
    "mix_styles",
    "run_training",
    "train_step",
    "transfer_fraction_to_weight",
    "weight_schedule",
]
