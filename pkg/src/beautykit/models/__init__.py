from .generator import ContentEncoder, Decoder, Generator, GeneratorConfig, StyleEncoder
from .discriminator import (
    DiscriminatorConfig,
    MultiScaleDiscriminator,
    PatchDiscriminator,
    lsgan_d_loss,
    lsgan_g_loss,
)
from .layers import adain, AdaIN2d, StyleMLP, assign_adain_params, kaiming_init, \
    num_adain_params

__all__ = [
    "AdaIN2d",
    "ContentEncoder",
    "Decoder",
    "DiscriminatorConfig",
    "Generator",
    "GeneratorConfig",
    "MultiScaleDiscriminator",
    "PatchDiscriminator",
    "StyleEncoder",
    "StyleMLP",
    "adain",
    "assign_adain_params",
    "kaiming_init",
    "lsgan_d_loss",
    "lsgan_g_loss",
    "num_adain_params",
]
