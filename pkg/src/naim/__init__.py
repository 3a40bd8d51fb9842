"""Neural additive image models: additive regression over tabular features plus an image term."""

from .codec import Autoencoder, AutoencoderConfig, attribute_direction, train_autoencoder
from .evalbench import ablation_run, image_effect_benchmark, mse, numeric_effect_benchmark, r2
from .lens import convexity_residual, effect_curve, global_shift, interpolate_latents, manipulate_latents
from .nam import NaimModel, TrainConfig, train
from .synthdata import EffectSpec, make_dataset

__version__ = "0.1.0"

__all__ = [
    "Autoencoder", "AutoencoderConfig", "EffectSpec", "NaimModel", "TrainConfig",
    "ablation_run", "attribute_direction", "convexity_residual", "effect_curve", "global_shift",
    "image_effect_benchmark", "interpolate_latents", "make_dataset", "manipulate_latents", "mse",
    "numeric_effect_benchmark", "r2", "train", "train_autoencoder",
]
