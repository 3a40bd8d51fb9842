"""Reading the image effect off a trained model by walking through latent space."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .codec import Autoencoder
from .diffcore import ShapeError
from .nam import NaimModel


@dataclass
class LatentSequence:
    codes: np.ndarray            # (k, l)
    kind: str                    # "interpolation" or "manipulation"
    steps: np.ndarray            # interpolation weight / shift fraction per code, in [0, 1]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.codes.ndim != 2 or len(self.codes) < 2:
            raise ValueError("a latent sequence needs at least two codes of equal dimension")

    def __len__(self):
        return len(self.codes)

    def __getitem__(self, i):
        return self.codes[i]


@dataclass
class EffectCurve:
    images: np.ndarray           # (k, H, W, C) decoded images
    predictions: np.ndarray      # (k,) centred image effect
    steps: np.ndarray
    reference: np.ndarray | None = None

    def __len__(self):
        return len(self.predictions)


def _fractions(k: int) -> np.ndarray:
    if k < 2:
        raise ValueError("k must be >= 2")
    return np.arange(k) / (k - 1)


def interpolate_latents(z, z_prime, k: int) -> LatentSequence:
    z = np.asarray(z, dtype=float)
    z_prime = np.asarray(z_prime, dtype=float)
    if z.shape != z_prime.shape or z.ndim != 1:
        raise ShapeError(f"endpoint codes must be vectors of equal length, got {z.shape} and {z_prime.shape}")
    t = _fractions(k)[:, None]
    codes = (1.0 - t) * z + t * z_prime
    # exact endpoints regardless of rounding
    codes[0], codes[-1] = z, z_prime
    return LatentSequence(codes, "interpolation", t[:, 0], {"start": z, "end": z_prime})


def manipulation_target(z, v_attr, alpha: float = 1.0) -> np.ndarray:
    """End point of a manipulation: z shifted by alpha * |z| along the unit attribute direction."""
    z = np.asarray(z, dtype=float)
    v = np.asarray(v_attr, dtype=float)
    if z.shape[-1] != v.shape[-1]:
        raise ShapeError(f"code dimension {z.shape[-1]} != direction dimension {v.shape[-1]}")
    vnorm = np.linalg.norm(v)
    if vnorm == 0:
        raise ValueError("attribute direction must be nonzero")
    znorm = np.linalg.norm(z, axis=-1, keepdims=True)
    return z + alpha * (znorm / vnorm) * v


def manipulate_latents(z, v_attr, alpha: float = 1.0, k: int = 10) -> LatentSequence:
    z = np.asarray(z, dtype=float)
    v = np.asarray(v_attr, dtype=float)
    t = _fractions(k)
    target = manipulation_target(z, v, alpha)
    shift = target - z
    codes = z + t[:, None] * shift
    return LatentSequence(codes, "manipulation", t, {"base": z, "direction": v, "alpha": alpha})


def effect_curve(model: NaimModel, ae: Autoencoder, seq: LatentSequence, reference=None) -> EffectCurve:
    """Decoded image and centred image-head output for every code in ``seq``."""
    if not model.has_image:
        raise ShapeError("model has no image term")
    if seq.codes.shape[1] != model.latent_dim or ae.latent_dim != model.latent_dim:
        raise ShapeError("latent dimension mismatch between sequence, model and autoencoder")
    preds = model.centered_image_effect(seq.codes)
    ref = None if reference is None else np.asarray(reference, dtype=float)
    return EffectCurve(ae.decode(seq.codes), preds, seq.steps, ref)


@dataclass
class ShiftResult:
    base: np.ndarray
    shifted: np.ndarray

    @property
    def base_mean(self) -> float:
        return float(self.base.mean())

    @property
    def shifted_mean(self) -> float:
        return float(self.shifted.mean())


def global_shift(model: NaimModel, ae: Autoencoder, images, features, v_attr, alpha: float = 1.0) -> ShiftResult:
    """Predictive distribution before and after moving every image along ``v_attr``.

    Each code goes to the end point of a manipulation with strength ``alpha``;
    tabular inputs stay as they are.
    """
    images = np.asarray(images)
    if len(images) == 0:
        raise ValueError("global_shift needs at least one image")
    z = ae.encode(images)
    z = z[None] if z.ndim == 1 else z
    shifted_z = z if alpha == 0 else manipulation_target(z, v_attr, alpha)
    base = model.predict(features, z)
    shifted = model.predict(features, shifted_z)
    return ShiftResult(np.atleast_1d(base), np.atleast_1d(shifted))


def convexity_residual(h: Callable, z, z_tilde, lam: float):
    """Remainder R in h(lam z + (1-lam) zt) = lam h(z) + (1-lam) h(zt) + (1-lam) R.

    Zero by convention at lam == 1, where the remainder term drops out.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lam must lie in [0, 1]")
    z = np.asarray(z, dtype=float)
    z_tilde = np.asarray(z_tilde, dtype=float)
    if lam == 1.0:
        return np.zeros_like(np.asarray(h(z), dtype=float))
    mixed = np.asarray(h(lam * z + (1 - lam) * z_tilde), dtype=float)
    return (mixed - lam * np.asarray(h(z), dtype=float) - (1 - lam) * np.asarray(h(z_tilde), dtype=float)) / (1 - lam)
