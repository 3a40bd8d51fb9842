"""Squares and colors datasets with known additive effects."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

BACKGROUND = 0.5
FOREGROUND = 1.0

NUMERIC_EFFECTS = {
    "linear": lambda x: 2.0 * x,
    "square": lambda x: x**2,
    "sine": lambda x: np.sin(2.0 * np.pi * x),
}
IMAGE_EFFECTS = {
    "linear": lambda x: 2.0 * x,
    "power": lambda x: 2.0 * x**4,
    "sine": lambda x: np.sin(2.0 * np.pi * x),
}
DOMAINS = ("squares", "colors")


@dataclass(frozen=True)
class EffectSpec:
    numeric: tuple[str, ...] = ("linear", "square", "sine")
    image: str = "linear"
    sigma: float = 0.1

    def __post_init__(self):
        bad = [t for t in self.numeric if t not in NUMERIC_EFFECTS]
        if bad:
            raise ValueError(f"unknown numeric effects {bad}; choose from {sorted(NUMERIC_EFFECTS)}")
        if self.image not in IMAGE_EFFECTS:
            raise ValueError(f"unknown image effect {self.image!r}; choose from {sorted(IMAGE_EFFECTS)}")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")

    @property
    def tag(self) -> str:
        return f"{'+'.join(self.numeric)}|img={self.image}|sigma={self.sigma:g}"

    def numeric_effect(self, j: int, x):
        return NUMERIC_EFFECTS[self.numeric[j]](np.asarray(x, dtype=float))

    def image_effect(self, phi):
        return IMAGE_EFFECTS[self.image](np.asarray(phi, dtype=float))


@dataclass
class SyntheticDataset:
    domain: str
    features: np.ndarray        # (n, J) in [0, 1]
    images: np.ndarray          # (n, H, W, C) in [0, 1]
    phi: np.ndarray             # (n,) ground-truth semantic feature
    noise: np.ndarray           # (n,) recorded noise draw
    y: np.ndarray               # (n,)
    spec: EffectSpec
    seed: int
    centers: np.ndarray | None = field(default=None)  # squares only: (n, 2) continuous (x, y) centers

    def __len__(self):
        return len(self.y)

    @property
    def image_shape(self) -> tuple[int, ...]:
        return tuple(self.images.shape[1:])

    def subset(self, idx) -> "SyntheticDataset":
        idx = np.asarray(idx)
        return SyntheticDataset(
            self.domain, self.features[idx], self.images[idx], self.phi[idx], self.noise[idx],
            self.y[idx], self.spec, self.seed, None if self.centers is None else self.centers[idx])


# ---------------------------------------------------------------------------
# image generators


def _square_offset_range(image_size: int) -> tuple[int, float]:
    side = image_size // 2
    return side, float(image_size - side)


def render_square(left: int, top: int, image_size: int) -> np.ndarray:
    side = image_size // 2
    img = np.full((image_size, image_size, 1), BACKGROUND)
    img[top:top + side, left:left + side, 0] = FOREGROUND
    return img


def gen_squares(n: int, image_size: int = 32, seed: int = 0):
    """White half-size squares on grey, center uniform over the fully-contained region.

    Returns ``(images, phi_x, centers)``; ``phi_x`` is the continuous,
    normalised x-center drawn by the generator, the rendered square is
    snapped to the nearest pixel offset.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if image_size % 2 or image_size < 2:
        raise ValueError("image_size must be a positive even number")
    side, span = _square_offset_range(image_size)
    rng = np.random.default_rng(seed)
    u = rng.uniform(0.0, 1.0, size=(n, 2))
    # top-left offsets, round half up
    offsets = np.floor(u * span + 0.5).astype(int)
    images = np.full((n, image_size, image_size, 1), BACKGROUND)
    for i, (left, top) in enumerate(offsets):
        images[i, top:top + side, left:left + side, 0] = FOREGROUND
    centers = u * span + side / 2.0
    return images, u[:, 0].copy(), centers


def gen_colors(n: int, image_size: int = 32, seed: int = 0):
    """Monochrome RGB images with iid uniform channels. Returns ``(images, phi_red, rgb)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    rgb = rng.uniform(0.0, 1.0, size=(n, 3))
    images = np.broadcast_to(rgb[:, None, None, :], (n, image_size, image_size, 3)).copy()
    return images, rgb[:, 0].copy(), rgb


def phi_xval(image: np.ndarray) -> float:
    """Normalised x-position of the white square (0 = flush left, 1 = flush right)."""
    image = np.asarray(image)
    if image.ndim == 3:
        image = image[..., 0]
    h, w = image.shape
    white = image > 0.75
    if not white.any():
        raise ValueError("image contains no white pixels")
    cols = np.nonzero(white)[1]
    side, span = _square_offset_range(w)
    # centroid in pixel-center coordinates minus half the side = left offset
    left = cols.mean() + 0.5 - side / 2.0
    return float(np.clip(left / span, 0.0, 1.0))


def phi_red(image: np.ndarray) -> float:
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[-1] != 3:
        raise ValueError(f"phi_red needs an (H, W, 3) image, got shape {image.shape}")
    red = image[..., 0]
    lo = red.min()
    # constant channels return their value exactly (a float mean may round)
    return float(lo) if lo == red.max() else float(red.mean())


def phi_for(domain: str):
    if domain == "squares":
        return phi_xval
    if domain == "colors":
        return phi_red
    raise ValueError(f"unknown domain {domain!r}")


def extract_phi(domain: str, images: np.ndarray) -> np.ndarray:
    fn = phi_for(domain)
    return np.array([fn(img) for img in images])


# ---------------------------------------------------------------------------
# responses


def assemble_response(x, phi_img, spec: EffectSpec, noise=0.0):
    """Sum of numeric effects, image effect and the given noise draw.

    Vectorised: ``x`` may be (J,) or (n, J) with matching ``phi_img``/``noise``.
    """
    x = np.asarray(x, dtype=float)
    phi_img = np.asarray(phi_img, dtype=float)
    if x.shape[-1] != len(spec.numeric):
        raise ValueError(f"expected {len(spec.numeric)} features, got {x.shape[-1]}")
    if np.any((x < 0) | (x > 1)) or np.any((phi_img < 0) | (phi_img > 1)):
        raise ValueError("features and image feature must lie in [0, 1]")
    y = spec.image_effect(phi_img) + np.asarray(noise, dtype=float)
    for j in range(len(spec.numeric)):
        y = y + spec.numeric_effect(j, x[..., j])
    return y if y.ndim else float(y)


def make_dataset(domain: str, n: int, spec: EffectSpec, seed: int, image_size: int = 32) -> SyntheticDataset:
    """Images, uniform tabular features and responses from one seed.

    Images, features and noise use independent child streams of ``seed``.
    """
    img_seq, feat_seq, noise_seq = np.random.SeedSequence(seed).spawn(3)
    img_seed = int(img_seq.generate_state(1)[0])
    if domain == "squares":
        images, phi, centers = gen_squares(n, image_size, img_seed)
    elif domain == "colors":
        images, phi, _ = gen_colors(n, image_size, img_seed)
        centers = None
    else:
        raise ValueError(f"unknown domain {domain!r}")
    features = np.random.default_rng(feat_seq).uniform(0.0, 1.0, size=(n, len(spec.numeric)))
    noise = np.random.default_rng(noise_seq).normal(0.0, spec.sigma, size=n) if spec.sigma > 0 else np.zeros(n)
    y = assemble_response(features, phi, spec, noise)
    return SyntheticDataset(domain, features, images, phi, noise, y, spec, seed, centers)


# ---------------------------------------------------------------------------
# reference interpolations


def _square_offsets(image: np.ndarray) -> tuple[int, int]:
    white = np.asarray(image)[..., 0] > 0.75
    rows, cols = np.nonzero(white)
    if rows.size == 0:
        raise ValueError("image contains no white pixels")
    return int(cols.min()), int(rows.min())


def reference_interpolation(image_a: np.ndarray, image_b: np.ndarray, k: int, domain: str) -> list[np.ndarray]:
    """Ground-truth interpolation built in feature space rather than latent space.

    squares: the square's position moves linearly from a to b.
    colors: all three channel values move linearly.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    image_a, image_b = np.asarray(image_a, dtype=float), np.asarray(image_b, dtype=float)
    if image_a.shape != image_b.shape:
        raise ValueError("endpoint images differ in shape")
    lam = np.linspace(0.0, 1.0, k)
    if domain == "squares":
        if image_a.shape[-1] != 1:
            raise ValueError("squares images have one channel")
        ax, ay = _square_offsets(image_a)
        bx, by = _square_offsets(image_b)
        size = image_a.shape[1]
        out = []
        for t in lam:
            left = int(np.floor((1 - t) * ax + t * bx + 0.5))
            top = int(np.floor((1 - t) * ay + t * by + 0.5))
            out.append(render_square(left, top, size))
        return out
    if domain == "colors":
        if image_a.shape[-1] != 3:
            raise ValueError("colors images have three channels")
        ca = image_a.reshape(-1, 3).mean(axis=0)
        cb = image_b.reshape(-1, 3).mean(axis=0)
        out = []
        for i, t in enumerate(lam):
            if i == 0:
                out.append(image_a.copy())
            elif i == k - 1:
                out.append(image_b.copy())
            else:
                out.append(np.broadcast_to((1 - t) * ca + t * cb, image_a.shape).copy())
        return out
    raise ValueError(f"unknown domain {domain!r}")
