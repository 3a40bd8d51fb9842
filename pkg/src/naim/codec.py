"""Deterministic autoencoder standing in for the semantic encoder/decoder pair.

The interpretation tools only need ``encode`` (image -> latent code) and
``decode`` (latent code -> image in [0, 1]) and a latent space in which
nearby codes mean similar images.  A dense ReLU autoencoder with a sigmoid
output gives both at desk scale.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

from .diffcore import DTYPE, Adam, ShapeError, Tensor, matmul, mse_loss, parameter, relu, sigmoid

log = logging.getLogger(__name__)


@dataclass
class AutoencoderConfig:
    latent_dim: int = 16
    hidden: tuple[int, ...] = (256, 64)
    epochs: int = 30
    batch_size: int = 64
    lr: float = 1e-3
    weight_decay: float = 0.0
    seed: int = 0

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)


class _Dense:
    def __init__(self, widths: list[int], rng: np.random.Generator):
        self.layers = []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.layers.append((parameter(rng.uniform(-bound, bound, (fan_in, fan_out))),
                                parameter(rng.uniform(-bound, bound, fan_out))))

    def parameters(self):
        return [p for wb in self.layers for p in wb]

    def __call__(self, x: Tensor) -> Tensor:
        for i, (w, b) in enumerate(self.layers):
            x = matmul(x, w) + b
            if i < len(self.layers) - 1:
                x = relu(x)
        return x

    def forward(self, x: np.ndarray) -> np.ndarray:
        for i, (w, b) in enumerate(self.layers):
            x = x @ w.data + b.data
            if i < len(self.layers) - 1:
                x = np.maximum(x, 0.0)
        return x


class Autoencoder:
    """Encoder ``image -> R^l`` and decoder ``R^l -> image``; decoder output squashed into [0, 1]."""

    def __init__(self, image_shape: tuple[int, ...], config: AutoencoderConfig):
        self.image_shape = tuple(int(s) for s in image_shape)
        self.config = config
        self.latent_dim = config.latent_dim
        d = int(np.prod(self.image_shape))
        rng = np.random.default_rng(config.seed)
        self.encoder = _Dense([d, *config.hidden, config.latent_dim], rng)
        self.decoder = _Dense([config.latent_dim, *reversed(config.hidden), d], rng)
        self.history: list[float] = []

    def parameters(self):
        return self.encoder.parameters() + self.decoder.parameters()

    def _flatten(self, images) -> np.ndarray:
        images = np.asarray(images, dtype=DTYPE)
        single = images.shape == self.image_shape
        if single:
            images = images[None]
        if images.shape[1:] != self.image_shape:
            raise ShapeError(f"expected images of shape {self.image_shape}, got {images.shape[1:]}")
        return images.reshape(len(images), -1), single

    def encode(self, images) -> np.ndarray:
        """Latent code(s); a single image gives shape (l,), a batch (n, l)."""
        flat, single = self._flatten(images)
        z = self.encoder.forward(flat)
        return z[0] if single else z

    def decode(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=DTYPE)
        single = z.ndim == 1
        if single:
            z = z[None]
        if z.ndim != 2 or z.shape[1] != self.latent_dim:
            raise ShapeError(f"expected latent codes of dimension {self.latent_dim}, got shape {z.shape}")
        logits = self.decoder.forward(z)
        img = 0.5 * (1.0 + np.tanh(0.5 * logits))
        img = np.clip(img, 0.0, 1.0).reshape(len(z), *self.image_shape)
        return img[0] if single else img

    def reconstruct(self, images) -> np.ndarray:
        return self.decode(self.encode(images))

    def reconstruction_mse(self, images) -> float:
        images = np.asarray(images, dtype=DTYPE)
        return float(np.mean((self.reconstruct(images) - images) ** 2))

    def state(self) -> dict[str, np.ndarray]:
        return {f"p{i}": p.data.copy() for i, p in enumerate(self.parameters())}

    def load_state(self, state: dict[str, np.ndarray]):
        for i, p in enumerate(self.parameters()):
            if state[f"p{i}"].shape != p.shape:
                raise ShapeError(f"autoencoder parameter {i}: stored shape {state[f'p{i}'].shape} != {p.shape}")
            p.data = np.array(state[f"p{i}"], dtype=DTYPE)

    def describe(self) -> dict:
        return {"image_shape": list(self.image_shape), **asdict(self.config),
                "hidden": list(self.config.hidden)}


def train_autoencoder(images, config: AutoencoderConfig | None = None, callback=None) -> Autoencoder:
    """Fit by minibatch Adam on pixel MSE."""
    config = config or AutoencoderConfig()
    images = np.asarray(images, dtype=DTYPE)
    if images.ndim < 2:
        raise ShapeError("images must be an array of shape (n, H, W, C)")
    if len(images) < 2:
        raise ValueError("need at least two images to train")
    ae = Autoencoder(images.shape[1:], config)
    flat = images.reshape(len(images), -1)
    opt = Adam(ae.parameters(), lr=config.lr, weight_decay=config.weight_decay)
    rng = np.random.default_rng(config.seed + 1)
    n = len(flat)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            batch = flat[order[start:start + config.batch_size]]
            out = sigmoid(ae.decoder(ae.encoder(Tensor(batch))))
            loss = mse_loss(out, batch)
            if not np.isfinite(loss.data):
                raise FloatingPointError(f"autoencoder loss became non-finite at epoch {epoch}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += float(loss.data) * len(batch)
        ae.history.append(total / n)
        if callback is not None:
            callback(epoch, ae.history[-1])
        log.info("autoencoder epoch %d: mse %.3g", epoch, ae.history[-1])
    return ae


def attribute_direction(codes, labels, l2: float = 1e-2, tol: float = 1e-12, max_iter: int = 100) -> np.ndarray:
    """Unit normal of an L2-regularised logistic-regression hyperplane separating the labels.

    Solved with Newton's method (intercept unpenalised), so the result does
    not depend on the order of the examples.  Points towards label 1.
    """
    X = np.asarray(codes, dtype=DTYPE)
    t = np.asarray(labels).astype(DTYPE).reshape(-1)
    if X.ndim != 2 or len(X) != len(t):
        raise ShapeError("codes must be (n, l) with one label per code")
    if not ((t == 0) | (t == 1)).all():
        raise ValueError("labels must be binary 0/1")
    if t.min() == t.max():
        raise ValueError("attribute_direction needs examples of both classes")
    n, l = X.shape
    # centring moves only the intercept, so the normal is unchanged
    A = np.hstack([X - X.mean(axis=0), np.ones((n, 1))])
    penalty = np.full(l + 1, l2)
    penalty[-1] = 0.0
    w = np.zeros(l + 1)
    for _ in range(max_iter):
        p = 0.5 * (1.0 + np.tanh(0.5 * (A @ w)))
        grad = A.T @ (p - t) / n + penalty * w
        H = (A * (p * (1 - p))[:, None]).T @ A / n + np.diag(penalty)
        H[-1, -1] += 1e-12
        delta = np.linalg.solve(H, grad)
        w -= delta
        if np.max(np.abs(delta)) < tol:
            break
    v = w[:l]
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ValueError("degenerate classifier: zero normal vector")
    return v / norm
