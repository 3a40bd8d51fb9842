"""Neural additive model with an optional image term.

    y_hat = b0 + sum_j f_j(x_j) + sum_(j,k) f_jk(x_j, x_k) + f_img(z)

Every f is a small MLP; ``z`` is the (frozen) autoencoder code of the image.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .diffcore import DTYPE, Adam, Mlp, ShapeError, Tensor, concat, parameter

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 40
    batch_size: int = 128
    feature_dropout: float = 0.5
    dropout: float = 0.2
    lr: float = 1e-3
    weight_decay: float = 1e-3
    lr_final: float | None = None   # cosine decay to this value when set
    hidden: int = 100
    n_layers: int = 4
    image_hidden: int = 100
    image_layers: int = 4
    interactions: tuple[tuple[int, int], ...] = ()
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.feature_dropout < 1.0:
            raise ValueError("feature_dropout must lie in [0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        self.interactions = tuple(tuple(int(i) for i in p) for p in self.interactions)


class NaimModel:
    link = "identity"

    def __init__(self, n_features: int, latent_dim: int | None = None, *, hidden: int = 100,
                 n_layers: int = 4, image_hidden: int = 100, image_layers: int = 4,
                 dropout: float = 0.0, interactions=(), seed: int = 0, zero: bool = False):
        self.n_features = n_features
        self.latent_dim = latent_dim
        self.interactions = [tuple(p) for p in interactions]
        for j, k in self.interactions:
            if j == k or not (0 <= j < n_features and 0 <= k < n_features):
                raise ValueError(f"invalid interaction pair {(j, k)}")
        rng = np.random.default_rng(seed)
        kw = dict(hidden=hidden, n_layers=n_layers, dropout=dropout, rng=rng, zero=zero)
        self.intercept = parameter(0.0)
        self.shape_nets = [Mlp(1, 1, **kw) for _ in range(n_features)]
        self.interaction_nets = [Mlp(2, 1, **kw) for _ in self.interactions]
        self.image_head = None
        if latent_dim is not None:
            self.image_head = Mlp(latent_dim, 1, hidden=image_hidden, n_layers=image_layers,
                                  dropout=dropout, rng=rng, zero=zero)
        # fixed affine standardisation of codes in front of the image head
        self.latent_shift = np.zeros(latent_dim or 0)
        self.latent_scale = np.ones(latent_dim or 0)
        self.term_means = np.zeros(self.n_terms)
        self.history: list[float] = []

    # -- structure --------------------------------------------------------------

    @property
    def has_image(self) -> bool:
        return self.image_head is not None

    @property
    def n_terms(self) -> int:
        return self.n_features + len(self.interactions) + (1 if self.has_image else 0)

    def term_names(self) -> list[str]:
        names = [f"f{j + 1}" for j in range(self.n_features)]
        names += [f"f{j + 1}_{k + 1}" for j, k in self.interactions]
        if self.has_image:
            names.append("f_img")
        return names

    def nets(self) -> list[Mlp]:
        return self.shape_nets + self.interaction_nets + ([self.image_head] if self.has_image else [])

    def parameters(self):
        out = [self.intercept]
        for net in self.nets():
            out += net.parameters()
        return out

    # -- evaluation ---------------------------------------------------------------

    def _check(self, x, z=None):
        x = np.asarray(x, dtype=DTYPE)
        single = x.ndim == 1
        x2 = x[None] if single else x
        if x2.ndim != 2 or x2.shape[1] != self.n_features:
            raise ShapeError(f"expected {self.n_features} tabular features, got shape {x.shape}")
        z2 = None
        if z is not None:
            if not self.has_image:
                raise ShapeError("model has no image term")
            z2 = np.asarray(z, dtype=DTYPE)
            z2 = z2[None] if z2.ndim == 1 else z2
            if z2.shape != (len(x2), self.latent_dim):
                raise ShapeError(f"expected latent codes of shape ({len(x2)}, {self.latent_dim}), got {np.shape(z)}")
        return x2, z2, single

    def shape_effect(self, j: int, values) -> np.ndarray:
        """Raw (uncentred) f_j on an array of feature values."""
        if not 0 <= j < self.n_features:
            raise IndexError(f"feature index {j} out of range for {self.n_features} features")
        v = np.asarray(values, dtype=DTYPE).reshape(-1, 1)
        return self.shape_nets[j].forward(v)[:, 0]

    def interaction_effect(self, i: int, xj, xk) -> np.ndarray:
        v = np.column_stack([np.asarray(xj, dtype=DTYPE).ravel(), np.asarray(xk, dtype=DTYPE).ravel()])
        return self.interaction_nets[i].forward(v)[:, 0]

    def image_effect(self, z) -> np.ndarray:
        """Raw f_img on code(s) ``z``; shape (n,) for a batch."""
        if not self.has_image:
            raise ShapeError("model has no image term")
        z = np.asarray(z, dtype=DTYPE)
        z2 = z[None] if z.ndim == 1 else z
        if z2.ndim != 2 or z2.shape[1] != self.latent_dim:
            raise ShapeError(f"expected latent codes of dimension {self.latent_dim}, got shape {z.shape}")
        out = self.image_head.forward((z2 - self.latent_shift) / self.latent_scale)[:, 0]
        return out

    def centered_image_effect(self, z) -> np.ndarray:
        return self.image_effect(z) - self.term_means[-1]

    def tabular_terms(self, x: np.ndarray) -> np.ndarray:
        cols = [self.shape_effect(j, x[:, j]) for j in range(self.n_features)]
        cols += [self.interaction_effect(i, x[:, j], x[:, k]) for i, (j, k) in enumerate(self.interactions)]
        return np.column_stack(cols) if cols else np.zeros((len(x), 0))

    def terms(self, x, z=None) -> np.ndarray:
        """(n, n_terms) matrix of per-term contributions, in ``term_names()`` order."""
        x2, z2, _ = self._check(x, z)
        t = self.tabular_terms(x2)
        if self.has_image:
            if z2 is None:
                raise ShapeError("image codes required for a model with an image term")
            t = np.column_stack([t, self.image_effect(z2)])
        return t

    def predict(self, x, z=None):
        x2, z2, single = self._check(x, z)
        if self.has_image and z2 is None:
            raise ShapeError("image codes required for a model with an image term")
        out = float(self.intercept.data) + self.terms(x2, z2).sum(axis=1)
        return float(out[0]) if single else out

    def predict_tabular(self, x):
        """Prediction with the image term left out."""
        x2, _, single = self._check(x)
        out = float(self.intercept.data) + self.tabular_terms(x2).sum(axis=1)
        return float(out[0]) if single else out

    def effect_curve_numeric(self, j: int, grid) -> list[tuple[float, float]]:
        """(x, f_j(x) - training mean of f_j) for each grid point."""
        grid = np.asarray(grid, dtype=DTYPE).ravel()
        if grid.size == 0:
            raise ValueError("grid must be nonempty")
        vals = self.shape_effect(j, grid) - self.term_means[j]
        return list(zip(grid.tolist(), vals.tolist()))

    def set_term_means(self, x, z=None):
        self.term_means = self.terms(x, z).mean(axis=0)

    # -- persistence --------------------------------------------------------------

    def state(self) -> dict[str, np.ndarray]:
        out = {"intercept": self.intercept.data.copy(), "term_means": self.term_means.copy(),
               "latent_shift": self.latent_shift.copy(), "latent_scale": self.latent_scale.copy()}
        for t, net in zip(self.term_names(), self.nets()):
            for key, arr in net.state().items():
                out[f"{t}.{key}"] = arr
        return out

    def load_state(self, state: dict[str, np.ndarray]):
        self.intercept.data = np.array(state["intercept"], dtype=DTYPE)
        self.term_means = np.array(state["term_means"], dtype=DTYPE)
        self.latent_shift = np.array(state["latent_shift"], dtype=DTYPE)
        self.latent_scale = np.array(state["latent_scale"], dtype=DTYPE)
        for t, net in zip(self.term_names(), self.nets()):
            prefix = f"{t}."
            net.load_state({k[len(prefix):]: v for k, v in state.items() if k.startswith(prefix)})

    def describe(self) -> dict:
        net = self.shape_nets[0] if self.shape_nets else None
        return {
            "n_features": self.n_features,
            "latent_dim": self.latent_dim,
            "hidden": net.hidden if net else 100,
            "n_layers": net.n_layers if net else 4,
            "image_hidden": self.image_head.hidden if self.has_image else None,
            "image_layers": self.image_head.n_layers if self.has_image else None,
            "interactions": [list(p) for p in self.interactions],
            "link": self.link,
        }

    @classmethod
    def from_description(cls, desc: dict) -> "NaimModel":
        return cls(desc["n_features"], desc["latent_dim"], hidden=desc["hidden"], n_layers=desc["n_layers"],
                   image_hidden=desc["image_hidden"] or 100, image_layers=desc["image_layers"] or 4,
                   interactions=[tuple(p) for p in desc["interactions"]])


class TrainingError(RuntimeError):
    pass


def _forward_terms(model: NaimModel, xb: np.ndarray, zb: np.ndarray | None, rng) -> Tensor:
    cols = [net(Tensor(xb[:, j:j + 1]), rng=rng) for j, net in enumerate(model.shape_nets)]
    cols += [net(Tensor(xb[:, [j, k]]), rng=rng)
             for net, (j, k) in zip(model.interaction_nets, model.interactions)]
    if model.has_image:
        cols.append(model.image_head(Tensor((zb - model.latent_shift) / model.latent_scale), rng=rng))
    return concat(cols, axis=1)


def train(features, y, latents=None, config: TrainConfig | None = None, callback=None) -> NaimModel:
    """Fit a NAIM by minibatch Adam on squared error.

    ``latents`` are the frozen autoencoder codes of the training images; pass
    ``None`` for the tabular-only (no image) model.  Feature dropout removes
    whole additive terms, independently per sample and term, without
    rescaling the survivors.  ``callback(epoch, loss)`` runs after each epoch.
    """
    config = config or TrainConfig()
    x = np.asarray(features, dtype=DTYPE)
    y = np.asarray(y, dtype=DTYPE).ravel()
    if len(y) == 0:
        raise ValueError("cannot train on an empty dataset")
    if x.ndim != 2 or len(x) != len(y):
        raise ShapeError("features must be (n, J) with one response per row")
    z = None
    if latents is not None:
        z = np.asarray(latents, dtype=DTYPE)
        if z.ndim != 2 or len(z) != len(y):
            raise ShapeError("latents must be (n, l) with one code per row")

    model = NaimModel(x.shape[1], None if z is None else z.shape[1], hidden=config.hidden,
                      n_layers=config.n_layers, image_hidden=config.image_hidden,
                      image_layers=config.image_layers, dropout=config.dropout,
                      interactions=config.interactions, seed=config.seed)
    if z is not None:
        model.latent_shift = z.mean(axis=0)
        sd = z.std(axis=0)
        model.latent_scale = np.where(sd > 0, sd, 1.0)
    model.intercept.data = np.array(y.mean())

    opt = Adam(model.parameters(), lr=config.lr, weight_decay=config.weight_decay)
    rng = np.random.default_rng(config.seed + 1)
    n, bs = len(y), config.batch_size
    steps_per_epoch = -(-n // bs)
    total_steps = steps_per_epoch * config.epochs
    step = 0
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        running = 0.0
        for start in range(0, n, bs):
            if config.lr_final is not None:
                frac = step / max(total_steps - 1, 1)
                opt.lr = config.lr_final + 0.5 * (config.lr - config.lr_final) * (1 + np.cos(np.pi * frac))
            idx = order[start:start + bs]
            xb, yb = x[idx], y[idx]
            zb = None if z is None else z[idx]
            cols = _forward_terms(model, xb, zb, rng)
            if config.feature_dropout > 0:
                cols = cols * (rng.random(cols.shape) >= config.feature_dropout)
            pred = cols.sum(axis=1) + model.intercept
            diff = pred - yb
            loss = (diff * diff).mean()
            lv = float(loss.data)
            if not np.isfinite(lv):
                raise TrainingError(f"non-finite loss at epoch {epoch}, step {step}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            running += lv * len(idx)
            step += 1
        model.history.append(running / n)
        if callback is not None:
            callback(epoch, model.history[-1])
        log.info("naim epoch %d: train loss %.4g", epoch, model.history[-1])
    model.set_term_means(x, z)
    return model
