"""Experiment configuration, seed fan-out and model bundles.

Config files are YAML.  Schema (all keys optional except ``seed``)::

    seed: 0                      # the single source of randomness
    domain: squares              # squares | colors
    image_size: 32
    output: runs/squares         # output directory for commands that write files
    data: null                   # dataset directory (defaults to <output>/data)
    effects: {image: linear, sigma: 0.1}
    scale: {n_train: 10000, n_test: 2000, n_pairs: 50, n_steps: 50}
    autoencoder: {latent_dim: 16, hidden: [256, 64], epochs: 15, batch_size: 64, lr: 0.001}
    naim: {epochs: 60, batch_size: 512, lr: 0.003, lr_final: 1.0e-5, feature_dropout: 0.2,
           dropout: 0.2, weight_decay: 0.001, hidden: 100, image_hidden: 100, interactions: []}

Per-module seeds are derived from ``seed`` and a module name (see
:func:`derive_seed`): ``data-train``, ``data-test``, ``autoencoder``,
``naim``, ``bench``.
"""

from __future__ import annotations

import copy
import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .codec import Autoencoder, AutoencoderConfig
from .nam import NaimModel, TrainConfig
from .synthdata import DOMAINS, EffectSpec

BUNDLE_FORMAT = "naim-bundle/1"

DESK_AUTOENCODER = {
    "squares": {"latent_dim": 16, "hidden": [256, 64], "epochs": 15, "batch_size": 64, "lr": 1e-3},
    "colors": {"latent_dim": 8, "hidden": [64, 32], "epochs": 15, "batch_size": 64, "lr": 1e-3},
}
DESK_NAIM = {"epochs": 60, "batch_size": 512, "lr": 3e-3, "lr_final": 1e-5, "feature_dropout": 0.2,
             "dropout": 0.2, "weight_decay": 1e-3, "hidden": 100, "n_layers": 4,
             "image_hidden": 100, "image_layers": 4, "interactions": []}
DESK_SCALE = {"n_train": 10000, "n_test": 2000, "n_pairs": 50, "n_steps": 50}


def derive_seed(seed: int, name: str) -> int:
    return int(np.random.SeedSequence([int(seed), zlib.crc32(name.encode())]).generate_state(1)[0])


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


@dataclass
class ExperimentConfig:
    seed: int
    domain: str = "squares"
    image_size: int = 32
    output: str = "runs/experiment"
    data: str | None = None
    effects: dict = field(default_factory=lambda: {"image": "linear", "sigma": 0.1})
    scale: dict = field(default_factory=lambda: dict(DESK_SCALE))
    autoencoder: dict = field(default_factory=dict)
    naim: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.seed is None:
            raise ValueError("config must set a seed")
        if self.domain not in DOMAINS:
            raise ValueError(f"domain must be one of {DOMAINS}, got {self.domain!r}")
        self.seed = int(self.seed)
        self.scale = _merge(DESK_SCALE, self.scale)
        self.autoencoder = _merge(DESK_AUTOENCODER[self.domain], self.autoencoder)
        self.naim = _merge(DESK_NAIM, self.naim)
        unknown = set(self.naim) - set(TrainConfig.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown naim config keys: {sorted(unknown)}")
        unknown = set(self.autoencoder) - set(AutoencoderConfig.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown autoencoder config keys: {sorted(unknown)}")
        self.effect_spec()

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "seed" not in d:
            raise ValueError("config must set a seed")
        return cls(**d)

    @classmethod
    def load(cls, path, overrides: list[str] = ()) -> "ExperimentConfig":
        d = {}
        if path is not None:
            with open(path) as fh:
                d = yaml.safe_load(fh) or {}
        return cls.from_dict(apply_overrides(d, overrides))

    def to_dict(self) -> dict:
        return {k: copy.deepcopy(getattr(self, k)) for k in self.__dataclass_fields__}

    def effect_spec(self) -> EffectSpec:
        e = dict(self.effects)
        if "numeric" in e:
            e["numeric"] = tuple(e["numeric"])
        return EffectSpec(**e)

    def ae_config(self) -> AutoencoderConfig:
        return AutoencoderConfig(**{**self.autoencoder, "seed": derive_seed(self.seed, "autoencoder")})

    def train_config(self) -> TrainConfig:
        return TrainConfig(**{**self.naim, "seed": derive_seed(self.seed, "naim")})

    @property
    def data_dir(self) -> Path:
        return Path(self.data) if self.data else Path(self.output) / "data"


def apply_overrides(d: dict, overrides) -> dict:
    """Apply ``dotted.key=value`` strings; values are parsed as YAML scalars/lists."""
    d = copy.deepcopy(d)
    for item in overrides or ():
        if "=" not in item:
            raise ValueError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        node = d
        parts = key.strip().split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = yaml.safe_load(raw)
    return d


# ---------------------------------------------------------------------------
# bundles


@dataclass
class ModelBundle:
    autoencoder: Autoencoder
    model: NaimModel
    config: dict
    manifest_sha256: str
    metrics: dict

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        arrays = {f"ae/{k}": v for k, v in self.autoencoder.state().items()}
        arrays.update({f"naim/{k}": v for k, v in self.model.state().items()})
        meta = {
            "format": BUNDLE_FORMAT,
            "config": self.config,
            "manifest_sha256": self.manifest_sha256,
            "metrics": self.metrics,
            "autoencoder": self.autoencoder.describe(),
            "naim": self.model.describe(),
        }
        arrays["meta"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
        with open(path, "wb") as fh:
            np.savez(fh, **arrays)
        return path

    @classmethod
    def load(cls, path) -> "ModelBundle":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"no model bundle at {path}")
        with np.load(path) as npz:
            meta = json.loads(npz["meta"].tobytes().decode())
            if meta.get("format") != BUNDLE_FORMAT:
                raise ValueError(f"bundle format {meta.get('format')!r} is not supported (expected {BUNDLE_FORMAT})")
            arrays = {k: npz[k] for k in npz.files if k != "meta"}
        a = meta["autoencoder"]
        ae = Autoencoder(tuple(a["image_shape"]), AutoencoderConfig(
            **{k: a[k] for k in AutoencoderConfig.__dataclass_fields__}))
        ae.load_state({k[3:]: v for k, v in arrays.items() if k.startswith("ae/")})
        model = NaimModel.from_description(meta["naim"])
        model.load_state({k[5:]: v for k, v in arrays.items() if k.startswith("naim/")})
        return cls(ae, model, meta["config"], meta["manifest_sha256"], meta["metrics"])
