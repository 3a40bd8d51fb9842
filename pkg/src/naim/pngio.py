"""8-bit PNG <-> float image conversion and dataset directories."""

from __future__ import annotations

import csv
import hashlib
from pathlib import Path

import numpy as np
from PIL import Image

from .synthdata import EffectSpec, SyntheticDataset

MANIFEST = "manifest.csv"


def to_uint8(image: np.ndarray) -> np.ndarray:
    # round half up
    return np.floor(np.clip(np.asarray(image, dtype=float), 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def save_png(image: np.ndarray, path) -> None:
    arr = to_uint8(image)
    if arr.ndim == 3 and arr.shape[-1] == 1:
        arr = arr[..., 0]
    Image.fromarray(arr).save(path)


def load_png(path) -> np.ndarray:
    """Float image of shape (H, W, C) in [0, 1]; greyscale gets C = 1."""
    with Image.open(path) as im:
        arr = np.asarray(im, dtype=float) / 255.0
    if arr.ndim == 2:
        arr = arr[..., None]
    elif arr.shape[-1] == 4:
        arr = arr[..., :3]
    return arr


def save_strip(images, path, gap: int = 2) -> None:
    """Images side by side, white gaps between panels."""
    images = [np.asarray(im, dtype=float) for im in images]
    h, w, c = images[0].shape
    strip = np.ones((h, len(images) * (w + gap) - gap, c))
    for i, im in enumerate(images):
        strip[:, i * (w + gap):i * (w + gap) + w] = im
    save_png(strip, path)


MANIFEST_FIELDS = ["sample_id", "split", "image", "x1", "x2", "x3", "phi", "y", "noise", "spec", "seed"]


def write_dataset(splits: dict[str, SyntheticDataset], out_dir) -> Path:
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    rows = []
    sid = 0
    for split, ds in splits.items():
        for i in range(len(ds)):
            name = f"images/{sid:06d}.png"
            save_png(ds.images[i], out / name)
            x = ds.features[i]
            rows.append({"sample_id": sid, "split": split, "image": name,
                         "x1": repr(float(x[0])), "x2": repr(float(x[1])), "x3": repr(float(x[2])),
                         "phi": repr(float(ds.phi[i])), "y": repr(float(ds.y[i])),
                         "noise": repr(float(ds.noise[i])), "spec": ds.spec.tag, "seed": ds.seed})
            sid += 1
    with open(out / MANIFEST, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=MANIFEST_FIELDS)
        writer.writeheader()
        writer.writerows(rows)
    return out / MANIFEST


def read_manifest(data_dir) -> list[dict]:
    path = Path(data_dir) / MANIFEST
    if not path.exists():
        raise FileNotFoundError(f"no dataset manifest at {path}")
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def manifest_hash(data_dir) -> str:
    return hashlib.sha256((Path(data_dir) / MANIFEST).read_bytes()).hexdigest()


def spec_from_tag(tag: str) -> EffectSpec:
    numeric, img, sigma = tag.split("|")
    return EffectSpec(tuple(numeric.split("+")), img.split("=", 1)[1], float(sigma.split("=", 1)[1]))


def load_split(data_dir, split: str, domain: str) -> SyntheticDataset:
    rows = [r for r in read_manifest(data_dir) if r["split"] == split]
    if not rows:
        raise ValueError(f"dataset at {data_dir} has no {split!r} split")
    data_dir = Path(data_dir)
    images = np.stack([load_png(data_dir / r["image"]) for r in rows])
    col = lambda k: np.array([float(r[k]) for r in rows])
    features = np.column_stack([col("x1"), col("x2"), col("x3")])
    return SyntheticDataset(domain, features, images, col("phi"), col("noise"), col("y"),
                            spec_from_tag(rows[0]["spec"]), int(rows[0]["seed"]))


def read_labels(label_csv) -> tuple[list[Path], np.ndarray]:
    """``image,label`` rows; image paths are relative to the CSV's directory."""
    label_csv = Path(label_csv)
    with open(label_csv, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"label file {label_csv} is empty")
    if "image" not in rows[0] or "label" not in rows[0]:
        raise ValueError("label file needs 'image' and 'label' columns")
    paths = [label_csv.parent / r["image"] for r in rows]
    return paths, np.array([int(r["label"]) for r in rows])
