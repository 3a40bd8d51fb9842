"""Metrics and the three benchmark protocols: overall fit, image-effect recovery, numeric effects."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .codec import Autoencoder
from .lens import interpolate_latents
from .nam import NaimModel, TrainConfig, train
from .synthdata import EffectSpec, SyntheticDataset, extract_phi

log = logging.getLogger(__name__)


def mse(pred, truth) -> float:
    pred, truth = np.asarray(pred, dtype=float).ravel(), np.asarray(truth, dtype=float).ravel()
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.size} predictions vs {truth.size} targets")
    if pred.size == 0:
        raise ValueError("mse of empty vectors")
    return float(np.mean((truth - pred) ** 2))


def r2(pred, truth) -> float:
    pred, truth = np.asarray(pred, dtype=float).ravel(), np.asarray(truth, dtype=float).ravel()
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.size} predictions vs {truth.size} targets")
    if truth.size < 2:
        raise ValueError("r2 needs at least two points")
    ss_tot = float(np.sum((truth - truth.mean()) ** 2))
    if ss_tot == 0.0:
        raise ValueError("r2 undefined for constant targets")
    return 1.0 - float(np.sum((truth - pred) ** 2)) / ss_tot


@dataclass
class BenchRow:
    name: str
    mse: float
    r2: float
    extra: dict = field(default_factory=dict)


@dataclass
class BenchReport:
    protocol: str
    rows: list[BenchRow]
    seed: int | None = None
    scale: dict = field(default_factory=dict)
    spec: str = ""
    notes: dict = field(default_factory=dict)

    def row(self, name: str) -> BenchRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    def to_records(self) -> list[dict]:
        out = []
        for r in self.rows:
            out.append({"protocol": self.protocol, "name": r.name, "mse": r.mse, "r2": r.r2,
                        "seed": self.seed, "spec": self.spec,
                        **{f"scale_{k}": v for k, v in self.scale.items()}, **r.extra})
        return out

    def summary(self) -> str:
        lines = [f"[{self.protocol}] spec={self.spec} seed={self.seed} scale={self.scale}"]
        for r in self.rows:
            lines.append(f"  {r.name:<24s} MSE={r.mse:.4g}  R2={r.r2:.4f}")
        for k, v in self.notes.items():
            lines.append(f"  {k}: {v}")
        return "\n".join(lines)


def ablation_run(train_set: SyntheticDataset, test_set: SyntheticDataset, ae: Autoencoder,
                 config: TrainConfig | None = None, models: dict | None = None) -> tuple[BenchReport, dict]:
    """Train with- and without-image models on ``train_set`` and score both on ``test_set``.

    Pass already trained models in ``models`` (keys ``"with_image"`` /
    ``"without_image"``) to skip retraining an arm.  Returns the report and
    the models.
    """
    config = config or TrainConfig()
    models = dict(models or {})
    z_train = ae.encode(train_set.images)
    z_test = ae.encode(test_set.images)
    if "with_image" not in models:
        models["with_image"] = train(train_set.features, train_set.y, z_train, config)
    if "without_image" not in models:
        models["without_image"] = train(train_set.features, train_set.y, None, config)
    p_with = models["with_image"].predict(test_set.features, z_test)
    p_without = models["without_image"].predict_tabular(test_set.features)
    rows = [BenchRow("with_image", mse(p_with, test_set.y), r2(p_with, test_set.y)),
            BenchRow("without_image", mse(p_without, test_set.y), r2(p_without, test_set.y))]
    report = BenchReport("overall_fit", rows, config.seed,
                         {"n_train": len(train_set), "n_test": len(test_set)},
                         f"{train_set.domain}|{train_set.spec.tag}")
    return report, models


def image_effect_benchmark(model: NaimModel, ae: Autoencoder, test_images, spec: EffectSpec, domain: str,
                           effect_offset: float, n_pairs: int = 50, n_steps: int = 50,
                           seed: int = 0) -> BenchReport:
    """Compare the model's latent-interpolation effect with the true effect along the feature path.

    For each random pair (a, b) the model curve is the image head on the
    linear path between the codes; the truth is ``f_img((1-t) phi_a + t phi_b)``
    where phi is read off the images.  Both curves are centred over their own
    points before scoring, since an additive term is identified only up to a
    constant.  The scores with both curves centred by training-set means
    (``effect_offset`` is the training mean of the true image effect) are
    reported alongside as ``level_mse`` / ``level_r2``.  Pairs with equal phi
    are skipped (R2 undefined).
    """
    test_images = np.asarray(test_images)
    if len(test_images) < 2:
        raise ValueError("need at least two test images")
    if n_pairs < 1 or n_steps < 2:
        raise ValueError("n_pairs must be >= 1 and n_steps >= 2")
    rng = np.random.default_rng(seed)
    pairs = rng.integers(0, len(test_images), size=(n_pairs, 2))
    phi = extract_phi(domain, test_images[np.unique(pairs)])
    phi_of = dict(zip(np.unique(pairs).tolist(), phi))
    codes = ae.encode(test_images[np.unique(pairs)])
    code_of = dict(zip(np.unique(pairs).tolist(), codes))
    mses, r2s, level_mses, level_r2s, skipped = [], [], [], [], 0
    for a, b in pairs.tolist():
        if phi_of[a] == phi_of[b]:
            skipped += 1
            continue
        seq = interpolate_latents(code_of[a], code_of[b], n_steps)
        learned = model.centered_image_effect(seq.codes)
        truth = spec.image_effect((1 - seq.steps) * phi_of[a] + seq.steps * phi_of[b]) - effect_offset
        level_mses.append(mse(learned, truth))
        level_r2s.append(r2(learned, truth))
        learned, truth = learned - learned.mean(), truth - truth.mean()
        mses.append(mse(learned, truth))
        r2s.append(r2(learned, truth))
    if skipped:
        log.info("image-effect benchmark: skipped %d degenerate pairs", skipped)
    if not mses:
        raise ValueError("every sampled pair was degenerate")
    rows = [BenchRow(f"{domain}_{spec.image}", float(np.mean(mses)), float(np.mean(r2s)),
                     {"median_r2": float(np.median(r2s)), "level_mse": float(np.mean(level_mses)),
                      "level_r2": float(np.mean(level_r2s)), "n_scored": len(r2s), "n_skipped": skipped})]
    return BenchReport("image_effect", rows, seed, {"n_pairs": n_pairs, "n_steps": n_steps},
                       f"{domain}|{spec.tag}", {"skipped_pairs": skipped})


def numeric_effect_benchmark(model: NaimModel, spec: EffectSpec, test_features) -> BenchReport:
    """Centred learned f_j vs centred true f_j on the test feature values, one row per feature."""
    x = np.asarray(test_features, dtype=float)
    rows = []
    for j, tag in enumerate(spec.numeric):
        learned = model.shape_effect(j, x[:, j])
        truth = spec.numeric_effect(j, x[:, j])
        learned = learned - learned.mean()
        truth = truth - truth.mean()
        rows.append(BenchRow(f"f{j + 1}_{tag}", mse(learned, truth), r2(learned, truth)))
    return BenchReport("numeric_effect", rows, None, {"n_test": len(x)}, spec.tag)


def report_dict(report: BenchReport) -> dict:
    return asdict(report)
