"""``naim`` command line: generate, train, bench, interpolate, manipulate, global-shift."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from . import pngio
from .codec import attribute_direction, train_autoencoder
from .evalbench import ablation_run, image_effect_benchmark, mse, numeric_effect_benchmark, r2
from .experiment import ExperimentConfig, ModelBundle, derive_seed
from .lens import effect_curve, global_shift, interpolate_latents, manipulate_latents
from .nam import train
from .plotting import plot_effect_curve, plot_global_shift, plot_loss, plot_numeric_effects
from .synthdata import extract_phi, make_dataset, phi_for, reference_interpolation

log = logging.getLogger("naim")


def _write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else v


# ---------------------------------------------------------------------------
# commands


def cmd_generate(cfg: ExperimentConfig) -> Path:
    spec = cfg.effect_spec()
    splits = {
        "train": make_dataset(cfg.domain, cfg.scale["n_train"], spec, derive_seed(cfg.seed, "data-train"), cfg.image_size),
        "test": make_dataset(cfg.domain, cfg.scale["n_test"], spec, derive_seed(cfg.seed, "data-test"), cfg.image_size),
    }
    out = cfg.data_dir
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create dataset directory {out}: {exc}") from exc
    manifest = pngio.write_dataset(splits, out)
    # binary attribute labels for manipulation: right half / red above 0.5
    rows = []
    for r in pngio.read_manifest(out):
        if r["split"] == "train":
            rows.append((r["image"], int(float(r["phi"]) > 0.5)))
    _write_csv(out / "attribute_labels.csv", ["image", "label"], rows)
    with open(out / "config.yaml", "w") as fh:
        yaml.safe_dump(cfg.to_dict(), fh, sort_keys=True)
    log.info("wrote %d samples to %s", sum(len(s) for s in splits.values()), out)
    return manifest


def cmd_train(cfg: ExperimentConfig) -> Path:
    data_dir = cfg.data_dir
    train_set = pngio.load_split(data_dir, "train", cfg.domain)
    test_set = pngio.load_split(data_dir, "test", cfg.domain)
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)

    ae_log = open(out / "autoencoder_loss.csv", "w", newline="")
    naim_log = open(out / "naim_loss.csv", "w", newline="")
    try:
        ae_writer, naim_writer = csv.writer(ae_log), csv.writer(naim_log)
        ae_writer.writerow(["epoch", "loss"])
        naim_writer.writerow(["epoch", "loss"])

        def ae_cb(epoch, loss):
            ae_writer.writerow([epoch, repr(loss)])
            ae_log.flush()

        def naim_cb(epoch, loss):
            naim_writer.writerow([epoch, repr(loss)])
            naim_log.flush()

        ae = train_autoencoder(train_set.images, cfg.ae_config(), callback=ae_cb)
        z_train = ae.encode(train_set.images)
        model = train(train_set.features, train_set.y, z_train, cfg.train_config(), callback=naim_cb)
    finally:
        ae_log.close()
        naim_log.close()

    z_test = ae.encode(test_set.images)
    pred = model.predict(test_set.features, z_test)
    metrics = {
        "test_mse": mse(pred, test_set.y),
        "test_r2": r2(pred, test_set.y),
        "ae_test_mse": ae.reconstruction_mse(test_set.images),
        "image_effect_offset": float(np.mean(train_set.spec.image_effect(train_set.phi))),
    }
    bundle = ModelBundle(ae, model, cfg.to_dict(), pngio.manifest_hash(data_dir), metrics)
    path = bundle.save(out / "bundle.npz")
    plot_loss(ae.history, out / "autoencoder_loss.png", "reconstruction MSE")
    plot_loss(model.history, out / "naim_loss.png", "training MSE")
    log.info("bundle written to %s (test MSE %.4g, R2 %.4f)", path, metrics["test_mse"], metrics["test_r2"])
    return path


def cmd_bench(cfg: ExperimentConfig, bundle_path) -> Path:
    bundle = ModelBundle.load(bundle_path)
    data_dir = cfg.data_dir
    if pngio.manifest_hash(data_dir) != bundle.manifest_sha256:
        log.warning("dataset manifest differs from the one the bundle was trained on")
    train_set = pngio.load_split(data_dir, "train", cfg.domain)
    test_set = pngio.load_split(data_dir, "test", cfg.domain)
    spec = train_set.spec
    out = Path(cfg.output) / "bench"
    out.mkdir(parents=True, exist_ok=True)
    seed = derive_seed(cfg.seed, "bench")

    fit, _ = ablation_run(train_set, test_set, bundle.autoencoder, cfg.train_config(),
                          models={"with_image": bundle.model})
    img = image_effect_benchmark(bundle.model, bundle.autoencoder, test_set.images, spec, cfg.domain,
                                 bundle.metrics["image_effect_offset"], cfg.scale["n_pairs"],
                                 cfg.scale["n_steps"], seed)
    num = numeric_effect_benchmark(bundle.model, spec, test_set.features)

    for rep in (fit, img, num):
        records = rep.to_records()
        keys = list(dict.fromkeys(k for rec in records for k in rec))
        _write_csv(out / f"{rep.protocol}.csv", keys, [[_fmt(rec.get(k, "")) for k in keys] for rec in records])
    summary = "\n\n".join(rep.summary() for rep in (fit, img, num))
    (out / "summary.txt").write_text(summary + "\n")

    plot_numeric_effects(bundle.model, spec, out / "numeric_effects.png")
    # one example interpolation between the test images with extreme phi
    phi = extract_phi(cfg.domain, test_set.images)
    a, b = int(np.argmin(phi)), int(np.argmax(phi))
    z = bundle.autoencoder.encode(test_set.images[[a, b]])
    seq = interpolate_latents(z[0], z[1], 10)
    ref = spec.image_effect((1 - seq.steps) * phi[a] + seq.steps * phi[b]) - bundle.metrics["image_effect_offset"]
    curve = effect_curve(bundle.model, bundle.autoencoder, seq, ref)
    plot_effect_curve(curve, out / "example_interpolation.png", f"{cfg.domain}: f_img = {spec.image}",
                      reference_interpolation(test_set.images[a], test_set.images[b], 10, cfg.domain))
    print(summary)
    return out


def _reference_curve(bundle: ModelBundle, domain: str, phi_a: float, phi_b: float, steps) -> np.ndarray:
    spec = ExperimentConfig.from_dict(bundle.config).effect_spec()
    return spec.image_effect((1 - steps) * phi_a + steps * phi_b) - bundle.metrics["image_effect_offset"]


def _write_curve(curve, out: Path, stem: str, step_name: str, title: str):
    header = ["index", step_name, "prediction"] + (["reference"] if curve.reference is not None else [])
    rows = []
    for i in range(len(curve)):
        row = [i, _fmt(curve.steps[i]), _fmt(curve.predictions[i])]
        if curve.reference is not None:
            row.append(_fmt(curve.reference[i]))
        rows.append(row)
    _write_csv(out / f"{stem}.csv", header, rows)
    pngio.save_strip(curve.images, out / f"{stem}_strip.png")
    plot_effect_curve(curve, out / f"{stem}.png", title)


def _load_conforming(path, ae):
    img = pngio.load_png(path)
    if img.shape != ae.image_shape:
        raise ValueError(f"image {path} has shape {img.shape}, bundle expects {ae.image_shape}")
    return img


def cmd_interpolate(bundle_path, image_a, image_b, k: int, out_dir) -> Path:
    bundle = ModelBundle.load(bundle_path)
    ae, model = bundle.autoencoder, bundle.model
    domain = bundle.config["domain"]
    a, b = _load_conforming(image_a, ae), _load_conforming(image_b, ae)
    z = ae.encode(np.stack([a, b]))
    seq = interpolate_latents(z[0], z[1], k)
    phi = phi_for(domain)
    ref = _reference_curve(bundle, domain, phi(a), phi(b), seq.steps)
    curve = effect_curve(model, ae, seq, ref)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_curve(curve, out, "interpolation", "lambda", f"interpolation, k={k}")
    return out / "interpolation.csv"


def _direction_from_labels(ae, label_csv) -> np.ndarray:
    paths, labels = pngio.read_labels(label_csv)
    images = np.stack([_load_conforming(p, ae) for p in paths])
    return attribute_direction(ae.encode(images), labels)


def cmd_manipulate(bundle_path, image, label_csv, alpha: float, k: int, out_dir) -> Path:
    bundle = ModelBundle.load(bundle_path)
    ae, model = bundle.autoencoder, bundle.model
    v = _direction_from_labels(ae, label_csv)
    z = ae.encode(_load_conforming(image, ae))
    seq = manipulate_latents(z, v, alpha, k)
    curve = effect_curve(model, ae, seq)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_curve(curve, out, "manipulation", "shift_fraction", f"manipulation, alpha={alpha:g}, k={k}")
    np.savetxt(out / "attribute_direction.txt", v)
    return out / "manipulation.csv"


def cmd_global_shift(bundle_path, data_dir, label_csv, alpha: float, out_dir, split: str = "test") -> Path:
    bundle = ModelBundle.load(bundle_path)
    ae, model = bundle.autoencoder, bundle.model
    domain = bundle.config["domain"]
    ds = pngio.load_split(data_dir, split, domain)
    v = _direction_from_labels(ae, label_csv)
    pos = global_shift(model, ae, ds.images, ds.features, v, alpha)
    neg = global_shift(model, ae, ds.images, ds.features, -v, alpha)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ids = [r["sample_id"] for r in pngio.read_manifest(data_dir) if r["split"] == split]
    _write_csv(out / "global_shift.csv", ["sample_id", "base", "shifted", "shifted_negative"],
               [[i, _fmt(b), _fmt(s), _fmt(n)] for i, b, s, n in zip(ids, pos.base, pos.shifted, neg.shifted)])
    _write_csv(out / "global_shift_means.csv", ["alpha", "base_mean", "shifted_mean", "shifted_negative_mean"],
               [[_fmt(alpha), _fmt(pos.base_mean), _fmt(pos.shifted_mean), _fmt(neg.shifted_mean)]])
    plot_global_shift(pos.base, pos.shifted, out / "global_shift.png", neg.shifted, f"alpha = {alpha:g}")
    return out / "global_shift.csv"


# ---------------------------------------------------------------------------
# argument parsing


def _config_args(p: argparse.ArgumentParser):
    p.add_argument("--config", help="YAML experiment config")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key, e.g. --set naim.epochs=10 (repeatable)")
    p.add_argument("--seed", type=int)
    p.add_argument("--domain", choices=["squares", "colors"])
    p.add_argument("--output")
    p.add_argument("--data", help="dataset directory (default <output>/data)")


def _load_config(args) -> ExperimentConfig:
    overrides = list(args.set)
    for key in ("seed", "domain", "output", "data"):
        val = getattr(args, key, None)
        if val is not None:
            overrides.append(f"{key}={val}")
    if args.config is None and args.seed is None and not any(o.startswith("seed=") for o in args.set):
        raise ValueError("a seed is required: pass --seed or set it in --config")
    return ExperimentConfig.load(args.config, overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="naim", description="Neural additive image model experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_ in [("generate", "write a synthetic dataset (PNGs + manifest)"),
                        ("train", "train the autoencoder and the NAIM, write a bundle")]:
        _config_args(sub.add_parser(name, help=help_))

    p = sub.add_parser("bench", help="run the fit, image-effect and numeric-effect benchmarks")
    _config_args(p)
    p.add_argument("--bundle", help="model bundle (default <output>/bundle.npz)")

    p = sub.add_parser("interpolate", help="effect curve along a latent interpolation")
    p.add_argument("--bundle", required=True)
    p.add_argument("--image-a", required=True)
    p.add_argument("--image-b", required=True)
    p.add_argument("-k", type=int, default=10)
    p.add_argument("--out", required=True)

    p = sub.add_parser("manipulate", help="effect curve along an attribute direction")
    p.add_argument("--bundle", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--labels", required=True, help="CSV with image,label columns")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("-k", type=int, default=10)
    p.add_argument("--out", required=True)

    p = sub.add_parser("global-shift", help="predictive distribution before/after shifting all images")
    p.add_argument("--bundle", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--split", default="test")
    p.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "generate":
            print(cmd_generate(_load_config(args)))
        elif args.command == "train":
            print(cmd_train(_load_config(args)))
        elif args.command == "bench":
            cfg = _load_config(args)
            cmd_bench(cfg, args.bundle or Path(cfg.output) / "bundle.npz")
        elif args.command == "interpolate":
            print(cmd_interpolate(args.bundle, args.image_a, args.image_b, args.k, args.out))
        elif args.command == "manipulate":
            print(cmd_manipulate(args.bundle, args.image, args.labels, args.alpha, args.k, args.out))
        elif args.command == "global-shift":
            print(cmd_global_shift(args.bundle, args.data, args.labels, args.alpha, args.out, args.split))
    except Exception as exc:  # every error path exits nonzero with a diagnostic
        if args.verbose:
            raise
        print(f"naim {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
