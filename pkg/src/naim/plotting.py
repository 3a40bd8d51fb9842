"""Static figures for reports: effect curves, numeric effects, predictive shifts."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}

GREY, RED, BLUE, BLACK = "0.55", "#c0392b", "#2c6fbb", "0.1"


def _imshow(ax, img):
    img = np.asarray(img)
    if img.shape[-1] == 1:
        ax.imshow(img[..., 0], cmap="gray", vmin=0, vmax=1)
    else:
        ax.imshow(np.clip(img, 0, 1))
    ax.set_xticks([])
    ax.set_yticks([])


def plot_effect_curve(curve, path, title: str = "", reference_images=None, max_panels: int = 10):
    """Decoded images across the top, centred image effect underneath."""
    k = len(curve)
    shown = np.unique(np.linspace(0, k - 1, min(k, max_panels)).round().astype(int))
    n_img_rows = 2 if reference_images is not None else 1
    with plt.rc_context(STYLE):
        fig = plt.figure(figsize=(max(4.0, 0.75 * len(shown)), 1.0 * n_img_rows + 2.4))
        gs = fig.add_gridspec(n_img_rows + 1, len(shown), height_ratios=[1] * n_img_rows + [2.4])
        for col, i in enumerate(shown):
            _imshow(fig.add_subplot(gs[0, col]), curve.images[i])
            if reference_images is not None:
                _imshow(fig.add_subplot(gs[1, col]), reference_images[i])
        ax = fig.add_subplot(gs[n_img_rows, :])
        ax.plot(curve.steps, curve.predictions, color=RED, lw=1.5, label="learned")
        if curve.reference is not None:
            ax.plot(curve.steps, curve.reference, color=BLACK, lw=1.0, ls="--", label="true")
            ax.legend(frameon=False)
        ax.set_xlabel("interpolation step")
        ax.set_ylabel("image effect (centred)")
        if title:
            fig.suptitle(title)
        fig.savefig(path)
        plt.close(fig)


def plot_numeric_effects(model, spec, path, grid_size: int = 101):
    grid = np.linspace(0, 1, grid_size)
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, model.n_features, figsize=(2.6 * model.n_features, 2.4), squeeze=False)
        for j, ax in enumerate(axes[0]):
            learned = np.array(model.effect_curve_numeric(j, grid))[:, 1]
            true = spec.numeric_effect(j, grid)
            ax.plot(grid, learned - learned.mean(), color=RED, lw=1.5, label="learned")
            ax.plot(grid, true - true.mean(), color=BLACK, lw=1.0, ls="--", label="true")
            ax.set_title(f"f{j + 1}: {spec.numeric[j]}")
            ax.set_xlabel(f"x{j + 1}")
        axes[0, 0].set_ylabel("effect (centred)")
        axes[0, 0].legend(frameon=False)
        fig.savefig(path)
        plt.close(fig)


def plot_global_shift(base, shifted, path, shifted_neg=None, title: str = ""):
    """Histograms of predictions before and after shifting every image code."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.2, 2.8))
        series = [(base, GREY, "original"), (shifted, RED, "positive shift")]
        if shifted_neg is not None:
            series.append((shifted_neg, BLUE, "negative shift"))
        lo = min(np.min(s) for s, _, _ in series)
        hi = max(np.max(s) for s, _, _ in series)
        bins = np.linspace(lo, hi if hi > lo else lo + 1e-6, 40)
        for values, color, label in series:
            ax.hist(values, bins=bins, color=color, alpha=0.45, label=label)
            ax.axvline(np.mean(values), color=color, ls="--", lw=1.2)
        ax.set_xlabel("prediction")
        ax.set_ylabel("count")
        ax.legend(frameon=False)
        if title:
            ax.set_title(title)
        fig.savefig(path)
        plt.close(fig)


def plot_loss(history, path, label: str = "training loss"):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.0, 2.6))
        ax.plot(np.arange(1, len(history) + 1), history, color=BLACK, lw=1.2)
        ax.set_xlabel("epoch")
        ax.set_ylabel(label)
        ax.set_yscale("log")
        fig.savefig(path)
        plt.close(fig)
