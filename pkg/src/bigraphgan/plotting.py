"""Figures and PNG output for training runs, inference and ablations."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams.update({"figure.dpi": 120, "font.size": 9, "axes.grid": True, "grid.alpha": 0.3})


def _to_hwc(image: np.ndarray, signed: bool) -> np.ndarray:
    img = np.asarray(image, dtype=np.float64)
    if signed:
        img = (img + 1.0) / 2.0
    img = np.clip(img, 0.0, 1.0)
    if img.ndim == 3:
        img = img[0] if img.shape[0] == 1 else img.transpose(1, 2, 0)
    return img


def save_image(image: np.ndarray, path, signed: bool = True) -> Path:
    """Write a c×h×w image (values in [-1, 1], or [0, 1] if not ``signed``) as PNG."""
    img = _to_hwc(image, signed)
    path = Path(path)
    if img.ndim == 2:
        plt.imsave(path, img, cmap="gray", vmin=0.0, vmax=1.0)
    else:
        plt.imsave(path, img)
    return path


def read_image(path) -> np.ndarray:
    """Read a PNG written by :func:`save_image` back to 3×h×w in [-1, 1]."""
    img = plt.imread(str(path))[..., :3].astype(np.float32)
    return img.transpose(2, 0, 1) * 2.0 - 1.0


def plot_losses(history, path) -> Path:
    steps = [r["step"] for r in history]
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.2))
    axes[0].plot(steps, [r["L_full"] for r in history], lw=0.8)
    axes[0].set_title("generator objective")
    axes[1].plot(steps, [r["L_l1"] for r in history], lw=0.8, label="L1")
    axes[1].plot(steps, [r["L_per"] for r in history], lw=0.8, label="perceptual")
    axes[1].legend()
    axes[1].set_title("reconstruction terms")
    axes[2].plot(steps, [r["L_gan_G"] for r in history], lw=0.8, label="G")
    axes[2].plot(steps, [r["L_gan_D_app"] for r in history], lw=0.8, label="D appearance")
    axes[2].plot(steps, [r["L_gan_D_shape"] for r in history], lw=0.8, label="D shape")
    axes[2].legend()
    axes[2].set_title("adversarial terms")
    for ax in axes:
        ax.set_xlabel("step")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return Path(path)


def plot_samples(models, dataset, path, n: int = 6) -> Path:
    """Rows: source, target, output, intermediate image and (if any) fusion mask."""
    from .train import generate

    batch = dataset.batch(range(n))
    pred, tilde, a_i = generate(models, batch)
    rows = [("I_a", batch["I_a"], True), ("I_b", batch["I_b"], True), ("I_b'", pred, True),
            ("Ĩ_b", tilde, True)]
    if a_i is not None:
        rows.append(("A_i", a_i, False))
    fig, axes = plt.subplots(len(rows), n, figsize=(1.2 * n, 2.2 * len(rows)), squeeze=False)
    for r, (label, imgs, signed) in enumerate(rows):
        for c in range(n):
            ax = axes[r, c]
            img = _to_hwc(imgs[c], signed)
            ax.imshow(img, cmap="gray" if img.ndim == 2 else None, vmin=0, vmax=1)
            ax.set_xticks([])
            ax.set_yticks([])
            ax.grid(False)
            if c == 0:
                ax.set_ylabel(label)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return Path(path)


def plot_ablation(reports: dict, path) -> Path:
    names = list(reports)
    x = np.arange(len(names))
    fig, ax = plt.subplots(figsize=(6, 3.2))
    ax.bar(x - 0.2, [reports[k]["ssim"] for k in names], 0.4, label="SSIM")
    ax.bar(x + 0.2, [reports[k]["mask_ssim"] for k in names], 0.4, label="Mask-SSIM")
    ax.set_xticks(x, names)
    ax.set_ylim(0, 1)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return Path(path)
