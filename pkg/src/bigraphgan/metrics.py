"""SSIM, foreground-restricted SSIM and a synthetic keypoint-recovery score."""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigurationError, ContractError, DimensionError

WINDOW = 11
SIGMA = 1.5
K1, K2 = 0.01, 0.03


def gaussian_window(size: int = WINDOW, sigma: float = SIGMA) -> np.ndarray:
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2
    g = np.exp(-(x**2) / (2 * sigma**2))
    return g / g.sum()


def _filter_valid(img: np.ndarray, g: np.ndarray) -> np.ndarray:
    # separable 'valid' correlation over the last two axes
    tmp = sliding_window_view(img, g.size, axis=-1) @ g
    return sliding_window_view(tmp, g.size, axis=-2) @ g


def _as_array(x) -> np.ndarray:
    x = getattr(x, "data", x)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    return x


def ssim_map(x, y, data_range: float = 1.0) -> np.ndarray:
    """Per-channel local SSIM over every fully-contained 11×11 window."""
    x, y = _as_array(x), _as_array(y)
    if x.shape != y.shape:
        raise DimensionError(f"ssim: shapes {x.shape} and {y.shape} differ")
    if x.shape[-2] < WINDOW or x.shape[-1] < WINDOW:
        raise ConfigurationError(f"image {x.shape[-2:]} is smaller than the {WINDOW}×{WINDOW} window")
    g = gaussian_window()
    c1, c2 = (K1 * data_range) ** 2, (K2 * data_range) ** 2
    mu_x, mu_y = _filter_valid(x, g), _filter_valid(y, g)
    sxx = _filter_valid(x * x, g) - mu_x * mu_x
    syy = _filter_valid(y * y, g) - mu_y * mu_y
    sxy = _filter_valid(x * y, g) - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * sxy + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (sxx + syy + c2)
    return num / den


def ssim(x, y) -> float:
    """Mean local SSIM of two images with values in [0, 1], averaged over channels."""
    return float(ssim_map(x, y).mean(axis=(-2, -1)).mean())


def _window_centres(mask: np.ndarray) -> np.ndarray:
    r = WINDOW // 2
    m = np.asarray(getattr(mask, "data", mask))
    m = m.reshape(m.shape[-2:])
    return m[r : m.shape[0] - r, r : m.shape[1] - r] > 0.5


def mask_ssim(x, y, mask) -> float:
    """SSIM averaged over windows whose centre pixel is foreground."""
    x, y = _as_array(x), _as_array(y)
    centres = _window_centres(mask)
    if not centres.any():
        raise ContractError("mask has no foreground window centre; Mask-SSIM is undefined")
    m = ssim_map(x, y)
    if centres.all():
        return float(m.mean(axis=(-2, -1)).mean())
    return float(np.mean([ch[centres].mean() for ch in m]))


def to_unit(image) -> np.ndarray:
    """Map an image from [-1, 1] to [0, 1]."""
    return (np.asarray(getattr(image, "data", image), dtype=np.float64) + 1.0) / 2.0


def mean_l1(x, y) -> float:
    x, y = _as_array(x), _as_array(y)
    if x.shape != y.shape:
        raise DimensionError(f"l1: shapes {x.shape} and {y.shape} differ")
    return float(np.abs(x - y).mean())


def _template(radius: int = 1, sigma: float = 0.7) -> np.ndarray:
    yy, xx = np.mgrid[-radius : radius + 1, -radius : radius + 1]
    d = np.exp(-(xx**2 + yy**2) / (2 * sigma**2))
    return d / d.sum()


def detect_joints(image, joint_colors: np.ndarray, colour_scale: float = 0.15, threshold: float = 0.25):
    """Locate each joint disk by correlating a colour-likelihood map with a disk.

    ``image`` is 3×h×w in [-1, 1]. Returns an 18×2 array of (x, y) pixel
    positions with NaN for joints whose best response is below ``threshold``.
    """
    img = to_unit(image)
    h, w = img.shape[-2:]
    pix = img.reshape(3, -1).T
    kernel = _template()
    r = kernel.shape[0] // 2
    found = np.full((len(joint_colors), 2), np.nan)
    for k, colour in enumerate(joint_colors):
        d2 = ((pix - colour) ** 2).sum(axis=1).reshape(h, w)
        like = np.exp(-d2 / (2 * colour_scale**2))
        padded = np.pad(like, r)
        resp = (sliding_window_view(padded, kernel.shape) * kernel).sum(axis=(-2, -1))
        iy, ix = np.unravel_index(np.argmax(resp), resp.shape)
        if resp[iy, ix] >= threshold:
            found[k] = (ix, iy)
    return found


def keypoint_error(I_b_prime, joints_b: np.ndarray, identity, tolerance: float = 2.0) -> float:
    """Fraction of joints re-detected within ``tolerance`` pixels of ground truth.

    A surrogate for PCKh that relies on the synthetic identity's joint
    colours; a missed detection counts as an error, never raises.
    """
    img = np.asarray(getattr(I_b_prime, "data", I_b_prime))
    h, w = img.shape[-2:]
    truth = np.asarray(joints_b) * np.array([w - 1, h - 1])
    try:
        found = detect_joints(img, identity.joint_colors)
    except (ValueError, FloatingPointError):
        return 0.0
    dist = np.hypot(found[:, 0] - truth[:, 0], found[:, 1] - truth[:, 1])
    hits = np.where(np.isnan(dist), False, dist <= tolerance)
    return float(hits.mean())
