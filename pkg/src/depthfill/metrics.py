"""Objective quality metrics: PSNR on luma and SSIM.

Both accept an optional region mask to restrict the measurement to the
inpainted pixels, which isolates completion quality from warping error.
SSIM follows the standard formulation: 11x11 Gaussian window, sigma 1.5,
K1 = 0.01, K2 = 0.03, dynamic range 255, evaluated on luma over windows
that lie fully inside the image; with a region, only windows whose center
pixel is in the region are averaged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np
from scipy import ndimage

from .imaging import rgb_to_luma

PSNR_CAP_DB = 99.0

_WINDOW = 11
_SIGMA = 1.5
_K1, _K2, _L = 0.01, 0.03, 255.0


@dataclass
class QualityReport:
    psnr_y_full: float
    psnr_y_holes: float
    ssim_full: float
    ssim_holes: float
    hole_pixel_count: int

    def to_dict(self) -> dict:
        return asdict(self)


def psnr_y(reference: np.ndarray, test: np.ndarray, region: np.ndarray | None = None) -> float:
    """Peak signal-to-noise ratio on BT.601 luma, in dB.

    ``region`` (bool, True = include) restricts the MSE; identical content
    reports the 99 dB cap instead of infinity.
    """
    if reference.shape != test.shape:
        raise ValueError(f"shape mismatch: {reference.shape} vs {test.shape}")
    err = rgb_to_luma(reference) - rgb_to_luma(test)
    if region is not None:
        region = np.asarray(region, dtype=bool)
        if region.shape != err.shape:
            raise ValueError("region shape does not match images")
        if not region.any():
            raise ValueError("empty region")
        err = err[region]
    mse = float(np.mean(err * err))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(10.0 * math.log10(_L * _L / mse), PSNR_CAP_DB)


def _gaussian_1d() -> np.ndarray:
    r = np.arange(_WINDOW) - (_WINDOW - 1) / 2.0
    k = np.exp(-(r * r) / (2.0 * _SIGMA * _SIGMA))
    return k / k.sum()


def _filter(a: np.ndarray) -> np.ndarray:
    """Separable Gaussian window sum, cropped to fully interior windows."""
    k = _gaussian_1d()
    out = ndimage.correlate1d(a, k, axis=0, mode="constant")
    out = ndimage.correlate1d(out, k, axis=1, mode="constant")
    half = _WINDOW // 2
    return out[half:-half, half:-half]


def ssim_map(reference: np.ndarray, test: np.ndarray) -> np.ndarray:
    """Per-window SSIM on luma; shape (H - 10, W - 10) of window centers."""
    if reference.shape != test.shape:
        raise ValueError(f"shape mismatch: {reference.shape} vs {test.shape}")
    h, w = reference.shape[:2]
    if h < _WINDOW or w < _WINDOW:
        raise ValueError(f"image {w}x{h} smaller than the {_WINDOW}x{_WINDOW} SSIM window")
    x = rgb_to_luma(reference) if reference.ndim == 3 else reference.astype(np.float64)
    y = rgb_to_luma(test) if test.ndim == 3 else test.astype(np.float64)

    c1 = (_K1 * _L) ** 2
    c2 = (_K2 * _L) ** 2
    mu_x = _filter(x)
    mu_y = _filter(y)
    var_x = _filter(x * x) - mu_x * mu_x
    var_y = _filter(y * y) - mu_y * mu_y
    cov = _filter(x * y) - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return num / den


def ssim(reference: np.ndarray, test: np.ndarray, region: np.ndarray | None = None) -> float:
    """Mean SSIM; with ``region``, only windows centered on region pixels count."""
    smap = ssim_map(reference, test)
    if region is None:
        return float(smap.mean())
    region = np.asarray(region, dtype=bool)
    if region.shape != reference.shape[:2]:
        raise ValueError("region shape does not match images")
    half = _WINDOW // 2
    inner = region[half:-half, half:-half]
    if not inner.any():
        raise ValueError("empty region (no window centers inside the valid area)")
    return float(smap[inner].mean())


def quality_report(
    reference: np.ndarray, test: np.ndarray, holes: np.ndarray
) -> QualityReport:
    """Full-frame and holes-only PSNR-Y/SSIM against a ground-truth view.

    ``holes`` is True at the inpainted pixels.
    """
    holes = np.asarray(holes, dtype=bool)
    return QualityReport(
        psnr_y_full=psnr_y(reference, test),
        psnr_y_holes=psnr_y(reference, test, region=holes),
        ssim_full=ssim(reference, test),
        ssim_holes=ssim(reference, test, region=holes),
        hole_pixel_count=int(holes.sum()),
    )
