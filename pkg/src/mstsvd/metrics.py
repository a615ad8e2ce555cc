"""Image quality metrics: PSNR, SSIM, ERGAS and spectral angle.

PSNR and SSIM assume the 8-bit dynamic range of 255 regardless of the
actual value span, which keeps results comparable across noise levels.
ERGAS and SAM treat the first argument as the reference; PSNR and SSIM
are symmetric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .validation import check_image, check_same_shape

DYNAMIC_RANGE = 255.0
_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_SSIM_K1 = 0.01
_SSIM_K2 = 0.03

CSV_COLUMNS = ("method", "sigma", "psnr", "ssim", "ergas", "sam", "seconds")


@dataclass(frozen=True)
class MetricBlock:
    psnr: float
    ssim: float
    ergas: float
    sam: float


def psnr(clean: np.ndarray, test: np.ndarray) -> float:
    """10 log10(255^2 / MSE) over all entries; +inf for identical inputs."""
    clean = check_image(clean, name="clean")
    test = check_image(test, name="test")
    check_same_shape(clean, test)
    mse = float(np.mean((clean - test) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(DYNAMIC_RANGE ** 2 / mse)


def _gaussian_kernel() -> np.ndarray:
    half = (_SSIM_WINDOW - 1) // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-0.5 * (x / _SSIM_SIGMA) ** 2)
    g /= g.sum()
    return np.outer(g, g)


def _valid_filter(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    win = sliding_window_view(x, kernel.shape)
    return np.tensordot(win, kernel, axes=([2, 3], [0, 1]))


def ssim(clean: np.ndarray, test: np.ndarray) -> float:
    """Mean local SSIM, 11x11 Gaussian window (std 1.5), averaged over channels."""
    clean = check_image(clean, name="clean")
    test = check_image(test, name="test")
    check_same_shape(clean, test)
    if min(clean.shape[0], clean.shape[1]) < _SSIM_WINDOW:
        raise ValueError(f"images must be at least {_SSIM_WINDOW} pixels on each side")
    kernel = _gaussian_kernel()
    c1 = (_SSIM_K1 * DYNAMIC_RANGE) ** 2
    c2 = (_SSIM_K2 * DYNAMIC_RANGE) ** 2
    values = []
    for ch in range(clean.shape[2]):
        x = clean[:, :, ch]
        y = test[:, :, ch]
        mu_x = _valid_filter(x, kernel)
        mu_y = _valid_filter(y, kernel)
        var_x = _valid_filter(x * x, kernel) - mu_x ** 2
        var_y = _valid_filter(y * y, kernel) - mu_y ** 2
        cov = _valid_filter(x * y, kernel) - mu_x * mu_y
        s = ((2 * mu_x * mu_y + c1) * (2 * cov + c2)) / (
            (mu_x ** 2 + mu_y ** 2 + c1) * (var_x + var_y + c2)
        )
        values.append(float(s.mean()))
    return float(np.mean(values))


def ergas(clean: np.ndarray, test: np.ndarray) -> float:
    """Relative dimensionless global error; 0 for identical images.

    100 * sqrt(mean over bands of (RMSE_b / mean_b)^2) with band means
    taken from the reference; undefined (raises) when any reference band
    has zero mean.
    """
    clean = check_image(clean, name="clean")
    test = check_image(test, name="test")
    check_same_shape(clean, test)
    mu = clean.mean(axis=(0, 1))
    if np.any(mu == 0.0):
        raise ValueError("reference has a zero-mean band, ERGAS undefined")
    rmse = np.sqrt(((clean - test) ** 2).mean(axis=(0, 1)))
    return float(100.0 * np.sqrt(np.mean((rmse / mu) ** 2)))


def sam(clean: np.ndarray, test: np.ndarray) -> float:
    """Mean spectral angle in radians between per-pixel channel vectors.

    Pixels whose vector is zero in either image are skipped; raises when
    every pixel is degenerate.
    """
    clean = check_image(clean, name="clean")
    test = check_image(test, name="test")
    check_same_shape(clean, test)
    dot = np.einsum("ijc,ijc->ij", clean, test)
    n1 = np.linalg.norm(clean, axis=2)
    n2 = np.linalg.norm(test, axis=2)
    valid = (n1 > 0) & (n2 > 0)
    if not np.any(valid):
        raise ValueError("all pixels have a zero spectral vector, SAM undefined")
    cosang = np.clip(dot[valid] / (n1[valid] * n2[valid]), -1.0, 1.0)
    return float(np.mean(np.arccos(cosang)))


def metric_block(clean: np.ndarray, test: np.ndarray) -> MetricBlock:
    """All four quality indices of ``test`` against reference ``clean``."""
    return MetricBlock(
        psnr=psnr(clean, test),
        ssim=ssim(clean, test),
        ergas=ergas(clean, test),
        sam=sam(clean, test),
    )


def _fmt(v: float) -> str:
    if math.isinf(v):
        return "inf"
    return f"{v:.6f}"


def csv_header() -> str:
    return ",".join(CSV_COLUMNS)


def csv_row(method: str, sigma, block: MetricBlock, seconds) -> str:
    """One metric record in the fixed column order."""
    sig = sigma if isinstance(sigma, str) else _fmt(float(sigma))
    sec = seconds if isinstance(seconds, str) else _fmt(float(seconds))
    return ",".join([
        method,
        sig,
        _fmt(block.psnr),
        _fmt(block.ssim),
        _fmt(block.ergas),
        _fmt(block.sam),
        sec,
    ])
