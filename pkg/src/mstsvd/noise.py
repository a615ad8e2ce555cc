"""Seeded noise synthesis for simulated experiments.

All generators run on the Philox counter-based bit stream keyed by the
user seed, with entries drawn in C order, so a (seed, shape) pair fully
determines the noise field on every platform and worker count. Noisy
values are intentionally not clipped to [0, 255]: clipping would skew the
Gaussian model and the analytic PSNR of a noisy image; clamping happens
only on 8-bit export.
"""

from __future__ import annotations

import numpy as np

from .validation import check_image, check_nonnegative


def _generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed)))


def add_awgn(img: np.ndarray, sigma: float, seed: int = 0) -> np.ndarray:
    """Add zero-mean i.i.d. Gaussian noise of standard deviation ``sigma``."""
    img = check_image(img)
    sigma = check_nonnegative(sigma, "sigma")
    if sigma == 0.0:
        return img.copy()
    noise = _generator(seed).standard_normal(img.shape)
    return img + sigma * noise


def add_awgn_band_ramp(img: np.ndarray, sigma_lo: float, sigma_hi: float,
                       seed: int = 0) -> np.ndarray:
    """Gaussian noise whose level ramps linearly from band 0 to band B-1."""
    img = check_image(img)
    if img.shape[2] < 2:
        raise ValueError("band ramp needs at least 2 bands")
    sigma_lo = check_nonnegative(sigma_lo, "sigma_lo")
    sigma_hi = check_nonnegative(sigma_hi, "sigma_hi")
    if sigma_lo > sigma_hi:
        raise ValueError("sigma_lo must not exceed sigma_hi")
    sig = np.linspace(sigma_lo, sigma_hi, img.shape[2])
    noise = _generator(seed).standard_normal(img.shape)
    return img + noise * sig[None, None, :]


def add_stripes(img: np.ndarray, bands, amplitude: float, seed: int = 0) -> np.ndarray:
    """Add vertical stripes: a constant per-column offset on each listed band.

    Offsets are drawn uniformly from [-amplitude, amplitude], one value per
    column per band, in the listed band order.
    """
    img = check_image(img)
    amplitude = check_nonnegative(amplitude, "amplitude")
    bands = [int(b) for b in bands]
    for b in bands:
        if not 0 <= b < img.shape[2]:
            raise ValueError(f"band index {b} out of range for {img.shape[2]} bands")
    out = img.copy()
    gen = _generator(seed)
    for b in bands:
        offsets = gen.uniform(-amplitude, amplitude, size=img.shape[1])
        out[:, :, b] += offsets[None, :]
    return out
