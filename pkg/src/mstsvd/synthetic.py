"""Deterministic synthetic test images bundled with the package.

Seeded generators that produce piecewise-smooth scenes with self-similar
structure, which is what patch-grouping filters are designed for. Values
stay within [10, 245] so every band has a nonzero mean and every pixel a
nonzero spectral vector.
"""

from __future__ import annotations

import numpy as np


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed)))


def _coords(h: int, w: int):
    yy, xx = np.mgrid[0:h, 0:w]
    return yy.astype(np.float64), xx.astype(np.float64)


def _natural_color(gen, channels):
    # channels correlate the way material colors do: shared intensity
    # plus a bounded chromatic offset
    base = gen.uniform(40, 215)
    return np.clip(base + gen.uniform(-35, 35, size=channels), 15, 240)


def make_piecewise_constant(size: int = 128, seed: int = 0, channels: int = 3) -> np.ndarray:
    """Axis-aligned constant blocks; the easiest possible denoising target."""
    gen = _rng(seed)
    img = np.empty((size, size, channels))
    img[:] = _natural_color(gen, channels)[None, None, :]
    for _ in range(14):
        r0, c0 = gen.integers(0, size - 8, size=2)
        rh = int(gen.integers(8, size // 2))
        cw = int(gen.integers(8, size // 2))
        img[r0:r0 + rh, c0:c0 + cw, :] = _natural_color(gen, channels)[None, None, :]
    return img


def make_color_image(size: int = 128, seed: int = 0) -> np.ndarray:
    """Gradient background with rectangles and disks in distinct colors."""
    gen = _rng(seed)
    yy, xx = _coords(size, size)
    base = 60 + 120 * (xx + yy) / (2 * size)
    img = np.stack([base * 0.9, base, base * 1.1], axis=2)
    for _ in range(10):
        r0, c0 = gen.integers(0, size - 8, size=2)
        rh = int(gen.integers(8, size // 2))
        cw = int(gen.integers(8, size // 2))
        color = gen.uniform(20, 235, size=3)
        img[r0:r0 + rh, c0:c0 + cw, :] = color[None, None, :]
    for _ in range(5):
        cy, cx = gen.uniform(0, size, size=2)
        rad = gen.uniform(size / 16, size / 5)
        color = gen.uniform(20, 235, size=3)
        mask = (yy - cy) ** 2 + (xx - cx) ** 2 <= rad ** 2
        img[mask] = color[None, :]
    return np.clip(img, 10.0, 245.0)


def make_msi_cube(h: int = 64, w: int = 64, bands: int = 31, seed: int = 0) -> np.ndarray:
    """Spatial regions with smooth per-region spectra, stacked over bands."""
    gen = _rng(seed)
    yy, xx = _coords(h, w)
    b = np.arange(bands, dtype=np.float64)
    # region label map: background plus rectangles and disks
    labels = np.zeros((h, w), dtype=np.intp)
    next_label = 1
    for _ in range(6):
        r0 = int(gen.integers(0, max(1, h - 8)))
        c0 = int(gen.integers(0, max(1, w - 8)))
        rh = int(gen.integers(6, max(7, h // 2)))
        cw = int(gen.integers(6, max(7, w // 2)))
        labels[r0:r0 + rh, c0:c0 + cw] = next_label
        next_label += 1
    for _ in range(3):
        cy, cx = gen.uniform(0, h), gen.uniform(0, w)
        rad = gen.uniform(min(h, w) / 10, min(h, w) / 4)
        labels[(yy - cy) ** 2 + (xx - cx) ** 2 <= rad ** 2] = next_label
        next_label += 1
    # one smooth spectrum per region: offset plus a couple of Gaussian bumps
    spectra = np.empty((next_label, bands))
    for r in range(next_label):
        base = gen.uniform(40, 140)
        spec = np.full(bands, base)
        for _ in range(2):
            center = gen.uniform(0, max(bands - 1, 1))
            width = gen.uniform(1.5, max(2.5, bands / 3))
            amp = gen.uniform(-60, 90)
            spec = spec + amp * np.exp(-0.5 * ((b - center) / width) ** 2)
        spectra[r] = spec
    cube = spectra[labels]
    # gentle spatial shading so the cube is not exactly piecewise constant
    shade = 1.0 + 0.1 * np.sin(2 * np.pi * xx / w) * np.cos(2 * np.pi * yy / h)
    cube = cube * shade[:, :, None]
    return np.clip(cube, 10.0, 245.0)
