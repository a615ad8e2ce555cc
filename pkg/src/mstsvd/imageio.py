"""Image file handling: 8-bit rasters, the MSI1 cube container, basis cache.

Format is chosen by extension. Rasters go through Pillow and are exported
with clamp-to-[0,255] and round-half-up quantization. Cubes use the MSI1
container: magic ``MSI1``, little-endian uint32 H, W, C, then H*W*C
little-endian float32 values with the first index fastest (column-major),
which round-trips float data losslessly enough for unclipped noisy images.
A directory of per-band rasters named ``band_00.png`` .. ``band_NN.png``
is also accepted as cube input.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import FormatError
from .transforms import GlobalBasis, global_basis_from_bytes, global_basis_to_bytes
from .validation import check_image

MSI_MAGIC = b"MSI1"
MSI_SUFFIX = ".msi"
_HEADER_LEN = 16


def read_msi(path) -> np.ndarray:
    buf = Path(path).read_bytes()
    if len(buf) < 4 or buf[:4] != MSI_MAGIC:
        raise FormatError(f"{path}: bad magic, expected MSI1", offset=0)
    if len(buf) < _HEADER_LEN:
        raise FormatError(f"{path}: truncated header", offset=len(buf))
    h, w, c = struct.unpack("<III", buf[4:_HEADER_LEN])
    if h < 1 or w < 1 or c < 1:
        raise FormatError(f"{path}: invalid dimensions {h}x{w}x{c}", offset=4)
    expected = _HEADER_LEN + 4 * h * w * c
    if len(buf) != expected:
        raise FormatError(
            f"{path}: payload is {len(buf)} bytes, expected {expected}",
            offset=_HEADER_LEN,
        )
    data = np.frombuffer(buf, dtype="<f4", offset=_HEADER_LEN)
    bad = np.flatnonzero(~np.isfinite(data))
    if bad.size:
        raise FormatError(f"{path}: non-finite value", offset=_HEADER_LEN + 4 * int(bad[0]))
    return data.reshape((h, w, c), order="F").astype(np.float64)


def write_msi(path, img: np.ndarray) -> None:
    img = check_image(img)
    h, w, c = img.shape
    payload = img.astype("<f4").ravel(order="F").tobytes()
    Path(path).write_bytes(MSI_MAGIC + struct.pack("<III", h, w, c) + payload)


def quantize_u8(img: np.ndarray) -> np.ndarray:
    """Clamp to [0, 255] and round half-up to unsigned 8-bit."""
    return np.clip(np.floor(np.asarray(img, dtype=np.float64) + 0.5), 0, 255).astype(np.uint8)


def _read_raster(path) -> np.ndarray:
    with Image.open(path) as im:
        if im.mode in ("P", "RGBA", "CMYK", "LA"):
            im = im.convert("RGB")
        arr = np.asarray(im, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr


def _read_band_dir(path: Path) -> np.ndarray:
    files = sorted(p for p in path.iterdir() if p.is_file() and p.stem.startswith("band_"))
    if not files:
        raise FormatError(f"{path}: no band_* files found")
    bands = []
    for f in files:
        arr = _read_raster(f)
        if arr.shape[2] != 1:
            arr = arr.mean(axis=2, keepdims=True)
        bands.append(arr[:, :, 0])
    shapes = {b.shape for b in bands}
    if len(shapes) != 1:
        raise FormatError(f"{path}: band rasters have mismatched shapes {shapes}")
    return np.stack(bands, axis=2)


def read_image(path) -> np.ndarray:
    """Load a raster, MSI1 cube or per-band directory as float64 (H, W, C)."""
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"no such file or directory: {p}")
    if p.is_dir():
        return _read_band_dir(p)
    if p.suffix.lower() == MSI_SUFFIX:
        return read_msi(p)
    return _read_raster(p)


def write_image(path, img: np.ndarray) -> None:
    """Write ``img`` by extension: lossless .msi cube or quantized 8-bit raster."""
    p = Path(path)
    img = check_image(img)
    if p.suffix.lower() == MSI_SUFFIX:
        write_msi(p, img)
        return
    arr = quantize_u8(img)
    if arr.shape[2] == 1:
        Image.fromarray(arr[:, :, 0], mode="L").save(p)
    elif arr.shape[2] == 3:
        Image.fromarray(arr, mode="RGB").save(p)
    else:
        raise ValueError(
            f"cannot write {arr.shape[2]}-band data as a raster, use {MSI_SUFFIX}"
        )


def save_global_basis(path, gb: GlobalBasis) -> None:
    Path(path).write_bytes(global_basis_to_bytes(gb))


def load_global_basis(path) -> GlobalBasis:
    return global_basis_from_bytes(Path(path).read_bytes())
