"""Patch and group bases: global spectral training, per-group PCA, 4-D HOSVD.

The global basis is trained once per image from all reference patches.
Each retained Fourier slice gets its own pair of row/column transforms,
obtained in closed form as the eigenvector matrices of the per-slice Gram
accumulations. Only the first floor(N/2)+1 slices are trained: slices of
a real tensor beyond that point are conjugates of retained ones, so their
transforms are the conjugates of the retained transforms.

Group bases are second-moment PCAs (no mean subtraction) along the
grouping mode, keeping all K components; shrinkage happens later by
coefficient thresholding, never by rank truncation.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

from .errors import FormatError
from .patches import PatchGroup
from .tensor import dft_pair, eigh_descending, unfold

_GBAS_MAGIC = b"GBAS"


@dataclass(frozen=True)
class GlobalBasis:
    """Per-Fourier-slice unitary row/column patch transforms."""

    u_row: np.ndarray   # (S, ps, ps) complex, slice 0 real-valued
    u_col: np.ndarray   # (S, ps, ps) complex
    n_channels: int

    @property
    def retained_slices(self) -> int:
        return self.u_row.shape[0]

    @property
    def ps(self) -> int:
        return self.u_row.shape[1]


@dataclass(frozen=True)
class GroupBasis:
    """Orthogonal K x K transform along the grouping mode."""

    u_group: np.ndarray


@dataclass(frozen=True)
class HosvdBasis:
    """Orthogonal factors for all four modes of a patch group."""

    u_row: np.ndarray
    u_col: np.ndarray
    u_color: np.ndarray
    u_group: np.ndarray


def _gram_eig(gram: np.ndarray) -> np.ndarray:
    """Eigenvector matrix of a (possibly zero) Gram, identity when degenerate.

    Grams are Hermitian by construction, so this goes straight to the
    decomposition without the symmetry check of :func:`tensor.hermitian_eig`.
    """
    scale = np.linalg.norm(gram)
    if scale == 0.0:
        return np.eye(gram.shape[0], dtype=np.float64)
    if np.iscomplexobj(gram) and np.abs(gram.imag).max() <= 1e-12 * scale:
        gram = gram.real
    _, v = eigh_descending(gram)
    return v


def train_global_basis(ref_patches) -> GlobalBasis:
    """Train per-slice row/column transforms from a stack of reference patches.

    Parameters
    ----------
    ref_patches : array_like
        (M, ps, ps, N) stack, or a sequence of (ps, ps, N) patches.
    """
    patches = np.asarray(ref_patches, dtype=np.float64)
    if patches.ndim == 3:
        patches = patches[None]
    if patches.ndim != 4 or patches.shape[0] < 1:
        raise ValueError("expected a non-empty (M, ps, ps, N) patch stack")
    m, ps, ps2, n = patches.shape
    if ps != ps2:
        raise ValueError("patches must be square")
    s = n // 2 + 1
    fwd = dft_pair(n).forward[:s]
    # (M, ps, ps, S) retained-slice spectra
    phat = np.tensordot(patches, fwd, axes=([3], [1]))
    u_row = np.empty((s, ps, ps), dtype=np.complex128)
    u_col = np.empty((s, ps, ps), dtype=np.complex128)
    for j in range(s):
        a = phat[:, :, :, j]
        g_row = np.einsum("mrc,msc->rs", a, a.conj(), optimize=True)
        g_col = np.einsum("mrc,mrd->cd", a.conj(), a, optimize=True)
        u_row[j] = _gram_eig(g_row)
        u_col[j] = _gram_eig(g_col)
    return GlobalBasis(u_row=u_row, u_col=u_col, n_channels=n)


def local_pca_from_data(data: np.ndarray, mode: str = "full") -> GroupBasis:
    """Grouping-mode PCA of a raw (ps, ps, C, K) group array.

    The K x K Gram is flattening-order invariant, so it is built from a
    copy-free reshape rather than the mode unfolding; the result equals
    the Gram of the grouping-mode unfolding.
    """
    if mode == "full":
        flat = data.reshape(-1, data.shape[3])
    elif mode == "first_slice":
        s0 = data.sum(axis=2) / np.sqrt(data.shape[2])
        flat = s0.reshape(-1, s0.shape[2])
    else:
        raise ValueError(f"unknown PCA mode {mode!r}")
    gram = flat.T @ flat
    return GroupBasis(u_group=_gram_eig(gram))


def local_pca(group: PatchGroup, mode: str = "full") -> GroupBasis:
    """PCA along the grouping mode, full-channel or first-Fourier-slice.

    ``full`` uses the whole real group; ``first_slice`` uses only the first
    Fourier slice (real: the channel sum over sqrt(C)), which is a third of
    the arithmetic on 3-channel images. All K components are kept.
    """
    return local_pca_from_data(group.data, mode)


def batched_gram_eig(grams: np.ndarray) -> np.ndarray:
    """Eigenvector stacks of a (B, K, K) Gram batch, identity for zero Grams.

    One call over the whole stack amortizes the solver overhead across
    groups; conventions (descending eigenvalues, sign pinned by the
    largest-magnitude entry) match :func:`tensor.eigh_descending`.
    """
    k = grams.shape[-1]
    w, v = np.linalg.eigh(grams)
    order = np.argsort(-w, axis=1, kind="stable")
    v = np.take_along_axis(v, order[:, None, :], axis=2)
    idx = np.argmax(np.abs(v), axis=1)
    a = np.take_along_axis(v, idx[:, None, :], axis=1)[:, 0, :]
    mag = np.abs(a)
    v *= ((np.conj(a) + (mag == 0.0)) / np.where(mag > 0.0, mag, 1.0))[:, None, :]
    zero = np.linalg.norm(grams, axis=(1, 2)) == 0.0
    if np.any(zero):
        v[zero] = np.eye(k)
    return v


def batched_group_pca(datas: np.ndarray, mode: str = "full") -> np.ndarray:
    """Grouping-mode PCA of a (B, ps, ps, C, K) batch; returns (B, K, K)."""
    b, _, _, c, k = datas.shape
    if mode == "full":
        flat = datas.reshape(b, -1, k)
    elif mode == "first_slice":
        flat = (datas.sum(axis=3) / np.sqrt(c)).reshape(b, -1, k)
    else:
        raise ValueError(f"unknown PCA mode {mode!r}")
    grams = np.matmul(flat.transpose(0, 2, 1), flat)
    return batched_gram_eig(grams)


def hosvd_basis(group: PatchGroup | np.ndarray) -> HosvdBasis:
    """Orthogonal factors per mode from the mode-k Grams of a 4-D group."""
    data = group.data if isinstance(group, PatchGroup) else np.asarray(group)
    if data.ndim != 4:
        raise ValueError("hosvd_basis expects an order-4 group")
    factors = []
    for mode in range(1, 5):
        unf = unfold(data, mode)
        factors.append(_gram_eig(unf @ unf.T))
    return HosvdBasis(u_row=factors[0], u_col=factors[1],
                      u_color=factors[2], u_group=factors[3])


def opponent_matrix() -> np.ndarray:
    """Fixed 3x3 luminance/chrominance transform; maps gray (v,v,v) to (v,0,0)."""
    return np.array([
        [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
        [0.5, 0.0, -0.5],
        [0.25, -0.5, 0.25],
    ])


def global_basis_to_bytes(gb: GlobalBasis) -> bytes:
    """Serialize a basis: magic, dims, then interleaved (re, im) float64 LE."""
    s, ps, _ = gb.u_row.shape
    head = _GBAS_MAGIC + struct.pack("<III", gb.n_channels, ps, s)
    body = bytearray()
    for stack in (gb.u_row, gb.u_col):
        arr = np.ascontiguousarray(stack, dtype=np.complex128)
        inter = np.empty(arr.size * 2, dtype="<f8")
        inter[0::2] = arr.real.ravel()
        inter[1::2] = arr.imag.ravel()
        body += inter.tobytes()
    return head + bytes(body)


def global_basis_from_bytes(buf: bytes) -> GlobalBasis:
    """Parse the serialized form produced by :func:`global_basis_to_bytes`."""
    if len(buf) < 4 or buf[:4] != _GBAS_MAGIC:
        raise FormatError("bad basis magic, expected GBAS", offset=0)
    if len(buf) < 16:
        raise FormatError("truncated basis header", offset=len(buf))
    n, ps, s = struct.unpack("<III", buf[4:16])
    if n < 1 or ps < 1 or s != n // 2 + 1:
        raise FormatError(f"inconsistent basis dimensions n={n} ps={ps} s={s}", offset=4)
    need = 16 + 2 * (2 * s * ps * ps) * 8
    if len(buf) != need:
        raise FormatError(f"basis payload length {len(buf)} != expected {need}", offset=16)
    stacks = []
    off = 16
    for _ in range(2):
        count = 2 * s * ps * ps
        inter = np.frombuffer(buf, dtype="<f8", count=count, offset=off)
        stacks.append((inter[0::2] + 1j * inter[1::2]).reshape(s, ps, ps))
        off += count * 8
    return GlobalBasis(u_row=stacks[0], u_col=stacks[1], n_channels=int(n))


def basis_cache_key(img: np.ndarray, ps: int) -> str:
    """Cache key for a trained basis: hash of image contents plus patch side."""
    img = np.ascontiguousarray(img, dtype=np.float64)
    h = hashlib.sha256()
    h.update(struct.pack("<III", *img.shape))
    h.update(img.tobytes())
    h.update(struct.pack("<I", ps))
    return h.hexdigest()
