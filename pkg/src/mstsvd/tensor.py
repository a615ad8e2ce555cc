"""Dense tensor algebra for patch filtering.

Unfoldings, mode products and Frobenius norms follow the column-major
(first index fastest) convention throughout; modes are 1-based to match
the tensor literature. The channel-mode DFT is computed by direct
multiplication with the DFT matrix, which for the small channel counts
handled here (N <= ~64) is both fast and exactly reproducible.

Block circulant and block diagonal constructions are provided mainly as
verification oracles: production filtering never materializes the large
block circulant matrices, it works per Fourier slice instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvariantError

_EPS = np.finfo(np.float64).tiny


def unfold(t: np.ndarray, mode: int) -> np.ndarray:
    """Matricize tensor ``t`` along 1-based ``mode``.

    Row ``i`` of the result holds all entries with index ``i`` in the
    chosen mode; columns enumerate the remaining modes with the earliest
    mode varying fastest.
    """
    t = np.asarray(t)
    if not 1 <= mode <= t.ndim:
        raise ValueError(f"mode {mode} out of range for order-{t.ndim} tensor")
    moved = np.moveaxis(t, mode - 1, 0)
    return moved.reshape(t.shape[mode - 1], -1, order="F")


def fold(m: np.ndarray, mode: int, shape: tuple[int, ...]) -> np.ndarray:
    """Inverse of :func:`unfold` for a tensor of the given ``shape``."""
    shape = tuple(shape)
    if not 1 <= mode <= len(shape):
        raise ValueError(f"mode {mode} out of range for order-{len(shape)} tensor")
    rest = [s for k, s in enumerate(shape) if k != mode - 1]
    moved = np.asarray(m).reshape([shape[mode - 1]] + rest, order="F")
    return np.moveaxis(moved, 0, mode - 1)


def mode_product(t: np.ndarray, m: np.ndarray, mode: int) -> np.ndarray:
    """Multiply the mode-``mode`` fibers of ``t`` by matrix ``m``.

    Equivalent to ``fold(m @ unfold(t, mode), mode, new_shape)`` where the
    extent of ``mode`` becomes ``m.shape[0]``.
    """
    t = np.asarray(t)
    m = np.asarray(m)
    if m.ndim != 2:
        raise ValueError("mode_product expects a 2-D matrix")
    if not 1 <= mode <= t.ndim:
        raise ValueError(f"mode {mode} out of range for order-{t.ndim} tensor")
    if m.shape[1] != t.shape[mode - 1]:
        raise ValueError(
            f"matrix columns ({m.shape[1]}) do not match tensor extent "
            f"({t.shape[mode - 1]}) at mode {mode}"
        )
    out = np.tensordot(m, t, axes=(1, mode - 1))
    return np.moveaxis(out, 0, mode - 1)


def frobenius_norm(t: np.ndarray) -> float:
    """sqrt of the sum of squared entry magnitudes; zero only for the zero tensor."""
    return float(np.linalg.norm(np.asarray(t).ravel()))


@dataclass(frozen=True)
class DftPair:
    """Unitary DFT matrix of a given size plus its sqrt(N)-scaled variant.

    ``forward`` is unitary, so mode products with it preserve Frobenius
    norm; ``unnormalized`` (sqrt(N) times ``forward``) is the scaling under
    which the block circulant diagonalization identity holds exactly and is
    used only by the verification oracles.
    """

    size: int
    forward: np.ndarray
    unnormalized: np.ndarray


@lru_cache(maxsize=None)
def dft_pair(n: int) -> DftPair:
    """Build the size-``n`` DFT pair (0-based entries exp(-2*pi*i*j*k/n)/sqrt(n)).

    Mirrored rows are stored as exact conjugates of each other (and the
    self-conjugate middle row of even sizes as exactly real), so conjugate
    symmetry of real-input spectra holds bit for bit, not just to rounding.
    """
    if n < 1:
        raise ValueError("DFT size must be >= 1")
    j = np.arange(n)
    forward = np.exp(-2j * np.pi * np.outer(j, j) / n) / np.sqrt(n)
    for r in range(1, (n + 1) // 2):
        forward[n - r] = np.conj(forward[r])
    if n % 2 == 0 and n > 1:
        forward[n // 2] = forward[n // 2].real
    forward.setflags(write=False)
    unnorm = np.sqrt(n) * forward
    unnorm.setflags(write=False)
    return DftPair(size=n, forward=forward, unnormalized=unnorm)


def _apply_mode3(t: np.ndarray, m: np.ndarray) -> np.ndarray:
    # mode-3 product along axis 2, valid for order-3 and order-4 tensors
    out = np.tensordot(t, m, axes=([2], [1]))
    return np.moveaxis(out, -1, 2)


def fft_mode3(t: np.ndarray) -> np.ndarray:
    """Unitary DFT along axis 2 (the channel/band mode of patches and groups)."""
    t = np.asarray(t)
    if t.ndim < 3:
        raise ValueError("fft_mode3 expects a tensor of order >= 3")
    return _apply_mode3(t, dft_pair(t.shape[2]).forward)


def ifft_mode3(t: np.ndarray) -> np.ndarray:
    """Inverse of :func:`fft_mode3` (conjugate-transposed unitary DFT)."""
    t = np.asarray(t)
    if t.ndim < 3:
        raise ValueError("ifft_mode3 expects a tensor of order >= 3")
    return _apply_mode3(t, dft_pair(t.shape[2]).forward.conj().T)


def eigh_descending(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix, trusted input, no checks.

    Eigenvalues come out descending (stable under ties) and each
    eigenvector's largest-magnitude entry is rotated to be real and
    positive, which pins the phase/sign ambiguity deterministically.
    """
    w, v = np.linalg.eigh(g)
    order = np.argsort(-w, kind="stable")
    w = w[order]
    v = v[:, order]
    idx = np.argmax(np.abs(v), axis=0)
    a = v[idx, np.arange(v.shape[1])]
    mag = np.abs(a)
    safe = np.where(mag > 0.0, mag, 1.0)
    v *= (np.conj(a) + (mag == 0.0)) / safe
    return w, v


def hermitian_eig(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix with deterministic output.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues sorted in
    descending order (stable under ties) and each eigenvector's
    largest-magnitude entry rotated to be real and positive.

    Raises
    ------
    ValueError
        If ``g`` is not square or not Hermitian to 1e-8 relative accuracy.
    """
    g = np.asarray(g)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValueError("hermitian_eig expects a square matrix")
    scale = np.linalg.norm(g)
    if np.linalg.norm(g - g.conj().T) > 1e-8 * max(scale, _EPS):
        raise ValueError("matrix is not Hermitian within tolerance")
    return eigh_descending(g)


def bcirc_patch(p: np.ndarray) -> np.ndarray:
    """Block circulant matrix of an order-3 patch.

    Block (r, c) of the (N*rows) x (N*cols) result holds frontal slice
    ``(r - c) mod N``, so each slice appears N times.
    """
    p = np.asarray(p)
    if p.ndim != 3:
        raise ValueError("bcirc_patch expects an order-3 tensor")
    rows, cols, n = p.shape
    out = np.empty((n * rows, n * cols), dtype=p.dtype)
    for br in range(n):
        for bc in range(n):
            out[br * rows:(br + 1) * rows, bc * cols:(bc + 1) * cols] = p[:, :, (br - bc) % n]
    return out


def bcirc_group(g: np.ndarray) -> np.ndarray:
    """Stack of block circulant matrices for an order-4 group (ps, ps, N, K)."""
    g = np.asarray(g)
    if g.ndim != 4:
        raise ValueError("bcirc_group expects an order-4 tensor")
    rows, cols, n, k = g.shape
    out = np.empty((n * rows, n * cols, k), dtype=g.dtype)
    for br in range(n):
        for bc in range(n):
            out[br * rows:(br + 1) * rows, bc * cols:(bc + 1) * cols, :] = g[:, :, (br - bc) % n, :]
    return out


def bdiag_blocks(blocks) -> np.ndarray:
    """Block diagonal matrix from a sequence of equally shaped 2-D blocks."""
    blocks = [np.asarray(b) for b in blocks]
    rows, cols = blocks[0].shape
    n = len(blocks)
    dtype = np.result_type(*blocks)
    out = np.zeros((n * rows, n * cols), dtype=dtype)
    for j, b in enumerate(blocks):
        out[j * rows:(j + 1) * rows, j * cols:(j + 1) * cols] = b
    return out


def bdiag_from_bcirc(p: np.ndarray) -> np.ndarray:
    """Diagonalize a patch's block circulant matrix into Fourier-slice blocks.

    Computes (F (x) I) bcirc(p) (F (x) I)^-1 with the unitary DFT F and
    verifies it equals the block diagonal arrangement of the slices of the
    sqrt(N)-scaled channel DFT of ``p``; a violation means the transform
    plumbing is broken and raises :class:`InvariantError`.
    """
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 3:
        raise ValueError("bdiag_from_bcirc expects an order-3 tensor")
    rows, cols, n = p.shape
    pair = dft_pair(n)
    fi_left = np.kron(pair.forward, np.eye(rows))
    fi_right = np.kron(pair.forward, np.eye(cols))
    diag = fi_left @ bcirc_patch(p) @ fi_right.conj().T
    phat = _apply_mode3(p, pair.unnormalized)
    expected = bdiag_blocks([phat[:, :, j] for j in range(n)])
    scale = max(np.linalg.norm(expected), _EPS)
    if np.linalg.norm(diag - expected) > 1e-9 * scale:
        raise InvariantError("block circulant diagonalization mismatch")
    off = diag - bdiag_blocks([diag[j * rows:(j + 1) * rows, j * cols:(j + 1) * cols] for j in range(n)])
    if np.linalg.norm(off) > 1e-9 * max(frobenius_norm(p), _EPS) * np.sqrt(n) + 1e-12:
        raise InvariantError("off-diagonal residue after diagonalization")
    return diag
