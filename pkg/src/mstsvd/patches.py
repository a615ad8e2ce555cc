"""Patch extraction, block matching and overlapping write-back.

The reference grid strides the image with a fixed step and always includes
the last valid row/column so every pixel is covered by at least one
reference patch. Matching searches a square window of candidate top-left
positions around the reference and ranks candidates by squared distance
with a total (distance, row, col) tie-break, which makes grouping
deterministic regardless of how work is split across workers.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InvariantError

FULL = "full"
FIRST_SLICE = "first_slice"
_METRICS = (FULL, FIRST_SLICE)


def _axis_positions(n: int, ps: int, step: int) -> np.ndarray:
    last = n - ps
    pos = list(range(0, last + 1, step))
    if pos[-1] != last:
        pos.append(last)
    return np.asarray(pos, dtype=np.intp)


def _smallest_stable(flat: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k smallest values in (value, index) order.

    Equivalent to a stable full argsort truncated at k, but partitions
    first and only sorts the candidates at or below the cut value, so
    exact ties across the partition boundary cannot change the result.
    """
    n = flat.size
    if k >= n:
        return np.argsort(flat, kind="stable")
    cut = np.partition(flat, k)[k]
    cand = np.flatnonzero(flat <= cut)
    return cand[np.argsort(flat[cand], kind="stable")][:k]


@dataclass(frozen=True)
class PatchGrid:
    """Top-left coordinates of the reference patches."""

    rows: np.ndarray
    cols: np.ndarray
    ps: int
    step: int

    @property
    def positions(self) -> np.ndarray:
        """(M, 2) array of (row, col) pairs in row-major order."""
        rr, cc = np.meshgrid(self.rows, self.cols, indexing="ij")
        return np.stack([rr.ravel(), cc.ravel()], axis=1)

    def __len__(self) -> int:
        return len(self.rows) * len(self.cols)


def reference_grid(h: int, w: int, ps: int, step: int) -> PatchGrid:
    """Build the reference grid for an h x w image with patch side ``ps``."""
    if ps < 1 or step < 1:
        raise ValueError("ps and step must be >= 1")
    if ps > min(h, w):
        raise ValueError(f"patch side {ps} exceeds image dimensions {h}x{w}")
    return PatchGrid(
        rows=_axis_positions(h, ps, step),
        cols=_axis_positions(w, ps, step),
        ps=ps,
        step=step,
    )


@dataclass
class PatchGroup:
    """K patches stacked along the last mode; index 0 is the reference.

    ``n_padded`` records how many trailing entries are copies of the
    reference, used when the search window held fewer than K candidates.
    """

    data: np.ndarray            # (ps, ps, C, K)
    coords: np.ndarray          # (K, 2) int
    n_padded: int = 0


class MatchContext:
    """Precomputed sliding-window views for repeated block matching.

    ``metric='full'`` ranks candidates by squared distance over all
    channels; ``metric='first_slice'`` ranks by the first Fourier slice
    only (the channel sum scaled by 1/sqrt(C)), which costs one channel's
    worth of arithmetic instead of C.
    """

    def __init__(self, img: np.ndarray, metric: str, ps: int, sr: int, k: int):
        if metric not in _METRICS:
            raise ValueError(f"unknown matching metric {metric!r}")
        if sr < 0:
            raise ValueError("search radius must be >= 0")
        if k < 1:
            raise ValueError("group size must be >= 1")
        img = np.asarray(img, dtype=np.float64)
        if img.ndim != 3:
            raise ValueError("matching expects an (H, W, C) image")
        if ps > min(img.shape[0], img.shape[1]):
            raise ValueError("patch side exceeds image dimensions")
        self.img = img
        self.metric = metric
        self.ps = ps
        self.sr = sr
        self.k = k
        if metric == FIRST_SLICE:
            # single feature plane: the channel sum scaled to unit spectral norm
            feat = (img.sum(axis=2) / np.sqrt(img.shape[2]))[:, :, None]
        else:
            feat = img
        self.n_features = feat.shape[2]
        # per-plane (Hp, Wp, ps, ps) views over candidate top-left positions
        self._feat_windows = [
            sliding_window_view(np.ascontiguousarray(feat[:, :, f]), (ps, ps))
            for f in range(self.n_features)
        ]
        self._img_windows = sliding_window_view(img, (ps, ps), axis=(0, 1))
        self.n_rows = self._feat_windows[0].shape[0]
        self.n_cols = self._feat_windows[0].shape[1]
        self._scratch_shape = (2 * sr + 1, 2 * sr + 1, ps, ps)
        self._local = threading.local()

    def _diff_buffer(self, shape):
        # reusable per-thread scratch, shared by all feature planes
        buf = getattr(self._local, "buf", None)
        if buf is None:
            buf = np.empty(self._scratch_shape)
            self._local.buf = buf
        return buf[: shape[0], : shape[1]]

    def select(self, row: int, col: int) -> tuple[np.ndarray, int]:
        """Pick the K best candidate positions for reference (row, col).

        Returns (coords, n_padded) with the reference first and the rest
        ordered by (distance, row, col). Distances accumulate one feature
        plane at a time through one scratch buffer, so the cost is exactly
        proportional to the number of planes the metric looks at.
        """
        if not (0 <= row < self.n_rows and 0 <= col < self.n_cols):
            raise ValueError(f"reference ({row}, {col}) out of bounds")
        r0 = max(0, row - self.sr)
        r1 = min(self.n_rows - 1, row + self.sr)
        c0 = max(0, col - self.sr)
        c1 = min(self.n_cols - 1, col + self.sr)
        d = None
        for w in self._feat_windows:
            win = w[r0:r1 + 1, c0:c1 + 1]
            diff = self._diff_buffer(win.shape)
            np.subtract(win, w[row, col], out=diff)
            part = np.einsum("ijpq,ijpq->ij", diff, diff, optimize=False)
            d = part if d is None else d + part
        nc = d.shape[1]
        flat = d.ravel()
        order = _smallest_stable(flat, min(self.k, flat.size))
        ref_flat = (row - r0) * nc + (col - c0)
        order = order[order != ref_flat][: self.k - 1]
        n_found = 1 + len(order)
        coords = np.empty((self.k, 2), dtype=np.intp)
        coords[0] = (row, col)
        coords[1:n_found, 0] = order // nc + r0
        coords[1:n_found, 1] = order % nc + c0
        n_padded = self.k - n_found
        if n_padded:
            coords[n_found:] = (row, col)
        return coords, n_padded

    def gather(self, coords: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        """Stack full-channel patches at ``coords`` into (ps, ps, C, K)."""
        block = self._img_windows[coords[:, 0], coords[:, 1]]  # (K, C, ps, ps)
        if out is None:
            return np.ascontiguousarray(block.transpose(2, 3, 1, 0))
        out[...] = block.transpose(2, 3, 1, 0)
        return out

    def gather_batch(self, coords: np.ndarray) -> np.ndarray:
        """Full-channel patches for a (B, K, 2) coordinate batch: (B, ps, ps, C, K)."""
        block = self._img_windows[coords[:, :, 0], coords[:, :, 1]]  # (B, K, C, ps, ps)
        return np.ascontiguousarray(block.transpose(0, 3, 4, 2, 1))

    def gather_feature_patches(self, coords: np.ndarray) -> np.ndarray:
        """Matching-feature patches at ``coords``; with coords (..., K, 2) the
        result is (..., K, ps, ps) for the single-plane metric."""
        if self.metric != FIRST_SLICE:
            raise ValueError("feature patches are only separate for the first_slice metric")
        return self._feat_windows[0][coords[..., 0], coords[..., 1]]


def match_block(img: np.ndarray, ref: tuple[int, int], params, metric: str = FULL,
                ctx: MatchContext | None = None) -> PatchGroup:
    """Group the K most similar patches around reference position ``ref``.

    ``params`` provides ps / group size / search radius. Passing a
    prebuilt :class:`MatchContext` avoids recomputing the window views.
    """
    if ctx is None:
        ctx = MatchContext(img, metric, params.ps, params.search_radius, params.group_size)
    coords, n_padded = ctx.select(int(ref[0]), int(ref[1]))
    return PatchGroup(data=ctx.gather(coords), coords=coords, n_padded=n_padded)


@dataclass
class Aggregator:
    """Running numerator/weight buffers for overlapping patch write-back."""

    numerator: np.ndarray
    weight: np.ndarray

    @classmethod
    def for_shape(cls, shape: tuple[int, int, int]) -> "Aggregator":
        return cls(numerator=np.zeros(shape), weight=np.zeros(shape))

    def accumulate(self, group: PatchGroup, weight_mode: str = "uniform",
                   n_retained: int = 0) -> None:
        """Add a filtered group's pixels back at their source coordinates."""
        accumulate_patches(self.numerator, self.weight, group.data, group.coords,
                           weight_mode, n_retained)

    def merge(self, other: "Aggregator") -> None:
        self.numerator += other.numerator
        self.weight += other.weight

    def finalize(self) -> np.ndarray:
        """Pixelwise numerator/weight; raises if any covered pixel has no weight."""
        if np.any(self.weight <= 0.0):
            raise InvariantError("aggregation left pixels with zero weight")
        return self.numerator / self.weight


def accumulate_patches(numerator: np.ndarray, weight: np.ndarray, data: np.ndarray,
                       coords: np.ndarray, weight_mode: str = "uniform",
                       n_retained: int = 0) -> None:
    if weight_mode == "uniform":
        w = 1.0
    elif weight_mode == "sparsity":
        w = 1.0 / (1.0 + max(0, int(n_retained)))
    else:
        raise ValueError(f"unknown weight mode {weight_mode!r}")
    ps = data.shape[0]
    for k in range(data.shape[3]):
        r, c = coords[k]
        numerator[r:r + ps, c:c + ps, :] += w * data[:, :, :, k]
        weight[r:r + ps, c:c + ps, :] += w


def accumulate(agg: Aggregator, filtered: PatchGroup, weight_mode: str = "uniform",
               n_retained: int = 0) -> None:
    """Functional alias for :meth:`Aggregator.accumulate`."""
    agg.accumulate(filtered, weight_mode, n_retained)


def finalize(agg: Aggregator) -> np.ndarray:
    """Functional alias for :meth:`Aggregator.finalize`."""
    return agg.finalize()
