"""Transform-domain hard-threshold filtering of patch groups.

The forward transform moves a real (ps, ps, C, K) group to the coefficient
domain in three steps: unitary DFT along the channel mode (only the first
floor(C/2)+1 slices are computed, the rest being conjugate mirrors), the
per-slice row/column basis, and the shared grouping-mode transform.
Thresholding zeroes every coefficient whose magnitude falls below tau and,
because mirrored slices have mirrored magnitudes, preserves conjugate
symmetry; the inverse transform therefore lands on a real group.

All transforms are unitary, so a single tau applies uniformly across
coefficients and the threshold scales as sigma * sqrt(2 * ln(elements)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvariantError
from .patches import PatchGroup
from .tensor import dft_pair
from .transforms import GlobalBasis, GroupBasis, HosvdBasis
from .validation import check_nonnegative, check_positive_int

_METHODS = ("mstsvd", "cmstsvd", "twist", "hosvd4d")
_WEIGHT_MODES = ("uniform", "sparsity")


@dataclass
class FilterParams:
    """Knobs of one denoising run.

    ``tau`` is normally derived as gamma * sigma * sqrt(2 * ln(n_elem))
    with n_elem the element count of one group (ps * ps * C * K); set it
    explicitly to override.
    """

    ps: int = 8
    group_size: int = 30
    search_radius: int = 20
    step: int = 4
    sigma: float = 0.0
    gamma: float = 1.0
    tau: float | None = None
    method: str = "mstsvd"
    weight_mode: str = "uniform"
    train_subsample: int | None = None

    def validate(self) -> "FilterParams":
        check_positive_int(self.ps, "ps")
        check_positive_int(self.group_size, "group_size")
        check_positive_int(self.step, "step")
        if self.step > self.ps:
            # a stride beyond the patch side would leave uncovered pixels
            raise ValueError(f"step ({self.step}) must not exceed ps ({self.ps})")
        if self.search_radius < 0:
            raise ValueError("search_radius must be >= 0")
        check_nonnegative(self.sigma, "sigma")
        check_nonnegative(self.gamma, "gamma")
        if self.tau is not None:
            check_nonnegative(self.tau, "tau")
        if self.method not in _METHODS:
            raise ValueError(f"method must be one of {_METHODS}, got {self.method!r}")
        if self.weight_mode not in _WEIGHT_MODES:
            raise ValueError(f"weight_mode must be one of {_WEIGHT_MODES}")
        if self.train_subsample is not None:
            check_positive_int(self.train_subsample, "train_subsample")
        return self

    def effective_tau(self, n_channels: int) -> float:
        if self.tau is not None:
            return float(self.tau)
        n_elem = self.ps * self.ps * n_channels * self.group_size
        if n_elem < 2:
            return 0.0
        return compute_tau(self.sigma, self.gamma, n_elem)

    def with_overrides(self, **kwargs) -> "FilterParams":
        return replace(self, **kwargs)


def compute_tau(sigma: float, gamma: float, n_elem: int) -> float:
    """Universal hard threshold gamma * sigma * sqrt(2 * ln(n_elem))."""
    sigma = check_nonnegative(sigma, "sigma")
    gamma = check_nonnegative(gamma, "gamma")
    if n_elem < 2:
        raise ValueError("n_elem must be >= 2")
    return gamma * sigma * math.sqrt(2.0 * math.log(n_elem))


def slice_multiplicities(n_channels: int) -> np.ndarray:
    """Spectral weight of each retained slice: 1 for self-conjugate, else 2."""
    s = n_channels // 2 + 1
    mult = np.full(s, 2, dtype=np.int64)
    mult[0] = 1
    if n_channels % 2 == 0 and n_channels > 1:
        mult[-1] = 1
    return mult


@dataclass
class CoefficientTensor:
    """Retained-slice transform coefficients of one group.

    ``n_retained`` counts surviving coefficients over the full spectrum,
    i.e. mirrored slices count twice.
    """

    data: np.ndarray        # (ps, ps, S, K) complex
    n_channels: int
    n_retained: int

    def __post_init__(self):
        norm = np.linalg.norm(self.data)
        if norm > 0 and np.abs(self.data[:, :, 0, :].imag).max() > 1e-9 * norm:
            raise InvariantError("first Fourier slice of coefficients is not real")

    @property
    def total_coefficients(self) -> int:
        ps, _, _, k = self.data.shape
        return ps * ps * self.n_channels * k


def _rows_then_cols(x: np.ndarray, row_mats: np.ndarray, col_mats: np.ndarray) -> np.ndarray:
    """Per-slice row and column transforms of a slice-first (S, ps, ps, K) stack.

    Applies ``row_mats[j]`` from the left and contracts the second spatial
    axis with ``col_mats[j]`` (entry (b, c) multiplying spatial column b).
    """
    s, ps, _, k = x.shape
    x = np.matmul(row_mats, x.reshape(s, ps, -1)).reshape(s, ps, ps, k)
    xt = np.ascontiguousarray(x.transpose(0, 2, 1, 3)).reshape(s, ps, -1)
    xt = np.matmul(col_mats.transpose(0, 2, 1), xt)
    return xt.reshape(s, ps, ps, k).transpose(0, 2, 1, 3)


def forward(group: PatchGroup | np.ndarray, gb: GlobalBasis, ub: GroupBasis) -> CoefficientTensor:
    """Transform a real group to retained-slice coefficients."""
    data = group.data if isinstance(group, PatchGroup) else np.asarray(group)
    if data.ndim != 4:
        raise ValueError("forward expects an order-4 group")
    n = data.shape[2]
    if n != gb.n_channels:
        raise ValueError(f"group has {n} channels but basis was trained for {gb.n_channels}")
    if data.shape[0] != gb.ps or data.shape[1] != gb.ps:
        raise ValueError("group patch side does not match basis")
    if data.shape[3] != ub.u_group.shape[0]:
        raise ValueError("group size does not match grouping basis")
    s = n // 2 + 1
    fwd = dft_pair(n).forward[:s]
    ghat = np.moveaxis(np.tensordot(data, fwd, axes=([2], [1])), -1, 0)  # (S, ps, ps, K)
    c = _rows_then_cols(ghat, gb.u_row.conj().transpose(0, 2, 1), gb.u_col.conj())
    c = np.tensordot(c, ub.u_group, axes=([3], [0]))
    c = np.moveaxis(c, 0, 2)  # back to (ps, ps, S, K)
    k = data.shape[3]
    return CoefficientTensor(data=c, n_channels=n, n_retained=gb.ps * gb.ps * n * k)


def hard_threshold(c: CoefficientTensor, tau: float) -> CoefficientTensor:
    """Zero every coefficient with magnitude below ``tau``; keep the rest verbatim."""
    tau = check_nonnegative(tau, "tau")
    keep = np.abs(c.data) >= tau
    data = np.where(keep, c.data, 0.0)
    mult = slice_multiplicities(c.n_channels)
    n_retained = int((keep.sum(axis=(0, 1, 3)) * mult).sum())
    return CoefficientTensor(data=data, n_channels=c.n_channels, n_retained=n_retained)


def inverse(c: CoefficientTensor, gb: GlobalBasis, ub: GroupBasis) -> np.ndarray:
    """Back-transform coefficients to a real (ps, ps, C, K) group.

    Unretained Fourier slices are reconstructed by conjugating their
    mirrors before the inverse channel DFT; a non-negligible imaginary
    residue afterwards means conjugate symmetry was broken somewhere and
    raises :class:`InvariantError`.
    """
    n = c.n_channels
    s = n // 2 + 1
    if c.data.shape[2] != s:
        raise ValueError("coefficient tensor slice count does not match channel count")
    g = np.tensordot(c.data, ub.u_group.T, axes=([3], [0]))
    g = np.moveaxis(g, 2, 0)  # (S, ps, ps, K)
    g = _rows_then_cols(g, gb.u_row, gb.u_col.transpose(0, 2, 1))
    ps, _, k = g.shape[1], g.shape[2], g.shape[3]
    full = np.empty((n, ps, ps, k), dtype=np.complex128)
    full[:s] = g
    for j in range(s, n):
        np.conj(g[n - j], out=full[j])
    inv = dft_pair(n).forward.conj().T
    out = np.tensordot(inv, full, axes=([1], [0]))  # (N, ps, ps, K)
    norm = np.linalg.norm(out)
    if norm > 0 and np.abs(out.imag).max() > 1e-9 * norm:
        raise InvariantError("inverse transform produced a non-real group")
    return np.ascontiguousarray(np.moveaxis(out.real, 0, 2))


def filter_group_tsvd(data: np.ndarray, gb: GlobalBasis, ub: GroupBasis,
                      tau: float) -> tuple[np.ndarray, int]:
    """forward -> hard threshold -> inverse for one group; returns (group, kept)."""
    coeff = forward(data, gb, ub)
    coeff = hard_threshold(coeff, tau)
    return inverse(coeff, gb, ub), coeff.n_retained


def hosvd_forward(data: np.ndarray, hb: HosvdBasis) -> np.ndarray:
    """Real 4-D core of a group under per-group orthogonal factors."""
    c = np.tensordot(hb.u_row.T, data, axes=(1, 0))
    c = np.moveaxis(np.tensordot(c, hb.u_col, axes=([1], [0])), -1, 1)
    c = np.moveaxis(np.tensordot(c, hb.u_color, axes=([2], [0])), -1, 2)
    return np.tensordot(c, hb.u_group, axes=([3], [0]))


def hosvd_inverse(core: np.ndarray, hb: HosvdBasis) -> np.ndarray:
    c = np.tensordot(hb.u_row, core, axes=(1, 0))
    c = np.moveaxis(np.tensordot(c, hb.u_col.T, axes=([1], [0])), -1, 1)
    c = np.moveaxis(np.tensordot(c, hb.u_color.T, axes=([2], [0])), -1, 2)
    return np.tensordot(c, hb.u_group.T, axes=([3], [0]))


def filter_group_hosvd(data: np.ndarray, hb: HosvdBasis, tau: float) -> tuple[np.ndarray, int]:
    """Per-group 4-D transform with hard thresholding; returns (group, kept)."""
    core = hosvd_forward(data, hb)
    keep = np.abs(core) >= tau
    n_retained = int(keep.sum())
    core = np.where(keep, core, 0.0)
    return hosvd_inverse(core, hb), n_retained
