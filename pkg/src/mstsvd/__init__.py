"""Patch-grouping transform-domain denoising for color and multispectral images.

The package combines a globally trained per-Fourier-slice patch basis with
a per-group PCA along the grouping dimension and hard thresholding in the
transform domain, plus a per-group 4-D HOSVD baseline, seeded noise
synthesis and the usual quality metrics. See the README for the CLI.
"""

from .estimator import PatchGroupDenoiser
from .filtering import FilterParams, compute_tau, forward, hard_threshold, inverse
from .metrics import MetricBlock, ergas, metric_block, psnr, sam, ssim
from .noise import add_awgn, add_awgn_band_ramp, add_stripes
from .imageio import read_image, write_image
from .pipeline import (
    DenoiseReport,
    default_params,
    denoise,
    denoise_cmstsvd,
    denoise_hosvd4d,
    denoise_mstsvd,
    denoise_twist,
    train_basis_for_image,
)
from .transforms import (
    GlobalBasis,
    GroupBasis,
    HosvdBasis,
    hosvd_basis,
    local_pca,
    opponent_matrix,
    train_global_basis,
)

__version__ = "0.1.0"

__all__ = [
    "DenoiseReport",
    "FilterParams",
    "GlobalBasis",
    "GroupBasis",
    "HosvdBasis",
    "MetricBlock",
    "PatchGroupDenoiser",
    "add_awgn",
    "add_awgn_band_ramp",
    "add_stripes",
    "compute_tau",
    "default_params",
    "denoise",
    "denoise_cmstsvd",
    "denoise_hosvd4d",
    "denoise_mstsvd",
    "denoise_twist",
    "ergas",
    "forward",
    "hard_threshold",
    "hosvd_basis",
    "inverse",
    "local_pca",
    "metric_block",
    "opponent_matrix",
    "psnr",
    "read_image",
    "sam",
    "ssim",
    "train_basis_for_image",
    "train_global_basis",
    "write_image",
    "__version__",
]
