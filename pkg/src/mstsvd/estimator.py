"""scikit-learn style wrapper around the denoising pipelines."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .filtering import FilterParams
from .pipeline import COLOR, MSI, default_params, denoise
from .validation import check_image


class PatchGroupDenoiser(BaseEstimator, TransformerMixin):
    """Denoise images by grouped-patch transform-domain filtering.

    The denoiser is self-supervised: everything it needs (including the
    global patch basis of the spectral methods) is learned from the image
    being transformed, so ``fit`` only validates parameters and ``transform``
    does the work, one image at a time.

    Parameters
    ----------
    method : {'mstsvd', 'cmstsvd', 'twist', 'hosvd4d'}, default='mstsvd'
        Filtering variant. 'cmstsvd' requires 3-channel input; 'twist'
        permutes the band axis first and suits band-structured noise.
    sigma : float, default=25.0
        Noise standard deviation in pixel units (0..255 scale).
    gamma : float or None, default=None
        Threshold scale; None picks the stock value for the method and
        image kind.
    patch_size, group_size, step : int
        Patch side, patches per group, and reference grid stride.
    search_radius : int or None, default=None
        Half-width of the candidate window; None picks 20 for color
        images and 16 for cubes.
    weight_mode : {'uniform', 'sparsity'}, default='uniform'
        Aggregation weighting of filtered patches.
    tau : float or None, default=None
        Explicit hard threshold, overriding the sigma/gamma derivation.
    threads : int, default=1
        Worker count for the grouping/filtering sweep.

    Attributes
    ----------
    report_ : DenoiseReport
        Stage timings and statistics of the last ``transform`` call.
    params_ : FilterParams
        Fully resolved parameters of the last ``fit`` or ``transform``.
    """

    def __init__(self, method="mstsvd", sigma=25.0, gamma=None, patch_size=8,
                 group_size=30, search_radius=None, step=4,
                 weight_mode="uniform", tau=None, threads=1):
        self.method = method
        self.sigma = sigma
        self.gamma = gamma
        self.patch_size = patch_size
        self.group_size = group_size
        self.search_radius = search_radius
        self.step = step
        self.weight_mode = weight_mode
        self.tau = tau
        self.threads = threads

    def _resolve(self, img: np.ndarray) -> FilterParams:
        kind = COLOR if img.shape[2] <= 3 else MSI
        params = default_params(self.method, kind, float(self.sigma))
        overrides = {
            "ps": self.patch_size,
            "group_size": self.group_size,
            "step": self.step,
            "weight_mode": self.weight_mode,
        }
        if self.gamma is not None:
            overrides["gamma"] = float(self.gamma)
        if self.search_radius is not None:
            overrides["search_radius"] = int(self.search_radius)
        if self.tau is not None:
            overrides["tau"] = float(self.tau)
        return params.with_overrides(**overrides).validate()

    def fit(self, X, y=None):
        """Validate parameters against ``X``; no state is learned here."""
        img = check_image(X)
        self.params_ = self._resolve(img)
        return self

    def transform(self, X):
        """Denoise one image; 2-D input comes back 2-D."""
        squeeze = np.asarray(X).ndim == 2
        img = check_image(X)
        self.params_ = self._resolve(img)
        out, report = denoise(img, self.params_, threads=int(self.threads))
        self.report_ = report
        return out[:, :, 0] if squeeze else out
