"""Acquisition simulation: dark offset, PSF blur, shot noise, sensor noise.

Applied to composed [0,1] frames in the fixed order dark offset, Gaussian
PSF blur, Poisson shot noise, additive Gaussian sensor noise, final clamp.
Each step can be toggled off to generate data of graded difficulty.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np
from scipy.ndimage import gaussian_filter

# blur kernels are truncated at +/- 4 sigma and renormalized to unit sum
BLUR_TRUNCATE = 4.0


@dataclass
class AcquisitionParams:
    """Imaging-chain parameters, all in normalized [0,1] intensity units.

    ``photon_scale`` converts normalized intensity to expected photon
    counts for the shot-noise step (variance of a constant frame ``c``
    becomes ``c / photon_scale``).
    """

    dark_offset: float = 0.02
    psf_sigma: float = 1.0
    photon_scale: float = 1000.0
    gaussian_sigma: float = 0.001
    enable_dark: bool = True
    enable_blur: bool = True
    enable_poisson: bool = True
    enable_gaussian: bool = True

    def __post_init__(self):
        if not 0.0 <= self.dark_offset <= 1.0:
            raise ValueError("dark_offset must be in [0, 1]")
        if self.psf_sigma < 0 or self.photon_scale <= 0 or self.gaussian_sigma < 0:
            raise ValueError("acquisition parameters must be nonnegative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "AcquisitionParams":
        return cls(**d)


def apply_acquisition(
    image: np.ndarray,
    params: AcquisitionParams,
    rng: np.random.Generator,
) -> np.ndarray:
    """Run one frame through the acquisition chain.

    The input must lie in [0,1]; the output is clamped back to [0,1]. With
    every step disabled the input is returned unchanged.
    """
    img = np.asarray(image, dtype=float).copy()
    if params.enable_dark and params.dark_offset > 0:
        img += params.dark_offset
    if params.enable_blur and params.psf_sigma > 0:
        img = gaussian_filter(img, params.psf_sigma, mode="reflect",
                              truncate=BLUR_TRUNCATE)
    if params.enable_poisson:
        img = rng.poisson(img * params.photon_scale) / params.photon_scale
    if params.enable_gaussian and params.gaussian_sigma > 0:
        img += rng.normal(0.0, params.gaussian_sigma, size=img.shape)
    return np.clip(img, 0.0, 1.0)


def gaussian_psf_kernel(sigma: float) -> np.ndarray:
    """The 2-D blur kernel actually applied: sampled Gaussian, truncated at
    4 sigma per axis, normalized to unit sum."""
    radius = int(BLUR_TRUNCATE * sigma + 0.5)
    x = np.arange(-radius, radius + 1, dtype=float)
    k1 = np.exp(-(x**2) / (2.0 * sigma**2))
    k1 /= k1.sum()
    return np.outer(k1, k1)
