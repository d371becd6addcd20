"""Frequency-domain refinement of view priors.

Spectra use the raw (unshifted) DFT layout: bin (0, 0) is DC and the array
center holds the highest frequencies.  The weight map is largest at the array
center, so the prior contributes most of the high-frequency content and the
coarse rendering most of the low-frequency content.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, ValidationError


@dataclass(frozen=True)
class BlendConfig:
    w_h: float = 0.8
    w_l: float = 0.5

    def __post_init__(self):
        for name in ("w_h", "w_l"):
            w = getattr(self, name)
            if not 0.0 <= w <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1], got {w}")


def fft2(image) -> np.ndarray:
    """Unnormalized, unshifted forward 2-D DFT over the first two axes."""
    image = np.asarray(image)
    if image.ndim < 2 or min(image.shape[:2]) < 1:
        raise ValidationError("fft2 needs at least a 1x1 array")
    return np.fft.fft2(image, axes=(0, 1))


def ifft2(spectrum) -> np.ndarray:
    return np.fft.ifft2(spectrum, axes=(0, 1))


def make_weight_map(height: int, width: int, cfg: BlendConfig = BlendConfig()) -> np.ndarray:
    """Radial ramp from ``w_h`` at ``(height // 2, width // 2)`` to ``w_l`` at the farthest corner."""
    if height < 1 or width < 1:
        raise ValidationError(f"weight map size must be positive, got {height}x{width}")
    ci, cj = height // 2, width // 2
    i, j = np.mgrid[0:height, 0:width]
    r = np.hypot(i - ci, j - cj)
    r_max = r.max()
    if r_max == 0:
        return np.full((height, width), float(cfg.w_h))
    s = r / r_max
    # convex form hits both endpoints exactly (s is exactly 0 and 1 there)
    return cfg.w_h * (1.0 - s) + cfg.w_l * s


def blend_spectra(prior, coarse, weights, clamp: bool = True) -> np.ndarray:
    """``real(F^-1(M * F(prior) + (1 - M) * F(coarse)))`` per channel, optionally clamped to [0, 1]."""
    prior = np.asarray(prior, dtype=np.float64)
    coarse = np.asarray(coarse, dtype=np.float64)
    if prior.shape != coarse.shape:
        raise DimensionMismatch(f"prior {prior.shape} vs coarse {coarse.shape}")
    M = np.asarray(weights, dtype=np.float64)
    if M.shape != prior.shape[:2]:
        raise DimensionMismatch(f"weight map {M.shape} vs image {prior.shape[:2]}")
    if prior.ndim == 3:
        M = M[:, :, None]
    out = ifft2(M * fft2(prior) + (1.0 - M) * fft2(coarse)).real
    return np.clip(out, 0.0, 1.0) if clamp else out


def refine_prior(prior, coarse, cfg: BlendConfig = BlendConfig(), clamp: bool = True) -> np.ndarray:
    """Enhanced view prior: high frequencies mostly from ``prior``, low frequencies mostly from ``coarse``.

    Odd image sizes make the weight map asymmetric under the DFT's conjugate
    index map; the imaginary part of the inverse transform is discarded either way.
    """
    prior = np.asarray(prior, dtype=np.float64)
    H, W = prior.shape[:2]
    return blend_spectra(prior, coarse, make_weight_map(H, W, cfg), clamp=clamp)
