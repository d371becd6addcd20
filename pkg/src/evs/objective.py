"""Image metrics and the scalar training objectives, evaluated without gradients.

Nothing here optimizes anything: each function returns a float that a trainer
would minimize.  The score model used by the appearance term is any callable
``model(image, tau) -> noise_estimate``; it is treated as a constant (it would
receive no gradient in training).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import BadTimestep, DimensionMismatch, ValidationError
from .raster import DepthMap

ScoreModel = Callable[[np.ndarray, int], np.ndarray]

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    """Cumulative signal fractions ``alpha_bar[tau - 1]`` for timesteps ``tau = 1..T``."""

    alpha_bar: np.ndarray

    def __post_init__(self):
        a = np.array(self.alpha_bar, dtype=np.float64).reshape(-1)
        if a.size == 0:
            raise ValidationError("noise schedule is empty")
        if np.any(a <= 0) or np.any(a > 1):
            raise ValidationError("alpha_bar entries must lie in (0, 1]")
        if np.any(np.diff(a) >= 0):
            raise ValidationError("alpha_bar must be strictly decreasing")
        a.setflags(write=False)
        object.__setattr__(self, "alpha_bar", a)

    @property
    def T(self) -> int:
        return len(self.alpha_bar)

    def __getitem__(self, tau: int) -> float:
        if int(tau) != tau or not 1 <= tau <= self.T:
            raise BadTimestep(f"timestep {tau} outside [1, {self.T}]")
        return float(self.alpha_bar[int(tau) - 1])

    @classmethod
    def linear(cls, beta_start: float = 1e-4, beta_end: float = 0.02, T: int = 1000) -> "NoiseSchedule":
        betas = np.linspace(beta_start, beta_end, T)
        return cls(np.cumprod(1.0 - betas))


@dataclass(frozen=True)
class LossWeights:
    lambda_photo: float = 0.8
    lambda_a: float = 1e-7
    lambda_g: float = 0.1

    def __post_init__(self):
        if not 0.0 <= self.lambda_photo <= 1.0:
            raise ValidationError(f"lambda_photo must lie in [0, 1], got {self.lambda_photo}")
        if self.lambda_a < 0 or self.lambda_g < 0:
            raise ValidationError("lambda_a and lambda_g must be non-negative")


def _same_shape(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes differ: {a.shape} vs {b.shape}")
    return a, b


def diffuse(image, tau: int, noise, sched: NoiseSchedule, literal: bool = True) -> np.ndarray:
    """Noisy image at timestep ``tau``.

    ``literal``: ``sqrt(a) * x + (1 - a) * eps``; otherwise the DDPM form
    ``sqrt(a) * x + sqrt(1 - a) * eps``.
    """
    image, noise = _same_shape(image, noise)
    a = sched[tau]
    scale = (1.0 - a) if literal else math.sqrt(1.0 - a)
    return math.sqrt(a) * image + scale * noise


def appearance_loss(image, tau: int, noise, model: ScoreModel, sched: NoiseSchedule, literal: bool = True) -> float:
    """Plain sum of ``model(x_tau, tau) * x_tau`` over all pixels and channels."""
    noisy = diffuse(image, tau, noise, sched, literal=literal)
    eps = np.asarray(model(noisy, tau), dtype=np.float64)
    if eps.shape != noisy.shape:
        raise DimensionMismatch(f"score model returned {eps.shape} for input {noisy.shape}")
    return float(np.sum(eps * noisy))


def geometry_loss(d_hat: DepthMap, d_bar: DepthMap, valid_mean: bool = False) -> float:
    """Mean absolute depth difference over pixels valid in both maps.

    The default divides by H * W with invalid pixels contributing zero; with
    ``valid_mean`` it divides by the number of commonly valid pixels instead.
    """
    if d_hat.shape != d_bar.shape:
        raise DimensionMismatch(f"depth maps differ: {d_hat.shape} vs {d_bar.shape}")
    both = d_hat.valid & d_bar.valid
    total = float(np.sum(np.abs(d_hat.values[both] - d_bar.values[both])))
    n = int(both.sum()) if valid_mean else d_hat.values.size
    return total / n if n else 0.0


def gaussian_taps(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    """Normalized 1-D Gaussian; the 2-D window is its outer product."""
    x = np.arange(size) - (size - 1) / 2
    g = np.exp(-(x ** 2) / (2 * sigma ** 2))
    return g / g.sum()


def _filter_valid(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    # separable 'valid' filtering: (H, W, C) -> (H-k+1, W-k+1, C)
    rows = sliding_window_view(x, len(g), axis=0) @ g
    return sliding_window_view(rows, len(g), axis=1) @ g


def ssim_map(a, b) -> np.ndarray:
    """Per-position, per-channel SSIM over all full 11x11 windows (no padding)."""
    a, b = _same_shape(a, b)
    if a.ndim == 2:
        a, b = a[:, :, None], b[:, :, None]
    if min(a.shape[:2]) < SSIM_WINDOW:
        raise DimensionMismatch(f"image {a.shape[:2]} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")
    w = gaussian_taps()
    mu_a = _filter_valid(a, w)
    mu_b = _filter_valid(b, w)
    var_a = _filter_valid(a * a, w) - mu_a ** 2
    var_b = _filter_valid(b * b, w) - mu_b ** 2
    cov = _filter_valid(a * b, w) - mu_a * mu_b
    num = (2 * mu_a * mu_b + SSIM_C1) * (2 * cov + SSIM_C2)
    den = (mu_a ** 2 + mu_b ** 2 + SSIM_C1) * (var_a + var_b + SSIM_C2)
    return num / den


def ssim(a, b) -> float:
    return float(np.mean(ssim_map(a, b)))


def psnr(a, b) -> float:
    """PSNR in dB for unit dynamic range; +inf for identical images."""
    a, b = _same_shape(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def l1(a, b) -> float:
    a, b = _same_shape(a, b)
    return float(np.mean(np.abs(a - b)))


def photometric_loss(pred, ref, lambda_photo: float = 0.8) -> float:
    """``lambda * L1 + (1 - lambda) * (1 - SSIM)``."""
    return lambda_photo * l1(pred, ref) + (1.0 - lambda_photo) * (1.0 - ssim(pred, ref))


def coarse_loss(photo_train: float, l_a: float, l_g: float, w: LossWeights = LossWeights()) -> float:
    return photo_train + w.lambda_a * l_a + w.lambda_g * l_g


def fine_loss(photo_train: float, photo_aug: float) -> float:
    return photo_train + photo_aug


def image_metrics(pred, ref, lambda_photo: float = 0.8) -> dict[str, float]:
    """Metric record fields for one view (``psnr`` may be +inf)."""
    s = ssim(pred, ref)
    d = l1(pred, ref)
    return {
        "psnr": psnr(pred, ref),
        "ssim": s,
        "l1": d,
        "photometric": lambda_photo * d + (1.0 - lambda_photo) * (1.0 - s),
    }


def mean_metrics(records: list[Mapping[str, Optional[float]]]) -> dict[str, float]:
    keys = [k for k in ("psnr", "ssim", "l1", "photometric", "l_g", "l_a") if any(k in r for r in records)]
    return {k: float(np.mean([r[k] for r in records if k in r])) for k in keys}
