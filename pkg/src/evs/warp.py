"""Depth-based reprojection into a training view with a round-trip occlusion test.

A pixel of the augmented view is carried to the training view through its
depth, the training depth observed there is carried back, and the pixel
distance between start and end point (the reverse-reprojection error) decides
whether the training color may be trusted.  Untrusted pixels take the color of
the coarse rendering instead.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import BehindCamera, DimensionMismatch, ValidationError
from .geometry import CameraView, Intrinsics, RelativeTransform, relative_transform
from .raster import DepthMap, pixel_grid

MIN_Z = 1e-9
LATTICE_SNAP = 1e-9


class Provenance(enum.IntEnum):
    OUTSIDE_MASK = 0
    COARSE_FALLBACK = 1
    REPROJECTED = 2


PROVENANCE_GRAY = {Provenance.OUTSIDE_MASK: 0, Provenance.COARSE_FALLBACK: 128, Provenance.REPROJECTED: 255}


@dataclass(frozen=True)
class OcclusionConfig:
    """``xi`` is the error threshold in pixels; ``inf`` disables the occlusion test.

    ``literal`` feeds the forward-computed depth into the reverse step instead of
    the depth observed in the training depth map.  The error is then zero up to
    rounding, so this mode exists only for inspection.
    """

    xi: float = 1.0
    literal: bool = False

    def __post_init__(self):
        if not self.xi > 0:
            raise ValidationError(f"xi must be positive, got {self.xi}")


@dataclass(frozen=True)
class Correspondence:
    target_px: np.ndarray
    target_depth: float
    reverse_error: Optional[float] = None


@dataclass(frozen=True, eq=False)
class ViewPrior:
    image: np.ndarray
    provenance: np.ndarray
    reverse_error: np.ndarray  # NaN where the test did not run

    def counts(self) -> dict[str, int]:
        return {p.name: int(np.count_nonzero(self.provenance == p)) for p in Provenance}

    def provenance_gray(self) -> np.ndarray:
        lut = np.zeros(3, dtype=np.uint8)
        for p, g in PROVENANCE_GRAY.items():
            lut[p] = g
        return lut[self.provenance]


def _project(K: np.ndarray, X: np.ndarray):
    z = X[:, 2]
    safe = np.where(z > MIN_Z, z, 1.0)
    u = (K[0, 0] * X[:, 0] + K[0, 2] * z) / safe
    v = (K[1, 1] * X[:, 1] + K[1, 2] * z) / safe
    return np.stack([u, v], axis=1), z


def _rays(K_inv: np.ndarray, px: np.ndarray) -> np.ndarray:
    hom = np.concatenate([px, np.ones((len(px), 1))], axis=1)
    return hom @ K_inv.T


def reproject(pixels, depths, rel: RelativeTransform, K_v: Intrinsics, K_t: Intrinsics):
    """Vectorized forward step: ``(target_px (N, 2), target_depth (N,))``.

    Entries whose target depth is not above ``MIN_Z`` are behind the training
    camera and their pixel coordinates are meaningless.
    """
    pixels = np.asarray(pixels, dtype=np.float64).reshape(-1, 2)
    depths = np.asarray(depths, dtype=np.float64).reshape(-1)
    X = depths[:, None] * (_rays(K_v.K_inv, pixels) @ rel.R.T) + rel.t
    return _project(K_t.K, X)


def reverse_errors(pixels, target_px, observed_depth, rel: RelativeTransform, K_v: Intrinsics, K_t: Intrinsics):
    """Vectorized reverse step; +inf where the round trip lands behind the augmented camera."""
    pixels = np.asarray(pixels, dtype=np.float64).reshape(-1, 2)
    target_px = np.asarray(target_px, dtype=np.float64).reshape(-1, 2)
    d = np.asarray(observed_depth, dtype=np.float64).reshape(-1)
    # Rt applied to row vectors is "@ R"
    X = d[:, None] * (_rays(K_t.K_inv, target_px) @ rel.R) - rel.R.T @ rel.t
    back, z = _project(K_v.K, X)
    err = np.linalg.norm(pixels - back, axis=1)
    return np.where(z > MIN_Z, err, np.inf)


def reproject_pixel(p_v, depth_v: float, rel: RelativeTransform, K_v: Intrinsics, K_t: Intrinsics) -> Correspondence:
    if not depth_v > 0:
        raise ValidationError(f"depth must be positive, got {depth_v}")
    px, z = reproject(p_v, [depth_v], rel, K_v, K_t)
    if not z[0] > MIN_Z:
        raise BehindCamera(f"correspondence depth {z[0]:.3g} is behind the training camera")
    return Correspondence(px[0], float(z[0]))


def reverse_reproject(
    corr: Correspondence,
    depth_t_at_corr: float,
    rel: RelativeTransform,
    K_v: Intrinsics,
    K_t: Intrinsics,
    p_v,
) -> float:
    """Reverse-reprojection error in pixels for one correspondence."""
    if not depth_t_at_corr > 0:
        raise ValidationError(f"observed depth must be positive, got {depth_t_at_corr}")
    e = reverse_errors(p_v, corr.target_px, [depth_t_at_corr], rel, K_v, K_t)[0]
    if not math.isfinite(e):
        raise BehindCamera("reverse correspondence is behind the augmented camera")
    return float(e)


def bilinear_sample(image, p):
    """Bilinear color at sub-pixel ``p`` (shape (2,) or (N, 2), as (u, v)).

    Coordinates are clamped to the image; coordinates within 1e-9 of a lattice
    point are snapped to it so exact correspondences return exact colors.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.size == 0:
        raise ValidationError("cannot sample an empty image")
    H, W = image.shape[:2]
    p = np.asarray(p, dtype=np.float64)
    single = p.ndim == 1
    p = p.reshape(-1, 2)
    u = np.clip(p[:, 0], 0, W - 1)
    v = np.clip(p[:, 1], 0, H - 1)
    ru, rv = np.rint(u), np.rint(v)
    u = np.where(np.abs(u - ru) < LATTICE_SNAP, ru, u)
    v = np.where(np.abs(v - rv) < LATTICE_SNAP, rv, v)
    u0 = np.floor(u).astype(np.int64)
    v0 = np.floor(v).astype(np.int64)
    u1 = np.minimum(u0 + 1, W - 1)
    v1 = np.minimum(v0 + 1, H - 1)
    fu = (u - u0)[:, None]
    fv = (v - v0)[:, None]
    out = (
        (1 - fu) * (1 - fv) * image[v0, u0]
        + fu * (1 - fv) * image[v0, u1]
        + (1 - fu) * fv * image[v1, u0]
        + fu * fv * image[v1, u1]
    )
    return out[0] if single else out


def _nearest_index(x, n):
    return np.clip(np.floor(x + 0.5).astype(np.int64), 0, n - 1)


def generate_view_prior(
    aug: CameraView,
    aug_depth: DepthMap,
    train: CameraView,
    train_depth: DepthMap,
    coarse,
    cfg: OcclusionConfig = OcclusionConfig(),
) -> ViewPrior:
    """Warp the training image into the augmented view, falling back to ``coarse``.

    Per pixel with a valid augmented depth: forward-reproject, read the training
    depth at the nearest pixel to the correspondence, compute the reverse error,
    and keep the bilinear training color when the error is below ``cfg.xi`` and
    the correspondence lands inside the training image (and training mask).
    Pixels without augmented depth are black and marked OUTSIDE_MASK.
    """
    Hv, Wv = aug.intrinsics.shape
    Ht, Wt = train.intrinsics.shape
    coarse = np.asarray(coarse, dtype=np.float64)
    if aug_depth.shape != (Hv, Wv):
        raise DimensionMismatch(f"augmented depth {aug_depth.shape} vs camera {(Hv, Wv)}")
    if train_depth.shape != (Ht, Wt):
        raise DimensionMismatch(f"training depth {train_depth.shape} vs camera {(Ht, Wt)}")
    if coarse.shape != (Hv, Wv, 3):
        raise DimensionMismatch(f"coarse rendering {coarse.shape} vs camera {(Hv, Wv, 3)}")
    if train.image is None:
        raise ValidationError(f"training view {train.id} has no image")

    image = np.zeros((Hv, Wv, 3))
    provenance = np.full((Hv, Wv), Provenance.OUTSIDE_MASK, dtype=np.uint8)
    error_map = np.full((Hv, Wv), np.nan)

    valid = aug_depth.valid
    pixels = pixel_grid(aug.intrinsics)[valid]
    rel = relative_transform(aug.pose, train.pose)
    target, z = reproject(pixels, aug_depth.values[valid], rel, aug.intrinsics, train.intrinsics)

    ok = (z > MIN_Z) & (target[:, 0] >= 0) & (target[:, 0] <= Wt - 1) & (target[:, 1] >= 0) & (target[:, 1] <= Ht - 1)
    iu = _nearest_index(np.where(ok, target[:, 0], 0), Wt)
    iv = _nearest_index(np.where(ok, target[:, 1], 0), Ht)
    if train.mask is not None:
        ok &= train.mask[iv, iu]

    errors = np.full(len(pixels), np.nan)
    if math.isinf(cfg.xi):
        keep = ok
    else:
        observed = train_depth.values[iv, iu]
        ok &= train_depth.valid[iv, iu]
        d_back = z if cfg.literal else observed
        errors[ok] = reverse_errors(pixels[ok], target[ok], d_back[ok], rel, aug.intrinsics, train.intrinsics)
        keep = ok & (errors < cfg.xi)

    colors = np.asarray(coarse[valid])
    colors[keep] = bilinear_sample(train.image, target[keep])
    image[valid] = colors
    prov = np.where(keep, Provenance.REPROJECTED, Provenance.COARSE_FALLBACK).astype(np.uint8)
    provenance[valid] = prov
    error_map[valid] = errors
    return ViewPrior(image, provenance, error_map)
