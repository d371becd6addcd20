"""Pinhole cameras, relative poses, view elevation and split statistics.

Conventions: camera space has x right, y down and z forward, so the depth of
a point is its camera-space z.  Poses are world-to-camera, ``x_cam = R @ x_world + t``.
Pixel centers sit at integer coordinates (u = column, v = row).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .errors import DegeneratePose, DimensionMismatch, ValidationError

ROTATION_TOL = 1e-9
DEFAULT_UP = (0.0, 0.0, 1.0)


def _frozen(a, dtype=np.float64):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValidationError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if int(self.width) != self.width or int(self.height) != self.height:
            raise ValidationError("image size must be integral")
        if self.width < 1 or self.height < 1:
            raise ValidationError(f"image size must be positive, got {self.width}x{self.height}")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValidationError(
                f"principal point ({self.cx}, {self.cy}) outside {self.width}x{self.height} image"
            )

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    @property
    def K_inv(self) -> np.ndarray:
        return np.array(
            [
                [1.0 / self.fx, 0.0, -self.cx / self.fx],
                [0.0, 1.0 / self.fy, -self.cy / self.fy],
                [0.0, 0.0, 1.0],
            ]
        )

    @property
    def shape(self) -> tuple[int, int]:
        return (int(self.height), int(self.width))

    @classmethod
    def from_fov(cls, width: int, height: int, fov_deg: float) -> "Intrinsics":
        """Square pixels, principal point at the image center, horizontal FOV in degrees."""
        f = 0.5 * width / math.tan(math.radians(fov_deg) / 2)
        return cls(f, f, width / 2, height / 2, width, height)


def check_rotation(R, what="R"):
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        raise ValidationError(f"{what} must be a finite 3x3 matrix")
    if np.max(np.abs(R.T @ R - np.eye(3))) > ROTATION_TOL:
        raise ValidationError(f"{what} is not orthonormal within {ROTATION_TOL}")
    if abs(np.linalg.det(R) - 1.0) > ROTATION_TOL:
        raise ValidationError(f"{what} has det != 1")


@dataclass(frozen=True, eq=False)
class Pose:
    """World-to-camera rigid transform."""

    R: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        check_rotation(self.R)
        t = np.asarray(self.t, dtype=np.float64)
        if t.shape != (3,) or not np.all(np.isfinite(t)):
            raise ValidationError("t must be a finite 3-vector")
        object.__setattr__(self, "R", _frozen(self.R))
        object.__setattr__(self, "t", _frozen(t))

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @property
    def center(self) -> np.ndarray:
        """Camera position in world coordinates."""
        return -self.R.T @ self.t

    def world_to_camera(self, X):
        return np.asarray(X) @ self.R.T + self.t

    def camera_to_world(self, Xc):
        return (np.asarray(Xc) - self.t) @ self.R


RelativeTransform = Pose  # same fields and invariants; maps source-camera to target-camera coords


@dataclass(frozen=True, eq=False)
class CameraView:
    id: str
    intrinsics: Intrinsics
    pose: Pose
    image: Optional[np.ndarray] = None
    mask: Optional[np.ndarray] = None

    def __post_init__(self):
        hw = self.intrinsics.shape
        if self.image is not None:
            img = np.asarray(self.image, dtype=np.float64)
            if img.shape != hw + (3,):
                raise DimensionMismatch(
                    f"view {self.id}: image shape {img.shape} does not match intrinsics {hw}"
                )
            if img.size and (img.min() < 0.0 or img.max() > 1.0):
                raise ValidationError(f"view {self.id}: colors outside [0, 1]")
            object.__setattr__(self, "image", _frozen(img))
        if self.mask is not None:
            m = np.asarray(self.mask, dtype=bool)
            if m.shape != hw:
                raise DimensionMismatch(
                    f"view {self.id}: mask shape {m.shape} does not match intrinsics {hw}"
                )
            object.__setattr__(self, "mask", _frozen(m, bool))

    @property
    def position(self) -> np.ndarray:
        return self.pose.center


def look_at(eye, center, up=DEFAULT_UP) -> Pose:
    """World-to-camera pose at ``eye`` looking at ``center`` with a horizontal right vector."""
    eye = np.asarray(eye, dtype=np.float64)
    forward = np.asarray(center, dtype=np.float64) - eye
    n = np.linalg.norm(forward)
    if n == 0:
        raise DegeneratePose("eye coincides with look-at target")
    forward = forward / n
    right = np.cross(forward, np.asarray(up, dtype=np.float64))
    rn = np.linalg.norm(right)
    if rn < 1e-12:
        raise DegeneratePose("viewing direction is parallel to the up axis")
    right = right / rn
    down = np.cross(forward, right)
    R = np.stack([right, down, forward])
    return Pose(R, -R @ eye)


def relative_transform(source: Pose, target: Pose) -> RelativeTransform:
    """Transform taking source-camera coordinates to target-camera coordinates."""
    if np.array_equal(source.R, target.R) and np.array_equal(source.t, target.t):
        # exact identity keeps self-warps bit-exact
        return Pose.identity()
    R = target.R @ source.R.T
    return Pose(R, target.t - R @ source.t)


def _unit(v):
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v)
    if n == 0:
        raise DegeneratePose("zero-length vector")
    return v / n


def pitch_angle(view: CameraView, center, up=DEFAULT_UP) -> float:
    """Elevation in degrees of the camera position above the horizontal plane through ``center``."""
    d = view.position - np.asarray(center, dtype=np.float64)
    n = np.linalg.norm(d)
    if n == 0:
        raise DegeneratePose("camera position coincides with center")
    up = _unit(up)
    vertical = float(np.dot(d, up))
    return math.degrees(math.atan2(vertical, np.linalg.norm(d - vertical * up)))


def elevate_view(view: CameraView, center, omega: float, up=DEFAULT_UP, view_id=None) -> CameraView:
    """Rotate the camera by ``omega`` degrees toward ``up`` along the great circle about ``center``.

    The returned view looks at ``center``, keeps the intrinsics and carries no image or mask.
    """
    if not abs(omega) < 90:
        raise DegeneratePose(f"|omega| must be below 90 degrees, got {omega}")
    center = np.asarray(center, dtype=np.float64)
    up = _unit(up)
    d = view.position - center
    r = np.linalg.norm(d)
    if r == 0:
        raise DegeneratePose("camera position coincides with center")
    horiz = d - np.dot(d, up) * up
    hn = np.linalg.norm(horiz)
    if hn < 1e-12 * r:
        raise DegeneratePose("camera lies on the up axis")
    phi = pitch_angle(view, center, up)
    new_phi = phi + omega
    if not -90 < new_phi < 90:
        raise DegeneratePose(f"elevating pitch {phi:.6g} by {omega} passes through the pole")
    if omega == 0:
        eye = view.position
    else:
        a = math.radians(new_phi)
        eye = center + r * (math.cos(a) * horiz / hn + math.sin(a) * up)
    return CameraView(
        id=view_id if view_id is not None else view.id,
        intrinsics=view.intrinsics,
        pose=look_at(eye, center, up),
    )


def angular_distance(a: CameraView, b: CameraView, center) -> float:
    """Angle in degrees between the camera-position directions seen from ``center``."""
    center = np.asarray(center, dtype=np.float64)
    da = _unit(a.position - center)
    db = _unit(b.position - center)
    # atan2 form stays accurate near 0 and 180 degrees
    return math.degrees(math.atan2(np.linalg.norm(np.cross(da, db)), np.dot(da, db)))


def nearest_view(view: CameraView, candidates: Sequence[CameraView], center) -> CameraView:
    """Candidate with the smallest angular distance; the first one wins ties."""
    if not candidates:
        raise ValidationError("no candidate views")
    dists = [angular_distance(view, c, center) for c in candidates]
    return candidates[int(np.argmin(dists))]


def split_disparity(train: Sequence[CameraView], test: Sequence[CameraView], center, up=DEFAULT_UP) -> float:
    """Mean absolute pitch difference between each test view and its nearest training view."""
    if not train or not test:
        raise ValidationError("train and test must both be non-empty")
    center = np.asarray(center, dtype=np.float64)
    up = _unit(up)
    tr_dirs = np.stack([_unit(v.position - center) for v in train])
    te_dirs = np.stack([_unit(v.position - center) for v in test])
    tr_pitch = np.array([pitch_angle(v, center, up) for v in train])
    te_pitch = np.array([pitch_angle(v, center, up) for v in test])
    cross = np.linalg.norm(np.cross(te_dirs[:, None, :], tr_dirs[None, :, :]), axis=-1)
    dot = te_dirs @ tr_dirs.T
    nearest = np.argmin(np.arctan2(cross, dot), axis=1)
    return float(np.mean(np.abs(te_pitch - tr_pitch[nearest])))


def ring_views(
    n: int,
    radius: float,
    pitch_deg: float,
    intrinsics: Intrinsics,
    center=(0.0, 0.0, 0.0),
    up=DEFAULT_UP,
    azimuth_offset_deg: float = 0.0,
    azimuth_span_deg: float = 360.0,
    prefix: str = "cam",
) -> list[CameraView]:
    """Cameras evenly spaced in azimuth at a fixed pitch, all looking at ``center``.

    A span below 360 degrees places the cameras on an arc centred on the offset,
    endpoints included.
    """
    center = np.asarray(center, dtype=np.float64)
    up = _unit(up)
    # horizontal basis: any vector not parallel to up
    seed = np.array([1.0, 0.0, 0.0]) if abs(up[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = _unit(seed - np.dot(seed, up) * up)
    e2 = np.cross(up, e1)
    if azimuth_span_deg >= 360:
        azimuths = azimuth_offset_deg + 360.0 * np.arange(n) / n
    elif n == 1:
        azimuths = np.array([azimuth_offset_deg])
    else:
        azimuths = azimuth_offset_deg + np.linspace(-0.5, 0.5, n) * azimuth_span_deg
    p = math.radians(pitch_deg)
    views = []
    for i, az in enumerate(azimuths):
        a = math.radians(az)
        eye = center + radius * (math.cos(p) * (math.cos(a) * e1 + math.sin(a) * e2) + math.sin(p) * up)
        views.append(CameraView(f"{prefix}{i:03d}", intrinsics, look_at(eye, center, up)))
    return views


def with_image(view: CameraView, image=None, mask=None, view_id=None) -> CameraView:
    return replace(
        view,
        id=view.id if view_id is None else view_id,
        image=image,
        mask=mask,
    )
