"""Scene datasets: loading, exporting, default scene center and the EVS split."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import BadCount, MissingAsset, ValidationError
from ..geometry import DEFAULT_UP, CameraView, pitch_angle
from ..io import (
    camera_record,
    read_cameras,
    read_depth_pfm,
    read_image,
    read_obj,
    write_cameras,
    write_obj,
    write_pfm,
    write_png,
)
from ..raster import DepthMap, TriangleMesh

logger = logging.getLogger(__name__)

AUG_SUFFIX = "_aug"


def augmented_id(view_id: str) -> str:
    return f"{view_id}{AUG_SUFFIX}"


@dataclass(eq=False)
class Dataset:
    views: list[CameraView]
    mesh: Optional[TriangleMesh] = None
    coarse_renders: dict[str, np.ndarray] = field(default_factory=dict)
    center: Optional[np.ndarray] = None
    up: np.ndarray = field(default_factory=lambda: np.array(DEFAULT_UP))
    depth_maps: dict[str, DepthMap] = field(default_factory=dict)
    ground_truth: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        ids = [v.id for v in self.views]
        if len(set(ids)) != len(ids):
            raise ValidationError("view ids must be unique")
        self.up = np.asarray(self.up, dtype=np.float64)
        if self.center is None:
            self.center = default_center(self.views, self.mesh)
        self.center = np.asarray(self.center, dtype=np.float64)

    def view(self, view_id: str) -> CameraView:
        for v in self.views:
            if v.id == view_id:
                return v
        raise KeyError(view_id)


def default_center(views, mesh: Optional[TriangleMesh] = None) -> np.ndarray:
    """Mesh bounding-box center, else the point closest to all optical axes."""
    if mesh is not None and len(mesh.vertices):
        return mesh.bbox_center()
    if not views:
        return np.zeros(3)
    A = np.zeros((3, 3))
    b = np.zeros(3)
    for v in views:
        d = v.pose.R[2]  # optical axis in world coordinates
        P = np.eye(3) - np.outer(d, d)
        A += P
        b += P @ v.position
    if np.linalg.cond(A) > 1e12:
        return np.mean([v.position for v in views], axis=0)
    return np.linalg.solve(A, b)


def load_dataset(
    camera_file,
    mesh_file=None,
    coarse_dir=None,
    depth_dir=None,
    gt_dir=None,
    center=None,
    up=DEFAULT_UP,
) -> Dataset:
    """Read cameras (with images), optional mesh, coarse renders, depth overrides and ground truth.

    Coarse renders, depth maps and ground-truth images are keyed by file stem:
    ``<coarse_dir>/<view id>.png``, ``<depth_dir>/<view id>.pfm``, ``<gt_dir>/<view id>.png``.
    """
    views = read_cameras(camera_file)
    mesh = read_obj(mesh_file) if mesh_file is not None else None

    def stems(directory, suffix):
        if directory is None:
            return {}
        directory = Path(directory)
        if not directory.is_dir():
            raise MissingAsset([directory])
        return {p.name[: -len(suffix)]: p for p in sorted(directory.iterdir()) if p.name.endswith(suffix)}

    coarse = {k: read_image(p) for k, p in stems(coarse_dir, ".png").items()}
    depths = {k: read_depth_pfm(p) for k, p in stems(depth_dir, ".pfm").items()}
    gt = {k: read_image(p) for k, p in stems(gt_dir, ".png").items()}
    logger.info("loaded %d views, %d coarse renders, %d depth maps", len(views), len(coarse), len(depths))
    return Dataset(views, mesh, coarse, center, up, depths, gt)


def save_dataset(dataset: Dataset, out_dir, camera_name: str = "cameras.json") -> Path:
    """Write images, masks, cameras, mesh, coarse renders, depth maps and ground truth under ``out_dir``."""
    out = Path(out_dir)
    records = []
    for v in dataset.views:
        image_path = mask_path = None
        if v.image is not None:
            image_path = f"images/{v.id}.png"
            write_png(out / image_path, v.image)
        if v.mask is not None:
            mask_path = f"masks/{v.id}.png"
            write_png(out / mask_path, (v.mask * 255).astype(np.uint8))
        records.append(camera_record(v, image_path, mask_path))
    write_cameras(out / camera_name, records)
    if dataset.mesh is not None:
        write_obj(out / "mesh.obj", dataset.mesh)
    for k, img in sorted(dataset.coarse_renders.items()):
        write_png(out / "coarse" / f"{k}.png", img)
    for k, d in sorted(dataset.depth_maps.items()):
        write_pfm(out / "depth" / f"{k}.pfm", d)
    for k, img in sorted(dataset.ground_truth.items()):
        write_png(out / "gt" / f"{k}.png", img)
    return out / camera_name


def make_evs_split(dataset: Dataset, n_train: int) -> tuple[list[str], list[str]]:
    """Lowest-pitch ``n_train`` views train, the rest test; ties broken by view id."""
    n = len(dataset.views)
    if not 1 <= n_train < n:
        raise BadCount(f"n_train must lie in [1, {n - 1}], got {n_train}")
    # rounding keeps numerically-equal pitches tied so the id decides
    keyed = sorted(dataset.views, key=lambda v: (round(pitch_angle(v, dataset.center, dataset.up), 9), v.id))
    ids = [v.id for v in keyed]
    return ids[:n_train], ids[n_train:]
