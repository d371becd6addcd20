"""Procedural test scenes with exact geometry and ray-cast ground truth."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from ..errors import ValidationError
from ..geometry import CameraView, Intrinsics, elevate_view, ring_views, with_image
from ..io import camera_record, write_cameras, write_json, write_pfm
from ..raster import DepthMap, TriangleMesh, pixel_grid, raycast
from .dataset import Dataset, augmented_id, save_dataset
from .seeds import rng_for

KINDS = ("plane-pair", "textured-box", "faceted-sphere")


@dataclass(eq=False)
class Texture:
    """Per-surface base colors modulated by a sum of 3-D sinusoids of world position."""

    base: np.ndarray  # (n_surfaces, 3)
    waves: np.ndarray  # (n_waves, 3) wave vectors
    phases: np.ndarray  # (n_waves, 3) per-channel phases
    amps: np.ndarray  # (n_waves,) summing to 1

    @classmethod
    def random(cls, rng: np.random.Generator, n_surfaces: int, periods=(0.9, 0.45, 0.2)) -> "Texture":
        base = rng.uniform(0.35, 1.0, size=(n_surfaces, 3))
        dirs = rng.normal(size=(len(periods), 3))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        waves = dirs * (2 * np.pi / np.asarray(periods))[:, None]
        phases = rng.uniform(0, 2 * np.pi, size=(len(periods), 3))
        amps = np.array([0.5, 0.3, 0.2])[: len(periods)]
        return cls(base, waves, phases, amps / amps.sum())

    def __call__(self, points: np.ndarray, surface: np.ndarray) -> np.ndarray:
        arg = (points @ self.waves.T)[:, :, None] + self.phases[None]  # (N, n_waves, 3)
        pattern = np.einsum("w,nwc->nc", self.amps, np.sin(arg))
        return np.clip(self.base[surface] * (0.6 + 0.35 * pattern) + 0.05, 0.0, 1.0)


@dataclass(eq=False)
class SynthScene:
    kind: str
    seed: int
    omega: float
    dataset: Dataset
    augmented: list[CameraView]  # elevated cameras carrying ground-truth images
    depths: dict[str, DepthMap] = field(default_factory=dict)

    def export(self, out_dir) -> Path:
        """Write the scene as files the CLI understands; returns the training camera file."""
        out = Path(out_dir)
        cams = save_dataset(self.dataset, out)
        write_cameras(
            out / "test_cameras.json",
            [camera_record(v, f"gt/{v.id}.png") for v in self.augmented],
        )
        for k, d in sorted(self.depths.items()):
            write_pfm(out / "depth" / f"{k}.pfm", d)
        write_json(out / "scene.json", {"kind": self.kind, "seed": self.seed, "omega": self.omega})
        return cams


def render(mesh: TriangleMesh, surface_of: np.ndarray, texture: Texture, view: CameraView):
    """Ray-cast flat-textured image and exact depth map; background is black."""
    grid = pixel_grid(view.intrinsics)
    depth, tri = raycast(mesh, view.intrinsics, view.pose, grid)
    hit = tri >= 0
    k = view.intrinsics
    rays = np.stack([(grid[..., 0] - k.cx) / k.fx, (grid[..., 1] - k.cy) / k.fy, np.ones(depth.shape)], axis=-1)
    world = view.pose.camera_to_world(rays[hit] * depth[hit][:, None])
    image = np.zeros(depth.shape + (3,))
    image[hit] = texture(world, surface_of[tri[hit]])
    return image, DepthMap(depth, hit)


def _plane_pair():
    # back wall facing +x and a shorter card in front of it; cameras look from +x
    back = TriangleMesh.quad((-1.0, -2.0, -2.0), (0.0, 4.0, 0.0), (0.0, 0.0, 4.0))
    card = TriangleMesh.quad((0.6, -0.7, -1.6), (0.0, 1.4, 0.0), (0.0, 0.0, 1.6))
    mesh = TriangleMesh.concat([back, card])
    surfaces = np.array([0, 0, 1, 1])
    layout = dict(n=8, radius=7.0, span=50.0, fov=38.0, omega=30.0)
    return mesh, surfaces, layout


def _textured_box():
    mesh = TriangleMesh.box((-0.8, -0.8, -0.6), (0.8, 0.8, 0.6))
    surfaces = np.repeat(np.arange(6), 2)
    layout = dict(n=12, radius=5.0, span=360.0, fov=30.0, omega=30.0)
    return mesh, surfaces, layout


def _faceted_sphere():
    mesh = TriangleMesh.icosphere(2)
    surfaces = np.zeros(len(mesh), dtype=np.int64)
    layout = dict(n=12, radius=4.0, span=360.0, fov=34.0, omega=30.0)
    return mesh, surfaces, layout


_BUILDERS = {"plane-pair": _plane_pair, "textured-box": _textured_box, "faceted-sphere": _faceted_sphere}


def synth_scene(
    kind: str,
    seed: int = 0,
    size: int = 256,
    omega=None,
    n_views=None,
    coarse_blur: float = 0.0,
) -> SynthScene:
    """Build a synthetic scene: mesh, textured training ring, elevated ground truth, coarse renders.

    Coarse renders are the ground truth at the elevated cameras, blurred by a
    seeded Gaussian of roughly ``coarse_blur`` pixels when that is positive.
    """
    if kind not in _BUILDERS:
        raise ValidationError(f"unknown scene kind {kind!r}; expected one of {', '.join(KINDS)}")
    mesh, surfaces, layout = _BUILDERS[kind]()
    omega = layout["omega"] if omega is None else float(omega)
    n = layout["n"] if n_views is None else int(n_views)
    texture = Texture.random(rng_for(seed, f"texture/{kind}"), int(surfaces.max()) + 1)
    intr = Intrinsics.from_fov(size, size, layout["fov"])
    center = mesh.bbox_center()

    cams = ring_views(n, layout["radius"], 0.0, intr, center=center, azimuth_span_deg=layout["span"])
    train, depths = [], {}
    for cam in cams:
        img, depth = render(mesh, surfaces, texture, cam)
        train.append(with_image(cam, img, depth.valid))
        depths[cam.id] = depth

    blur_rng = rng_for(seed, "coarse-blur")
    augmented, coarse, gt = [], {}, {}
    for cam in cams:
        aug = elevate_view(cam, center, omega, view_id=augmented_id(cam.id))
        img, depth = render(mesh, surfaces, texture, aug)
        augmented.append(with_image(aug, img))
        depths[aug.id] = depth
        gt[aug.id] = img
        sigma = coarse_blur * blur_rng.uniform(0.75, 1.25) if coarse_blur > 0 else 0.0
        coarse[aug.id] = gaussian_filter(img, sigma=(sigma, sigma, 0)) if sigma > 0 else img.copy()

    dataset = Dataset(train, mesh, coarse, center, ground_truth=gt)
    return SynthScene(kind, int(seed), omega, dataset, augmented, depths)
