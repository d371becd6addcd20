"""End-to-end enhanced view prior generation."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from ..blend import BlendConfig, refine_prior
from ..errors import MissingAsset, MissingCoarse, ParseError, ValidationError
from ..geometry import CameraView, elevate_view, nearest_view
from ..io import camera_record, write_cameras, write_json, write_png
from ..objective import (
    LossWeights,
    NoiseSchedule,
    ScoreModel,
    appearance_loss,
    geometry_loss,
    image_metrics,
    mean_metrics,
)
from ..raster import DepthMap, rasterize_depth
from ..warp import OcclusionConfig, ViewPrior, generate_view_prior
from .dataset import Dataset, augmented_id
from .seeds import rng_for

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineConfig:
    omega: float
    xi: float = 1.0
    w_h: float = 0.8
    w_l: float = 0.5
    lambda_photo: float = 0.8
    lambda_a: float = 1e-7
    lambda_g: float = 0.1
    beta_start: float = 1e-4
    beta_end: float = 0.02
    timesteps: int = 1000
    tau: int = 500
    seed: int = 0
    literal_reverse: bool = False
    literal_diffusion: bool = True

    def __post_init__(self):
        if not abs(self.omega) < 90:
            raise ValidationError(f"|omega| must be below 90 degrees, got {self.omega}")
        # component constructors enforce their own invariants
        self.occlusion, self.blend, self.weights
        if not 1 <= self.tau <= self.timesteps:
            raise ValidationError(f"tau must lie in [1, {self.timesteps}]")

    @property
    def occlusion(self) -> OcclusionConfig:
        return OcclusionConfig(self.xi, self.literal_reverse)

    @property
    def blend(self) -> BlendConfig:
        return BlendConfig(self.w_h, self.w_l)

    @property
    def weights(self) -> LossWeights:
        return LossWeights(self.lambda_photo, self.lambda_a, self.lambda_g)

    def schedule(self) -> NoiseSchedule:
        return NoiseSchedule.linear(self.beta_start, self.beta_end, self.timesteps)

    @classmethod
    def load(cls, path=None, **overrides) -> "PipelineConfig":
        """Values from a TOML file (top-level keys named like the fields), then ``overrides``."""
        values = {}
        if path is not None:
            path = Path(path)
            try:
                values = tomllib.loads(path.read_text())
            except FileNotFoundError as exc:
                raise MissingAsset([path]) from exc
            except tomllib.TOMLDecodeError as exc:
                raise ParseError(path, "toml", str(exc)) from None
            known = {f.name for f in fields(cls)}
            unknown = sorted(set(values) - known)
            if unknown:
                raise ParseError(path, unknown[0], "unknown configuration key")
        values.update({k: v for k, v in overrides.items() if v is not None})
        if "omega" not in values:
            raise ValidationError("omega is required (no default elevation)")
        return cls(**values)


@dataclass(eq=False)
class PriorResult:
    view: CameraView
    source_id: str
    prior: ViewPrior
    enhanced: np.ndarray
    metrics: dict


def _depth(dataset: Dataset, view: CameraView) -> DepthMap:
    if view.id in dataset.depth_maps:
        return dataset.depth_maps[view.id]
    if dataset.mesh is None:
        raise MissingAsset([f"depth for view {view.id} (no mesh and no depth map)"])
    return rasterize_depth(dataset.mesh, view)


def augmented_views(dataset: Dataset, omega: float) -> list[tuple[CameraView, CameraView]]:
    """One elevated view per training view, paired with its source."""
    return [
        (elevate_view(v, dataset.center, omega, dataset.up, view_id=augmented_id(v.id)), v)
        for v in dataset.views
    ]


def run_priors(
    dataset: Dataset,
    cfg: PipelineConfig,
    out_dir=None,
    score_model: Optional[ScoreModel] = None,
) -> dict[str, PriorResult]:
    """Elevate, rasterize, warp with occlusion test, refine; optionally write outputs.

    Every augmented view must have a coarse render, checked before anything is
    written.  Metrics against ground truth are included when the dataset has it.
    """
    pairs = augmented_views(dataset, cfg.omega)
    for aug, _ in pairs:
        if aug.id not in dataset.coarse_renders:
            raise MissingCoarse(aug.id)
    for v in dataset.views:
        if v.image is None:
            raise ValidationError(f"training view {v.id} has no image")

    train_depths: dict[str, DepthMap] = {}
    results: dict[str, PriorResult] = {}
    for aug, _ in pairs:
        source = nearest_view(aug, dataset.views, dataset.center)
        if source.id not in train_depths:
            train_depths[source.id] = _depth(dataset, source)
        aug_depth = _depth(dataset, aug)
        coarse = dataset.coarse_renders[aug.id]
        prior = generate_view_prior(aug, aug_depth, source, train_depths[source.id], coarse, cfg.occlusion)
        enhanced = refine_prior(prior.image, coarse, cfg.blend)

        metrics = {"view_id": aug.id, "source_id": source.id, "provenance": prior.counts()}
        gt = dataset.ground_truth.get(aug.id)
        if gt is not None:
            metrics.update(image_metrics(enhanced, gt, cfg.lambda_photo))
        if aug.id in dataset.depth_maps and dataset.mesh is not None:
            metrics["l_g"] = geometry_loss(dataset.depth_maps[aug.id], rasterize_depth(dataset.mesh, aug))
        if score_model is not None:
            noise = rng_for(cfg.seed, f"appearance/{aug.id}").standard_normal(coarse.shape)
            metrics["l_a"] = appearance_loss(
                coarse, cfg.tau, noise, score_model, cfg.schedule(), literal=cfg.literal_diffusion
            )
        results[aug.id] = PriorResult(aug, source.id, prior, enhanced, metrics)
        logger.info("prior %s from %s: %s", aug.id, source.id, metrics["provenance"])

    if out_dir is not None:
        write_outputs(results, cfg, out_dir)
    return results


def write_outputs(results: dict[str, PriorResult], cfg: PipelineConfig, out_dir) -> None:
    out = Path(out_dir)
    for key, r in sorted(results.items()):
        write_png(out / f"{key}.prior.png", r.prior.image)
        write_png(out / f"{key}.enhanced.png", r.enhanced)
        write_png(out / f"{key}.provenance.png", r.prior.provenance_gray())
    write_cameras(out / "augmented_cameras.json", [camera_record(r.view) for _, r in sorted(results.items())])
    records = [r.metrics for _, r in sorted(results.items())]
    scored = [{k: v for k, v in rec.items() if isinstance(v, float)} for rec in records]
    write_json(
        out / "metrics.json",
        {"config": asdict(cfg), "views": records, "mean": mean_metrics(scored) if any(scored) else {}},
    )
