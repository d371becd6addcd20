"""Command-line interface: ``evs <command> ...``.

Exit codes: 0 success, 2 validation error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .blend import BlendConfig, refine_prior
from .errors import AssetError, EvsError, MissingAsset, ValidationError
from .geometry import DEFAULT_UP, split_disparity
from .io import read_cameras, read_image, read_obj, write_json, write_pfm, write_png
from .objective import image_metrics, mean_metrics
from .pipeline.dataset import Dataset, default_center, load_dataset, make_evs_split
from .pipeline.priors import PipelineConfig, run_priors
from .pipeline.synth import KINDS, synth_scene
from .raster import rasterize_depth

log = logging.getLogger("evs")


def _vec3(text: str) -> np.ndarray:
    try:
        vals = [float(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x,y,z but got {text!r}") from None
    if len(vals) != 3:
        raise argparse.ArgumentTypeError(f"expected 3 comma-separated numbers, got {text!r}")
    return np.array(vals)


def _add_frame_args(p):
    p.add_argument("--center", type=_vec3, help="scene center x,y,z (default: mesh bbox center or optical-axis focus)")
    p.add_argument("--up", type=_vec3, default=np.array(DEFAULT_UP), help="up axis x,y,z (default 0,0,1)")


def cmd_synth(args):
    scene = synth_scene(args.kind, args.seed, size=args.size, omega=args.omega, coarse_blur=args.coarse_blur)
    cams = scene.export(args.out)
    print(cams)


def cmd_split(args):
    views = read_cameras(args.cameras, load_images=False)
    mesh = read_obj(args.mesh) if args.mesh else None
    ds = Dataset(views, mesh, center=args.center, up=args.up)
    train, test = make_evs_split(ds, args.n_train)
    by_id = {v.id: v for v in views}
    disparity = split_disparity([by_id[i] for i in train], [by_id[i] for i in test], ds.center, ds.up)
    print(json.dumps({"train": train, "test": test, "disparity": disparity}, indent=2))


def cmd_disparity(args):
    train = read_cameras(args.train, load_images=False)
    test = read_cameras(args.test, load_images=False)
    center = args.center if args.center is not None else default_center(train + test)
    print(f"{split_disparity(train, test, center, args.up):.6f}")


def cmd_depth(args):
    views = read_cameras(args.cameras, load_images=False)
    mesh = read_obj(args.mesh)
    for v in views:
        write_pfm(Path(args.out) / f"{v.id}.pfm", rasterize_depth(mesh, v))
    print(f"wrote {len(views)} depth maps to {args.out}")


def cmd_priors(args):
    cfg = PipelineConfig.load(
        args.config,
        omega=args.omega,
        xi=args.xi,
        w_h=args.wh,
        w_l=args.wl,
        lambda_photo=args.lambda_photo,
        seed=args.seed,
    )
    if args.mesh is None and args.depth is None:
        raise ValidationError("either --mesh or --depth is required")
    ds = load_dataset(
        args.cameras, args.mesh, args.coarse, depth_dir=args.depth, gt_dir=args.gt, center=args.center, up=args.up
    )
    results = run_priors(ds, cfg, out_dir=args.out)
    print(f"wrote {len(results)} enhanced view priors to {args.out}")


def cmd_refine(args):
    prior = read_image(args.prior)
    coarse = read_image(args.coarse)
    write_png(args.out, refine_prior(prior, coarse, BlendConfig(args.wh, args.wl)))


def cmd_eval(args):
    pred_dir, gt_dir = Path(args.pred), Path(args.gt)
    if not gt_dir.is_dir() or not pred_dir.is_dir():
        raise MissingAsset([d for d in (pred_dir, gt_dir) if not d.is_dir()])
    records, missing = [], []
    for gt_path in sorted(gt_dir.glob("*.png")):
        stem = gt_path.name[: -len(".png")]
        candidates = [pred_dir / f"{stem}.enhanced.png", pred_dir / f"{stem}.png"]
        pred_path = next((c for c in candidates if c.exists()), None)
        if pred_path is None:
            missing.append(candidates[0])
            continue
        rec = {"view_id": stem}
        rec.update(image_metrics(read_image(pred_path), read_image(gt_path), args.lambda_photo))
        records.append(rec)
    if missing:
        raise MissingAsset(missing)
    report = {"views": records, "mean": mean_metrics(records) if records else {}}
    write_json(args.report, report)
    print(json.dumps(report["mean"]))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evs", description="Enhanced view priors for extrapolated view synthesis")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic test scene")
    p.add_argument("--kind", choices=KINDS, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--omega", type=float, help="elevation of the ground-truth views in degrees")
    p.add_argument("--coarse-blur", type=float, default=0.0, help="Gaussian blur sigma (px) applied to coarse renders")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("split", help="lowest-pitch training / testing split")
    p.add_argument("--cameras", required=True)
    p.add_argument("--n-train", type=int, required=True)
    p.add_argument("--mesh")
    _add_frame_args(p)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("disparity", help="average pitch difference between two camera sets")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    _add_frame_args(p)
    p.set_defaults(func=cmd_disparity)

    p = sub.add_parser("depth", help="rasterize mesh depth maps (PFM)")
    p.add_argument("--cameras", required=True)
    p.add_argument("--mesh", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_depth)

    p = sub.add_parser("priors", help="generate enhanced view priors")
    p.add_argument("--cameras", required=True)
    p.add_argument("--mesh")
    p.add_argument("--coarse", required=True, help="directory of <augmented id>.png coarse renders")
    p.add_argument("--omega", type=float, help="elevation in degrees (required here or in --config)")
    p.add_argument("--xi", type=float, help="reverse-reprojection threshold in pixels (default 1)")
    p.add_argument("--wh", type=float)
    p.add_argument("--wl", type=float)
    p.add_argument("--lambda-photo", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--config", help="TOML file with PipelineConfig keys; flags override it")
    p.add_argument("--depth", help="directory of <view id>.pfm depth maps overriding mesh rasterization")
    p.add_argument("--gt", help="directory of <augmented id>.png ground truth for metrics")
    p.add_argument("--out", required=True)
    _add_frame_args(p)
    p.set_defaults(func=cmd_priors)

    p = sub.add_parser("refine", help="frequency-blend one prior with one coarse render")
    p.add_argument("--prior", required=True)
    p.add_argument("--coarse", required=True)
    p.add_argument("--wh", type=float, default=0.8)
    p.add_argument("--wl", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("eval", help="PSNR / SSIM / L1 report of predictions against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--lambda-photo", type=float, default=0.8)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (AssetError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except EvsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
