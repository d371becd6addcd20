"""File formats: camera JSON, Wavefront OBJ, PFM depth maps, 8-bit PNG images."""

from __future__ import annotations

import json
import math
import os
import re
import tempfile
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
from PIL import Image

from .errors import AssetError, MissingAsset, ParseError, ValidationError
from .geometry import CameraView, Intrinsics, Pose
from .raster import DepthMap, TriangleMesh

# ---------------------------------------------------------------------------
# atomic writes
# ---------------------------------------------------------------------------


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.generic):
        return _json_safe(obj.item())
    return obj


def write_json(path, obj) -> None:
    """Deterministic JSON; non-finite floats become the strings "inf", "-inf", "nan"."""
    text = json.dumps(_json_safe(obj), indent=2, sort_keys=True) + "\n"
    atomic_write_bytes(path, text.encode())


# ---------------------------------------------------------------------------
# PNG
# ---------------------------------------------------------------------------


def to_uint8(image) -> np.ndarray:
    return np.floor(np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def _png_bytes(arr: np.ndarray) -> bytes:
    import io as _io

    buf = _io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    return buf.getvalue()


def write_png(path, image) -> None:
    """RGB image in [0, 1] (H, W, 3) or 8-bit gray (H, W) uint8."""
    arr = np.asarray(image)
    if arr.dtype != np.uint8:
        arr = to_uint8(arr)
    atomic_write_bytes(path, _png_bytes(arr))


def read_image(path) -> np.ndarray:
    """RGB float image in [0, 1]."""
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.float64)
    except FileNotFoundError as exc:
        raise MissingAsset([path]) from exc
    except OSError as exc:
        raise AssetError(f"{path}: cannot decode image: {exc}") from exc
    return arr / 255.0


def read_mask(path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("L"))
    except FileNotFoundError as exc:
        raise MissingAsset([path]) from exc
    except OSError as exc:
        raise AssetError(f"{path}: cannot decode mask: {exc}") from exc
    return arr >= 128


# ---------------------------------------------------------------------------
# PFM
# ---------------------------------------------------------------------------


def write_pfm(path, depth: DepthMap) -> None:
    """Grayscale little-endian PFM; invalid pixels stored as +inf."""
    values = np.where(depth.valid, depth.values, np.inf).astype("<f4")
    H, W = values.shape
    header = f"Pf\n{W} {H}\n-1.0\n".encode("ascii")
    # PFM rows run bottom to top
    atomic_write_bytes(path, header + np.flipud(values).tobytes())


def read_pfm(path) -> np.ndarray:
    """Raw PFM contents as float64, (H, W) or (H, W, 3), top row first."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except FileNotFoundError as exc:
        raise MissingAsset([path]) from exc
    m = re.match(rb"(P[fF])\s+(\d+)\s+(\d+)\s+(\S+)\s", data)
    if not m:
        raise ParseError(path, "header", "not a PFM file")
    channels = 1 if m.group(1) == b"Pf" else 3
    W, H = int(m.group(2)), int(m.group(3))
    try:
        scale = float(m.group(4))
    except ValueError:
        raise ParseError(path, "scale", f"bad scale {m.group(4)!r}") from None
    dtype = "<f4" if scale < 0 else ">f4"
    body = data[m.end():]
    n = W * H * channels
    if len(body) < 4 * n:
        raise ParseError(path, "data", f"expected {n} floats, found {len(body) // 4}")
    arr = np.frombuffer(body[: 4 * n], dtype=dtype).astype(np.float64)
    arr = arr.reshape((H, W, channels) if channels == 3 else (H, W))
    return np.flipud(arr).copy()


def read_depth_pfm(path) -> DepthMap:
    arr = read_pfm(path)
    if arr.ndim != 2:
        raise ParseError(path, "header", "depth maps must be single-channel (Pf)")
    return DepthMap.from_array(arr)


# ---------------------------------------------------------------------------
# OBJ
# ---------------------------------------------------------------------------


def read_obj(path) -> TriangleMesh:
    """Vertices and faces only; polygons are fan-triangulated, negative indices honoured."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except FileNotFoundError as exc:
        raise MissingAsset([path]) from exc
    verts, tris = [], []
    for lineno, line in enumerate(lines, 1):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        try:
            if parts[0] == "v":
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                idx = []
                for tok in parts[1:]:
                    i = int(tok.split("/")[0])
                    idx.append(i - 1 if i > 0 else len(verts) + i)
                if len(idx) < 3:
                    raise ValueError("face with fewer than 3 vertices")
                tris += [(idx[0], idx[k], idx[k + 1]) for k in range(1, len(idx) - 1)]
        except (ValueError, IndexError) as exc:
            raise ParseError(path, f"line {lineno}", str(exc)) from None
    try:
        return TriangleMesh(np.array(verts, dtype=np.float64).reshape(-1, 3), np.array(tris, dtype=np.int64).reshape(-1, 3))
    except ValidationError as exc:
        raise ParseError(path, "faces", str(exc)) from None


def write_obj(path, mesh: TriangleMesh) -> None:
    lines = [f"v {x!r} {y!r} {z!r}" for x, y, z in mesh.vertices.tolist()]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.triangles.tolist()]
    atomic_write_bytes(path, ("\n".join(lines) + "\n").encode())


# ---------------------------------------------------------------------------
# cameras
# ---------------------------------------------------------------------------

_REQUIRED = ("id", "fx", "fy", "cx", "cy", "width", "height", "R", "t")


def camera_record(view: CameraView, image_path: Optional[str] = None, mask_path: Optional[str] = None) -> dict:
    k = view.intrinsics
    rec = {
        "id": view.id,
        "fx": float(k.fx),
        "fy": float(k.fy),
        "cx": float(k.cx),
        "cy": float(k.cy),
        "width": int(k.width),
        "height": int(k.height),
        "R": [float(x) for x in view.pose.R.reshape(-1)],
        "t": [float(x) for x in view.pose.t],
    }
    if image_path is not None:
        rec["image_path"] = image_path
    if mask_path is not None:
        rec["mask_path"] = mask_path
    return rec


def write_cameras(path, records: Iterable[dict]) -> None:
    write_json(path, list(records))


def _parse_record(path, i, rec) -> tuple[str, Intrinsics, Pose]:
    where = f"[{i}]"
    if not isinstance(rec, dict):
        raise ParseError(path, where, "camera record must be an object")
    vid = rec.get("id", where)
    where = f"view {vid!r}"
    for key in _REQUIRED:
        if key not in rec:
            raise ParseError(path, f"{where}.{key}", "missing field")
    try:
        intr = Intrinsics(
            float(rec["fx"]), float(rec["fy"]), float(rec["cx"]), float(rec["cy"]),
            int(rec["width"]), int(rec["height"]),
        )
    except (TypeError, ValueError) as exc:
        raise ParseError(path, f"{where}.intrinsics", str(exc)) from None
    try:
        R = np.array(rec["R"], dtype=np.float64)
        t = np.array(rec["t"], dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ParseError(path, f"{where}.R/t", str(exc)) from None
    if R.size != 9:
        raise ParseError(path, f"{where}.R", f"expected 9 numbers, got {R.size}")
    if t.size != 3:
        raise ParseError(path, f"{where}.t", f"expected 3 numbers, got {t.size}")
    try:
        pose = Pose(R.reshape(3, 3), t)
    except ValidationError as exc:
        raise ParseError(path, f"{where}.R", str(exc)) from None
    return str(vid), intr, pose


def read_cameras(path, load_images: bool = True) -> list[CameraView]:
    """Parse a camera file; image and mask paths resolve relative to the file.

    Every unresolved asset is collected before raising ``MissingAsset``.
    """
    path = Path(path)
    try:
        records = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise MissingAsset([path]) from exc
    except json.JSONDecodeError as exc:
        raise ParseError(path, f"line {exc.lineno}", exc.msg) from None
    if not isinstance(records, list):
        raise ParseError(path, "root", "expected a JSON array of camera records")
    parsed, seen = [], set()
    for i, rec in enumerate(records):
        vid, intr, pose = _parse_record(path, i, rec)
        if vid in seen:
            raise ParseError(path, f"view {vid!r}.id", "duplicate view id")
        seen.add(vid)
        parsed.append((vid, intr, pose, rec))

    missing = []
    for _, _, _, rec in parsed:
        for key in ("image_path", "mask_path"):
            p = rec.get(key)
            if load_images and p is not None and not (path.parent / p).exists():
                missing.append(path.parent / p)
    if missing:
        raise MissingAsset(missing)

    views = []
    for vid, intr, pose, rec in parsed:
        image = mask = None
        if load_images and rec.get("image_path") is not None:
            image = read_image(path.parent / rec["image_path"])
        if load_images and rec.get("mask_path") is not None:
            mask = read_mask(path.parent / rec["mask_path"])
            if image is not None and mask.shape == image.shape[:2]:
                image = image * mask[:, :, None]
        try:
            views.append(CameraView(vid, intr, pose, image, mask))
        except ValidationError as exc:
            raise ParseError(path, f"view {vid!r}.image_path", str(exc)) from None
    return views
