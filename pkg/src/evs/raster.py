"""Triangle meshes, z-buffer depth rasterization and a ray-cast reference."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, ValidationError
from .geometry import CameraView, Intrinsics, Pose

NEAR = 1e-6


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=np.float64).reshape(-1, 3)
        f = np.array(self.triangles, dtype=np.int64).reshape(-1, 3)
        if not np.all(np.isfinite(v)):
            raise ValidationError("mesh has non-finite vertex coordinates")
        if f.size:
            if f.min() < 0 or f.max() >= len(v):
                raise ValidationError("triangle index out of range")
            if np.any((f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])):
                raise ValidationError("triangle with repeated vertex index")
        v.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", f)

    def __len__(self):
        return len(self.triangles)

    @property
    def corners(self) -> np.ndarray:
        """(M, 3, 3) array of triangle vertex positions."""
        return self.vertices[self.triangles]

    def bbox_center(self) -> np.ndarray:
        if len(self.vertices) == 0:
            raise ValidationError("empty mesh has no bounding box")
        return 0.5 * (self.vertices.min(axis=0) + self.vertices.max(axis=0))

    @classmethod
    def from_corners(cls, corners) -> "TriangleMesh":
        corners = np.asarray(corners, dtype=np.float64).reshape(-1, 3, 3)
        return cls(corners.reshape(-1, 3), np.arange(3 * len(corners)).reshape(-1, 3))

    @classmethod
    def concat(cls, meshes) -> "TriangleMesh":
        verts, tris, offset = [], [], 0
        for m in meshes:
            verts.append(m.vertices)
            tris.append(m.triangles + offset)
            offset += len(m.vertices)
        return cls(np.concatenate(verts), np.concatenate(tris))

    @classmethod
    def quad(cls, origin, edge_u, edge_v) -> "TriangleMesh":
        """Parallelogram with corners origin, origin+edge_u, origin+edge_u+edge_v, origin+edge_v."""
        o, a, b = (np.asarray(x, dtype=np.float64) for x in (origin, edge_u, edge_v))
        return cls(np.stack([o, o + a, o + a + b, o + b]), [[0, 1, 2], [0, 2, 3]])

    @classmethod
    def box(cls, lo, hi) -> "TriangleMesh":
        lo, hi = np.asarray(lo, dtype=np.float64), np.asarray(hi, dtype=np.float64)
        corners = np.array([[x, y, z] for x in (lo[0], hi[0]) for y in (lo[1], hi[1]) for z in (lo[2], hi[2])])
        # corner index bits: x=4, y=2, z=1
        faces = [
            (0, 1, 3, 2), (4, 6, 7, 5),  # x = lo, x = hi
            (0, 4, 5, 1), (2, 3, 7, 6),  # y = lo, y = hi
            (0, 2, 6, 4), (1, 5, 7, 3),  # z = lo, z = hi
        ]
        tris = [t for a, b, c, d in faces for t in ((a, b, c), (a, c, d))]
        return cls(corners, tris)

    @classmethod
    def icosphere(cls, subdivisions: int = 2, radius: float = 1.0, center=(0.0, 0.0, 0.0)) -> "TriangleMesh":
        """Geodesic sphere with 20 * 4**subdivisions faces and vertices on the sphere."""
        g = (1 + 5 ** 0.5) / 2
        verts = [
            (-1, g, 0), (1, g, 0), (-1, -g, 0), (1, -g, 0),
            (0, -1, g), (0, 1, g), (0, -1, -g), (0, 1, -g),
            (g, 0, -1), (g, 0, 1), (-g, 0, -1), (-g, 0, 1),
        ]
        faces = [
            (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
            (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
            (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
            (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
        ]
        verts = [np.array(v, dtype=np.float64) / np.linalg.norm(v) for v in verts]
        for _ in range(subdivisions):
            cache = {}

            def midpoint(i, j):
                key = (min(i, j), max(i, j))
                if key not in cache:
                    m = verts[i] + verts[j]
                    verts.append(m / np.linalg.norm(m))
                    cache[key] = len(verts) - 1
                return cache[key]

            new_faces = []
            for a, b, c in faces:
                ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
                new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
            faces = new_faces
        v = np.asarray(center, dtype=np.float64) + radius * np.stack(verts)
        return cls(v, faces)


@dataclass(frozen=True, eq=False)
class DepthMap:
    """Camera-space z per pixel; invalid pixels hold +inf."""

    values: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        valid = np.array(self.valid, dtype=bool)
        if values.ndim != 2 or values.shape != valid.shape:
            raise DimensionMismatch(f"depth {values.shape} and validity {valid.shape} disagree")
        if np.any(valid & ~(np.isfinite(values) & (values > 0))):
            raise ValidationError("valid depths must be positive and finite")
        values[~valid] = np.inf
        values.setflags(write=False)
        valid.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "valid", valid)

    @property
    def shape(self):
        return self.values.shape

    @classmethod
    def from_array(cls, values) -> "DepthMap":
        """Valid wherever the value is finite and positive."""
        values = np.asarray(values, dtype=np.float64)
        return cls(values, np.isfinite(values) & (values > 0))

    @classmethod
    def empty(cls, shape) -> "DepthMap":
        return cls(np.full(shape, np.inf), np.zeros(shape, dtype=bool))


def _clip_near(tri, near=NEAR):
    """Clip a camera-space triangle against z >= near; returns a list of triangles."""
    poly = []
    for i in range(3):
        a, b = tri[i], tri[(i + 1) % 3]
        a_in, b_in = a[2] >= near, b[2] >= near
        if a_in:
            poly.append(a)
        if a_in != b_in:
            s = (near - a[2]) / (b[2] - a[2])
            p = a + s * (b - a)
            p[2] = near
            poly.append(p)
    return [np.stack([poly[0], poly[k], poly[k + 1]]) for k in range(1, len(poly) - 1)]


def _raster_triangle(zbuf, tri, K):
    """Z-buffer one camera-space triangle (all z >= near) into ``zbuf`` in place."""
    H, W = zbuf.shape
    fx, fy, cx, cy = K[0, 0], K[1, 1], K[0, 2], K[1, 2]
    z = tri[:, 2]
    u = fx * tri[:, 0] / z + cx
    v = fy * tri[:, 1] / z + cy
    area = (u[1] - u[0]) * (v[2] - v[0]) - (v[1] - v[0]) * (u[2] - u[0])
    if area == 0 or not np.isfinite(area):
        return
    if area < 0:
        u, v, z = u[[0, 2, 1]], v[[0, 2, 1]], z[[0, 2, 1]]
        area = -area
    u0 = max(int(np.ceil(u.min())), 0)
    u1 = min(int(np.floor(u.max())), W - 1)
    v0 = max(int(np.ceil(v.min())), 0)
    v1 = min(int(np.floor(v.max())), H - 1)
    if u0 > u1 or v0 > v1:
        return
    px, py = np.meshgrid(np.arange(u0, u1 + 1, dtype=np.float64), np.arange(v0, v1 + 1, dtype=np.float64))
    inside = np.ones(px.shape, dtype=bool)
    weights = []
    # edge k is opposite vertex k
    for a, b in ((1, 2), (2, 0), (0, 1)):
        dx, dy = u[b] - u[a], v[b] - v[a]
        w = dx * (py - v[a]) - dy * (px - u[a])
        top_left = (dy == 0 and dx > 0) or dy < 0
        inside &= (w > 0) | ((w == 0) if top_left else False)
        weights.append(w)
    if not inside.any():
        return
    inv_z = (weights[0] / z[0] + weights[1] / z[1] + weights[2] / z[2]) / area
    depth = np.where(inside, 1.0 / np.where(inside, inv_z, 1.0), np.inf)
    region = zbuf[v0 : v1 + 1, u0 : u1 + 1]
    np.minimum(region, depth, out=region)


def _camera_space(mesh: TriangleMesh, pose: Pose) -> np.ndarray:
    if len(mesh) == 0:
        return np.zeros((0, 3, 3))
    return pose.world_to_camera(mesh.vertices)[mesh.triangles]


def rasterize_depth(mesh: TriangleMesh, view: CameraView) -> DepthMap:
    """Per-pixel minimum camera-space z over all covering triangles (no culling)."""
    H, W = view.intrinsics.shape
    zbuf = np.full((H, W), np.inf)
    K = view.intrinsics.K
    for tri in _camera_space(mesh, view.pose):
        z = tri[:, 2]
        if np.all(z >= NEAR):
            _raster_triangle(zbuf, tri, K)
        elif np.any(z >= NEAR):
            for piece in _clip_near(tri):
                _raster_triangle(zbuf, piece, K)
    return DepthMap(zbuf, np.isfinite(zbuf))


def pixel_grid(intrinsics: Intrinsics) -> np.ndarray:
    """(H, W, 2) array of (u, v) pixel-center coordinates."""
    H, W = intrinsics.shape
    v, u = np.mgrid[0:H, 0:W].astype(np.float64)
    return np.stack([u, v], axis=-1)


def raycast(mesh: TriangleMesh, intrinsics: Intrinsics, pose: Pose, pixels, cull: bool = True):
    """Nearest Moller-Trumbore hit along the ray through each (u, v) in ``pixels``.

    Returns ``(depth, triangle_index)``; misses have depth +inf and index -1.
    Because ray directions have unit z, the ray parameter equals camera-space depth.
    With ``cull`` the per-triangle test is restricted to pixels inside the triangle's
    projected bounding box (expanded by one pixel); this never changes the result.
    """
    pixels = np.asarray(pixels, dtype=np.float64)
    shape = pixels.shape[:-1]
    pts = pixels.reshape(-1, 2)
    n = len(pts)
    dirs = np.stack(
        [(pts[:, 0] - intrinsics.cx) / intrinsics.fx, (pts[:, 1] - intrinsics.cy) / intrinsics.fy, np.ones(n)],
        axis=1,
    )
    best = np.full(n, np.inf)
    best_idx = np.full(n, -1, dtype=np.int64)
    K = intrinsics.K
    for k, (p0, p1, p2) in enumerate(_camera_space(mesh, pose)):
        sel = slice(None)
        if cull and min(p0[2], p1[2], p2[2]) >= NEAR:
            tri = np.stack([p0, p1, p2])
            u = K[0, 0] * tri[:, 0] / tri[:, 2] + K[0, 2]
            v = K[1, 1] * tri[:, 1] / tri[:, 2] + K[1, 2]
            sel = np.flatnonzero(
                (pts[:, 0] >= u.min() - 1) & (pts[:, 0] <= u.max() + 1)
                & (pts[:, 1] >= v.min() - 1) & (pts[:, 1] <= v.max() + 1)
            )
            if sel.size == 0:
                continue
        d = dirs[sel]
        e1, e2 = p1 - p0, p2 - p0
        pvec = np.cross(d, e2)
        det = pvec @ e1
        scale = np.linalg.norm(e1) * np.linalg.norm(e2) * np.linalg.norm(d, axis=1)
        ok = np.abs(det) > 1e-12 * scale
        inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
        tvec = -p0
        a = (pvec @ tvec) * inv
        qvec = np.cross(tvec, e1)
        b = (d @ qvec) * inv
        t = (e2 @ qvec) * inv
        hit = ok & (a >= 0) & (b >= 0) & (a + b <= 1) & (t >= NEAR)
        cur = best[sel]
        closer = hit & (t < cur)
        if np.any(closer):
            idx = np.arange(n)[sel][closer]
            best[idx] = t[closer]
            best_idx[idx] = k
    return best.reshape(shape), best_idx.reshape(shape)


def raycast_depth(mesh: TriangleMesh, view: CameraView, cull: bool = True) -> DepthMap:
    """Reference depth map: exact nearest intersection through every pixel center."""
    depth, _ = raycast(mesh, view.intrinsics, view.pose, pixel_grid(view.intrinsics), cull=cull)
    return DepthMap(depth, np.isfinite(depth))
