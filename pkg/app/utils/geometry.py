from typing import Sequence, Tuple

import numpy as np

from app.config import POLYGON_TOL_M

Point3 = Tuple[float, float, float]
Point2 = Tuple[float, float]


def as_point(p: Sequence[float]) -> np.ndarray:
    return np.asarray(p, dtype=float)


def newell_normal(vertices: np.ndarray) -> np.ndarray:
    """Unnormalized polygon normal, right-handed with respect to vertex order."""
    v = np.asarray(vertices, dtype=float)
    nxt = np.roll(v, -1, axis=0)
    return np.array([
        np.sum((v[:, 1] - nxt[:, 1]) * (v[:, 2] + nxt[:, 2])),
        np.sum((v[:, 2] - nxt[:, 2]) * (v[:, 0] + nxt[:, 0])),
        np.sum((v[:, 0] - nxt[:, 0]) * (v[:, 1] + nxt[:, 1])),
    ])


def planarity_error(vertices: np.ndarray) -> float:
    v = np.asarray(vertices, dtype=float)
    n = newell_normal(v)
    norm = np.linalg.norm(n)
    if norm == 0.0:
        return float("inf")
    n = n / norm
    centroid = v.mean(axis=0)
    return float(np.max(np.abs((v - centroid) @ n)))


def is_convex(vertices: np.ndarray, tol: float = POLYGON_TOL_M) -> bool:
    v = np.asarray(vertices, dtype=float)
    n = newell_normal(v)
    norm = np.linalg.norm(n)
    if norm == 0.0 or len(v) < 3:
        return False
    n = n / norm
    edges = np.roll(v, -1, axis=0) - v
    turns = np.cross(edges, np.roll(edges, -1, axis=0)) @ n
    return bool(np.all(turns >= -tol))


def mirror_point(p: np.ndarray, normal: np.ndarray, offset) -> np.ndarray:
    """Image of p across the plane normal . x = offset; unit normals, (3,) or batched (M, 3)."""
    normal = np.asarray(normal, dtype=float)
    distance = np.asarray(normal @ p - offset)
    return p - 2.0 * distance[..., None] * normal


def points_in_convex_polygons(
    points: np.ndarray,
    polygons: np.ndarray,
    normals: np.ndarray,
    tol: float = POLYGON_TOL_M,
) -> np.ndarray:
    """Inclusion test of N coplanar points against N padded convex polygons.

    Polygons are (N, V, 3) with short polygons padded by repeating their last
    vertex; the resulting zero-length edges never reject a point.
    """
    nxt = np.roll(polygons, -1, axis=1)
    edges = nxt - polygons
    rel = points[:, None, :] - polygons
    side = np.einsum("nvk,nk->nv", np.cross(edges, rel), normals)
    lengths = np.linalg.norm(edges, axis=2)
    return np.all(side >= -tol * lengths, axis=1)


def segments_hit_boxes(
    starts: np.ndarray,
    ends: np.ndarray,
    centers: np.ndarray,
    half_extents: np.ndarray,
    headings: np.ndarray,
) -> np.ndarray:
    """Slab test of N segments against M z-aligned oriented boxes, (N, M) bool."""
    if len(centers) == 0 or len(starts) == 0:
        return np.zeros((len(starts), len(centers)), dtype=bool)
    cos_h = np.cos(headings)[None, :]
    sin_h = np.sin(headings)[None, :]

    rel = starts[:, None, :] - centers[None, :, :]
    d = (ends - starts)[:, None, :]

    def to_local(v):
        x = cos_h * v[..., 0] + sin_h * v[..., 1]
        y = -sin_h * v[..., 0] + cos_h * v[..., 1]
        return np.stack([x, y, np.broadcast_to(v[..., 2], x.shape)], axis=-1)

    a = to_local(rel)
    dl = to_local(np.broadcast_to(d, rel.shape))
    half = np.broadcast_to(half_extents[None, :, :], a.shape)

    parallel = np.abs(dl) < 1e-15
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (-half - a) / dl
        t2 = (half - a) / dl
    lo = np.where(parallel, -np.inf, np.minimum(t1, t2))
    hi = np.where(parallel, np.inf, np.maximum(t1, t2))
    outside_slab = parallel & (np.abs(a) > half)

    t_enter = np.max(lo, axis=-1)
    t_exit = np.min(hi, axis=-1)
    miss = np.any(outside_slab, axis=-1)
    return (~miss) & (t_enter <= t_exit) & (t_exit > 0.0) & (t_enter < 1.0)
