"""The 3D world: obstacles, materials, base stations, PoIs and forklifts.

Domain objects are frozen dataclasses holding plain tuples so scenes compare
and pickle cheaply. `Scene.geometry` compiles the static faces and edges into
numpy arrays once; all tracing queries go through it.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.config import DEFAULT_TX_POWER_DBM, POLYGON_TOL_M, SURFACE_EPS_M
from app.utils.geometry import (
    Point2,
    Point3,
    newell_normal,
    points_in_convex_polygons,
    segments_hit_boxes,
)

log = logging.getLogger("raypos.scene")


@dataclass(frozen=True)
class BandConstants:
    band: str
    relative_permittivity: float
    conductivity: float


@dataclass(frozen=True)
class Material:
    name: str
    relative_permittivity: float
    conductivity: float
    transmissive: bool = False
    thickness_m: float = 0.0
    bands: Tuple[BandConstants, ...] = ()

    def constants(self, band: Optional[str] = None) -> Tuple[float, float]:
        """(relative permittivity, conductivity) for a band, falling back to the defaults."""
        for entry in self.bands:
            if entry.band == band:
                return entry.relative_permittivity, entry.conductivity
        return self.relative_permittivity, self.conductivity


@dataclass(frozen=True)
class Obstacle:
    id: str
    faces: Tuple[Tuple[Point3, ...], ...]
    material: Material
    closed: bool = True


@dataclass(frozen=True)
class BaseStation:
    id: int
    position: Point3
    tx_power_dbm: float = DEFAULT_TX_POWER_DBM

    @property
    def xy(self) -> Point2:
        return self.position[0], self.position[1]


@dataclass(frozen=True)
class PointOfInterest:
    id: int
    ground_truth: Point3

    @property
    def xy(self) -> Point2:
        return self.ground_truth[0], self.ground_truth[1]


@dataclass(frozen=True)
class OrientedBox:
    center: Point3
    half_extents: Point3
    heading: float


@dataclass(frozen=True)
class MovingObstacle:
    id: str
    box_dimensions: Point3
    waypoints: Tuple[Point2, ...]
    speed: float
    material: Material

    @property
    def segment_lengths(self) -> List[float]:
        pts = self.waypoints
        return [math.dist(pts[i], pts[(i + 1) % len(pts)]) for i in range(len(pts))]

    @property
    def loop_length(self) -> float:
        return math.fsum(self.segment_lengths)

    @property
    def period_s(self) -> float:
        return self.loop_length / self.speed

    def pose_at(self, t: float) -> Tuple[float, float, float]:
        """(x, y, heading) after travelling speed * t along the closed polyline."""
        lengths = self.segment_lengths
        total = math.fsum(lengths)
        s = math.fmod(self.speed * t, total)
        if total - s < 1e-12 * max(total, 1.0):
            s = 0.0
        n = len(self.waypoints)
        for i, seg in enumerate(lengths):
            if s <= seg or i == n - 1:
                a = self.waypoints[i]
                b = self.waypoints[(i + 1) % n]
                frac = min(s / seg, 1.0)
                x = a[0] + frac * (b[0] - a[0])
                y = a[1] + frac * (b[1] - a[1])
                return x, y, math.atan2(b[1] - a[1], b[0] - a[0])
            s -= seg
        raise AssertionError("unreachable")


@dataclass(frozen=True)
class Bounds:
    min: Point3
    max: Point3

    def contains(self, p: Sequence[float], tol: float = 1e-9) -> bool:
        return all(lo - tol <= v <= hi + tol for v, lo, hi in zip(p, self.min, self.max))


@dataclass(frozen=True)
class Rect:
    min: Point2
    max: Point2

    def contains(self, p: Sequence[float], tol: float = 1e-9) -> bool:
        return all(lo - tol <= v <= hi + tol for v, lo, hi in zip(p[:2], self.min, self.max))

    @property
    def center(self) -> Point2:
        return (self.min[0] + self.max[0]) / 2.0, (self.min[1] + self.max[1]) / 2.0


@dataclass(frozen=True)
class Crossing:
    t: float
    face: int
    point: np.ndarray = field(compare=False)


class SceneGeometry:
    """Static faces and diffraction edges as padded numpy arrays."""

    def __init__(self, obstacles: Sequence[Obstacle], bounds: Bounds):
        polys: List[np.ndarray] = []
        self.face_labels: List[str] = []
        self.face_materials: List[Material] = []
        owner: List[int] = []
        closed: List[bool] = []
        for oi, ob in enumerate(obstacles):
            for fi, face in enumerate(ob.faces):
                polys.append(np.asarray(face, dtype=float))
                self.face_labels.append(f"{ob.id}/f{fi}")
                self.face_materials.append(ob.material)
                owner.append(oi)
                closed.append(ob.closed)

        width = max([3] + [len(p) for p in polys])
        self.vertices = np.zeros((len(polys), width, 3))
        for i, p in enumerate(polys):
            self.vertices[i, : len(p)] = p
            self.vertices[i, len(p):] = p[-1]

        normals = np.array([newell_normal(p) for p in polys]).reshape(-1, 3)
        lengths = np.linalg.norm(normals, axis=1, keepdims=True)
        self.normals = normals / np.where(lengths > 0.0, lengths, 1.0)
        self.offsets = np.einsum("fk,fk->f", self.normals, self.vertices[:, 0, :])
        self.face_obstacle = np.asarray(owner, dtype=int)
        self.closed = np.asarray(closed, dtype=bool)
        self.transmissive = np.array([m.transmissive for m in self.face_materials], dtype=bool)
        self.obstacle_ids = [ob.id for ob in obstacles]
        self._build_edges(obstacles, polys, bounds)

    @property
    def n_faces(self) -> int:
        return len(self.offsets)

    def _build_edges(self, obstacles: Sequence[Obstacle], polys: List[np.ndarray], bounds: Bounds):
        starts, ends, owners, labels = [], [], [], []
        z_planes = (bounds.min[2], bounds.max[2])
        face_base = 0
        for oi, ob in enumerate(obstacles):
            n_faces = len(ob.faces)
            if ob.closed:
                adjacency: Dict[Tuple, List[int]] = {}
                edge_no = 0
                for fi in range(n_faces):
                    poly = polys[face_base + fi]
                    for k in range(len(poly)):
                        a, b = tuple(poly[k]), tuple(poly[(k + 1) % len(poly)])
                        key = (a, b) if a <= b else (b, a)
                        adjacency.setdefault(key, []).append(face_base + fi)
                for (a, b), faces in adjacency.items():
                    if len(faces) != 2:
                        continue
                    if any(abs(a[2] - z) < 1e-9 and abs(b[2] - z) < 1e-9 for z in z_planes):
                        continue
                    f1, f2 = faces
                    centroid = polys[f2].mean(axis=0)
                    if self.normals[f1] @ centroid - self.offsets[f1] > -POLYGON_TOL_M:
                        continue  # concave or flat edge
                    starts.append(a)
                    ends.append(b)
                    owners.append(oi)
                    labels.append(f"{ob.id}/e{edge_no}")
                    edge_no += 1
            face_base += n_faces
        self.edge_start = np.asarray(starts, dtype=float).reshape(-1, 3)
        self.edge_end = np.asarray(ends, dtype=float).reshape(-1, 3)
        self.edge_obstacle = np.asarray(owners, dtype=int)
        self.edge_labels = labels

    def signed_distances(self, p: np.ndarray) -> np.ndarray:
        return self.normals @ p - self.offsets

    def crossings(self, a: np.ndarray, b: np.ndarray) -> List[Crossing]:
        """Every face crossed strictly inside segment a-b, ordered from a."""
        if self.n_faces == 0:
            return []
        d = b - a
        length = float(np.linalg.norm(d))
        if length == 0.0:
            return []
        denom = self.normals @ d
        num = self.offsets - self.normals @ a
        with np.errstate(divide="ignore", invalid="ignore"):
            t = num / denom
        eps = SURFACE_EPS_M / length
        idx = np.nonzero((np.abs(denom) > 1e-12) & (t > eps) & (t < 1.0 - eps))[0]
        if len(idx) == 0:
            return []
        pts = a + t[idx, None] * d
        inside = points_in_convex_polygons(pts, self.vertices[idx], self.normals[idx])
        hits = [Crossing(float(t[i]), int(i), pts[j]) for j, i in enumerate(idx) if inside[j]]
        hits.sort(key=lambda c: (c.t, c.face))
        return hits

    def clear_crossings(self, a: np.ndarray, b: np.ndarray) -> Optional[List[Crossing]]:
        """Transmissive crossings of segment a-b, or None when opaque geometry blocks it."""
        hits = self.crossings(a, b)
        if any(not self.transmissive[c.face] for c in hits):
            return None
        return hits


@dataclass(frozen=True)
class Scene:
    bounds: Bounds
    obstacles: Tuple[Obstacle, ...] = ()
    base_stations: Tuple[BaseStation, ...] = ()
    pois: Tuple[PointOfInterest, ...] = ()
    movers: Tuple[MovingObstacle, ...] = ()
    material_catalog: Tuple[Material, ...] = ()
    aoi: Optional[Rect] = None

    @cached_property
    def geometry(self) -> SceneGeometry:
        geo = SceneGeometry(self.obstacles, self.bounds)
        log.debug("Compiled %d faces and %d diffraction edges", geo.n_faces, len(geo.edge_labels))
        return geo

    @property
    def area_of_interest(self) -> Rect:
        if self.aoi is not None:
            return self.aoi
        xs = [bs.position[0] for bs in self.base_stations]
        ys = [bs.position[1] for bs in self.base_stations]
        return Rect((min(xs), min(ys)), (max(xs), max(ys)))

    def base_station(self, bs_id: int) -> BaseStation:
        for bs in self.base_stations:
            if bs.id == bs_id:
                return bs
        raise KeyError(bs_id)

    def poi(self, poi_id: int) -> PointOfInterest:
        for p in self.pois:
            if p.id == poi_id:
                return p
        raise KeyError(poi_id)

    def without_movers(self) -> "Scene":
        return replace(self, movers=())


def box_faces(lo: Point3, hi: Point3) -> Tuple[Tuple[Point3, ...], ...]:
    """Six faces of an axis-aligned box, counter-clockwise seen from outside."""
    x0, y0, z0 = lo
    x1, y1, z1 = hi
    return (
        ((x0, y0, z0), (x0, y1, z0), (x1, y1, z0), (x1, y0, z0)),  # -z
        ((x0, y0, z1), (x1, y0, z1), (x1, y1, z1), (x0, y1, z1)),  # +z
        ((x0, y0, z0), (x1, y0, z0), (x1, y0, z1), (x0, y0, z1)),  # -y
        ((x0, y1, z0), (x0, y1, z1), (x1, y1, z1), (x1, y1, z0)),  # +y
        ((x0, y0, z0), (x0, y0, z1), (x0, y1, z1), (x0, y1, z0)),  # -x
        ((x1, y0, z0), (x1, y1, z0), (x1, y1, z1), (x1, y0, z1)),  # +x
    )


def mover_boxes_at(scene: Scene, t: float) -> List[OrientedBox]:
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    floor = scene.bounds.min[2]
    boxes = []
    for mover in scene.movers:
        x, y, heading = mover.pose_at(t)
        length, width, height = mover.box_dimensions
        boxes.append(OrientedBox(
            center=(x, y, floor + height / 2.0),
            half_extents=(length / 2.0, width / 2.0, height / 2.0),
            heading=heading,
        ))
    return boxes


def boxes_block(starts: np.ndarray, ends: np.ndarray, boxes: Sequence[OrientedBox]) -> np.ndarray:
    """Per-segment flag: does any box intersect the segment."""
    if not boxes:
        return np.zeros(len(starts), dtype=bool)
    centers = np.array([b.center for b in boxes], dtype=float)
    half = np.array([b.half_extents for b in boxes], dtype=float)
    headings = np.array([b.heading for b in boxes], dtype=float)
    return np.any(segments_hit_boxes(starts, ends, centers, half, headings), axis=1)
