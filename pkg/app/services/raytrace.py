"""Deterministic multipath enumeration between one transmitter and one receiver.

Static geometry is traced once per link (`trace_link`); forklifts only ever
remove paths, so a snapshot is the static candidate set filtered by the mover
boxes at that instant (`LinkPaths.visible`).
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from app.config import (
    DEFAULT_TX_POWER_DBM,
    SPEED_OF_LIGHT,
    SURFACE_EPS_M,
    TOA_TIE_S,
    BandConfig,
)
from app.errors import DegenerateGeometryError, NoPathError
from app.scene import (
    Crossing,
    Material,
    OrientedBox,
    Scene,
    SceneGeometry,
    boxes_block,
    mover_boxes_at,
)
from app.services.power import (
    fresnel_kirchhoff_v,
    fspl_db,
    knife_edge_loss_db,
    penetration_loss_db,
    reflection_loss_db,
)
from app.utils.geometry import Point3, as_point, mirror_point, points_in_convex_polygons

log = logging.getLogger("raypos.raytrace")

MAX_INTERACTIONS = 2


class InteractionKind(str, Enum):
    REFLECTION = "Reflection"
    DIFFRACTION = "Diffraction"
    PENETRATION = "Penetration"


class MpcCategory(str, Enum):
    LOS = "LoS"
    PENETRATION = "Penetration"
    DIFFRACTION = "Diffraction"
    REFLECTION = "Reflection"
    SECOND_ORDER = "SecondOrder"


@dataclass(frozen=True)
class Interaction:
    kind: InteractionKind
    surface_or_edge: str
    point: Point3
    material: Optional[Material] = field(default=None, compare=False)
    # radians from the face normal; unused for diffraction
    incidence_angle: float = 0.0
    # diffraction only: the edge's obstacle blocks the straight tx-rx line
    shadowed: bool = False


@dataclass(frozen=True)
class PropagationPath:
    interactions: Tuple[Interaction, ...]
    # tx, every direction-changing interaction point, rx
    vertices: Tuple[Point3, ...]
    total_length: float
    rx_power_dbm: Optional[float] = None

    @property
    def toa(self) -> float:
        return self.total_length / SPEED_OF_LIGHT

    @property
    def n_interactions(self) -> int:
        return len(self.interactions)

    @property
    def category(self) -> MpcCategory:
        if not self.interactions:
            return MpcCategory.LOS
        if len(self.interactions) == 1:
            return MpcCategory(self.interactions[0].kind.value)
        return MpcCategory.SECOND_ORDER

    @property
    def key(self) -> Tuple[Tuple[str, str], ...]:
        return tuple((i.kind.value, i.surface_or_edge) for i in self.interactions)

    @property
    def interaction_kinds(self) -> str:
        return ";".join(i.kind.value for i in self.interactions)

    @property
    def has_diffraction(self) -> bool:
        return any(i.kind is InteractionKind.DIFFRACTION for i in self.interactions)

    def with_power(self, rx_power_dbm: float) -> "PropagationPath":
        return PropagationPath(self.interactions, self.vertices, self.total_length, rx_power_dbm)


def _tuple3(p: np.ndarray) -> Point3:
    return float(p[0]), float(p[1]), float(p[2])


def _incidence(direction: np.ndarray, normal: np.ndarray) -> float:
    cos_i = abs(float(direction @ normal)) / float(np.linalg.norm(direction))
    return math.acos(min(cos_i, 1.0))


def _penetrations(geo: SceneGeometry, a: np.ndarray, b: np.ndarray, hits: Iterable[Crossing]) -> List[Interaction]:
    d = b - a
    return [
        Interaction(
            InteractionKind.PENETRATION,
            geo.face_labels[c.face],
            _tuple3(c.point),
            geo.face_materials[c.face],
            _incidence(d, geo.normals[c.face]),
        )
        for c in hits
    ]


def _path_length(vertices: Sequence[np.ndarray]) -> float:
    return math.fsum(float(np.linalg.norm(vertices[i + 1] - vertices[i])) for i in range(len(vertices) - 1))


def _reflecting_side(geo: SceneGeometry, sd_in: np.ndarray, sd_out: np.ndarray) -> np.ndarray:
    """Closed faces reflect on their outward side only, open faces on either side."""
    eps = SURFACE_EPS_M
    outward = (sd_in > eps) & (sd_out > eps)
    inward = (sd_in < -eps) & (sd_out < -eps)
    return np.where(geo.closed, outward, outward | inward)


def _direct(geo: SceneGeometry, tx: np.ndarray, rx: np.ndarray) -> Optional[PropagationPath]:
    hits = geo.clear_crossings(tx, rx)
    if hits is None or len(hits) > MAX_INTERACTIONS:
        return None
    return PropagationPath(
        tuple(_penetrations(geo, tx, rx, hits)),
        (_tuple3(tx), _tuple3(rx)),
        float(np.linalg.norm(rx - tx)),
    )


def _chain(geo: SceneGeometry, points: Sequence[np.ndarray], turns: Sequence[Interaction]) -> Optional[PropagationPath]:
    """Validate the legs of a bent path and splice glass crossings in path order."""
    interactions: List[Interaction] = []
    for leg in range(len(points) - 1):
        a, b = points[leg], points[leg + 1]
        hits = geo.clear_crossings(a, b)
        if hits is None:
            return None
        interactions.extend(_penetrations(geo, a, b, hits))
        if leg < len(turns):
            interactions.append(turns[leg])
        if len(interactions) > MAX_INTERACTIONS:
            return None
    return PropagationPath(tuple(interactions), tuple(_tuple3(p) for p in points), _path_length(points))


def _first_order_reflections(geo: SceneGeometry, tx: np.ndarray, rx: np.ndarray) -> List[PropagationPath]:
    if geo.n_faces == 0:
        return []
    sd_tx = geo.signed_distances(tx)
    sd_rx = geo.signed_distances(rx)
    ok = _reflecting_side(geo, sd_tx, sd_rx)
    idx = np.nonzero(ok)[0]
    if len(idx) == 0:
        return []
    images = mirror_point(tx, geo.normals[idx], geo.offsets[idx])
    s = sd_tx[idx] / (sd_tx[idx] + sd_rx[idx])
    points = images + s[:, None] * (rx - images)
    inside = points_in_convex_polygons(points, geo.vertices[idx], geo.normals[idx])

    paths = []
    for j in np.nonzero(inside)[0]:
        f = int(idx[j])
        p = points[j]
        turn = Interaction(
            InteractionKind.REFLECTION,
            geo.face_labels[f],
            _tuple3(p),
            geo.face_materials[f],
            _incidence(p - tx, geo.normals[f]),
        )
        path = _chain(geo, (tx, p, rx), (turn,))
        if path is not None:
            paths.append(path)
    return paths


def _second_order_reflections(geo: SceneGeometry, tx: np.ndarray, rx: np.ndarray) -> List[PropagationPath]:
    n = geo.n_faces
    if n < 2:
        return []
    eps = SURFACE_EPS_M
    sd_tx = geo.signed_distances(tx)
    sd_rx = geo.signed_distances(rx)
    faces = np.arange(n)
    paths = []
    for a in range(n):
        if abs(sd_tx[a]) <= eps or (geo.closed[a] and sd_tx[a] <= eps):
            continue
        n_a, off_a = geo.normals[a], geo.offsets[a]
        img1 = mirror_point(tx, n_a, off_a)
        sd_img1 = geo.signed_distances(img1)
        ok = _reflecting_side(geo, sd_img1, sd_rx) & (faces != a)
        idx = np.nonzero(ok)[0]
        if len(idx) == 0:
            continue

        img2 = mirror_point(img1, geo.normals[idx], geo.offsets[idx])
        s2 = sd_img1[idx] / (sd_img1[idx] + sd_rx[idx])
        p2 = img2 + s2[:, None] * (rx - img2)
        on_b = points_in_convex_polygons(p2, geo.vertices[idx], geo.normals[idx])

        # p2 must see face a from the same side as tx
        sd_p2 = p2 @ n_a - off_a
        if geo.closed[a]:
            same_side = sd_p2 > eps
        else:
            same_side = np.sign(sd_p2) == np.sign(sd_tx[a])
            same_side &= np.abs(sd_p2) > eps
        s1 = sd_tx[a] / np.where(same_side, sd_p2 + sd_tx[a], 1.0)
        p1 = img1 + s1[:, None] * (p2 - img1)
        on_a = points_in_convex_polygons(
            p1,
            np.broadcast_to(geo.vertices[a], (len(idx),) + geo.vertices[a].shape),
            np.broadcast_to(n_a, (len(idx), 3)),
        )

        for j in np.nonzero(on_b & same_side & on_a)[0]:
            b = int(idx[j])
            q1, q2 = p1[j], p2[j]
            turns = (
                Interaction(InteractionKind.REFLECTION, geo.face_labels[a], _tuple3(q1),
                            geo.face_materials[a], _incidence(q1 - tx, n_a)),
                Interaction(InteractionKind.REFLECTION, geo.face_labels[b], _tuple3(q2),
                            geo.face_materials[b], _incidence(q2 - q1, geo.normals[b])),
            )
            path = _chain(geo, (tx, q1, q2, rx), turns)
            if path is not None:
                paths.append(path)
    return paths


def edge_points(starts: np.ndarray, ends: np.ndarray, tx: np.ndarray, rx: np.ndarray) -> np.ndarray:
    """Per edge segment, the point minimizing |tx - p| + |p - rx| (unfolding about the edge line)."""
    a = np.asarray(starts, dtype=float).reshape(-1, 3)
    b = np.asarray(ends, dtype=float).reshape(-1, 3)
    tx, rx = as_point(tx), as_point(rx)
    d = b - a
    length = np.linalg.norm(d, axis=1)
    u = d / np.where(length > 0.0, length, 1.0)[:, None]

    def foot(p):
        s = np.einsum("ek,ek->e", p - a, u)
        h = np.linalg.norm(p - a - s[:, None] * u, axis=1)
        return s, h

    s1, h1 = foot(tx)
    s2, h2 = foot(rx)
    denom = h1 + h2
    safe = denom > 1e-12
    s = np.where(safe, (s1 * h2 + s2 * h1) / np.where(safe, denom, 1.0), (s1 + s2) / 2.0)
    s = np.clip(s, 0.0, length)
    return a + s[:, None] * u


def _diffractions(geo: SceneGeometry, tx: np.ndarray, rx: np.ndarray) -> List[PropagationPath]:
    if len(geo.edge_labels) == 0:
        return []
    points = edge_points(geo.edge_start, geo.edge_end, tx, rx)
    crossed = {int(geo.face_obstacle[c.face]) for c in geo.crossings(tx, rx)}
    paths = []
    for e, p in enumerate(points):
        if np.linalg.norm(p - tx) <= SURFACE_EPS_M or np.linalg.norm(rx - p) <= SURFACE_EPS_M:
            continue
        turn = Interaction(
            InteractionKind.DIFFRACTION,
            geo.edge_labels[e],
            _tuple3(p),
            shadowed=int(geo.edge_obstacle[e]) in crossed,
        )
        path = _chain(geo, (tx, p, rx), (turn,))
        if path is not None:
            paths.append(path)
    return paths


def path_power(path: PropagationPath, tx_power_dbm: float, band: BandConfig) -> float:
    if path.total_length <= 0.0:
        raise DegenerateGeometryError("zero-length path")
    f = band.center_frequency_hz
    name = band.name.value
    loss = fspl_db(path.total_length, f)
    for inter in path.interactions:
        if inter.kind is InteractionKind.REFLECTION:
            loss += reflection_loss_db(inter.material, inter.incidence_angle, name, f)
        elif inter.kind is InteractionKind.PENETRATION:
            loss += penetration_loss_db(inter.material, inter.incidence_angle, name, f)
        else:
            tx, rx = as_point(path.vertices[0]), as_point(path.vertices[-1])
            excess = path.total_length - float(np.linalg.norm(rx - tx))
            v = fresnel_kirchhoff_v(excess, band.wavelength_m, inter.shadowed)
            loss += knife_edge_loss_db(v)
    return tx_power_dbm - loss


def _order_key(path: PropagationPath):
    power = path.rx_power_dbm if path.rx_power_dbm is not None else -math.inf
    return path.toa, -power, path.n_interactions, path.key


def _dedupe_sorted(paths: Iterable[PropagationPath]) -> List[PropagationPath]:
    seen = set()
    out = []
    for p in sorted(paths, key=_order_key):
        if p.key in seen:
            continue
        seen.add(p.key)
        out.append(p)
    return out


def _endpoints(tx: Sequence[float], rx: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    a, b = as_point(tx), as_point(rx)
    if np.linalg.norm(b - a) == 0.0:
        raise DegenerateGeometryError("tx and rx coincide")
    return a, b


def _segments(paths: Sequence[PropagationPath]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    starts, ends, owner = [], [], []
    for i, p in enumerate(paths):
        for k in range(len(p.vertices) - 1):
            starts.append(p.vertices[k])
            ends.append(p.vertices[k + 1])
            owner.append(i)
    return (
        np.asarray(starts, dtype=float).reshape(-1, 3),
        np.asarray(ends, dtype=float).reshape(-1, 3),
        np.asarray(owner, dtype=int),
    )


def _keep_unblocked(paths, segments, boxes) -> List[PropagationPath]:
    if not boxes or not paths:
        return list(paths)
    starts, ends, owner = segments
    hit = boxes_block(starts, ends, boxes)
    blocked = np.zeros(len(paths), dtype=bool)
    np.logical_or.at(blocked, owner, hit)
    return [p for p, b in zip(paths, blocked) if not b]


def unblocked(paths: Sequence[PropagationPath], boxes: Sequence[OrientedBox]) -> List[PropagationPath]:
    """Paths none of whose legs intersect a mover box."""
    if not boxes or not paths:
        return list(paths)
    return _keep_unblocked(paths, _segments(paths), boxes)


def suppress_diffractions(paths: Sequence[PropagationPath]) -> List[PropagationPath]:
    """Drop diffracted paths while an unobstructed line-of-sight path exists."""
    if any(p.n_interactions == 0 for p in paths):
        return [p for p in paths if not p.has_diffraction]
    return list(paths)


def trace_direct(scene: Scene, tx: Sequence[float], rx: Sequence[float], t: float = 0.0) -> Optional[PropagationPath]:
    a, b = _endpoints(tx, rx)
    path = _direct(scene.geometry, a, b)
    if path is None:
        return None
    survivors = unblocked([path], mover_boxes_at(scene, t))
    return survivors[0] if survivors else None


def trace_reflections(
    scene: Scene, tx: Sequence[float], rx: Sequence[float], t: float = 0.0, max_order: int = 2
) -> List[PropagationPath]:
    if max_order not in (1, 2):
        raise ValueError(f"max_order must be 1 or 2, got {max_order}")
    a, b = _endpoints(tx, rx)
    geo = scene.geometry
    paths = _first_order_reflections(geo, a, b)
    if max_order == 2:
        paths += _second_order_reflections(geo, a, b)
    return _dedupe_sorted(unblocked(paths, mover_boxes_at(scene, t)))


def trace_diffractions(scene: Scene, tx: Sequence[float], rx: Sequence[float], t: float = 0.0) -> List[PropagationPath]:
    a, b = _endpoints(tx, rx)
    boxes = mover_boxes_at(scene, t)
    direct = trace_direct(scene, a, b, t)
    if direct is not None and direct.n_interactions == 0:
        return []
    return _dedupe_sorted(unblocked(_diffractions(scene.geometry, a, b), boxes))


@dataclass
class LinkPaths:
    """Static candidate paths of one link, powered and sorted; filter per snapshot."""

    candidates: List[PropagationPath]
    _segments: tuple = field(init=False, repr=False)

    def __post_init__(self):
        self._segments = _segments(self.candidates)

    def visible(self, boxes: Sequence[OrientedBox] = ()) -> List[PropagationPath]:
        return suppress_diffractions(_keep_unblocked(self.candidates, self._segments, boxes))


def trace_link(
    scene: Scene,
    tx: Sequence[float],
    rx: Sequence[float],
    band: BandConfig,
    tx_power_dbm: float = DEFAULT_TX_POWER_DBM,
) -> LinkPaths:
    a, b = _endpoints(tx, rx)
    geo = scene.geometry
    raw: List[PropagationPath] = []
    direct = _direct(geo, a, b)
    if direct is not None:
        raw.append(direct)
    raw += _first_order_reflections(geo, a, b)
    raw += _second_order_reflections(geo, a, b)
    raw += _diffractions(geo, a, b)

    powered = []
    for p in raw:
        power = path_power(p, tx_power_dbm, band)
        if power >= band.rx_sensitivity_dbm:
            powered.append(p.with_power(power))
    link = LinkPaths(_dedupe_sorted(powered))
    log.debug("Traced link %s -> %s: %d raw, %d above sensitivity", tuple(a), tuple(b), len(raw), len(link.candidates))
    return link


def trace_all(
    scene: Scene,
    tx: Sequence[float],
    rx: Sequence[float],
    t: float,
    band: BandConfig,
    tx_power_dbm: float = DEFAULT_TX_POWER_DBM,
) -> List[PropagationPath]:
    return trace_link(scene, tx, rx, band, tx_power_dbm).visible(mover_boxes_at(scene, t))


def co_first_arrivals(paths: Sequence[PropagationPath]) -> List[PropagationPath]:
    """Every path within the tie window of the earliest ToA, best first."""
    if not paths:
        raise NoPathError()
    t0 = min(p.toa for p in paths)
    tied = [p for p in paths if p.toa - t0 < TOA_TIE_S]
    return sorted(tied, key=lambda p: (_order_key(p)[1], p.n_interactions, p.key))


def first_arriving(paths: Sequence[PropagationPath]) -> PropagationPath:
    return co_first_arrivals(paths)[0]
