"""Scenario files: JSON <-> Scene, with schema and semantic validation."""

import json
import logging
from pathlib import Path
from typing import Annotated, Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from app.config import DEFAULT_TX_POWER_DBM
from app.errors import OutputError, ScenarioParseError, ScenarioValidationError
from app.scene import (
    BandConstants,
    BaseStation,
    Bounds,
    Material,
    MovingObstacle,
    Obstacle,
    PointOfInterest,
    Rect,
    Scene,
)
from app.utils.geometry import is_convex, planarity_error

log = logging.getLogger("raypos.scene")

SCHEMA_DIALECT = "https://json-schema.org/draft/2020-12/schema"
SCHEMA_ID = "raypos/scenario.schema.json"
PLANARITY_TOL_M = 1e-9

Positive = Annotated[float, Field(gt=0)]
Vec3 = Tuple[float, float, float]
Vec2 = Tuple[float, float]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class BandConstantsModel(_Strict):
    relative_permittivity: float = Field(gt=1)
    conductivity: float = Field(ge=0)


class MaterialModel(_Strict):
    name: str = Field(min_length=1)
    relative_permittivity: float = Field(gt=1)
    conductivity: float = Field(ge=0)
    transmissive: bool = False
    thickness_m: float = Field(default=0.0, ge=0)
    bands: Dict[str, BandConstantsModel] = Field(default_factory=dict)


class BoundsModel(_Strict):
    min: Vec3
    max: Vec3


class RectModel(_Strict):
    min: Vec2
    max: Vec2


class ObstacleModel(_Strict):
    id: str = Field(min_length=1)
    material: str
    closed: bool = True
    faces: List[Annotated[List[Vec3], Field(min_length=3)]] = Field(min_length=1)


class BaseStationModel(_Strict):
    id: int = Field(ge=1)
    position: Vec3
    tx_power_dbm: float = DEFAULT_TX_POWER_DBM


class PoiModel(_Strict):
    id: int = Field(ge=0)
    position: Vec3


class MoverModel(_Strict):
    id: str = Field(min_length=1)
    size: Tuple[Positive, Positive, Positive]
    waypoints: List[Vec2] = Field(min_length=2)
    speed: float = Field(gt=0)
    material: str


class ScenarioFile(_Strict):
    """Indoor hall scenario. Lengths in meters, power in dBm, speed in m/s."""

    bounds: BoundsModel
    aoi: Optional[RectModel] = None
    materials: List[MaterialModel]
    obstacles: List[ObstacleModel] = Field(default_factory=list)
    base_stations: List[BaseStationModel]
    pois: List[PoiModel]
    movers: List[MoverModel] = Field(default_factory=list)


def _material(m: MaterialModel) -> Material:
    return Material(
        name=m.name,
        relative_permittivity=m.relative_permittivity,
        conductivity=m.conductivity,
        transmissive=m.transmissive,
        thickness_m=m.thickness_m,
        bands=tuple(
            BandConstants(band, c.relative_permittivity, c.conductivity)
            for band, c in m.bands.items()
        ),
    )


def scene_from_document(doc: ScenarioFile) -> Scene:
    catalog = {}
    for m in doc.materials:
        if m.name in catalog:
            raise ScenarioValidationError("duplicate material name", m.name)
        catalog[m.name] = _material(m)

    def lookup(name: str, owner: str) -> Material:
        if name not in catalog:
            raise ScenarioValidationError(f"unknown material {name!r}", owner)
        return catalog[name]

    scene = Scene(
        bounds=Bounds(tuple(doc.bounds.min), tuple(doc.bounds.max)),
        obstacles=tuple(
            Obstacle(
                id=o.id,
                faces=tuple(tuple(tuple(v) for v in face) for face in o.faces),
                material=lookup(o.material, o.id),
                closed=o.closed,
            )
            for o in doc.obstacles
        ),
        base_stations=tuple(
            BaseStation(b.id, tuple(b.position), b.tx_power_dbm) for b in doc.base_stations
        ),
        pois=tuple(PointOfInterest(p.id, tuple(p.position)) for p in doc.pois),
        movers=tuple(
            MovingObstacle(
                id=m.id,
                box_dimensions=tuple(m.size),
                waypoints=tuple(tuple(w) for w in m.waypoints),
                speed=m.speed,
                material=lookup(m.material, m.id),
            )
            for m in doc.movers
        ),
        material_catalog=tuple(catalog.values()),
        aoi=Rect(tuple(doc.aoi.min), tuple(doc.aoi.max)) if doc.aoi else None,
    )
    validate_scene(scene)
    return scene


def _check_unique(ids, kind: str):
    seen = set()
    for i in ids:
        if i in seen:
            raise ScenarioValidationError(f"duplicate {kind} id", str(i))
        seen.add(i)


def _check_watertight(ob: Obstacle):
    counts: Dict[Tuple, int] = {}
    for face in ob.faces:
        for k in range(len(face)):
            a, b = face[k], face[(k + 1) % len(face)]
            key = (a, b) if a <= b else (b, a)
            counts[key] = counts.get(key, 0) + 1
    if any(c != 2 for c in counts.values()):
        raise ScenarioValidationError("closed obstacle is not watertight", ob.id)


def validate_scene(scene: Scene) -> None:
    """Raise ScenarioValidationError on the first violated scene invariant."""
    if len(scene.base_stations) < 3:
        raise ScenarioValidationError("K < 3: at least three base stations are required")
    _check_unique([b.id for b in scene.base_stations], "base station")
    _check_unique([p.id for p in scene.pois], "PoI")
    _check_unique([o.id for o in scene.obstacles], "obstacle")
    _check_unique([m.id for m in scene.movers], "mover")

    for m in scene.material_catalog:
        if m.relative_permittivity <= 1.0 or m.conductivity < 0.0:
            raise ScenarioValidationError("material constants out of range", m.name)

    for ob in scene.obstacles:
        for fi, face in enumerate(ob.faces):
            label = f"{ob.id}/f{fi}"
            if planarity_error(face) > PLANARITY_TOL_M:
                raise ScenarioValidationError(f"face {label} is not planar", label)
            if not is_convex(face):
                raise ScenarioValidationError(f"face {label} is not convex", label)
            for v in face:
                if not scene.bounds.contains(v):
                    raise ScenarioValidationError(f"face {label} leaves the scene bounds", label)
        if ob.closed:
            _check_watertight(ob)

    for bs in scene.base_stations:
        if not scene.bounds.contains(bs.position):
            raise ScenarioValidationError("base station outside bounds", f"bs{bs.id}")

    aoi = scene.area_of_interest
    for p in scene.pois:
        if not scene.bounds.contains(p.ground_truth):
            raise ScenarioValidationError("PoI outside bounds", f"poi{p.id}")
        if not aoi.contains(p.ground_truth):
            raise ScenarioValidationError("PoI outside the area of interest", f"poi{p.id}")

    for m in scene.movers:
        if m.speed <= 0:
            raise ScenarioValidationError("mover speed must be positive", m.id)
        if any(length == 0.0 for length in m.segment_lengths):
            raise ScenarioValidationError("consecutive waypoints coincide", m.id)


def parse_scene(text: str, source: str = "<string>") -> Scene:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioParseError(source, f"malformed JSON: {e}") from e
    try:
        doc = ScenarioFile.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(x) for x in first["loc"])
        raise ScenarioValidationError(first["msg"], where or None) from e
    return scene_from_document(doc)


def load_scene(path: Union[str, Path]) -> Scene:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ScenarioParseError(str(path), str(e)) from e
    scene = parse_scene(text, str(path))
    log.info(
        "Loaded scenario %s: %d obstacles, %d BSs, %d PoIs, %d movers",
        path, len(scene.obstacles), len(scene.base_stations), len(scene.pois), len(scene.movers),
    )
    return scene


def scene_to_document(scene: Scene) -> dict:
    doc = {
        "bounds": {"min": list(scene.bounds.min), "max": list(scene.bounds.max)},
        "materials": [
            {
                "name": m.name,
                "relative_permittivity": m.relative_permittivity,
                "conductivity": m.conductivity,
                "transmissive": m.transmissive,
                "thickness_m": m.thickness_m,
                "bands": {
                    b.band: {
                        "relative_permittivity": b.relative_permittivity,
                        "conductivity": b.conductivity,
                    }
                    for b in m.bands
                },
            }
            for m in scene.material_catalog
        ],
        "obstacles": [
            {
                "id": o.id,
                "material": o.material.name,
                "closed": o.closed,
                "faces": [[list(v) for v in face] for face in o.faces],
            }
            for o in scene.obstacles
        ],
        "base_stations": [
            {"id": b.id, "position": list(b.position), "tx_power_dbm": b.tx_power_dbm}
            for b in scene.base_stations
        ],
        "pois": [{"id": p.id, "position": list(p.ground_truth)} for p in scene.pois],
        "movers": [
            {
                "id": m.id,
                "size": list(m.box_dimensions),
                "waypoints": [list(w) for w in m.waypoints],
                "speed": m.speed,
                "material": m.material.name,
            }
            for m in scene.movers
        ],
    }
    if scene.aoi is not None:
        doc["aoi"] = {"min": list(scene.aoi.min), "max": list(scene.aoi.max)}
    return doc


def dump_scene(scene: Scene) -> str:
    return json.dumps(scene_to_document(scene), indent=2) + "\n"


def save_scene(scene: Scene, path: Union[str, Path]) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(dump_scene(scene), encoding="utf-8")
    except OSError as e:
        raise OutputError(str(path), str(e)) from e
    log.info("Wrote scenario %s", path)
    return path


def load_schema() -> dict:
    """JSON Schema of the scenario file, generated from `ScenarioFile`."""
    return {"$schema": SCHEMA_DIALECT, "$id": SCHEMA_ID, **ScenarioFile.model_json_schema()}


def save_schema(path: Union[str, Path]) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(load_schema(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as e:
        raise OutputError(str(path), str(e)) from e
    log.info("Wrote scenario schema %s", path)
    return path
