"""Parametric stand-in for the production hall.

Machine lines run outside the area of interest; inside it are the AGV floor,
structural pillars, the glass room, a blockwork partition and the forklift
loops. The envelope, BS layout, PoIs and forklifts are fixed; only the machine
placement along the three lines depends on the seed.
"""

import logging
from typing import Dict, List, Tuple

import numpy as np

from app.config import BANDS, DEFAULT_TX_POWER_DBM
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
    box_faces,
)

log = logging.getLogger("raypos.scene")

HALL_SIZE = (42.0, 46.0, 8.8)
AOI = Rect((6.5, 10.5), (35.5, 35.5))
BS_HEIGHT = 4.0
POI_HEIGHT = 1.0

# (axis the line runs along, fixed coordinate of its center, span along the axis)
MACHINE_LINES = (
    ("x", 5.0, (11.0, 31.0)),
    ("x", 43.0, (11.0, 31.0)),
    ("y", 3.0, (14.0, 32.0)),
)
MACHINE_DEPTH = 1.6
MACHINES_PER_LINE = 4

PILLAR_SIZE = 0.6
PILLARS = ((3.5, 5.0), (38.5, 5.0), (3.5, 41.0), (38.5, 41.0), (21.0, 17.5), (21.0, 28.5))

GLASS_HEIGHT = 3.0
GLASS_ROOM = (8.0, 14.5, 33.8, 37.5)  # x0, x1, y0, y1; open to the north

# Open slab between the northern PoI row and the southern BSs.
PARTITION_Y = 32.0
PARTITION_X = (15.0, 33.0)
PARTITION_HEIGHT = 1.7
PARTITION_THICKNESS_M = 0.15

FORKLIFT_SIZE = (3.0, 1.2, 2.5)
FORKLIFT_SPEED = 1.0
FORKLIFT_LOOPS = (
    ((10.0, 16.0), (32.0, 16.0), (32.0, 19.0), (10.0, 19.0)),
    ((32.0, 30.0), (10.0, 30.0), (10.0, 27.0), (32.0, 27.0)),
)

# At least 0.9 m outside every forklift box, whatever its position on the loop.
POI_XY = (
    (9.0, 12.0), (15.0, 12.0), (21.0, 12.0), (27.0, 12.0), (33.0, 12.0),
    (7.5, 17.5), (16.0, 17.5), (26.0, 17.5), (34.5, 17.5),
    (9.0, 23.0), (15.0, 23.0), (21.0, 23.0), (27.0, 23.0), (33.0, 23.0),
    (7.5, 28.5), (16.0, 28.5), (26.0, 28.5), (34.5, 28.5),
    (10.0, 34.6), (18.0, 34.0), (23.0, 34.0), (29.0, 34.0), (34.0, 34.0),
)

# epsilon_r = a * f^b, sigma = c * f^d with f in GHz
ITU_COEFFICIENTS: Dict[str, Tuple[float, float, float, float]] = {
    "concrete": (5.24, 0.0, 0.0462, 0.7822),
    "wood": (1.99, 0.0, 0.0047, 1.0718),
    "glass": (6.31, 0.0, 0.0036, 1.3394),
}
# The conductivity term dominates metal by many orders of magnitude.
METAL = (1.01, 1e7)
PLASTIC = {"cband": (2.5, 0.005), "mmwave": (2.5, 0.03)}
GLASS_THICKNESS_M = 0.01


def default_materials() -> Tuple[Material, ...]:
    def itu(name: str, transmissive: bool = False, thickness: float = 0.0, coefficients: str = "") -> Material:
        a, b, c, d = ITU_COEFFICIENTS[coefficients or name]
        bands = []
        for band in BANDS.values():
            f_ghz = band.center_frequency_hz / 1e9
            bands.append(BandConstants(band.name.value, a * f_ghz ** b, c * f_ghz ** d))
        return Material(
            name=name,
            relative_permittivity=bands[0].relative_permittivity,
            conductivity=bands[0].conductivity,
            transmissive=transmissive,
            thickness_m=thickness,
            bands=tuple(bands),
        )

    plastic_bands = tuple(BandConstants(b, e, s) for b, (e, s) in PLASTIC.items())
    return (
        Material("metal", METAL[0], METAL[1]),
        itu("concrete"),
        Material("plastic", plastic_bands[0].relative_permittivity,
                 plastic_bands[0].conductivity, bands=plastic_bands),
        itu("wood"),
        itu("glass", transmissive=True, thickness=GLASS_THICKNESS_M),
        itu("blockwork", transmissive=True, thickness=PARTITION_THICKNESS_M, coefficients="concrete"),
    )


def _shell(concrete: Material) -> List[Obstacle]:
    x, y, z = HALL_SIZE
    slabs = {
        "floor": ((0, 0, 0), (x, 0, 0), (x, y, 0), (0, y, 0)),
        "ceiling": ((0, 0, z), (0, y, z), (x, y, z), (x, 0, z)),
        "wall-south": ((0, 0, 0), (0, 0, z), (x, 0, z), (x, 0, 0)),
        "wall-north": ((0, y, 0), (x, y, 0), (x, y, z), (0, y, z)),
        "wall-west": ((0, 0, 0), (0, y, 0), (0, y, z), (0, 0, z)),
        "wall-east": ((x, 0, 0), (x, 0, z), (x, y, z), (x, y, 0)),
    }
    return [
        Obstacle(name, (tuple(tuple(float(c) for c in v) for v in face),), concrete, closed=False)
        for name, face in slabs.items()
    ]


def _machines(rng: np.random.Generator, metal: Material) -> List[Obstacle]:
    out = []
    for line, (axis, center, (s0, s1)) in enumerate(MACHINE_LINES, start=1):
        lengths = rng.uniform(3.0, 4.2, size=MACHINES_PER_LINE)
        heights = rng.uniform(2.0, 3.0, size=MACHINES_PER_LINE)
        gaps = rng.dirichlet(np.ones(MACHINES_PER_LINE + 1)) * ((s1 - s0) - lengths.sum())
        s = s0 + gaps[0]
        for k in range(MACHINES_PER_LINE):
            along = (round(float(s), 6), round(float(s + lengths[k]), 6))
            across = (center - MACHINE_DEPTH / 2, center + MACHINE_DEPTH / 2)
            (x0, x1), (y0, y1) = (along, across) if axis == "x" else (across, along)
            lo, hi = (x0, y0, 0.0), (x1, y1, round(float(heights[k]), 6))
            out.append(Obstacle(f"machine-{line}-{k + 1}", box_faces(lo, hi), metal))
            s += lengths[k] + gaps[k + 1]
    return out


def _pillars(concrete: Material) -> List[Obstacle]:
    h = PILLAR_SIZE / 2
    return [
        Obstacle(f"pillar-{i + 1}", box_faces((px - h, py - h, 0.0), (px + h, py + h, HALL_SIZE[2])), concrete)
        for i, (px, py) in enumerate(PILLARS)
    ]


def _glass_room(glass: Material) -> List[Obstacle]:
    x0, x1, y0, y1 = GLASS_ROOM
    z = GLASS_HEIGHT
    panes = {
        "glass-south": ((x0, y0, 0.0), (x1, y0, 0.0), (x1, y0, z), (x0, y0, z)),
        "glass-east": ((x1, y0, 0.0), (x1, y1, 0.0), (x1, y1, z), (x1, y0, z)),
        "glass-west": ((x0, y0, 0.0), (x0, y0, z), (x0, y1, z), (x0, y1, 0.0)),
    }
    return [Obstacle(name, (face,), glass, closed=False) for name, face in panes.items()]


def _partition(blockwork: Material) -> Obstacle:
    x0, x1 = PARTITION_X
    y, z = PARTITION_Y, PARTITION_HEIGHT
    face = ((x0, y, 0.0), (x1, y, 0.0), (x1, y, z), (x0, y, z))
    return Obstacle("partition", (face,), blockwork, closed=False)


def _storage(plastic: Material, wood: Material) -> List[Obstacle]:
    crates = [
        Obstacle(f"containers-{i + 1}", box_faces((x, 38.5, 0.0), (x + 3.0, 41.0, 1.8)), plastic)
        for i, x in enumerate((16.0, 20.0, 24.0))
    ]
    shelf = Obstacle("shelf-1", box_faces((38.0, 18.0, 0.0), (40.0, 28.0, 2.2)), wood)
    return crates + [shelf]


def generate_synthetic_hall(seed: int = 0) -> Scene:
    rng = np.random.default_rng(seed)
    catalog = default_materials()
    by_name = {m.name: m for m in catalog}

    obstacles = (
        _shell(by_name["concrete"])
        + _machines(rng, by_name["metal"])
        + _pillars(by_name["concrete"])
        + _glass_room(by_name["glass"])
        + [_partition(by_name["blockwork"])]
        + _storage(by_name["plastic"], by_name["wood"])
    )
    (ax0, ay0), (ax1, ay1) = AOI.min, AOI.max
    corners = ((ax0, ay0), (ax1, ay0), (ax1, ay1), (ax0, ay1))
    base_stations = tuple(
        BaseStation(i + 1, (x, y, BS_HEIGHT), DEFAULT_TX_POWER_DBM) for i, (x, y) in enumerate(corners)
    )
    pois = tuple(PointOfInterest(i + 1, (x, y, POI_HEIGHT)) for i, (x, y) in enumerate(POI_XY))
    movers = tuple(
        MovingObstacle(f"forklift-{i + 1}", FORKLIFT_SIZE, loop, FORKLIFT_SPEED, by_name["metal"])
        for i, loop in enumerate(FORKLIFT_LOOPS)
    )
    scene = Scene(
        bounds=Bounds((0.0, 0.0, 0.0), HALL_SIZE),
        obstacles=tuple(obstacles),
        base_stations=base_stations,
        pois=pois,
        movers=movers,
        material_catalog=catalog,
        aoi=AOI,
    )
    log.info("Generated synthetic hall (seed=%d): %d obstacles", seed, len(obstacles))
    return scene
