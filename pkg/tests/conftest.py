import numpy as np
import pytest

from app.config import CBAND
from app.hall import generate_synthetic_hall
from app.scene import BaseStation, Bounds, Material, Obstacle, PointOfInterest, Scene
from app.services.raytrace import trace_link

CONCRETE = Material("concrete", 5.24, 0.12)
METAL = Material("metal", 1.01, 1e7)
GLASS = Material("glass", 6.31, 0.02, transmissive=True, thickness_m=0.01)

BIG = Bounds((-500.0, -500.0, -500.0), (500.0, 500.0, 500.0))
SQUARE_BS = np.array([(0.0, 0.0), (29.0, 0.0), (0.0, 25.0), (29.0, 25.0)])


def wall_y(obstacle_id: str, y: float, material: Material, half: float = 400.0) -> Obstacle:
    face = ((-half, y, -half), (half, y, -half), (half, y, half), (-half, y, half))
    return Obstacle(obstacle_id, (face,), material, closed=False)


def wall_x(obstacle_id: str, x: float, material: Material, half: float = 400.0) -> Obstacle:
    face = ((x, -half, -half), (x, half, -half), (x, half, half), (x, -half, half))
    return Obstacle(obstacle_id, (face,), material, closed=False)


def square_stations(z: float = 4.0):
    return tuple(BaseStation(i + 1, (float(x), float(y), z)) for i, (x, y) in enumerate(SQUARE_BS))


@pytest.fixture
def free_scene() -> Scene:
    return Scene(bounds=BIG, base_stations=square_stations(), pois=(PointOfInterest(1, (10.0, 12.0, 1.0)),))


@pytest.fixture
def mirror_scene() -> Scene:
    return Scene(bounds=BIG, obstacles=(wall_y("mirror", 3.0, CONCRETE),))


@pytest.fixture
def corridor_scene() -> Scene:
    return Scene(
        bounds=BIG,
        obstacles=(wall_y("north", 3.0, CONCRETE), wall_y("south", -3.0, CONCRETE)),
    )


@pytest.fixture
def glass_scene() -> Scene:
    return Scene(bounds=BIG, obstacles=(wall_x("pane", 5.0, GLASS, half=2.0),))


@pytest.fixture
def square_bs() -> np.ndarray:
    return SQUARE_BS.copy()


@pytest.fixture(scope="session")
def hall() -> Scene:
    return generate_synthetic_hall(0)


@pytest.fixture(scope="session")
def hall_links(hall):
    """C-band static candidate paths of every (bs_id, poi_id) link of the seed-0 hall."""
    return {
        (bs.id, poi.id): trace_link(hall, bs.position, poi.ground_truth, CBAND, bs.tx_power_dbm)
        for bs in hall.base_stations
        for poi in hall.pois
    }
