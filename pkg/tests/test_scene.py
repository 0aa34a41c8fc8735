import math

import numpy as np
import pytest

from app.scene import (
    Bounds,
    MovingObstacle,
    Obstacle,
    Rect,
    Scene,
    SceneGeometry,
    box_faces,
    boxes_block,
    mover_boxes_at,
)
from tests.conftest import BIG, METAL


def _loop_mover(speed: float = 1.0) -> MovingObstacle:
    return MovingObstacle("forklift", (3.0, 1.2, 2.5), ((0.0, 0.0), (10.0, 0.0), (10.0, 5.0)), speed, METAL)


def test_box_faces_point_outward():
    geo = SceneGeometry([Obstacle("box", box_faces((0, 0, 0), (2, 3, 4)), METAL)], BIG)
    center = np.array([1.0, 1.5, 2.0])
    assert geo.n_faces == 6
    for f in range(6):
        face_center = geo.vertices[f].mean(axis=0)
        assert geo.normals[f] @ (face_center - center) > 0


def test_floating_box_has_twelve_diffraction_edges():
    geo = SceneGeometry([Obstacle("box", box_faces((0, 0, 1), (2, 3, 4)), METAL)], BIG)
    assert len(geo.edge_labels) == 12
    assert all(label.startswith("box/e") for label in geo.edge_labels)


def test_edges_on_floor_and_ceiling_planes_are_skipped():
    bounds = Bounds((-10.0, -10.0, 0.0), (10.0, 10.0, 5.0))
    on_floor = SceneGeometry([Obstacle("crate", box_faces((0, 0, 0), (2, 3, 1)), METAL)], bounds)
    pillar = SceneGeometry([Obstacle("pillar", box_faces((0, 0, 0), (1, 1, 5)), METAL)], bounds)
    assert len(on_floor.edge_labels) == 8
    assert len(pillar.edge_labels) == 4


def test_open_obstacles_have_no_edges(mirror_scene):
    assert len(mirror_scene.geometry.edge_labels) == 0


def test_clear_crossings_reports_glass_and_rejects_metal(glass_scene):
    geo = glass_scene.geometry
    hits = geo.clear_crossings(np.array([0.0, 0.0, 1.0]), np.array([10.0, 0.0, 1.0]))
    assert len(hits) == 1
    assert hits[0].point.tolist() == pytest.approx([5.0, 0.0, 1.0])

    blocker = SceneGeometry([Obstacle("box", box_faces((4, -1, 0), (6, 1, 2)), METAL)], BIG)
    assert blocker.clear_crossings(np.array([0.0, 0.0, 1.0]), np.array([10.0, 0.0, 1.0])) is None


def test_crossings_ignore_segment_ends_on_a_face(mirror_scene):
    geo = mirror_scene.geometry
    assert geo.crossings(np.array([0.0, 0.0, 1.0]), np.array([2.0, 3.0, 1.0])) == []


def test_mover_starts_at_first_waypoint():
    x, y, heading = _loop_mover().pose_at(0.0)
    assert (x, y, heading) == (0.0, 0.0, 0.0)


def test_mover_advances_along_segment():
    x, y, heading = _loop_mover().pose_at(5.0)
    assert x == pytest.approx(5.0)
    assert y == pytest.approx(0.0)
    assert heading == pytest.approx(0.0)


def test_mover_turns_onto_next_segment():
    x, y, heading = _loop_mover().pose_at(12.0)
    assert (x, y) == pytest.approx((10.0, 2.0))
    assert heading == pytest.approx(math.pi / 2)


def test_mover_is_periodic():
    mover = _loop_mover(speed=1.3)
    period = mover.period_s
    assert period == pytest.approx((15.0 + math.hypot(10.0, 5.0)) / 1.3)
    for t in (0.0, 3.3, 11.0):
        assert mover.pose_at(t + period)[:2] == pytest.approx(mover.pose_at(t)[:2], abs=1e-9)


def test_mover_boxes_at():
    scene = Scene(bounds=Bounds((-20.0, -20.0, 0.0), (20.0, 20.0, 5.0)), movers=(_loop_mover(),))
    (box,) = mover_boxes_at(scene, 5.0)
    assert box.center == pytest.approx((5.0, 0.0, 1.25))
    assert box.half_extents == (1.5, 0.6, 1.25)
    with pytest.raises(ValueError):
        mover_boxes_at(scene, -1.0)


def test_boxes_block_segments():
    scene = Scene(bounds=Bounds((-20.0, -20.0, 0.0), (20.0, 20.0, 5.0)), movers=(_loop_mover(),))
    boxes = mover_boxes_at(scene, 5.0)
    starts = np.array([[5.0, -5.0, 1.0], [5.0, -5.0, 3.0], [0.0, 3.0, 1.0]])
    ends = np.array([[5.0, 5.0, 1.0], [5.0, 5.0, 3.0], [10.0, 3.0, 1.0]])
    assert boxes_block(starts, ends, boxes).tolist() == [True, False, False]
    assert boxes_block(starts, ends, []).tolist() == [False, False, False]


def test_rotated_box_blocks_by_its_true_footprint():
    mover = MovingObstacle("f", (3.0, 1.2, 2.5), ((0.0, -10.0), (0.0, 10.0)), 1.0, METAL)
    scene = Scene(bounds=Bounds((-20.0, -20.0, 0.0), (20.0, 20.0, 5.0)), movers=(mover,))
    boxes = mover_boxes_at(scene, 10.0)  # centered at the origin, long side along y
    starts = np.array([[-5.0, 1.2, 1.0], [-5.0, 0.0, 1.0], [1.0, -5.0, 1.0]])
    ends = np.array([[5.0, 1.2, 1.0], [5.0, 0.0, 1.0], [1.0, 5.0, 1.0]])
    assert boxes_block(starts, ends, boxes).tolist() == [True, True, False]


def test_area_of_interest_defaults_to_bs_bounding_rect(free_scene):
    assert free_scene.area_of_interest == Rect((0.0, 0.0), (29.0, 25.0))


def test_without_movers():
    scene = Scene(bounds=BIG, movers=(_loop_mover(),))
    assert scene.without_movers().movers == ()
    assert scene.movers


def test_lookup_by_id(free_scene):
    assert free_scene.base_station(3).xy == (0.0, 25.0)
    assert free_scene.poi(1).xy == (10.0, 12.0)
    with pytest.raises(KeyError):
        free_scene.base_station(9)
