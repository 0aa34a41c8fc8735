import math

import numpy as np
import pytest
from pydantic import ValidationError

from app.config import CBAND, SPEED_OF_LIGHT
from app.errors import MeasurementError, UnreachableError
from app.scene import BaseStation, Bounds, MovingObstacle, Obstacle, PointOfInterest, Scene, box_faces
from app.services.measure import (
    JitterDistribution,
    SyncModel,
    ToAMeasurement,
    TransmissionSchedule,
    compute_tdoa,
    synthesize_toa,
)
from app.services.raytrace import MpcCategory
from tests.conftest import BIG, METAL

NO_JITTER = SyncModel(precision_ns=0.0)
SCHED = TransmissionSchedule()


def _measure_all(scene, sync=NO_JITTER, sched=SCHED, seed=0, index=0):
    poi = scene.pois[0]
    return [synthesize_toa(scene, CBAND, bs, poi, 0.0, sync, sched, seed, index) for bs in scene.base_stations]


def _toa(bs_id, toa):
    return ToAMeasurement(bs_id, 1, 0.0, toa, MpcCategory.LOS, 0.0, toa * SPEED_OF_LIGHT)


def test_schedule_offsets():
    sched = TransmissionSchedule(delta_ms=10.0)
    assert sched.offset_s(1) == 0.0
    assert sched.offset_s(3) == pytest.approx(0.02)
    assert sched.spacing_s(4, 2) == pytest.approx(0.02)
    assert sched.spacing_s(1, 2) == pytest.approx(-0.01)


def test_negative_settings_rejected():
    with pytest.raises(ValidationError):
        SyncModel(precision_ns=-1.0)
    with pytest.raises(ValidationError):
        TransmissionSchedule(delta_ms=-5.0)


def test_measurement_without_jitter_is_geometric(free_scene):
    poi = free_scene.pois[0]
    for m, bs in zip(_measure_all(free_scene), free_scene.base_stations):
        distance = math.dist(bs.position, poi.ground_truth)
        assert m.first_mpc_category is MpcCategory.LOS
        assert m.excess_length_m == 0.0
        assert m.jitter_s == 0.0
        assert m.offset_s == pytest.approx((bs.id - 1) * 0.01)
        assert m.toa - m.offset_s == pytest.approx(distance / SPEED_OF_LIGHT, rel=1e-9)
        assert m.geometric_toa == pytest.approx(distance / SPEED_OF_LIGHT)


def test_uniform_jitter_stays_within_precision():
    sync = SyncModel(precision_ns=10.0)
    draws = np.array([sync.draw(np.random.default_rng(i)) for i in range(2000)])
    assert np.all(np.abs(draws) <= 5e-9)
    assert abs(draws.mean()) < 3e-10
    assert draws.std() == pytest.approx(10e-9 / math.sqrt(12.0), rel=0.1)


def test_gaussian_jitter_spread():
    sync = SyncModel(precision_ns=10.0, distribution=JitterDistribution.GAUSSIAN)
    draws = np.array([sync.draw(np.random.default_rng(i)) for i in range(2000)])
    assert draws.std() == pytest.approx(5e-9, rel=0.1)


def test_jitter_is_reproducible_per_snapshot(free_scene):
    sync = SyncModel(precision_ns=10.0)
    first = _measure_all(free_scene, sync, seed=7, index=3)
    again = _measure_all(free_scene, sync, seed=7, index=3)
    other = _measure_all(free_scene, sync, seed=7, index=4)
    assert [m.toa for m in first] == [m.toa for m in again]
    assert [m.jitter_s for m in first] != [m.jitter_s for m in other]
    assert all(abs(m.jitter_s) <= 5e-9 for m in first + other)


def test_diffracted_first_arrival_reports_excess_length():
    scene = Scene(
        bounds=BIG,
        obstacles=(Obstacle("crate", box_faces((4, -1, 0), (6, 1, 2)), METAL),),
        base_stations=(BaseStation(1, (0.0, 0.0, 3.0)),),
        pois=(PointOfInterest(1, (10.0, 0.0, 1.0)),),
    )
    m = synthesize_toa(scene, CBAND, scene.base_stations[0], scene.pois[0], 0.0, NO_JITTER, SCHED, 0)
    assert m.first_mpc_category is MpcCategory.DIFFRACTION
    assert m.excess_length_m == pytest.approx(math.sqrt(37.0) + math.sqrt(17.0) - math.sqrt(104.0))
    assert m.co_first_categories[0] is MpcCategory.DIFFRACTION


def test_blocked_link_is_unreachable():
    forklift = MovingObstacle("forklift", (3.0, 1.2, 2.5), ((5.0, -10.0), (5.0, 10.0)), 1.0, METAL)
    scene = Scene(
        bounds=Bounds((-50.0, -50.0, 0.0), (50.0, 50.0, 10.0)),
        base_stations=(BaseStation(1, (0.0, 0.0, 1.0)),),
        pois=(PointOfInterest(1, (10.0, 0.0, 1.0)),),
        movers=(forklift,),
    )
    bs, poi = scene.base_stations[0], scene.pois[0]
    assert synthesize_toa(scene, CBAND, bs, poi, 0.0, NO_JITTER, SCHED, 0).toa > 0
    with pytest.raises(UnreachableError) as err:
        synthesize_toa(scene, CBAND, bs, poi, 10.0, NO_JITTER, SCHED, 0)
    assert (err.value.bs_id, err.value.poi_id, err.value.t) == (1, 1, 10.0)


def test_tdoa_recovers_range_differences(free_scene):
    poi = free_scene.pois[0].ground_truth
    tdoa = compute_tdoa(_measure_all(free_scene), 1, SCHED)
    ref = math.dist(free_scene.base_station(1).position, poi)
    assert tdoa.reference_bs == 1
    assert tdoa.bs_ids == (2, 3, 4)
    for k, d in tdoa.as_dict().items():
        expected = math.dist(free_scene.base_station(k).position, poi) - ref
        assert d == pytest.approx(expected, abs=1e-6)
    assert tdoa.absolute == tuple(abs(d) for d in tdoa.signed)


@pytest.mark.parametrize("delta_ms, tol", [(0.0, 1e-12), (10.0, 1e-6)])
def test_changing_reference_shifts_differences(free_scene, delta_ms, tol):
    sched = TransmissionSchedule(delta_ms=delta_ms)
    ms = _measure_all(free_scene, sched=sched)
    by_one = compute_tdoa(ms, 1, sched).as_dict()
    by_three = compute_tdoa(ms, 3, sched).as_dict()
    shift = by_one[3]
    for k in (2, 4):
        assert by_three[k] == pytest.approx(by_one[k] - shift, abs=tol)
    assert by_three[1] == pytest.approx(-shift, abs=tol)


def test_tdoa_input_errors():
    ms = [_toa(1, 1e-7), _toa(2, 2e-7), _toa(3, 3e-7)]
    with pytest.raises(MeasurementError, match="K < 3"):
        compute_tdoa(ms[:2], 1, SCHED)
    with pytest.raises(MeasurementError, match="duplicate"):
        compute_tdoa(ms + [_toa(2, 2e-7)], 1, SCHED)
    with pytest.raises(MeasurementError, match="reference"):
        compute_tdoa(ms, 4, SCHED)
