import pytest
from pydantic import ValidationError

from app.scene import BaseStation, Bounds, MovingObstacle, Obstacle, PointOfInterest, Scene, box_faces
from app.services.emulate import (
    Aggregation,
    RunConfig,
    Setup,
    mpc_distribution,
    run,
    run_detailed,
)
from app.services.measure import SyncModel
from app.services.raytrace import MpcCategory
from tests.conftest import BIG, CONCRETE, METAL, square_stations

NO_JITTER = SyncModel(precision_ns=0.0)
ROOM = Bounds((-50.0, -50.0, 0.0), (50.0, 50.0, 10.0))


@pytest.fixture
def flat_scene() -> Scene:
    """Base stations at PoI height so noise-free differences pin the PoI exactly."""
    pois = (
        PointOfInterest(1, (10.0, 12.0, 1.0)),
        PointOfInterest(2, (3.5, 20.0, 1.0)),
        PointOfInterest(3, (25.0, 4.0, 1.0)),
    )
    return Scene(bounds=BIG, base_stations=square_stations(z=1.0), pois=pois)


@pytest.fixture
def forklift_scene() -> Scene:
    """BS 1 loses line of sight while the forklift crosses it; a wall keeps a reflection."""
    wall = ((-5.0, 14.0, 0.0), (12.0, 14.0, 0.0), (12.0, 14.0, 5.0), (-5.0, 14.0, 5.0))
    return Scene(
        bounds=ROOM,
        obstacles=(Obstacle("wall", (wall,), CONCRETE, closed=False),),
        base_stations=(
            BaseStation(1, (0.0, 10.25, 1.0)),
            BaseStation(2, (20.0, 0.0, 1.0)),
            BaseStation(3, (20.0, 20.0, 1.0)),
            BaseStation(4, (10.0, -5.0, 1.0)),
        ),
        pois=(PointOfInterest(1, (10.0, 10.25, 1.0)),),
        movers=(MovingObstacle("forklift", (3.0, 1.2, 2.5), ((5.0, 0.0), (5.0, 20.0)), 1.0, METAL),),
    )


@pytest.fixture
def shielded_scene() -> Scene:
    """A floor-to-ceiling slab hides BS 1 from the only PoI."""
    return Scene(
        bounds=Bounds((-300.0, -300.0, 0.0), (300.0, 300.0, 10.0)),
        obstacles=(Obstacle("slab", box_faces((4, -200, 0), (6, 200, 10)), METAL),),
        base_stations=(
            BaseStation(1, (0.0, 0.0, 1.0)),
            BaseStation(2, (20.0, -10.0, 1.0)),
            BaseStation(3, (20.0, 10.0, 1.0)),
        ),
        pois=(PointOfInterest(1, (10.0, 0.0, 1.0)),),
    )


def test_snapshot_count():
    assert RunConfig().n_snapshots == 600
    config = RunConfig(duration_s=1.0, snapshot_interval_s=0.1)
    assert config.n_snapshots == 10
    assert config.snapshot_times()[-1] == pytest.approx(0.9)


def test_run_needs_a_snapshot():
    with pytest.raises(ValidationError):
        RunConfig(duration_s=0.05, snapshot_interval_s=0.1)


def test_digest_ignores_workers():
    assert RunConfig(workers=4).digest() == RunConfig().digest()
    assert RunConfig(run_seed=1).digest() != RunConfig().digest()


def test_static_noise_free_run_recovers_pois(flat_scene):
    config = RunConfig(duration_s=1.0, snapshot_interval_s=0.5, sync=NO_JITTER)
    results = run(flat_scene, config)
    assert [r.poi_id for r in results] == [1, 2, 3]
    for r in results:
        assert r.usable
        assert r.mean_error_m < 1e-4
        assert r.converged_snapshots == 2
        assert len(r.per_snapshot_errors) == 2
        assert r.unreachable_snapshots == 0
        assert all(c[MpcCategory.LOS] == 2 for c in r.first_mpc_counts.values())


def test_jittered_run_is_reproducible(flat_scene):
    config = RunConfig(duration_s=5.0, snapshot_interval_s=0.25, run_seed=11)
    first = run(flat_scene, config)
    assert first == run(flat_scene, config)
    assert any(r.mean_error_m > 1e-6 for r in first)
    assert all(r.mean_error_m < 2.0 for r in first)


def test_parallel_run_matches_serial(flat_scene):
    config = RunConfig(duration_s=2.0, snapshot_interval_s=0.5, run_seed=3)
    assert run(flat_scene, config.model_copy(update={"workers": 2})) == run(flat_scene, config)


def test_forklift_switches_first_arrival_to_reflection(forklift_scene):
    config = RunConfig(setup=Setup.DYNAMIC, duration_s=12.0, snapshot_interval_s=0.5, sync=NO_JITTER)
    (dynamic,) = run(forklift_scene, config)
    counts = dynamic.first_mpc_counts
    assert counts[1][MpcCategory.LOS] == 18
    assert counts[1][MpcCategory.REFLECTION] == 6
    assert sum(counts[1].values()) == config.n_snapshots
    for bs_id in (2, 3, 4):
        assert counts[bs_id][MpcCategory.LOS] == config.n_snapshots
    assert dynamic.unreachable_snapshots == 0

    (static,) = run(forklift_scene, config.model_copy(update={"setup": Setup.STATIC}))
    assert static.first_mpc_counts[1][MpcCategory.LOS] == config.n_snapshots
    assert dynamic.mean_error_m > static.mean_error_m


def test_detailed_run_records_paths_and_measurements(forklift_scene):
    config = RunConfig(setup=Setup.DYNAMIC, duration_s=12.0, snapshot_interval_s=0.5, sync=NO_JITTER)
    output = run_detailed(forklift_scene, config)
    assert len(output.measurements) == 4 * config.n_snapshots
    assert {r.category for r in output.measurements if r.bs_id == 1} == {"LoS", "Reflection"}
    # BS 1 paths are dumped at t=0 and again when the forklift cuts the line of sight
    assert sorted({r.snapshot_t for r in output.paths if r.bs_id == 1}) == [0.0, 9.0]
    assert {r.category for r in output.paths if r.bs_id == 1 and r.snapshot_t == 9.0} == {"Reflection"}


def test_shielded_poi_is_never_usable(shielded_scene):
    config = RunConfig(duration_s=1.0, snapshot_interval_s=0.5, sync=NO_JITTER)
    (result,) = run(shielded_scene, config)
    assert not result.usable
    assert result.mean_position is None
    assert result.unreachable_snapshots == 2
    assert result.unreachable_entries == 2
    assert sum(result.first_mpc_counts[1].values()) == 0


def test_tdoa_aggregation_solves_once(flat_scene):
    config = RunConfig(
        duration_s=5.0, snapshot_interval_s=0.1, run_seed=4, aggregation=Aggregation.TDOA
    )
    results = run(flat_scene, config)
    for r in results:
        assert r.usable
        assert r.per_snapshot_errors == ()
        assert r.converged_snapshots == 1
        assert r.mean_error_m < 1.0


def test_explicit_reference_bs(flat_scene):
    config = RunConfig(duration_s=1.0, snapshot_interval_s=0.5, sync=NO_JITTER, reference_bs=3)
    assert all(r.mean_error_m < 1e-4 for r in run(flat_scene, config))


def test_mpc_distribution_covers_every_category(flat_scene):
    config = RunConfig(duration_s=1.0, snapshot_interval_s=0.5, sync=NO_JITTER)
    totals = mpc_distribution(run(flat_scene, config))
    assert set(totals) == set(MpcCategory)
    assert totals[MpcCategory.LOS] == 3 * 4 * 2
    assert sum(totals.values()) == totals[MpcCategory.LOS]


def test_dynamic_run_without_movers_matches_static(forklift_scene):
    config = RunConfig(duration_s=12.0, snapshot_interval_s=0.5, run_seed=5)
    static = run(forklift_scene, config)
    dynamic = run(forklift_scene.without_movers(), config.model_copy(update={"setup": Setup.DYNAMIC}))
    assert dynamic == static


def test_static_first_arrivals_do_not_change_over_time(forklift_scene):
    config = RunConfig(duration_s=12.0, snapshot_interval_s=0.5, run_seed=5)
    output = run_detailed(forklift_scene, config)
    assert len(output.measurements) == 4 * config.n_snapshots
    for bs_id in (1, 2, 3, 4):
        rows = [r for r in output.measurements if r.bs_id == bs_id]
        assert len({r.category for r in rows}) == 1
        assert len({r.excess_length_m for r in rows}) == 1
    # paths are dumped once per link since nothing moves
    assert {r.snapshot_t for r in output.paths} == {0.0}
