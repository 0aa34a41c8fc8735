"""Full emulation runs: snapshots x PoIs x BSs through trace -> measure -> locate.

Work is split per PoI. Each worker traces the static paths of its K links once,
then filters them by the forklift boxes of every snapshot. Results are reduced
in PoI order so serial and parallel runs are identical.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from functools import partial
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from tqdm import tqdm

from app.config import (
    CBAND,
    DEFAULT_DURATION_S,
    DEFAULT_SNAPSHOT_INTERVAL_S,
    BandConfig,
)
from app.errors import GeometryError
from app.scene import PointOfInterest, Scene, mover_boxes_at
from app.services.locate import PositionEstimate, SolverConfig, error_2d, solve
from app.services.measure import (
    SyncModel,
    ToAMeasurement,
    TransmissionSchedule,
    compute_tdoa,
    measurement_from_paths,
)
from app.services.raytrace import LinkPaths, MpcCategory, PropagationPath, trace_link
from app.utils.common import digest

log = logging.getLogger("raypos.emulate")

MIN_BASE_STATIONS = 3


class Setup(str, Enum):
    STATIC = "static"
    DYNAMIC = "dynamic"


class Aggregation(str, Enum):
    POSITIONS = "positions"
    TDOA = "tdoa"


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    band: BandConfig = CBAND
    setup: Setup = Setup.STATIC
    duration_s: float = Field(default=DEFAULT_DURATION_S, gt=0)
    snapshot_interval_s: float = Field(default=DEFAULT_SNAPSHOT_INTERVAL_S, gt=0)
    run_seed: int = Field(default=0, ge=0)
    sync: SyncModel = SyncModel()
    sched: TransmissionSchedule = TransmissionSchedule()
    solver: SolverConfig = SolverConfig()
    # None: lowest BS id
    reference_bs: Optional[int] = None
    aggregation: Aggregation = Aggregation.POSITIONS
    workers: int = Field(default=1, ge=1, exclude=True)

    @model_validator(mode="after")
    def _at_least_one_snapshot(self):
        if self.n_snapshots < 1:
            raise ValueError("duration_s / snapshot_interval_s gives no snapshot")
        return self

    @property
    def n_snapshots(self) -> int:
        return int(math.floor(self.duration_s / self.snapshot_interval_s + 1e-9))

    def snapshot_times(self) -> List[float]:
        return [i * self.snapshot_interval_s for i in range(self.n_snapshots)]

    def digest(self) -> str:
        return digest(self.model_dump(mode="json"))


@dataclass(frozen=True)
class PoiResult:
    poi_id: int
    ground_truth: Tuple[float, float]
    mean_position: Optional[Tuple[float, float]]
    mean_error_m: Optional[float]
    per_snapshot_errors: Tuple[float, ...]
    # bs_id -> category -> count of first arrivals, co-first arrivals included
    first_mpc_counts: Dict[int, Dict[MpcCategory, int]]
    unreachable_snapshots: int
    unreachable_entries: int = 0
    converged_snapshots: int = 0

    @property
    def usable(self) -> bool:
        return self.mean_error_m is not None


@dataclass(frozen=True)
class PathRecord:
    bs_id: int
    poi_id: int
    snapshot_t: float
    category: str
    n_interactions: int
    total_length_m: float
    toa_ns: float
    rx_power_dbm: float
    interaction_kinds: str


@dataclass(frozen=True)
class MeasurementRecord:
    bs_id: int
    poi_id: int
    snapshot_t: float
    toa_ns: float
    excess_length_m: float
    category: str


@dataclass
class RunOutput:
    results: List[PoiResult]
    paths: List[PathRecord] = field(default_factory=list)
    measurements: List[MeasurementRecord] = field(default_factory=list)


def _path_records(paths: Sequence[PropagationPath], bs_id: int, poi_id: int, t: float) -> List[PathRecord]:
    return [
        PathRecord(
            bs_id=bs_id,
            poi_id=poi_id,
            snapshot_t=t,
            category=p.category.value,
            n_interactions=p.n_interactions,
            total_length_m=p.total_length,
            toa_ns=p.toa * 1e9,
            rx_power_dbm=p.rx_power_dbm,
            interaction_kinds=p.interaction_kinds,
        )
        for p in paths
    ]


def _measurement_record(m: ToAMeasurement) -> MeasurementRecord:
    return MeasurementRecord(
        bs_id=m.bs_id,
        poi_id=m.poi_id,
        snapshot_t=m.snapshot_t,
        toa_ns=m.toa * 1e9,
        excess_length_m=m.excess_length_m,
        category=m.first_mpc_category.value,
    )


def _solve_snapshot(
    scene: Scene, config: RunConfig, measurements: Dict[int, ToAMeasurement], reference: int
) -> Optional[PositionEstimate]:
    rd = compute_tdoa(measurements.values(), reference, config.sched)
    ids = (reference,) + rd.bs_ids
    positions = [scene.base_station(i).xy for i in ids]
    try:
        return solve(rd.signed, positions, 0, config.solver, scene.area_of_interest)
    except GeometryError as e:
        log.debug("snapshot solve skipped: %s", e)
        return None


def _run_poi(scene: Scene, config: RunConfig, detailed: bool, poi: PointOfInterest) -> RunOutput:
    stations = sorted(scene.base_stations, key=lambda b: b.id)
    ref_default = config.reference_bs if config.reference_bs is not None else stations[0].id
    links: Dict[int, LinkPaths] = {
        bs.id: trace_link(scene, bs.position, poi.ground_truth, config.band, bs.tx_power_dbm)
        for bs in stations
    }
    counts = {bs.id: {c: 0 for c in MpcCategory} for bs in stations}
    last_keys: Dict[int, Tuple] = {}
    estimates: List[PositionEstimate] = []
    tdoa_sums: Dict[int, List[float]] = {}
    unreachable_snapshots = 0
    unreachable_entries = 0
    diverged = 0
    out = RunOutput(results=[])

    for i, t in enumerate(config.snapshot_times()):
        boxes = mover_boxes_at(scene, t) if scene.movers else []
        snapshot: Dict[int, ToAMeasurement] = {}
        for bs in stations:
            paths = links[bs.id].visible(boxes)
            if detailed:
                keys = tuple(p.key for p in paths)
                if i == 0 or keys != last_keys.get(bs.id):
                    out.paths.extend(_path_records(paths, bs.id, poi.id, t))
                last_keys[bs.id] = keys
            if not paths:
                unreachable_entries += 1
                continue
            m = measurement_from_paths(
                paths, bs, poi, t, config.sync, config.sched, config.run_seed, i
            )
            for category in m.co_first_categories:
                counts[bs.id][category] += 1
            snapshot[bs.id] = m
            if detailed:
                out.measurements.append(_measurement_record(m))

        if len(snapshot) < MIN_BASE_STATIONS:
            unreachable_snapshots += 1
            continue

        if config.aggregation is Aggregation.TDOA:
            if ref_default not in snapshot:
                unreachable_snapshots += 1
                continue
            rd = compute_tdoa(snapshot.values(), ref_default, config.sched)
            for k, d in rd.as_dict().items():
                tdoa_sums.setdefault(k, []).append(d)
            continue

        reference = ref_default if ref_default in snapshot else min(snapshot)
        est = _solve_snapshot(scene, config, snapshot, reference)
        if est is not None and est.converged:
            estimates.append(est)
        elif est is not None:
            diverged += 1

    if diverged:
        log.warning("PoI %d: solver did not converge in %d snapshot(s)", poi.id, diverged)
    truth = poi.xy
    if config.aggregation is Aggregation.TDOA:
        mean_position, errors, converged = _solve_averaged(scene, config, ref_default, tdoa_sums)
    else:
        converged = len(estimates)
        errors = tuple(error_2d(e, truth) for e in estimates)
        mean_position = None
        if estimates:
            mean = np.mean([e.position for e in estimates], axis=0)
            mean_position = (float(mean[0]), float(mean[1]))

    mean_error = error_2d(mean_position, truth) if mean_position is not None else None
    if mean_error is None:
        log.warning("PoI %d has no usable snapshot", poi.id)
    out.results.append(PoiResult(
        poi_id=poi.id,
        ground_truth=truth,
        mean_position=mean_position,
        mean_error_m=mean_error,
        per_snapshot_errors=errors,
        first_mpc_counts=counts,
        unreachable_snapshots=unreachable_snapshots,
        unreachable_entries=unreachable_entries,
        converged_snapshots=converged,
    ))
    return out


def _solve_averaged(
    scene: Scene, config: RunConfig, reference: int, sums: Dict[int, List[float]]
) -> Tuple[Optional[Tuple[float, float]], Tuple[float, ...], int]:
    ids = sorted(sums)
    if len(ids) < MIN_BASE_STATIONS - 1:
        return None, (), 0
    observed = [math.fsum(sums[k]) / len(sums[k]) for k in ids]
    positions = [scene.base_station(i).xy for i in [reference] + ids]
    try:
        est = solve(observed, positions, 0, config.solver, scene.area_of_interest)
    except GeometryError as e:
        log.debug("averaged solve skipped: %s", e)
        return None, (), 0
    if not est.converged:
        return None, (), 0
    return est.position, (), 1


def run_detailed(scene: Scene, config: RunConfig, progress: bool = False, detailed: bool = True) -> RunOutput:
    if config.setup is Setup.STATIC:
        scene = scene.without_movers()
    scene.geometry  # compile once before pickling to the workers
    pois = sorted(scene.pois, key=lambda p: p.id)
    log.info(
        "Run %s/%s seed=%d: %d PoIs x %d BSs x %d snapshots, %d worker(s)",
        config.band.name.value, config.setup.value, config.run_seed,
        len(pois), len(scene.base_stations), config.n_snapshots, config.workers,
    )
    work = partial(_run_poi, scene, config, detailed)
    bar = tqdm(total=len(pois), desc="PoIs", unit="poi", disable=not progress)
    merged = RunOutput(results=[])
    try:
        if config.workers > 1:
            with ProcessPoolExecutor(max_workers=config.workers) as pool:
                parts = pool.map(work, pois)
                for part in parts:
                    _merge(merged, part)
                    bar.update(1)
        else:
            for poi in pois:
                _merge(merged, work(poi))
                bar.update(1)
    finally:
        bar.close()

    usable = sum(1 for r in merged.results if r.usable)
    log.info("Run finished: %d/%d PoIs with a position estimate", usable, len(pois))
    return merged


def _merge(into: RunOutput, part: RunOutput):
    into.results.extend(part.results)
    into.paths.extend(part.paths)
    into.measurements.extend(part.measurements)


def run(scene: Scene, config: RunConfig, progress: bool = False) -> List[PoiResult]:
    return run_detailed(scene, config, progress=progress, detailed=False).results


def mpc_distribution(results: Sequence[PoiResult]) -> Dict[MpcCategory, int]:
    totals = {c: 0 for c in MpcCategory}
    for r in results:
        for per_bs in r.first_mpc_counts.values():
            for category, n in per_bs.items():
                totals[category] += n
    return totals
