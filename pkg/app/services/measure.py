import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.config import (
    DEFAULT_BS_SPACING_MS,
    DEFAULT_SYNC_PRECISION_NS,
    SPEED_OF_LIGHT,
    BandConfig,
)
from app.errors import MeasurementError, UnreachableError
from app.scene import BaseStation, PointOfInterest, Scene
from app.services.raytrace import MpcCategory, PropagationPath, co_first_arrivals, trace_all
from app.utils.common import keyed_rng

log = logging.getLogger("raypos.measure")


class JitterDistribution(str, Enum):
    UNIFORM = "uniform"
    GAUSSIAN = "gaussian"


class SyncModel(BaseModel):
    """Inter-BS synchronization error, redrawn per BS per snapshot."""

    model_config = ConfigDict(frozen=True)

    precision_ns: float = Field(default=DEFAULT_SYNC_PRECISION_NS, ge=0)
    distribution: JitterDistribution = JitterDistribution.UNIFORM

    def draw(self, rng: np.random.Generator) -> float:
        half = self.precision_ns * 1e-9 / 2.0
        if half == 0.0:
            return 0.0
        if self.distribution is JitterDistribution.GAUSSIAN:
            return float(rng.normal(0.0, half))
        return float(rng.uniform(-half, half))


class TransmissionSchedule(BaseModel):
    """BS k transmits at (k - 1) * delta after BS 1."""

    model_config = ConfigDict(frozen=True)

    delta_ms: float = Field(default=DEFAULT_BS_SPACING_MS, ge=0)

    @property
    def delta_s(self) -> float:
        return self.delta_ms * 1e-3

    def offset_s(self, bs_id: int) -> float:
        return (bs_id - 1) * self.delta_s

    def spacing_s(self, bs_id: int, reference_bs: int) -> float:
        return (bs_id - reference_bs) * self.delta_s


@dataclass(frozen=True)
class ToAMeasurement:
    bs_id: int
    poi_id: int
    snapshot_t: float
    toa: float
    first_mpc_category: MpcCategory
    excess_length_m: float
    total_length_m: float
    offset_s: float = 0.0
    jitter_s: float = 0.0
    # every category tied at the first arrival, best path first
    co_first_categories: Tuple[MpcCategory, ...] = ()

    @property
    def geometric_toa(self) -> float:
        return self.total_length_m / SPEED_OF_LIGHT


def measurement_from_paths(
    paths: Sequence[PropagationPath],
    bs: BaseStation,
    poi: PointOfInterest,
    t: float,
    sync: SyncModel,
    sched: TransmissionSchedule,
    rng_seed: int,
    snapshot_index: int = 0,
) -> ToAMeasurement:
    if not paths:
        raise UnreachableError(bs.id, poi.id, t)
    tied = co_first_arrivals(paths)
    first = tied[0]
    if len(tied) > 1:
        log.debug("BS %d -> PoI %d at t=%.3f: %d co-first arrivals", bs.id, poi.id, t, len(tied))
    direct = float(np.linalg.norm(np.subtract(poi.ground_truth, bs.position)))
    jitter = sync.draw(keyed_rng(rng_seed, bs.id, poi.id, snapshot_index))
    offset = sched.offset_s(bs.id)
    return ToAMeasurement(
        bs_id=bs.id,
        poi_id=poi.id,
        snapshot_t=t,
        toa=first.toa + offset + jitter,
        first_mpc_category=first.category,
        excess_length_m=max(first.total_length - direct, 0.0),
        total_length_m=first.total_length,
        offset_s=offset,
        jitter_s=jitter,
        co_first_categories=tuple(p.category for p in tied),
    )


def synthesize_toa(
    scene: Scene,
    band: BandConfig,
    bs: BaseStation,
    poi: PointOfInterest,
    t: float,
    sync: SyncModel,
    sched: TransmissionSchedule,
    rng_seed: int,
    snapshot_index: int = 0,
) -> ToAMeasurement:
    paths = trace_all(scene, bs.position, poi.ground_truth, t, band, bs.tx_power_dbm)
    return measurement_from_paths(paths, bs, poi, t, sync, sched, rng_seed, snapshot_index)


@dataclass(frozen=True)
class RangeDifferences:
    """Signed range differences c*((tau_k - tau_e) - delta_ke) for k != e, ascending k."""

    reference_bs: int
    bs_ids: Tuple[int, ...]
    signed: Tuple[float, ...]

    @property
    def absolute(self) -> Tuple[float, ...]:
        return tuple(abs(d) for d in self.signed)

    def as_dict(self) -> Dict[int, float]:
        return dict(zip(self.bs_ids, self.signed))


def compute_tdoa(
    measurements: Iterable[ToAMeasurement],
    reference_bs: int,
    sched: TransmissionSchedule,
) -> RangeDifferences:
    by_bs: Dict[int, ToAMeasurement] = {}
    for m in measurements:
        if m.bs_id in by_bs:
            raise MeasurementError(f"duplicate measurement for BS {m.bs_id}")
        by_bs[m.bs_id] = m
    if len(by_bs) < 3:
        raise MeasurementError(f"K < 3: only {len(by_bs)} measurements")
    ref: Optional[ToAMeasurement] = by_bs.get(reference_bs)
    if ref is None:
        raise MeasurementError(f"no measurement for reference BS {reference_bs}")

    ids = tuple(sorted(k for k in by_bs if k != reference_bs))
    signed = tuple(
        SPEED_OF_LIGHT * ((by_bs[k].toa - ref.toa) - sched.spacing_s(k, reference_bs))
        for k in ids
    )
    return RangeDifferences(reference_bs, ids, signed)
