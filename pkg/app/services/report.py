import logging
from typing import Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict

from app.errors import ReportError
from app.services.emulate import PoiResult, RunConfig, mpc_distribution

log = logging.getLogger("raypos.report")

PERCENTILES = (50, 80, 90, 95)
# (name, error threshold m, required fraction of PoIs)
REQUIREMENTS = (
    ("3gpp-rel16", 3.0, 0.80),
    ("3gpp-rel17", 1.0, 0.90),
)


class _Model(BaseModel):
    model_config = ConfigDict(frozen=True)


class RunMetadata(_Model):
    band: str
    setup: str
    seed: int
    config_digest: str
    center_frequency_hz: float
    n_snapshots: int
    snapshot_interval_s: float
    sync_precision_ns: float
    jitter: str
    aggregation: str
    reference_bs: Optional[int] = None


class PoiSummary(_Model):
    poi_id: int
    x_true: float
    y_true: float
    x_est: Optional[float] = None
    y_est: Optional[float] = None
    mean_error_m: Optional[float] = None
    unreachable_snapshots: int
    unreachable_entries: int
    converged_snapshots: int
    first_mpc_counts: Dict[str, int]


class CdfPoint(_Model):
    error_m: float
    cumulative_fraction: float


class RequirementCheck(_Model):
    name: str
    threshold_m: float
    required_fraction: float
    achieved_fraction: float
    passed: bool


class EmulationReport(_Model):
    metadata: RunMetadata
    per_poi: List[PoiSummary]
    cdf: List[CdfPoint]
    percentiles: Dict[str, float]
    average_error_m: float
    mpc_histogram: Dict[str, int]
    requirements: List[RequirementCheck]
    snapshot_cdf: Optional[List[CdfPoint]] = None
    snapshot_percentiles: Optional[Dict[str, float]] = None


def percentile(errors: Sequence[float], q: float) -> float:
    """Linear interpolation between order statistics."""
    if len(errors) == 0:
        raise ReportError("percentile of an empty error set")
    return float(np.percentile(np.asarray(errors, dtype=float), q, method="linear"))


def cdf(errors: Sequence[float]) -> List[CdfPoint]:
    ordered = sorted(float(e) for e in errors)
    n = len(ordered)
    return [CdfPoint(error_m=e, cumulative_fraction=(i + 1) / n) for i, e in enumerate(ordered)]


def percentile_table(errors: Sequence[float]) -> Dict[str, float]:
    return {str(q): percentile(errors, q) for q in PERCENTILES}


def requirement_checks(results: Sequence[PoiResult]) -> List[RequirementCheck]:
    """Share of all PoIs under each threshold; PoIs without an estimate count as misses."""
    checks = []
    for name, threshold, required in REQUIREMENTS:
        hits = sum(1 for r in results if r.usable and r.mean_error_m < threshold)
        achieved = hits / len(results)
        checks.append(RequirementCheck(
            name=name,
            threshold_m=threshold,
            required_fraction=required,
            achieved_fraction=achieved,
            passed=achieved >= required,
        ))
    return checks


def _summary(r: PoiResult) -> PoiSummary:
    totals: Dict[str, int] = {}
    for per_bs in r.first_mpc_counts.values():
        for category, n in per_bs.items():
            totals[category.value] = totals.get(category.value, 0) + n
    return PoiSummary(
        poi_id=r.poi_id,
        x_true=r.ground_truth[0],
        y_true=r.ground_truth[1],
        x_est=r.mean_position[0] if r.mean_position else None,
        y_est=r.mean_position[1] if r.mean_position else None,
        mean_error_m=r.mean_error_m,
        unreachable_snapshots=r.unreachable_snapshots,
        unreachable_entries=r.unreachable_entries,
        converged_snapshots=r.converged_snapshots,
        first_mpc_counts=totals,
    )


def build_report(results: Sequence[PoiResult], config: RunConfig, per_snapshot_cdf: bool = False) -> EmulationReport:
    errors = [r.mean_error_m for r in results if r.usable]
    if not errors:
        raise ReportError("no PoI produced a usable position estimate")

    snapshot_errors = [e for r in results for e in r.per_snapshot_errors]
    metadata = RunMetadata(
        band=config.band.name.value,
        setup=config.setup.value,
        seed=config.run_seed,
        config_digest=config.digest(),
        center_frequency_hz=config.band.center_frequency_hz,
        n_snapshots=config.n_snapshots,
        snapshot_interval_s=config.snapshot_interval_s,
        sync_precision_ns=config.sync.precision_ns,
        jitter=config.sync.distribution.value,
        aggregation=config.aggregation.value,
        reference_bs=config.reference_bs,
    )
    report = EmulationReport(
        metadata=metadata,
        per_poi=[_summary(r) for r in sorted(results, key=lambda r: r.poi_id)],
        cdf=cdf(errors),
        percentiles=percentile_table(errors),
        average_error_m=float(np.mean(errors)),
        mpc_histogram={c.value: n for c, n in mpc_distribution(results).items()},
        requirements=requirement_checks(results),
        snapshot_cdf=cdf(snapshot_errors) if per_snapshot_cdf and snapshot_errors else None,
        snapshot_percentiles=percentile_table(snapshot_errors) if per_snapshot_cdf and snapshot_errors else None,
    )
    log.info(
        "Report %s/%s: average %.3f m, p90 %.3f m over %d PoIs",
        metadata.band, metadata.setup, report.average_error_m, report.percentiles["90"], len(errors),
    )
    return report
