"""2D hyperbolic position solve from signed range differences."""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.errors import GeometryError
from app.scene import Rect
from app.utils.geometry import Point2

log = logging.getLogger("raypos.locate")

COINCIDENT_M = 1e-9
GRADIENT_TOL = 1e-9
MAX_CONDITION = 1e12
MAX_DAMPING = 1e16


class InitStrategy(str, Enum):
    BS_CENTROID = "bs_centroid"
    AOI_CENTER = "aoi_center"
    EXPLICIT = "explicit"


class SolverConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    max_iterations: int = Field(default=100, ge=1)
    step_tolerance_m: float = Field(default=1e-6, gt=0)
    initial_damping: float = Field(default=1e-3, gt=0)
    init_strategy: InitStrategy = InitStrategy.BS_CENTROID
    initial_point: Optional[Tuple[float, float]] = None

    @model_validator(mode="after")
    def _explicit_needs_point(self):
        if self.init_strategy is InitStrategy.EXPLICIT and self.initial_point is None:
            raise ValueError("init_strategy 'explicit' requires initial_point")
        return self


@dataclass(frozen=True)
class PositionEstimate:
    position: Point2
    residual_norm_m: float
    iterations: int
    converged: bool
    # cost after the start point and every accepted step
    cost_history: Tuple[float, ...] = ()


def _layout(bs_positions, reference: int) -> Tuple[np.ndarray, np.ndarray]:
    pos = np.asarray(bs_positions, dtype=float).reshape(-1, 2)
    if not 0 <= reference < len(pos):
        raise IndexError(f"reference row {reference} out of range for {len(pos)} base stations")
    others = np.delete(np.arange(len(pos)), reference)
    return pos, others


def _distances(p: np.ndarray, pos: np.ndarray) -> np.ndarray:
    d = np.linalg.norm(pos - p, axis=1)
    if np.any(d < COINCIDENT_M):
        raise GeometryError(f"position {tuple(p)} coincides with a base station")
    return d


def residuals(position: Sequence[float], bs_positions, reference: int, observed: Sequence[float]) -> np.ndarray:
    p = np.asarray(position, dtype=float)[:2]
    pos, others = _layout(bs_positions, reference)
    obs = np.asarray(observed, dtype=float)
    if len(obs) != len(others):
        raise ValueError(f"expected {len(others)} observations, got {len(obs)}")
    d = _distances(p, pos)
    return obs - (d[others] - d[reference])


def jacobian(position: Sequence[float], bs_positions, reference: int) -> np.ndarray:
    p = np.asarray(position, dtype=float)[:2]
    pos, others = _layout(bs_positions, reference)
    d = _distances(p, pos)
    units = (p - pos) / d[:, None]
    return -(units[others] - units[reference])


def _check_layout(pos: np.ndarray):
    if len(pos) < 3:
        raise GeometryError("K < 3: at least three base stations are required")
    gaps = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=2)
    gaps[np.diag_indices(len(pos))] = np.inf
    if np.min(gaps) < COINCIDENT_M:
        raise GeometryError("two base stations coincide")
    sv = np.linalg.svd(pos - pos.mean(axis=0), compute_uv=False)
    if sv[-1] <= sv[0] / MAX_CONDITION:
        raise GeometryError("base stations are collinear")


def _start(pos: np.ndarray, config: SolverConfig, aoi: Optional[Rect]) -> np.ndarray:
    if config.init_strategy is InitStrategy.EXPLICIT:
        return np.asarray(config.initial_point, dtype=float)
    if config.init_strategy is InitStrategy.AOI_CENTER and aoi is not None:
        return np.asarray(aoi.center, dtype=float)
    if config.init_strategy is InitStrategy.AOI_CENTER:
        return (pos.min(axis=0) + pos.max(axis=0)) / 2.0
    return pos.mean(axis=0)


def _clamp_box(pos: np.ndarray, aoi: Optional[Rect]) -> Tuple[np.ndarray, np.ndarray]:
    if aoi is not None:
        lo, hi = np.asarray(aoi.min, dtype=float), np.asarray(aoi.max, dtype=float)
    else:
        lo, hi = pos.min(axis=0), pos.max(axis=0)
    center = (lo + hi) / 2.0
    half = np.maximum(hi - lo, 1.0)
    return center - half, center + half


def solve(
    observed: Sequence[float],
    bs_positions,
    reference: int = 0,
    config: SolverConfig = SolverConfig(),
    aoi: Optional[Rect] = None,
) -> PositionEstimate:
    """Levenberg-damped Gauss-Newton on 0.5 * |r|^2; returns the best iterate seen."""
    pos = np.asarray(bs_positions, dtype=float).reshape(-1, 2)
    _check_layout(pos)
    obs = np.asarray(observed, dtype=float)
    if len(obs) != len(pos) - 1:
        raise ValueError(f"expected {len(pos) - 1} observations, got {len(obs)}")

    lo, hi = _clamp_box(pos, aoi)
    p = np.clip(_start(pos, config, aoi), lo, hi)
    J = jacobian(p, pos, reference)
    if np.linalg.cond(J) > MAX_CONDITION:
        raise GeometryError("base stations are collinear as seen from the start point")

    r = residuals(p, pos, reference, obs)
    cost = 0.5 * float(r @ r)
    history = [cost]
    lam = config.initial_damping
    converged = False
    it = 0
    for it in range(1, config.max_iterations + 1):
        J = jacobian(p, pos, reference)
        grad = J.T @ r
        if np.linalg.norm(grad) < GRADIENT_TOL:
            converged = True
            break
        A = J.T @ J + lam * np.eye(2)
        step, *_ = np.linalg.lstsq(A, -grad, rcond=None)
        candidate = np.clip(p + step, lo, hi)
        moved = float(np.linalg.norm(candidate - p))
        try:
            r_new = residuals(candidate, pos, reference, obs)
            cost_new = 0.5 * float(r_new @ r_new)
        except GeometryError:
            cost_new = np.inf
        if cost_new < cost:
            p, r, cost = candidate, r_new, cost_new
            history.append(cost)
            lam = max(lam * 0.1, 1e-12)
        else:
            lam *= 10.0
        if moved < config.step_tolerance_m:
            converged = True
            break
        if lam > MAX_DAMPING:
            break

    log.debug("solve: %d iterations, cost %.3e, converged=%s", it, cost, converged)
    return PositionEstimate(
        position=(float(p[0]), float(p[1])),
        residual_norm_m=float(np.sqrt(2.0 * cost)),
        iterations=it,
        converged=converged,
        cost_history=tuple(history),
    )


def error_2d(estimate: Union[PositionEstimate, Sequence[float]], ground_truth: Sequence[float]) -> float:
    p = estimate.position if isinstance(estimate, PositionEstimate) else estimate
    return float(np.hypot(p[0] - ground_truth[0], p[1] - ground_truth[1]))


def grid_cost(points: np.ndarray, bs_positions, reference: int, observed: Sequence[float]) -> np.ndarray:
    """0.5 * |r|^2 at every row of an (N, 2) array of candidate positions."""
    pos, others = _layout(bs_positions, reference)
    d = np.linalg.norm(points[:, None, :] - pos[None, :, :], axis=2)
    r = np.asarray(observed, dtype=float)[None, :] - (d[:, others] - d[:, [reference]])
    return 0.5 * np.sum(r * r, axis=1)


def grid_search(
    observed: Sequence[float],
    bs_positions,
    reference: int,
    area: Rect,
    resolution_m: float = 0.1,
) -> Point2:
    """Exhaustive minimizer of the solver cost on a regular grid over `area`."""
    xs = np.arange(area.min[0], area.max[0] + resolution_m / 2.0, resolution_m)
    ys = np.arange(area.min[1], area.max[1] + resolution_m / 2.0, resolution_m)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    points = np.column_stack([gx.ravel(), gy.ravel()])
    costs = grid_cost(points, bs_positions, reference, observed)
    best = points[int(np.argmin(costs))]
    return float(best[0]), float(best[1])
