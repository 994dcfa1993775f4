"""Alternating superlevel-set ascent at fixed measures, and shape diagnostics.

One sweep replaces each ``E_i`` in turn by the superlevel set of its own
kernel ``K_i`` with area ``e_i`` (the best set for that slot given the other
three), symmetrizes it, and finally rescales the tuple by a dilation: the
log grid value maximizing the common inscribed square, refined inside its
bracket by balancing the second moments (the square objective is flat to
second order, so alone it lets the shapes drift).  The functional can only
grow up to discretization slack, which is measured and recorded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .data_model import DataError, LinearTuple, is_nondegenerate
from .functional import eval_exact_symmetric
from .geometry import (
    InfeasibleMeasure,
    SymmetricSet,
    ball_tuple,
    boundary_polygon,
    dilation_normalize,
    hausdorff_to_disk,
    polygon_area,
    random_symmetric_set,
    superlevel_set,
)
from .kernels import kernel_grid, pairing


class SearchError(RuntimeError):
    pass


@dataclass(frozen=True)
class SearchConfig:
    resolution: float = 1 / 64
    max_sweeps: int = 500
    patience: int = 3
    gain_tol: float = 1e-6
    init: str = "balls"
    seed: int = 0
    mode: str = "interpolated"
    normalization: str | None = "moments"
    eval_resolution: float | None = None


@dataclass(frozen=True)
class SearchState:
    tuple: tuple[SymmetricSet, ...]
    e: tuple[float, ...]
    lambda_history: tuple[float, ...]
    sweep: int
    t_history: tuple[float, ...]
    resolution: float
    eps_history: tuple[float, ...] = ()
    status: str = "running"
    thresholds: tuple[float, ...] = ()

    @property
    def value(self) -> float:
        return self.lambda_history[-1]

    def monotone(self) -> bool:
        """Every step is nondecreasing up to its recorded slack."""
        lam = self.lambda_history
        eps = self.eps_history
        return all(lam[k + 1] + eps[k] >= lam[k] for k in range(len(lam) - 1))


def initial_state(L: LinearTuple, e: Sequence[float], config: SearchConfig) -> SearchState:
    e = tuple(float(v) for v in e)
    if len(e) != 4 or min(e) <= 0:
        raise DataError("measures must be four positive numbers")
    h = config.resolution
    if config.init == "balls":
        E = ball_tuple(e, h)
    elif config.init == "random":
        rng = np.random.default_rng(config.seed)
        E = tuple(random_symmetric_set(rng, v, h) for v in e)
    else:
        raise DataError(f"unknown init {config.init!r}")
    lam = eval_exact_symmetric(L, E, config.eval_resolution).value
    return SearchState(E, e, (lam,), 0, (), h)


def ascent_sweep(state: SearchState, L: LinearTuple, config: SearchConfig | None = None) -> SearchState:
    """One pass of superlevel replacements over ``i = 1..4`` followed by a
    dilation normalization."""
    config = config or SearchConfig(resolution=state.resolution)
    if L.perturbed or not is_nondegenerate(L):
        raise DataError("ascent needs nondegenerate split data")
    h = state.resolution
    E = list(state.tuple)
    before = state.lambda_history[-1]
    gap = 0.0
    thr = []
    for i in range(4):
        K = kernel_grid(L, E, i, h)
        if i == 0:
            # consistency of the kernel identity at the current tuple
            gap = abs(pairing(K, E[0]) - before)
        try:
            E[i], t_i = superlevel_set(K, state.e[i], config.mode)
        except InfeasibleMeasure as exc:
            raise SearchError(f"measures inadmissible at this resolution: {exc}") from exc
        thr.append(t_i)
    t, E = dilation_normalize(E, refine=config.normalization)
    rep = eval_exact_symmetric(L, E, config.eval_resolution)
    eps = 4.0 * (gap + rep.error_bound)
    return replace(
        state,
        tuple=tuple(E),
        lambda_history=state.lambda_history + (rep.value,),
        sweep=state.sweep + 1,
        t_history=state.t_history + (t,),
        eps_history=state.eps_history + (eps,),
        thresholds=tuple(thr),
    )


@dataclass(frozen=True)
class RegularityReport:
    convexity_defect: tuple[float, ...]
    curvature: tuple[np.ndarray, ...]
    curvature_min: tuple[float, ...]
    strongly_convex: tuple[bool, ...]
    smoothness: tuple[float, ...]
    angles: int = 256

    def to_dict(self) -> dict:
        return {
            "convexity_defect": list(self.convexity_defect),
            "curvature_min": list(self.curvature_min),
            "strongly_convex": list(self.strongly_convex),
            "smoothness": list(self.smoothness),
            "angles": self.angles,
        }


def run_search(L: LinearTuple, e: Sequence[float], config: SearchConfig | None = None, state: SearchState | None = None):
    """Iterate sweeps until the relative gain stays below ``gain_tol`` for
    ``patience`` consecutive sweeps; returns ``(state, RegularityReport)``.
    The best state is returned flagged ``"unconverged"`` at the sweep limit."""
    config = config or SearchConfig()
    state = state or initial_state(L, e, config)
    best = state
    calm = 0
    while state.sweep < config.max_sweeps:
        prev = state.lambda_history[-1]
        state = ascent_sweep(state, L, config)
        if state.value >= best.value:
            best = state
        gain = (state.value - prev) / prev if prev > 0 else math.inf
        calm = calm + 1 if gain < config.gain_tol else 0
        if calm >= config.patience:
            state = replace(state, status="converged")
            return state, regularity_report_tuple(state.tuple)
    best = replace(best, status="unconverged", lambda_history=state.lambda_history,
                   eps_history=state.eps_history, t_history=state.t_history, sweep=state.sweep)
    return best, regularity_report_tuple(best.tuple)


# -- regularity -------------------------------------------------------------------


def _hull(points: np.ndarray) -> np.ndarray:
    """Andrew's monotone chain; counter-clockwise hull vertices."""
    pts = np.unique(points, axis=0)
    if len(pts) < 3:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(tuple(p))
    upper: list = []
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(tuple(p))
    return np.array(lower[:-1] + upper[:-1])


def _polar_radius(poly: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Distance from the origin to the boundary along each ray (star-shaped)."""
    a = poly
    b = np.roll(poly, -1, axis=0)
    d = np.column_stack([np.cos(theta), np.sin(theta)])
    e = b - a
    den = d[:, None, 0] * e[None, :, 1] - d[:, None, 1] * e[None, :, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        s = (a[None, :, 0] * e[None, :, 1] - a[None, :, 1] * e[None, :, 0]) / den
        u = (a[None, :, 0] * d[:, None, 1] - a[None, :, 1] * d[:, None, 0]) / den
    ok = (np.abs(den) > 1e-15) & (u >= -1e-12) & (u <= 1 + 1e-12) & (s > 0)
    return np.max(np.where(ok, s, 0.0), axis=1)


def regularity_report(s: SymmetricSet, angles: int = 256, strong_tol: float = 0.1):
    """Shape diagnostics of one set from its mid-top boundary polygon.

    Returns ``(defect, curvature_samples, curvature_min, strongly_convex,
    smoothness)``.  Curvature comes from the support function
    ``h(theta)``: the radius of curvature is ``h + h''`` by second
    differences.  ``strongly_convex`` requires the minimum curvature to
    exceed ``strong_tol`` times that of the disk with the same perimeter.
    """
    if s.area <= 0 or s.x_extent <= 0 or s.y_extent <= 0:
        raise DataError("degenerate set")
    poly = boundary_polygon(s, "centers")
    area = polygon_area(poly)
    hull = _hull(poly)
    defect = max(0.0, (polygon_area(hull) - area) / area)
    th = np.linspace(0, 2 * np.pi, angles, endpoint=False)
    dth = 2 * np.pi / angles
    hsup = np.max(np.column_stack([np.cos(th), np.sin(th)]) @ hull.T, axis=1)
    rho = hsup + (np.roll(hsup, -1) - 2 * hsup + np.roll(hsup, 1)) / dth**2
    with np.errstate(divide="ignore"):
        curv = np.where(rho > 0, 1.0 / np.maximum(rho, 1e-300), np.inf)
    kmin = float(curv.min())
    perim = float(np.sum(np.linalg.norm(np.roll(hull, -1, axis=0) - hull, axis=1)))
    strong = kmin * perim / (2 * np.pi) >= strong_tol and defect <= 1e-3
    r = _polar_radius(poly, th)
    smooth = float(np.max(np.abs(np.roll(r, -1) - 2 * r + np.roll(r, 1))))
    return defect, curv, kmin, bool(strong), smooth


def regularity_report_tuple(E: Sequence[SymmetricSet], angles: int = 256) -> RegularityReport:
    rows = [regularity_report(s, angles) for s in E]
    return RegularityReport(
        tuple(r[0] for r in rows),
        tuple(r[1] for r in rows),
        tuple(r[2] for r in rows),
        tuple(r[3] for r in rows),
        tuple(r[4] for r in rows),
        angles,
    )


def distance_to_balls(E: Sequence[SymmetricSet], e: Sequence[float]) -> list[float]:
    """Hausdorff distance of each set to the centred disk of equal area."""
    return [hausdorff_to_disk(s, math.sqrt(v / math.pi)) for s, v in zip(E, e)]


__all__ = [
    "SearchConfig",
    "SearchState",
    "SearchError",
    "RegularityReport",
    "initial_state",
    "ascent_sweep",
    "run_search",
    "regularity_report",
    "regularity_report_tuple",
    "distance_to_balls",
]
