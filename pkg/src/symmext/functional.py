"""Evaluation of the four-set functional and lower bounds for its supremum.

The functional is ``Lam(E) = int_{R^4} prod_j 1_{E_j}(L_j(x, y)) dx dy``.
For split data and vertically symmetric sets the y-integral at fixed x is the
area of a centrally symmetric polygon cut out by four strips, computed here
in closed form.  Along lines ``a_1 . x = s`` that area is a step function,
so it is integrated exactly; Gauss panels handle ``s``.  A
stratified Monte-Carlo sampler handles arbitrary bounded sets and serves as
an independent check.
"""

from __future__ import annotations

import itertools
import math
import os
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import polygon
from .data_model import DataError, LinearTuple, require_split
from .geometry import (
    ColumnSet,
    GridSet,
    SymmetricSet,
    UnionSet,
    ball_tuple,
    rasterize,
    symmetrize,
)

_CHUNK = 1 << 15


@dataclass(frozen=True)
class EvalReport:
    value: float
    method: str
    error_bound: float
    samples_or_cells: int
    seed: int | None = None
    elapsed: float = 0.0

    def __post_init__(self):
        if self.method not in ("exact-strip", "grid", "monte-carlo"):
            raise ValueError(f"unknown method {self.method!r}")
        if not (self.value >= 0 and self.error_bound >= 0 and math.isfinite(self.error_bound)):
            raise ValueError("value and error_bound must be nonnegative and finite")
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "error_bound", float(self.error_bound))

    def to_dict(self) -> dict:
        d = {
            "value": self.value,
            "method": self.method,
            "error_bound": self.error_bound,
            "samples_or_cells": self.samples_or_cells,
        }
        if self.seed is not None:
            d["seed"] = self.seed
        return d


@dataclass(frozen=True)
class ThetaEstimate:
    e: tuple[float, ...]
    lower_bound: float
    witness: tuple
    error: float = 0.0
    strategy: str = "balls"
    extra: dict = field(default_factory=dict)


def thread_count() -> int:
    """Worker cap from ``SYMMEXT_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("SYMMEXT_THREADS", "1")))
    except ValueError:
        return 1


# -- exact strip evaluator -----------------------------------------------------------


def _halfplanes(y_rows: np.ndarray):
    """Normals of the 8 half-planes (rows then negated rows) and the
    coefficient tables used by the edge formula."""
    n = np.vstack([y_rows, -y_rows])  # (8, 2)
    d = np.column_stack([-n[:, 1], n[:, 0]])  # edge directions, interior on the left
    nn = np.einsum("ki,ki->k", n, n)
    G = (n @ n.T) / nn[None, :]  # G[m, k] = n_m . n_k / |n_k|^2
    D = n @ d.T  # D[m, k] = n_m . d_k
    # parallel pairs must be exactly parallel; rounding would turn them into bounds
    norms = np.sqrt(nn)
    D[np.abs(D) <= 1e-12 * np.outer(norms, norms)] = 0.0
    return n, G, D


def strip_areas(y_rows, widths: np.ndarray, shifts: np.ndarray | None = None) -> np.ndarray:
    """Areas of ``{y: |b_j . y + s_j| <= w_j, j = 1..4}`` for many (w, s).

    ``widths`` and ``shifts`` have shape (N, 4).  Each edge lies on a line
    ``n_k . y = r_k``; clipping it by the other half-planes gives a parameter
    interval of length ``dt`` and the polygon area is ``sum_k r_k dt_k / 2``.
    Works for empty, degenerate and off-centre polygons alike.
    """
    y_rows = np.asarray(y_rows, dtype=float)
    widths = np.atleast_2d(np.asarray(widths, dtype=float))
    if shifts is None:
        shifts = np.zeros_like(widths)
    r = np.concatenate([widths - shifts, widths + shifts], axis=1)  # (N, 8)
    _, G, D = _halfplanes(y_rows)
    # rhs[N, m, k] = r_m - (n_m . p0_k), p0_k = r_k n_k / |n_k|^2
    rhs = r[:, :, None] - G[None, :, :] * r[:, None, :]
    pos = D > 0
    neg = D < 0
    par = ~(pos | neg)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = rhs / np.where(par, 1.0, D)[None]
    t_hi = np.min(np.where(pos[None], q, np.inf), axis=1)
    t_lo = np.max(np.where(neg[None], q, -np.inf), axis=1)
    tol = 1e-12 * (np.max(np.abs(r), axis=1) + 1.0)
    feasible = np.all(np.where(par[None], rhs >= -tol[:, None, None], True), axis=1)
    dt = np.where(feasible, np.maximum(t_hi - t_lo, 0.0), 0.0)
    area = 0.5 * np.sum(r * dt, axis=1)
    return np.maximum(area, 0.0)


def _x_support(E) -> list[tuple[float, float]]:
    out = []
    for s in E:
        if isinstance(s, (SymmetricSet, ColumnSet)):
            out.append(s.x_support())
        else:
            raise TypeError(f"exact evaluation needs SymmetricSet or ColumnSet, got {type(s).__name__}")
    return out


def _breakpoints(s) -> np.ndarray:
    """Abscissae where the half-height of ``s`` may jump."""
    if isinstance(s, SymmetricSet):
        k = np.arange(s.profile.n + 1) * s.profile.cell_width
        return np.concatenate([-k[:0:-1], k])
    return s.x0 + np.arange(s.half_heights.size + 1) * s.cell


def _support_polygon(x_rows: np.ndarray, supports) -> np.ndarray | None:
    normals, rhs = [], []
    for a, (lo, hi) in zip(x_rows, supports):
        if hi <= lo:
            return None
        normals += [a, -a]
        rhs += [hi, -lo]
    poly = polygon.halfplane_polygon(normals, rhs)
    if len(poly) < 3 or polygon.shoelace(poly) <= 0:
        return None
    return poly


_GAUSS2 = (np.array([-1.0, 1.0]) / math.sqrt(3.0), np.array([1.0, 1.0]))
_GAUSS3 = (np.array([-math.sqrt(0.6), 0.0, math.sqrt(0.6)]), np.array([5.0, 8.0, 5.0]) / 9.0)


@dataclass(frozen=True)
class LineRule:
    """Outer quadrature lines ``x = s p + tau q`` with ``s = a_0 . x``.

    ``s_nodes`` carry the Gauss weights (``w_hi``) and midpoint weights
    (``w_lo``) of the panel they belong to; ``panel`` maps nodes to panels.
    """

    s_nodes: np.ndarray
    w_hi: np.ndarray
    w_lo: np.ndarray
    panel: np.ndarray
    jac: float


def _line_rule(L: LinearTuple, E, h: float | None) -> LineRule | None:
    a0 = L.x_rows[0]
    poly = _support_polygon(L.x_rows, _x_support(E))
    if poly is None:
        return None
    proj = poly @ a0
    lo, hi = float(proj.min()), float(proj.max())
    bp = _breakpoints(E[0])
    edges = np.unique(np.concatenate([[lo, hi], bp[(bp > lo) & (bp < hi)]]))
    if h is None:
        h = (hi - lo) / 256
    # split every panel to width <= h
    pieces = []
    for x0, x1 in zip(edges[:-1], edges[1:]):
        m = max(1, int(math.ceil((x1 - x0) / h - 1e-9)))
        pieces.append(np.linspace(x0, x1, m + 1))
    edges = np.unique(np.concatenate(pieces))
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * np.diff(edges)
    nodes, w = _GAUSS2
    s_g = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    w_g = (half[:, None] * w[None, :]).ravel()
    n_p = mid.size
    s_nodes = np.concatenate([s_g, mid])
    w_hi = np.concatenate([w_g, np.zeros(n_p)])
    w_lo = np.concatenate([np.zeros_like(w_g), 2 * half])
    panel = np.concatenate([np.repeat(np.arange(n_p), 2), np.arange(n_p)])
    return LineRule(s_nodes, w_hi, w_lo, panel, 1.0 / float(np.linalg.norm(a0)))


def line_integrals(L: LinearTuple, E, rule: LineRule, ell_scales=(1.0,)) -> np.ndarray:
    """``G(s) = int M dtau`` along every rule line, one row per ``ell_scale``.

    Along a line each half-height is a step function of ``tau`` with known
    jumps, so the unperturbed inner integral is an exact finite sum; with
    perturbation rows the pieces get a 3-point Gauss rule.
    """
    E = tuple(E)
    A = L.x_rows
    a0 = A[0]
    p = a0 / float(a0 @ a0)
    q = np.array([-a0[1], a0[0]]) / float(np.linalg.norm(a0))
    alpha = A @ p  # a_j . p
    beta = A @ q  # a_j . q
    supports = _x_support(E)
    bps = [_breakpoints(E[j]) for j in range(1, 4)]
    ell_scales = np.atleast_1d(np.asarray(ell_scales, dtype=float))
    perturbed = L.perturbed and np.any(ell_scales != 0)
    gx, gw = _GAUSS3 if perturbed else (np.array([0.0]), np.array([2.0]))
    C = L.ell_rows
    out = np.zeros((ell_scales.size, rule.s_nodes.size))
    per_chunk = max(1, _CHUNK // max(1, sum(b.size for b in bps) * gx.size))
    for start in range(0, rule.s_nodes.size, per_chunk):
        s = rule.s_nodes[start : start + per_chunk]
        # tau-interval where every a_j . x lies in the support of E_j
        t_lo = np.full(s.size, -np.inf)
        t_hi = np.full(s.size, np.inf)
        for j in range(1, 4):
            lo_j, hi_j = supports[j]
            u = (lo_j - s * alpha[j]) / beta[j]
            v = (hi_j - s * alpha[j]) / beta[j]
            t_lo = np.maximum(t_lo, np.minimum(u, v))
            t_hi = np.minimum(t_hi, np.maximum(u, v))
        cuts = [(b[None, :] - s[:, None] * alpha[j]) / beta[j] for j, b in zip(range(1, 4), bps)]
        T = np.concatenate(cuts + [t_lo[:, None], t_hi[:, None]], axis=1)
        T = np.sort(np.clip(T, t_lo[:, None], np.maximum(t_lo, t_hi)[:, None]), axis=1)
        tm = 0.5 * (T[:, 1:] + T[:, :-1])
        th = 0.5 * (T[:, 1:] - T[:, :-1])
        live = th > 0
        if not live.any():
            continue
        rows, cols = np.nonzero(live)
        taus = tm[rows, cols][:, None] + th[rows, cols][:, None] * gx[None, :]
        wts = th[rows, cols][:, None] * gw[None, :]
        sv = s[rows][:, None].repeat(gx.size, axis=1)
        X = sv[..., None] * p + taus[..., None] * q  # (k, g, 2)
        X = X.reshape(-1, 2)
        proj = X @ A.T
        w = np.column_stack([E[j].half_height(proj[:, j]) for j in range(4)])
        ok = np.all(w > 0, axis=1)
        wflat = wts.ravel()
        for k, sc in enumerate(ell_scales):
            area = np.zeros(len(X))
            if ok.any():
                shifts = (X[ok] @ C.T) * sc if perturbed and sc != 0 else None
                area[ok] = strip_areas(L.y_rows, w[ok], shifts)
            out[k, start : start + s.size] = np.bincount(rows.repeat(gx.size), weights=area * wflat, minlength=s.size)
    return out


def _integrate(rule: LineRule, G: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gauss value and per-panel Gauss-minus-midpoint error sum."""
    hi = G @ rule.w_hi * rule.jac
    n_p = int(rule.panel.max()) + 1
    err = np.zeros(G.shape[0])
    for k in range(G.shape[0]):
        d = np.bincount(rule.panel, weights=G[k] * (rule.w_hi - rule.w_lo), minlength=n_p)
        err[k] = np.abs(d).sum() * rule.jac
    return hi, err


def eval_strips(L: LinearTuple, E, resolution: float | None = None, ell_scale: float = 1.0) -> EvalReport:
    """Strip evaluator without the split-data guard (vertically symmetric
    sets; perturbation rows allowed, scaled by ``ell_scale``)."""
    t0 = time.perf_counter()
    E = tuple(E)
    rule = None if any(s.area <= 0 for s in E) else _line_rule(L, E, resolution)
    if rule is None:
        return EvalReport(0.0, "exact-strip", 0.0, 0, elapsed=time.perf_counter() - t0)
    G = line_integrals(L, E, rule, (ell_scale,))
    val, err = _integrate(rule, G)
    v = float(val[0])
    return EvalReport(
        max(v, 0.0), "exact-strip", float(err[0]) + 1e-12 * abs(v), rule.s_nodes.size,
        elapsed=time.perf_counter() - t0,
    )


def eval_exact_symmetric(L: LinearTuple, E: Sequence[SymmetricSet], resolution: float | None = None) -> EvalReport:
    """Exact inner polygon areas, exact integration along lines
    ``a_1 . x = s`` and two-point Gauss panels in ``s``.

    ``resolution`` caps the panel width in ``s`` (default: 1/256 of the
    range).  Panels never straddle a jump of ``E_1``; ``error_bound`` sums
    the per-panel gaps between the Gauss and midpoint rules.
    """
    if L.perturbed:
        raise DataError("perturbed data: use perturb module")
    require_split(L, "exact evaluation")
    E = tuple(E)
    if len(E) != 4:
        raise DataError("need four sets")
    for s in E:
        if not isinstance(s, SymmetricSet):
            raise TypeError("eval_exact_symmetric needs SymmetricSets")
    return eval_strips(L, E, resolution)


# -- Monte Carlo -----------------------------------------------------------------


def _block(L: LinearTuple, j: int) -> np.ndarray:
    """Matrix of ``L_j`` acting on ``z = (x1, x2, y1, y2)``."""
    return L.matrix(j)


def _box(s) -> tuple[float, float, float, float]:
    return tuple(float(v) for v in s.bounds())


def _mc_plain(L: LinearTuple, E, n: int, seed: int, strata: int = 64) -> tuple[float, float]:
    boxes = [_box(s) for s in E]
    vols = [(b[1] - b[0]) * (b[3] - b[2]) for b in boxes]
    if min(vols) <= 0:
        return 0.0, 0.0
    mats = [_block(L, j) for j in range(4)]
    best = None
    for i, k in itertools.combinations(range(4), 2):
        T = np.vstack([mats[i], mats[k]])
        det = abs(np.linalg.det(T))
        if det <= 1e-14:
            continue
        cost = vols[i] * vols[k] / det
        if best is None or cost < best[0]:
            best = (cost, i, k, T, det)
    if best is None:
        raise DataError("no invertible pair of maps")
    _, i, k, T, det = best
    Tinv = np.linalg.inv(T)
    others = [m for m in range(4) if m not in (i, k)]
    bi, bk = boxes[i], boxes[k]
    g = max(1, int(math.isqrt(min(strata, n))))
    S = g * g
    counts = np.full(S, n // S)
    counts[: n % S] += 1
    wx = (bi[1] - bi[0]) / g
    wy = (bi[3] - bi[2]) / g
    vol_sub = wx * wy * vols[k]
    total = 0.0
    var = 0.0
    for s in range(S):
        m = int(counts[s])
        if m == 0:
            continue
        rng = np.random.default_rng([seed, s])
        gx, gy = divmod(s, g)
        u = np.empty((m, 4))
        u[:, 0] = bi[0] + (gx + rng.random(m)) * wx
        u[:, 1] = bi[2] + (gy + rng.random(m)) * wy
        u[:, 2] = bk[0] + rng.random(m) * (bk[1] - bk[0])
        u[:, 3] = bk[2] + rng.random(m) * (bk[3] - bk[2])
        hit = E[i].contains(u[:, 0], u[:, 1]) & E[k].contains(u[:, 2], u[:, 3])
        if hit.any():
            z = u[hit] @ Tinv.T
            sub = np.ones(len(z), dtype=bool)
            for o in others:
                w = z @ mats[o].T
                sub &= E[o].contains(w[:, 0], w[:, 1])
            hits = int(sub.sum())
        else:
            hits = 0
        p = hits / m
        total += vol_sub * p
        if m > 1:
            var += vol_sub**2 * p * (1 - p) / (m - 1)
    return total / det, math.sqrt(var) / det


def _parts(s) -> tuple:
    return tuple(s.parts) if isinstance(s, UnionSet) else (s,)


def eval_monte_carlo(L: LinearTuple, E, n: int, seed: int = 0) -> EvalReport:
    """Stratified Monte-Carlo estimate of the functional.

    Two maps ``L_i, L_k`` are used as coordinates; samples are drawn in the
    product of the bounding boxes of ``E_i`` and ``E_k`` (stratified on an
    8 x 8 grid over the first box) and the remaining two memberships are
    tested directly, which also covers perturbed data.  ``UnionSet`` parts
    are assumed disjoint and expanded term by term.  ``error_bound`` is one
    standard error.
    """
    if n <= 0:
        raise DataError("sample count must be positive")
    t0 = time.perf_counter()
    E = tuple(E)
    if len(E) != 4:
        raise DataError("need four sets")
    combos = list(itertools.product(*[_parts(s) for s in E]))
    per = max(1, n // len(combos))
    val = 0.0
    var = 0.0
    for c_idx, combo in enumerate(combos):
        sub_seed = seed if len(combos) == 1 else seed * 1000003 + c_idx
        v, se = _mc_plain(L, combo, per, sub_seed)
        val += v
        var += se * se
    return EvalReport(
        max(val, 0.0), "monte-carlo", math.sqrt(var), per * len(combos), seed=seed,
        elapsed=time.perf_counter() - t0,
    )


# -- Theta lower bounds ------------------------------------------------------------


def theta_lower(
    L: LinearTuple,
    e: Sequence[float],
    strategy: str = "balls",
    cell: float | None = None,
    resolution: float | None = None,
    config=None,
) -> ThetaEstimate:
    """Certified lower bound for the supremum at measures ``e``: the value of
    an explicitly evaluated witness tuple.

    ``"balls"`` uses centred discs; ``"search"`` runs the ascent (``config``
    is passed through).
    """
    e = tuple(float(v) for v in e)
    if len(e) != 4 or min(e) <= 0:
        raise DataError("measures must be four positive numbers")
    if strategy == "balls":
        if cell is None:
            cell = math.sqrt(min(e) / math.pi) / 96
        W = ball_tuple(e, cell)
        rep = eval_exact_symmetric(L, W, resolution)
        return ThetaEstimate(e, rep.value, W, rep.error_bound, "balls")
    if strategy == "search":
        from .search import SearchConfig, run_search

        state, _ = run_search(L, e, config or SearchConfig())
        rep = eval_exact_symmetric(L, state.tuple, resolution)
        return ThetaEstimate(e, rep.value, state.tuple, rep.error_bound, "search")
    raise DataError(f"unknown strategy {strategy!r}")


def theta_scaled(L: LinearTuple, est: ThetaEstimate, r: float, resolution: float | None = None) -> ThetaEstimate:
    """Witness for ``r * e``: every set scaled by ``sqrt(r)``."""
    W = tuple(s.scaled(math.sqrt(r)) for s in est.witness)
    rep = eval_exact_symmetric(L, W, resolution)
    return ThetaEstimate(tuple(r * v for v in est.e), rep.value, W, rep.error_bound, est.strategy + "-scaled")


def theta_union(
    L: LinearTuple, a: ThetaEstimate, b: ThetaEstimate, n: int = 400_000, seed: int = 0, gap: float = 1.0
) -> ThetaEstimate:
    """Witness for ``e + e'``: ``E_j`` together with ``E'_j + L_j(v)`` for a
    translation ``v`` that separates every pair of pieces.

    The two parts contribute the sum of the two values and cross terms are
    nonnegative, so the evaluated union bounds the sum from above.
    """
    require_split(L, "union witness")
    ext = [max(max(abs(v) for v in s.bounds()), 0.0) for s in a.witness + b.witness]
    R = (max(ext) * 2 + gap) / max(min(abs(L.x_rows @ _generic_dir(L.x_rows))), 1e-6)
    vx = R * _generic_dir(L.x_rows)
    v = np.concatenate([vx, np.zeros(2)])
    from .geometry import Translated

    parts = []
    for j in range(4):
        shift = tuple(L.matrix(j) @ v)
        parts.append(UnionSet((a.witness[j], Translated(b.witness[j], shift))))
    rep = eval_monte_carlo(L, parts, n, seed)
    e = tuple(x + y for x, y in zip(a.e, b.e))
    return ThetaEstimate(e, rep.value, tuple(parts), rep.error_bound, "union")


def _generic_dir(x_rows: np.ndarray) -> np.ndarray:
    """Unit direction maximizing the smallest ``|a_j . u|``."""
    th = np.linspace(0, np.pi, 721)
    U = np.column_stack([np.cos(th), np.sin(th)])
    score = np.min(np.abs(U @ x_rows.T), axis=1)
    return U[int(np.argmax(score))]


# -- symmetrization check ---------------------------------------------------------------


def check_symmetrization(
    L: LinearTuple,
    E,
    n: int = 1_000_000,
    seed: int = 0,
    resolution: float | None = None,
    cell: float | None = None,
) -> tuple[EvalReport, EvalReport, bool]:
    """Compare the functional of ``E`` (Monte Carlo) with that of its double
    symmetrization (exact).  Sets without an exact symmetrization are first
    rasterized with spacing ``cell``."""
    if L.perturbed:
        raise DataError("perturbed data: use perturb module")
    E = tuple(E)
    lhs = eval_monte_carlo(L, E, n, seed)
    sym = []
    for s in E:
        if isinstance(s, (SymmetricSet, GridSet, ColumnSet)):
            sym.append(symmetrize(s))
        else:
            if cell is None:
                raise DataError("cell size needed to symmetrize general sets")
            sym.append(symmetrize(rasterize(s, cell)))
    rhs = eval_exact_symmetric(L, sym, resolution)
    holds = lhs.value <= rhs.value + 3 * lhs.error_bound + rhs.error_bound
    return lhs, rhs, bool(holds)


def lipschitz_ratio(L: LinearTuple, E, F, resolution: float | None = None) -> float:
    """``|Lam(E) - Lam(F)| / (max|E_k| * max|E_k delta F_k|)`` for profile tuples."""
    from .geometry import symmetric_difference_area

    a = eval_exact_symmetric(L, E, resolution).value
    b = eval_exact_symmetric(L, F, resolution).value
    size = max(max(s.area for s in E), max(s.area for s in F))
    delta = max(symmetric_difference_area(x, y) for x, y in zip(E, F))
    return abs(a - b) / (size * delta) if delta > 0 else 0.0
