"""Planar sets, Steiner symmetrizations, dilations and superlevel sets.

Two representations carry most of the work:

* ``SymmetricSet`` -- ``{(x, y): |y| <= f(|x|)}`` with ``f`` a nonincreasing
  step function (``Profile``).  These are exactly the sets fixed by both
  vertical and horizontal Steiner symmetrization.
* ``GridSet`` -- a general occupancy bitmap, membership decided at cell
  centres.

``ColumnSet`` holds vertically symmetrized sets (centred columns over an
arbitrary x-grid), and ``Disk``/``Translated``/``UnionSet`` provide point
membership for Monte-Carlo work.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

_MONO_RTOL = 1e-12


class GeometryError(ValueError):
    pass


class InfeasibleMeasure(GeometryError):
    """Target measure exceeds the positive support of a field."""


# -- profiles ------------------------------------------------------------------


@dataclass(frozen=True)
class Profile:
    """Nonincreasing step function ``f(x) = samples[floor(x / cell_width)]``."""

    samples: np.ndarray
    cell_width: float

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float).reshape(-1)
        if not self.cell_width > 0 or not math.isfinite(self.cell_width):
            raise GeometryError(f"cell_width must be positive, got {self.cell_width}")
        if s.size and (not np.all(np.isfinite(s)) or s.min() < 0):
            raise GeometryError("profile heights must be finite and nonnegative")
        if s.size > 1:
            scale = max(float(s[0]), 1.0)
            if np.any(np.diff(s) > _MONO_RTOL * scale):
                raise GeometryError("profile heights must be nonincreasing")
            s = np.minimum.accumulate(s)
        # trailing zero columns carry no measure
        nz = np.flatnonzero(s > 0)
        s = s[: nz[-1] + 1] if nz.size else s[:0]
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "cell_width", float(self.cell_width))

    @property
    def n(self) -> int:
        return self.samples.size

    @property
    def extent(self) -> float:
        """Right end of the support."""
        return self.n * self.cell_width

    def __call__(self, z) -> np.ndarray:
        z = np.abs(np.asarray(z, dtype=float))
        k = np.floor(z / self.cell_width)
        inside = k < self.n
        k = np.where(inside, k, 0).astype(np.int64)
        if self.n == 0:
            return np.zeros_like(z)
        return np.where(inside, self.samples[k], 0.0)

    def integral(self) -> float:
        return float(self.samples.sum() * self.cell_width)

    def compressed(self) -> "Profile":
        """Merge equal adjacent pairs back into cells of twice the width."""
        s = self.samples
        if s.size % 2 == 0 and s.size and np.array_equal(s[0::2], s[1::2]):
            return Profile(s[0::2], 2 * self.cell_width)
        if s.size % 2 == 1 and s.size > 1 and np.array_equal(s[0:-1:2], s[1::2]):
            # odd tail: pad with a zero column so widths still line up
            padded = np.append(s, 0.0)
            if np.array_equal(padded[0::2], padded[1::2]):
                return Profile(padded[0::2], 2 * self.cell_width)
        return self


def resample(p: Profile, cell_width: float) -> Profile:
    """Cell averages of ``p`` on a new uniform grid (area preserving)."""
    n = int(math.ceil(p.extent / cell_width - 1e-12))
    if n == 0:
        return Profile(np.zeros(0), cell_width)
    # cumulative integral of the step function at the new cell edges
    edges = np.arange(n + 1) * cell_width
    cum_old = np.concatenate([[0.0], np.cumsum(p.samples) * p.cell_width])
    k = np.minimum(np.floor(edges / p.cell_width).astype(np.int64), p.n)
    frac = edges - k * p.cell_width
    tail = np.where(k < p.n, p.samples[np.minimum(k, p.n - 1)] * frac, 0.0)
    cum_new = cum_old[k] + tail
    return Profile(np.diff(cum_new) / cell_width, cell_width)


# -- set types -----------------------------------------------------------------


@dataclass(frozen=True)
class SymmetricSet:
    """``E = {(x, y): |y| <= f(|x|)}``."""

    profile: Profile

    @property
    def area(self) -> float:
        return 4.0 * self.profile.integral()

    def half_height(self, z) -> np.ndarray:
        return self.profile(z)

    def contains(self, x, y) -> np.ndarray:
        return np.abs(np.asarray(y)) <= self.profile(x)

    @property
    def x_extent(self) -> float:
        return self.profile.extent

    @property
    def y_extent(self) -> float:
        return float(self.profile.samples[0]) if self.profile.n else 0.0

    def x_support(self) -> tuple[float, float]:
        return -self.x_extent, self.x_extent

    def bounds(self) -> tuple[float, float, float, float]:
        return -self.x_extent, self.x_extent, -self.y_extent, self.y_extent

    def scaled(self, s: float) -> "SymmetricSet":
        """Isotropic scaling ``(x, y) -> (s x, s y)``; area times ``s**2``."""
        return SymmetricSet(Profile(self.profile.samples * s, self.profile.cell_width * s))

    def row_half_width(self, y) -> np.ndarray:
        """Half-width of the horizontal slice at height ``y``."""
        y = np.abs(np.asarray(y, dtype=float))
        s = self.profile.samples
        # number of columns whose height reaches |y|
        cnt = np.searchsorted(-s, -y, side="right")
        return cnt * self.profile.cell_width


@dataclass(frozen=True)
class ColumnSet:
    """Vertically symmetrized set: column ``k`` spans ``|y| <= half_heights[k]``.

    Columns cover ``[x0 + k*cell, x0 + (k+1)*cell)``; heights are arbitrary.
    """

    x0: float
    cell: float
    half_heights: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.half_heights, dtype=float).reshape(-1)
        if h.size and h.min() < 0:
            raise GeometryError("column heights must be nonnegative")
        object.__setattr__(self, "half_heights", h)

    @property
    def area(self) -> float:
        return float(2.0 * self.half_heights.sum() * self.cell)

    def half_height(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        k = np.floor((z - self.x0) / self.cell)
        ok = (k >= 0) & (k < self.half_heights.size)
        k = np.where(ok, k, 0).astype(np.int64)
        return np.where(ok, self.half_heights[k], 0.0)

    def contains(self, x, y) -> np.ndarray:
        return np.abs(np.asarray(y)) <= self.half_height(x)

    def x_support(self) -> tuple[float, float]:
        return self.x0, self.x0 + self.cell * self.half_heights.size

    def bounds(self) -> tuple[float, float, float, float]:
        a, b = self.x_support()
        m = float(self.half_heights.max()) if self.half_heights.size else 0.0
        return a, b, -m, m


@dataclass(frozen=True)
class GridSet:
    """Bitmap set; ``bits[ix, iy]`` is the cell with centre
    ``origin + ((ix + 1/2) cell, (iy + 1/2) cell)``."""

    origin: tuple[float, float]
    cell: float
    bits: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bits, dtype=bool)
        if b.ndim != 2:
            raise GeometryError("bits must be a 2-D mask")
        object.__setattr__(self, "bits", b)
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def area(self) -> float:
        return float(self.bits.sum()) * self.cell**2

    @property
    def shape(self) -> tuple[int, int]:
        return self.bits.shape

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        nx, ny = self.bits.shape
        xs = self.origin[0] + (np.arange(nx) + 0.5) * self.cell
        ys = self.origin[1] + (np.arange(ny) + 0.5) * self.cell
        return xs, ys

    def contains(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        ix = np.floor((x - self.origin[0]) / self.cell)
        iy = np.floor((y - self.origin[1]) / self.cell)
        nx, ny = self.bits.shape
        ok = (ix >= 0) & (ix < nx) & (iy >= 0) & (iy < ny)
        ix = np.where(ok, ix, 0).astype(np.int64)
        iy = np.where(ok, iy, 0).astype(np.int64)
        return ok & self.bits[ix, iy]

    def bounds(self) -> tuple[float, float, float, float]:
        nx, ny = self.bits.shape
        if not self.bits.any():
            return 0.0, 0.0, 0.0, 0.0
        cols = np.flatnonzero(self.bits.any(axis=1))
        rows = np.flatnonzero(self.bits.any(axis=0))
        c = self.cell
        return (
            self.origin[0] + cols[0] * c,
            self.origin[0] + (cols[-1] + 1) * c,
            self.origin[1] + rows[0] * c,
            self.origin[1] + (rows[-1] + 1) * c,
        )

    def column_counts(self) -> np.ndarray:
        return self.bits.sum(axis=1)

    def row_counts(self) -> np.ndarray:
        return self.bits.sum(axis=0)

    def translated(self, dx: float, dy: float) -> "GridSet":
        return GridSet((self.origin[0] + dx, self.origin[1] + dy), self.cell, self.bits)


@dataclass(frozen=True)
class Disk:
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise GeometryError(f"disk radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def area(self) -> float:
        return math.pi * self.radius**2

    def contains(self, x, y) -> np.ndarray:
        dx = np.asarray(x) - self.center[0]
        dy = np.asarray(y) - self.center[1]
        return dx * dx + dy * dy <= self.radius**2

    def bounds(self) -> tuple[float, float, float, float]:
        cx, cy = self.center
        r = self.radius
        return cx - r, cx + r, cy - r, cy + r


@dataclass(frozen=True)
class Translated:
    base: object
    shift: tuple[float, float]

    def contains(self, x, y) -> np.ndarray:
        return self.base.contains(np.asarray(x) - self.shift[0], np.asarray(y) - self.shift[1])

    def bounds(self) -> tuple[float, float, float, float]:
        a, b, c, d = self.base.bounds()
        return a + self.shift[0], b + self.shift[0], c + self.shift[1], d + self.shift[1]

    @property
    def area(self) -> float:
        return self.base.area


@dataclass(frozen=True)
class UnionSet:
    """Union of sets; ``area`` assumes the parts are pairwise disjoint."""

    parts: tuple

    def contains(self, x, y) -> np.ndarray:
        out = np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape, dtype=bool)
        for p in self.parts:
            out |= p.contains(x, y)
        return out

    def bounds(self) -> tuple[float, float, float, float]:
        bs = np.array([p.bounds() for p in self.parts])
        return bs[:, 0].min(), bs[:, 1].max(), bs[:, 2].min(), bs[:, 3].max()

    @property
    def area(self) -> float:
        return float(sum(p.area for p in self.parts))


# -- constructors ----------------------------------------------------------------


def _semicircle_primitive(x, r):
    x = np.clip(x, -r, r)
    return 0.5 * (x * np.sqrt(np.maximum(r * r - x * x, 0.0)) + r * r * np.arcsin(x / r))


def disk_set(radius: float, cell: float) -> SymmetricSet:
    """Centred disk; each column holds the exact mean chord height (area exact)."""
    if radius <= 0:
        raise GeometryError("radius must be positive")
    n = int(math.ceil(radius / cell - 1e-12))
    edges = np.minimum(np.arange(n + 1) * cell, radius)
    F = _semicircle_primitive(edges, radius)
    return SymmetricSet(Profile(np.diff(F) / cell, cell))


def disk_of_area(area: float, cell: float) -> SymmetricSet:
    return disk_set(math.sqrt(area / math.pi), cell)


def rect_set(half_width: float, half_height: float) -> SymmetricSet:
    return SymmetricSet(Profile(np.array([half_height]), half_width))


def random_symmetric_set(rng: np.random.Generator, area: float, cell: float, n: int = 48) -> SymmetricSet:
    """Random nonincreasing profile with given area and a random aspect ratio."""
    steps = rng.exponential(size=n) * (rng.random(n) < 0.6)
    s = np.cumsum(steps[::-1])[::-1] + rng.exponential() * 0.3
    p = Profile(s, 1.0)
    base = SymmetricSet(p)
    base = base.scaled(math.sqrt(area / base.area))
    t = math.exp(rng.uniform(-0.5, 0.5))
    out = dilate(base, t)
    return SymmetricSet(resample(out.profile, cell))


def ball_tuple(measures: Sequence[float], cell: float) -> tuple[SymmetricSet, ...]:
    return tuple(disk_of_area(e, cell) for e in measures)


def rasterize(s, cell: float, bounds=None) -> GridSet:
    """Cell-centre sampling of any set with ``contains``/``bounds`` on a grid
    whose lines pass through the origin."""
    if bounds is None:
        bounds = s.bounds()
    x0, x1, y0, y1 = bounds
    ix0, ix1 = math.floor(x0 / cell), math.ceil(x1 / cell)
    iy0, iy1 = math.floor(y0 / cell), math.ceil(y1 / cell)
    xs = (np.arange(ix0, ix1) + 0.5) * cell
    ys = (np.arange(iy0, iy1) + 0.5) * cell
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    return GridSet((ix0 * cell, iy0 * cell), cell, s.contains(X, Y))


# -- Steiner symmetrizations -------------------------------------------------------


def _centered_columns(counts: np.ndarray, n_out: int) -> np.ndarray:
    """Boolean (len(counts), n_out) with each row a centred run of ``counts``
    cells; odd runs put the extra cell on the positive side."""
    idx = np.arange(n_out)[None, :]
    lo = n_out // 2 - counts[:, None] // 2
    hi = n_out // 2 + (counts[:, None] + 1) // 2
    return (idx >= lo) & (idx < hi)


def steiner_sharp(s: GridSet) -> GridSet:
    """Vertical Steiner symmetrization, cellwise exact."""
    counts = s.column_counts()
    ny = s.bits.shape[1]
    ny += ny % 2
    return GridSet((s.origin[0], -ny * s.cell / 2), s.cell, _centered_columns(counts, ny))


def steiner_flat(s: GridSet) -> GridSet:
    """Horizontal Steiner symmetrization, cellwise exact."""
    counts = s.row_counts()
    nx = s.bits.shape[0]
    nx += nx % 2
    bits = _centered_columns(counts, nx).T
    return GridSet((-nx * s.cell / 2, s.origin[1]), s.cell, bits)


def steiner_dagger(s: GridSet) -> GridSet:
    return steiner_flat(steiner_sharp(s))


def steiner_ddagger(s: GridSet) -> GridSet:
    """Vertical-only symmetrization (columns centred, x left in place)."""
    return steiner_sharp(s)


def dagger_profile(column_heights: np.ndarray, column_width: float) -> Profile:
    """Profile of the doubly symmetrized set whose vertical slices have the
    given full heights.  The profile is the decreasing rearrangement of the
    half-heights run at twice the speed."""
    h = np.sort(np.asarray(column_heights, dtype=float))[::-1]
    h = h[h > 0]
    return Profile(h / 2.0, column_width / 2.0).compressed()


def to_symmetric(s: GridSet) -> SymmetricSet:
    """Exact doubly symmetrized set of a bitmap, as a ``SymmetricSet``."""
    return SymmetricSet(dagger_profile(s.column_counts() * s.cell, s.cell))


def ddagger_columns(s: GridSet) -> ColumnSet:
    """Exact vertical symmetrization of a bitmap."""
    return ColumnSet(s.origin[0], s.cell, s.column_counts() * s.cell / 2.0)


def symmetrize(s) -> SymmetricSet:
    """Double symmetrization of a ``GridSet``/``ColumnSet``/``SymmetricSet``."""
    if isinstance(s, SymmetricSet):
        return s
    if isinstance(s, GridSet):
        return to_symmetric(s)
    if isinstance(s, ColumnSet):
        return SymmetricSet(dagger_profile(2 * s.half_heights, s.cell))
    raise TypeError(f"cannot symmetrize {type(s).__name__}")


# -- dilations ---------------------------------------------------------------


def dilate(s: SymmetricSet, t: float, cell_width: float | None = None) -> SymmetricSet:
    """Image under ``(x, y) -> (t x, y / t)``.

    Exact on step profiles (cell width scales by ``t``); pass ``cell_width``
    to resample onto a fixed grid afterwards.
    """
    if not t > 0:
        raise GeometryError(f"dilation parameter must be positive, got {t}")
    if t == 1.0:
        out = s
    else:
        out = SymmetricSet(Profile(s.profile.samples / t, s.profile.cell_width * t))
    if cell_width is not None:
        out = SymmetricSet(resample(out.profile, cell_width))
    return out


def dilate_tuple(E: Sequence[SymmetricSet], t: float) -> tuple[SymmetricSet, ...]:
    return tuple(dilate(s, t) for s in E)


def symmetric_difference_area(a: SymmetricSet, b: SymmetricSet) -> float:
    """Exact ``|A delta B|`` for two profile sets."""
    edges = np.union1d(
        np.arange(a.profile.n + 1) * a.profile.cell_width,
        np.arange(b.profile.n + 1) * b.profile.cell_width,
    )
    if edges.size < 2:
        return 0.0
    mid = 0.5 * (edges[:-1] + edges[1:])
    return float(4.0 * np.sum(np.abs(a.profile(mid) - b.profile(mid)) * np.diff(edges)))


# -- superlevel sets -------------------------------------------------------------


def _segment_lengths(a: np.ndarray, b: np.ndarray, t: float, h: float, strict: bool) -> np.ndarray:
    """Length of ``{s in [0, h]: interp(s) > t}`` (or ``>=``) for linear
    interpolation between end values ``a`` and ``b``."""
    if strict:
        ina, inb = a > t, b > t
    else:
        ina, inb = a >= t, b >= t
    both = ina & inb
    one = ina ^ inb
    diff = np.abs(a - b)
    with np.errstate(divide="ignore", invalid="ignore"):
        part = np.where(diff > 0, h * (np.maximum(a, b) - t) / diff, 0.0)
    part = np.clip(part, 0.0, h)
    return np.where(both, h, np.where(one, part, 0.0))


def superlevel_set(field, target_area: float, mode: str = "cells") -> tuple[SymmetricSet, float]:
    """Superlevel set of a sampled field with prescribed area.

    ``field`` needs ``values`` (n1, n2) sampled at the cell centres of a grid
    of spacing ``cell`` that is symmetric about the origin.

    ``mode="cells"`` keeps whole cells (ties at the threshold filled in
    row-major order).  ``mode="interpolated"`` measures each column of the
    piecewise-linear interpolant in u2 exactly and matches the area to
    rounding error.  Either way the result is returned doubly symmetrized.
    """
    K = np.asarray(field.values, dtype=float)
    h = float(field.cell)
    if target_area <= 0:
        raise GeometryError("target area must be positive")
    if mode == "cells":
        return _superlevel_cells(K, h, target_area)
    if mode == "interpolated":
        return _superlevel_interp(K, h, target_area)
    raise GeometryError(f"unknown superlevel mode {mode!r}")


def _superlevel_cells(K: np.ndarray, h: float, target: float) -> tuple[SymmetricSet, float]:
    flat = K.ravel()
    positive = int(np.count_nonzero(flat > 0))
    m = int(math.ceil(target / h**2 - 1e-9))
    if m > positive:
        raise InfeasibleMeasure(
            f"infeasible measure: target {target:g} exceeds positive support {positive * h * h:g}"
        )
    # stable sort keeps row-major order among equal values
    order = np.argsort(-flat, kind="stable")
    chosen = order[:m]
    thr = float(flat[chosen[-1]])
    mask = np.zeros(flat.size, dtype=bool)
    mask[chosen] = True
    mask = mask.reshape(K.shape)
    heights = mask.sum(axis=1) * h
    return SymmetricSet(dagger_profile(heights, h)), thr


def _superlevel_interp(K: np.ndarray, h: float, target: float) -> tuple[SymmetricSet, float]:
    n1 = K.shape[0]
    padded = np.pad(K, ((0, 0), (1, 1)))
    a, b = padded[:, :-1], padded[:, 1:]

    def col_len(t, strict=True):
        return _segment_lengths(a, b, t, h, strict)

    def area_gt(t):
        return float(col_len(t).sum() * h)

    support = area_gt(0.0)
    if target > support * (1 + 1e-12):
        raise InfeasibleMeasure(
            f"infeasible measure: target {target:g} exceeds positive support {support:g}"
        )
    lo, hi = 0.0, float(K.max())
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if area_gt(mid) > target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(hi, 1e-300):
            break
    thr = hi
    lengths = col_len(thr)
    short = target - lengths.sum() * h
    if short > 1e-12 * target:
        # plateau at the threshold: fill level segments in row-major order
        extra = (col_len(thr, strict=False) - lengths).ravel()
        need = short / h
        cum = np.cumsum(extra)
        take = np.minimum(extra, np.maximum(need - (cum - extra), 0.0))
        lengths = lengths + take.reshape(lengths.shape)
    heights = lengths.sum(axis=1)
    assert heights.size == n1
    return SymmetricSet(dagger_profile(heights, h)), thr


# -- compatibility functional and normalization ---------------------------------------


def _rect_intersections(s: SymmetricSet, a_vals: np.ndarray, b_vals: np.ndarray) -> np.ndarray:
    """``|E cap [-a, a] x [-b, b]|`` for all (a, b) pairs; shape (na, nb)."""
    p = s.profile
    if p.n == 0:
        return np.zeros((a_vals.size, b_vals.size))
    capped = np.minimum(p.samples[:, None], b_vals[None, :])  # (n, nb)
    cum = np.vstack([np.zeros((1, b_vals.size)), np.cumsum(capped, axis=0) * p.cell_width])
    k = np.minimum(np.floor(a_vals / p.cell_width).astype(np.int64), p.n)
    frac = a_vals - k * p.cell_width
    inside = k < p.n
    last = np.where(inside[:, None], capped[np.minimum(k, p.n - 1), :], 0.0)
    return 4.0 * (cum[k, :] + frac[:, None] * last)


def lambda_compat(E: Sequence[SymmetricSet], n_grid: int = 160, return_rect: bool = False):
    """sup over centred axis-parallel rectangles R of min_j |E_j cap R| / (|E_j| + |R|).

    The rectangle grid combines every profile breakpoint with a logarithmic
    sweep, so the optimum for a tuple of identical sets is hit exactly.
    """
    areas = [s.area for s in E]
    if min(areas) <= 0:
        return (0.0, None) if return_rect else 0.0
    xs = [np.arange(1, s.profile.n + 1) * s.profile.cell_width for s in E]
    ys = [s.profile.samples for s in E]
    lo = min(min(s.profile.cell_width for s in E), min(float(s.profile.samples[-1]) for s in E)) / 4
    hi = max(max(s.x_extent for s in E), max(s.y_extent for s in E)) * 4
    sweep = np.geomspace(lo, hi, n_grid)
    a_vals = np.unique(np.concatenate([sweep, *xs]))
    b_vals = np.unique(np.concatenate([sweep, *ys]))
    rect = 4.0 * a_vals[:, None] * b_vals[None, :]
    ratio = np.full(rect.shape, np.inf)
    for s, area in zip(E, areas):
        ratio = np.minimum(ratio, _rect_intersections(s, a_vals, b_vals) / (area + rect))
    idx = np.unravel_index(np.argmax(ratio), ratio.shape)
    val = float(ratio[idx])
    if return_rect:
        return val, (float(a_vals[idx[0]]), float(b_vals[idx[1]]))
    return val


def inscribed_square(s: SymmetricSet) -> float:
    """Half-side of the largest centred square inside ``s``."""
    p = s.profile
    if p.n == 0:
        return 0.0
    k = np.arange(p.n)
    valid = p.samples > k * p.cell_width
    cand = np.minimum(p.samples, (k + 1) * p.cell_width)
    return float(cand[valid].max()) if valid.any() else 0.0


def _square_after(E, t):
    return min(inscribed_square(dilate(s, t)) for s in E)


T_GRID = 2.0 ** (np.arange(-40, 41) / 8.0)


def _moments(E: Sequence[SymmetricSet]) -> tuple[float, float]:
    """Summed second moments ``(int x^2, int y^2)`` over the tuple."""
    mx = my = 0.0
    for s in E:
        p = s.profile
        edges = np.arange(p.n + 1) * p.cell_width
        mx += float(np.sum(4 * p.samples * (edges[1:] ** 3 - edges[:-1] ** 3) / 3))
        my += float(np.sum(4 * p.samples**3 / 3 * p.cell_width))
    return mx, my


def moment_dilation(E: Sequence[SymmetricSet]) -> float:
    """The ``t`` with equal summed second moments in x and y after ``D_t``.

    Moments scale as ``t**2`` and ``t**-2``; for homothetic axis-parallel
    ellipses this ``t`` turns them into discs.
    """
    mx, my = _moments(E)
    return (my / mx) ** 0.25 if mx > 0 and my > 0 else 1.0


def dilation_normalize(E: Sequence[SymmetricSet], refine: str | None = None) -> tuple[float, tuple[SymmetricSet, ...]]:
    """Choose the dilation maximizing the common inscribed centred square.

    Candidates are ``2**(k/8)``, ``k = -40..40``; ties go to the smallest t.
    ``refine`` optionally moves within the winner's grid bracket:
    ``"square"`` maximizes the square side continuously, ``"moments"``
    balances the second moments (clipped to the bracket), which is far less
    sensitive to staircase noise near round shapes.
    """
    best_t, best = 1.0, -1.0
    for t in T_GRID:
        val = _square_after(E, float(t))
        if val > best:
            best_t, best = float(t), val
    step = 2.0 ** (1 / 8)
    if refine == "square":
        from scipy.optimize import minimize_scalar

        c = math.log(best_t)
        res = minimize_scalar(
            lambda lt: -_square_after(E, math.exp(lt)),
            bounds=(c - math.log(step), c + math.log(step)),
            method="bounded",
            options={"xatol": 1e-6},
        )
        if -res.fun > best:
            best_t = math.exp(res.x)
    elif refine == "moments":
        best_t = min(max(moment_dilation(E), best_t / step), best_t * step)
    elif refine is not None:
        raise GeometryError(f"unknown refinement {refine!r}")
    return best_t, dilate_tuple(E, best_t)


# -- boundaries ----------------------------------------------------------------------


def boundary_polygon(s: SymmetricSet, mode: str = "centers") -> np.ndarray:
    """Closed boundary polygon (counter-clockwise, no repeated endpoint).

    ``"staircase"`` traces the exact step boundary; ``"centers"`` joins the
    column mid-tops, the smooth reconstruction used for diagnostics.
    """
    p = s.profile
    h, f = p.cell_width, p.samples
    n = p.n
    if n == 0:
        return np.zeros((0, 2))
    if mode == "staircase":
        pts = [(0.0, f[0])]
        for k in range(n):
            pts.append(((k + 1) * h, f[k]))
            pts.append(((k + 1) * h, f[k + 1] if k + 1 < n else 0.0))
        q = np.array(pts)
    elif mode == "centers":
        xk = (np.arange(n) + 0.5) * h
        q = np.vstack([[0.0, f[0]], np.column_stack([xk, f]), [n * h, 0.0]])
    else:
        raise GeometryError(f"unknown boundary mode {mode!r}")
    # first quadrant runs from the top (0, f0) to (X, 0): clockwise; build ccw loop
    q1 = q[::-1]  # (X,0) -> (0,f0)
    q2 = q[1:] * [-1, 1]  # (0,f0) -> (-X,0), mirrored
    q3 = q1[1:] * [-1, -1]
    q4 = q2 * [-1, -1]
    loop = np.vstack([q1, q2, q3, q4[:-1]])
    # drop consecutive duplicates
    keep = np.ones(len(loop), dtype=bool)
    keep[1:] = np.any(np.abs(np.diff(loop, axis=0)) > 0, axis=1)
    return loop[keep]


def polygon_area(poly: np.ndarray) -> float:
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def hausdorff_to_disk(s: SymmetricSet, radius: float, mode: str = "staircase", n_circle: int = 4096) -> float:
    """Hausdorff distance between the boundary of ``s`` and a centred circle."""
    poly = boundary_polygon(s, mode)
    a = poly
    b = np.roll(poly, -1, axis=0)
    r_end = np.linalg.norm(a, axis=1)
    d = b - a
    L2 = np.einsum("ij,ij->i", d, d)
    with np.errstate(invalid="ignore", divide="ignore"):
        tt = np.clip(-np.einsum("ij,ij->i", a, d) / L2, 0, 1)
    tt = np.where(L2 > 0, tt, 0)
    closest = a + tt[:, None] * d
    r_min = np.linalg.norm(closest, axis=1)
    d1 = max(float(np.max(r_end - radius)), float(np.max(radius - r_min)), 0.0)
    th = np.linspace(0, 2 * np.pi, n_circle, endpoint=False)
    cpts = radius * np.column_stack([np.cos(th), np.sin(th)])
    best = np.full(n_circle, np.inf)
    for start in range(0, len(a), 512):
        aa, dd, ll = a[start : start + 512], d[start : start + 512], L2[start : start + 512]
        rel = cpts[:, None, :] - aa[None, :, :]
        with np.errstate(invalid="ignore", divide="ignore"):
            u = np.clip(np.einsum("cij,ij->ci", rel, dd) / ll, 0, 1)
        u = np.where(ll > 0, u, 0)
        diff = rel - u[..., None] * dd[None]
        best = np.minimum(best, np.sqrt(np.einsum("cij,cij->ci", diff, diff)).min(axis=1))
    return max(d1, float(best.max()))


# -- text format -------------------------------------------------------------------

_HEADER = "# symmext-profile v1"


def profile_to_text(s: SymmetricSet) -> str:
    """Run-length text: header, ``cell_width``, then ``count height`` lines."""
    p = s.profile
    lines = [_HEADER, f"cell_width {p.cell_width!r}"]
    k = 0
    while k < p.n:
        j = k
        while j + 1 < p.n and p.samples[j + 1] == p.samples[k]:
            j += 1
        lines.append(f"{j - k + 1} {float(p.samples[k])!r}")
        k = j + 1
    return "\n".join(lines) + "\n"


def profile_from_text(text: str) -> SymmetricSet:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines or not lines[0].startswith("cell_width"):
        raise GeometryError("profile text must start with a cell_width line")
    cell = float(lines[0].split()[1])
    samples: list[float] = []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) == 1:
            samples.append(float(parts[0]))
        else:
            samples.extend([float(parts[1])] * int(parts[0]))
    return SymmetricSet(Profile(np.array(samples), cell))
