"""Kernel fields ``K_i`` with ``Lam(E) = int_{E_i} K_i``.

With the fiber parametrization ``z = z(u, v)`` of ``data_model.fiber_param``
one has ``L_i(z) = u`` and

    K_i(u) = J * area{v : l_{j,i}(u, v) in E_j for j != i}.

For doubly symmetric sets each condition is ``|gamma u2 + delta v2| <=
f_j(|alpha u1 + beta v1|)``: at fixed ``v1`` an interval in ``v2`` whose
radius is a step function of ``v1``.  The area is therefore a finite sum and
is computed exactly at every node.  Disk tuples get a closed-form treatment
through circular arcs.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import polygon
from .data_model import DataError, LinearTuple, fiber_param, is_fully_symmetric, require_split
from .geometry import Disk, SymmetricSet, ball_tuple

_BLOCK = 1 << 22  # elements per vectorized block


@dataclass(frozen=True)
class KernelField:
    """``values[a, b] = K_i(u1[a], u2[b])`` on cell centres
    ``(k + 1/2 - n/2) * cell`` of a grid symmetric about the origin."""

    base_index: int
    cell: float
    values: np.ndarray
    provenance: dict = field(default_factory=dict)

    @property
    def u1(self) -> np.ndarray:
        n = self.values.shape[0]
        return (np.arange(n) + 0.5 - n / 2) * self.cell

    @property
    def u2(self) -> np.ndarray:
        n = self.values.shape[1]
        return (np.arange(n) + 0.5 - n / 2) * self.cell

    @property
    def extent(self) -> tuple[float, float]:
        n1, n2 = self.values.shape
        return n1 * self.cell / 2, n2 * self.cell / 2

    def at(self, u) -> np.ndarray:
        """Bilinear interpolation (zero outside the grid)."""
        u = np.atleast_2d(np.asarray(u, dtype=float))
        P = np.pad(self.values, 1)
        n1, n2 = self.values.shape
        f1 = (u[:, 0] / self.cell) + n1 / 2 + 0.5  # padded index coordinate
        f2 = (u[:, 1] / self.cell) + n2 / 2 + 0.5
        i1 = np.clip(np.floor(f1).astype(np.int64), 0, n1)
        i2 = np.clip(np.floor(f2).astype(np.int64), 0, n2)
        t1 = np.clip(f1 - i1, 0, 1)
        t2 = np.clip(f2 - i2, 0, 1)
        v = (
            P[i1, i2] * (1 - t1) * (1 - t2)
            + P[i1 + 1, i2] * t1 * (1 - t2)
            + P[i1, i2 + 1] * (1 - t1) * t2
            + P[i1 + 1, i2 + 1] * t1 * t2
        )
        outside = (np.abs(u[:, 0]) >= self.extent[0] + self.cell / 2) | (
            np.abs(u[:, 1]) >= self.extent[1] + self.cell / 2
        )
        return np.where(outside, 0.0, v)

    def to_csv(self, path: str | Path) -> None:
        U1, U2 = np.meshgrid(self.u1, self.u2, indexing="ij")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["u1", "u2", "K"])
            for a, b, k in zip(U1.ravel(), U2.ravel(), self.values.ravel()):
                w.writerow([repr(float(a)), repr(float(b)), repr(float(k))])


# -- grid kernels -------------------------------------------------------------------


def _check_sets(E) -> tuple[SymmetricSet, ...]:
    E = tuple(E)
    if len(E) != 4 or not all(isinstance(s, SymmetricSet) for s in E):
        raise DataError("kernel fields need four SymmetricSets")
    return E


def _box_extent(coef_a, coef_b, bounds) -> float:
    """max |u| such that some v has |a_j u + b_j v| <= bounds_j for all j."""
    if min(bounds) <= 0:
        return 0.0
    normals, rhs = [], []
    for a, b, m in zip(coef_a, coef_b, bounds):
        normals += [(a, b), (-a, -b)]
        rhs += [m, m]
    poly = polygon.halfplane_polygon(normals, rhs)
    return float(np.abs(poly[:, 0]).max()) if len(poly) else 0.0


def kernel_support(L: LinearTuple, E, i: int) -> tuple[float, float]:
    """Half-widths ``(U1, U2)`` of a box containing the support of ``K_i``."""
    fp = fiber_param(L, i)
    o = fp.others
    c = fp.coef
    U1 = _box_extent(c[list(o), 0], c[list(o), 1], [E[j].x_extent for j in o])
    U2 = _box_extent(c[list(o), 2], c[list(o), 3], [E[j].y_extent for j in o])
    return U1, U2


def kernel_values(L: LinearTuple, E, i: int, u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
    """Exact ``K_i`` on the tensor grid ``u1 x u2``."""
    E = _check_sets(E)
    require_split(L, "kernel")
    if L.perturbed:
        raise DataError("perturbed data: kernels need split data")
    fp = fiber_param(L, i)
    o = list(fp.others)
    al, be, ga, de = (fp.coef[o, k] for k in range(4))
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    out = np.zeros((u1.size, u2.size))
    if any(E[j].area <= 0 for j in o):
        return out
    # v1 jumps: |alpha u1 + beta v1| crosses a profile edge
    edges = []
    for jj, j in enumerate(o):
        k = np.arange(E[j].profile.n + 1) * E[j].profile.cell_width
        edges.append((np.concatenate([-k[:0:-1], k]), jj))
    nb = sum(e.size for e, _ in edges)
    g = ga / de  # interval centres sit at -g_j * u2
    rows = max(1, _BLOCK // max(1, nb * 40))
    for start in range(0, u1.size, rows):
        uu = u1[start : start + rows]
        cuts = [(e[None, :] - al[jj] * uu[:, None]) / be[jj] for e, jj in edges]
        T = np.sort(np.concatenate(cuts, axis=1), axis=1)
        mid = 0.5 * (T[:, 1:] + T[:, :-1])  # (r, m)
        wid = T[:, 1:] - T[:, :-1]
        rad = np.stack(
            [E[j].half_height(al[jj] * uu[:, None] + be[jj] * mid) / abs(de[jj]) for jj, j in enumerate(o)],
            axis=-1,
        )  # (r, m, 3)
        wid = np.where(np.all(rad > 0, axis=-1), wid, 0.0)
        out[start : start + rows] = _overlap_sums(rad, wid, g, u2)
    return out * fp.jacobian


def _phi(rad: np.ndarray, g: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Overlap length of the intervals ``[-g_j u - r_j, -g_j u + r_j]``
    (may be negative); ``rad`` (..., 3), ``u`` (..., k)."""
    r = rad[..., None, :]
    gu = u[..., None] * g
    return np.min(r - gu, axis=-1) + np.min(r + gu, axis=-1)


def _overlap_sums(rad: np.ndarray, wid: np.ndarray, g: np.ndarray, u2: np.ndarray) -> np.ndarray:
    """``sum_m wid[., m] * max(0, phi_m(u2))`` for every row and node.

    Each ``max(0, phi_m)`` is concave piecewise linear with at most 13
    knots (envelope crossings and zeros); writing it as a sum of ramps
    ``c (u - k)_+`` turns the sum over m into sorted cumulative sums.
    """
    pairs = [(0, 1), (0, 2), (1, 2)]
    dg = np.array([g[a] - g[b] for a, b in pairs])
    dr = np.stack([rad[..., a] - rad[..., b] for a, b in pairs], axis=-1)
    kn = np.concatenate([dr / dg, -dr / dg], axis=-1)  # (r, m, 6) envelope knots
    kn = np.sort(kn, axis=-1)
    ph = _phi(rad, g, kn)
    S = float(g.max() - g.min())
    # zeros: outside the knot range and between sign changes
    left = np.where(ph[..., :1] > 0, kn[..., :1] - ph[..., :1] / S, kn[..., :1])
    right = np.where(ph[..., -1:] > 0, kn[..., -1:] + ph[..., -1:] / S, kn[..., -1:])
    y0, y1 = ph[..., :-1], ph[..., 1:]
    cross = (y0 > 0) != (y1 > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = kn[..., :-1] + (kn[..., 1:] - kn[..., :-1]) * y0 / (y0 - y1)
    z = np.where(cross, z, kn[..., :-1])
    K = np.sort(np.concatenate([left, kn, z, right], axis=-1), axis=-1)  # (r, m, 13)
    Y = np.maximum(_phi(rad, g, K), 0.0)
    Y[..., 0] = 0.0
    Y[..., -1] = 0.0
    dk = np.diff(K, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        sl = np.where(dk > 0, np.diff(Y, axis=-1) / dk, 0.0)
    c = np.diff(np.concatenate([np.zeros_like(sl[..., :1]), sl, np.zeros_like(sl[..., :1])], axis=-1), axis=-1)
    c = c * wid[..., None]
    nr = K.shape[0]
    K = K.reshape(nr, -1)
    c = c.reshape(nr, -1)
    order = np.argsort(K, axis=1)
    K = np.take_along_axis(K, order, axis=1)
    c = np.take_along_axis(c, order, axis=1)
    A = np.cumsum(c, axis=1)
    B = np.cumsum(c * K, axis=1)
    out = np.zeros((nr, u2.size))
    for r in range(nr):
        idx = np.searchsorted(K[r], u2, side="right") - 1
        ok = idx >= 0
        ii = np.where(ok, idx, 0)
        out[r] = np.where(ok, A[r, ii] * u2 - B[r, ii], 0.0)
    scale = float(np.abs(out).max()) if out.size else 0.0
    out[out < 1e-13 * scale] = 0.0
    return out


def kernel_grid(L: LinearTuple, E: Sequence[SymmetricSet], i: int, h: float, margin: int = 2) -> KernelField:
    """``K_i`` on a cell-centred grid of spacing ``h`` covering its support.

    Only the quadrant ``u1, u2 > 0`` is computed; the field is even in each
    coordinate because every set is doubly symmetric.
    """
    E = _check_sets(E)
    if i not in range(4):
        raise DataError(f"index {i} not in 0..3")
    U1, U2 = kernel_support(L, E, i)
    n1 = int(math.ceil(U1 / h)) + margin
    n2 = int(math.ceil(U2 / h)) + margin
    q1 = (np.arange(n1) + 0.5) * h
    q2 = (np.arange(n2) + 0.5) * h
    Q = kernel_values(L, E, i, q1, q2)
    full = np.block([[Q[::-1, ::-1], Q[::-1, :]], [Q[:, ::-1], Q]])
    prov = {"data": L.name, "index": i, "areas": [s.area for s in E]}
    return KernelField(i, h, full, prov)


def pairing(field: KernelField, s: SymmetricSet) -> float:
    """``int_{E} K`` with ``K`` interpolated bilinearly and ``E`` a profile
    set; exact for the interpolant."""
    K = field.values
    n1, n2 = K.shape
    h = field.cell
    p = s.profile
    if p.n == 0:
        return 0.0
    # quadrant nodes with a zero node beyond the grid; K is even
    Q = K[n1 // 2 :, n2 // 2 :]
    Q = np.pad(Q, ((0, 1), (0, 1)))
    x_nodes = np.concatenate([[0.0], (np.arange(Q.shape[0]) + 0.5) * h])
    Q = np.vstack([Q[:1], Q])  # K(0, .) = K(h/2, .) by evenness of the interpolant
    y_nodes = np.concatenate([[0.0], (np.arange(Q.shape[1]) + 0.5) * h])
    Q = np.hstack([Q[:, :1], Q])
    # column primitives C[a, y] = int_0^y K_lin(x_a, t) dt at each profile height
    heights = p.samples
    cum = np.concatenate(
        [np.zeros((Q.shape[0], 1)), np.cumsum(0.5 * (Q[:, 1:] + Q[:, :-1]) * np.diff(y_nodes), axis=1)], axis=1
    )
    k = np.clip(np.searchsorted(y_nodes, heights, side="right") - 1, 0, y_nodes.size - 2)
    t = np.clip((heights - y_nodes[k]) / (y_nodes[k + 1] - y_nodes[k]), 0, 1)
    a, b = Q[:, k], Q[:, k + 1]
    col = cum[:, k] + (heights - y_nodes[k]) * (a + 0.5 * t * (b - a))  # (nx, nprof)
    col = np.where(heights[None, :] > y_nodes[-1], cum[:, -1:], col)
    # integrate in x over each profile cell with col linear between x nodes
    total = 0.0
    for c in range(p.n):
        x0, x1 = c * p.cell_width, (c + 1) * p.cell_width
        total += _pw_linear_integral(x_nodes, col[:, c], x0, x1)
    return 4.0 * total


def _pw_linear_integral(xn: np.ndarray, yn: np.ndarray, a: float, b: float) -> float:
    xs = np.concatenate([[a], xn[(xn > a) & (xn < b)], [b]])
    ys = np.interp(xs, xn, yn, right=0.0)
    return float(np.sum(0.5 * (ys[1:] + ys[:-1]) * np.diff(xs)))


def kernel_gradient(field: KernelField, u) -> np.ndarray:
    """Central difference with step one cell."""
    u = np.asarray(u, dtype=float)
    h = field.cell
    X, Y = field.extent
    if abs(u[0]) + h > X - h / 2 or abs(u[1]) + h > Y - h / 2:
        raise DataError("gradient point too close to the grid boundary")
    pts = np.array([u + (h, 0), u - (h, 0), u + (0, h), u - (0, h)])
    v = field.at(pts)
    return np.array([(v[0] - v[1]) / (2 * h), (v[2] - v[3]) / (2 * h)])


# -- disks ----------------------------------------------------------------------------


def disk_lens_area(d1: Disk, d2: Disk) -> float:
    r1, r2 = d1.radius, d2.radius
    d = math.dist(d1.center, d2.center)
    if d >= r1 + r2:
        return 0.0
    if d <= abs(r1 - r2):
        return math.pi * min(r1, r2) ** 2
    a1 = math.acos(max(-1.0, min(1.0, (d * d + r1 * r1 - r2 * r2) / (2 * d * r1))))
    a2 = math.acos(max(-1.0, min(1.0, (d * d + r2 * r2 - r1 * r1) / (2 * d * r2))))
    return r1 * r1 * (a1 - math.sin(2 * a1) / 2) + r2 * r2 * (a2 - math.sin(2 * a2) / 2)


def circle_intersections(d1: Disk, d2: Disk) -> list[np.ndarray]:
    (x1, y1), (x2, y2) = d1.center, d2.center
    r1, r2 = d1.radius, d2.radius
    dx, dy = x2 - x1, y2 - y1
    d = math.hypot(dx, dy)
    if d == 0 or d > r1 + r2 or d < abs(r1 - r2):
        return []
    a = (d * d + r1 * r1 - r2 * r2) / (2 * d)
    hh = math.sqrt(max(r1 * r1 - a * a, 0.0))
    mx, my = x1 + a * dx / d, y1 + a * dy / d
    if hh == 0:
        return [np.array([mx, my])]
    return [np.array([mx - hh * dy / d, my + hh * dx / d]), np.array([mx + hh * dy / d, my - hh * dx / d])]


@dataclass(frozen=True)
class Arc:
    source: int
    center: tuple[float, float]
    radius: float
    theta0: float
    theta1: float  # theta1 > theta0, counter-clockwise

    def point(self, th: float) -> np.ndarray:
        return np.array(self.center) + self.radius * np.array([math.cos(th), math.sin(th)])

    @property
    def start(self) -> np.ndarray:
        return self.point(self.theta0)

    @property
    def end(self) -> np.ndarray:
        return self.point(self.theta1)

    def green(self) -> float:
        """``int x dy`` along the arc."""
        cx, _ = self.center
        R = self.radius
        a, b = self.theta0, self.theta1
        return cx * R * (math.sin(b) - math.sin(a)) + 0.5 * R * R * (
            b - a + 0.5 * (math.sin(2 * b) - math.sin(2 * a))
        )

    def normal_integral(self) -> np.ndarray:
        """``int n ds`` with ``n`` the outward unit normal of the source disk."""
        R = self.radius
        a, b = self.theta0, self.theta1
        return R * np.array([math.sin(b) - math.sin(a), math.cos(a) - math.cos(b)])


@dataclass(frozen=True)
class ArcRegion:
    arcs: tuple[Arc, ...]
    degenerate: bool = False

    @property
    def census(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for a in self.arcs:
            out[a.source] = out.get(a.source, 0) + 1
        return out

    def closes(self, tol: float = 1e-9) -> bool:
        """Each arc ends where another starts."""
        if len(self.arcs) <= 1:
            return True
        starts = np.array([a.start for a in self.arcs])
        for a in self.arcs:
            if np.min(np.linalg.norm(starts - a.end, axis=1)) > tol:
                return False
        return True

    def ordered(self) -> tuple[Arc, ...]:
        """Arcs chained end-to-start."""
        if len(self.arcs) <= 1:
            return self.arcs
        rest = list(self.arcs[1:])
        out = [self.arcs[0]]
        while rest:
            e = out[-1].end
            k = int(np.argmin([np.linalg.norm(a.start - e) for a in rest]))
            out.append(rest.pop(k))
        return tuple(out)


def _dedupe(disks: Sequence[Disk]) -> list[tuple[int, Disk]]:
    out: list[tuple[int, Disk]] = []
    for k, d in enumerate(disks):
        if not any(
            math.dist(d.center, e.center) <= 1e-12 and abs(d.radius - e.radius) <= 1e-12 for _, e in out
        ):
            out.append((k, d))
    return out


def intersection_region(disks: Sequence[Disk], tol: float = 1e-9) -> ArcRegion:
    """Boundary arcs of the intersection of several disks."""
    items = _dedupe(disks)
    arcs = []
    degenerate = False
    for a, (ka, da) in enumerate(items):
        others = [d for b, (_, d) in enumerate(items) if b != a]
        angles = []
        for db in others:
            for p in circle_intersections(da, db):
                angles.append(math.atan2(p[1] - da.center[1], p[0] - da.center[0]))
                for dc in others:
                    if dc is db:
                        continue
                    if abs(math.dist(p, dc.center) - dc.radius) <= tol:
                        degenerate = True
        angles = sorted(set(angles))
        if not angles:
            spans = [(0.0, 2 * math.pi)]
        else:
            spans = [(angles[k], angles[k + 1]) for k in range(len(angles) - 1)]
            spans.append((angles[-1], angles[0] + 2 * math.pi))
        for t0, t1 in spans:
            if t1 - t0 <= 0:
                continue
            # several interior probes: a tangency point can sit at the midpoint
            probes = t0 + (t1 - t0) * np.array([0.25, 0.5, 0.75])
            pts = np.array(da.center) + da.radius * np.column_stack([np.cos(probes), np.sin(probes)])
            if all(
                np.all(np.hypot(*(pts - np.array(d.center)).T) <= d.radius * (1 + 1e-12)) for d in others
            ):
                arcs.append(Arc(ka, da.center, da.radius, t0, t1))
    return ArcRegion(tuple(arcs), degenerate)


def disk_triple_area(d1: Disk, d2: Disk, d3: Disk, tol: float = 1e-9) -> tuple[float, ArcRegion]:
    """Area of ``d1 & d2 & d3`` by Green's theorem over its boundary arcs."""
    reg = intersection_region((d1, d2, d3), tol)
    area = sum(a.green() for a in reg.arcs)
    return max(area, 0.0), reg


def _fiber_disks(L0: LinearTuple, radii: Sequence[float], i: int, w) -> list[Disk]:
    """Disks ``E~_j(w) = B(-(alpha_j / beta_j) w, R_j / |beta_j|)`` for fully
    symmetric data and centred discs of radii ``radii``."""
    fp = fiber_param(L0, i)
    out = []
    w = np.asarray(w, dtype=float)
    for j in fp.others:
        a, b, _, _ = fp.coef[j]
        out.append(Disk(tuple(-(a / b) * w), radii[j] / abs(b)))
    return out


def _require_symmetric(L0: LinearTuple) -> None:
    if not is_fully_symmetric(L0):
        raise DataError("disk kernels need fully symmetric data")


def kernel_disks(L0: LinearTuple, radii: Sequence[float], i: int, u) -> float:
    """``K_i^0(u)`` for centred discs by the arc formula."""
    _require_symmetric(L0)
    area, _ = disk_triple_area(*_fiber_disks(L0, radii, i, u))
    return fiber_param(L0, i).jacobian * area


def kernel_disks_gradient(L0: LinearTuple, radii: Sequence[float], i: int, u) -> np.ndarray:
    """Gradient of ``K_i^0`` from the motion of the boundary arcs."""
    _require_symmetric(L0)
    fp = fiber_param(L0, i)
    disks = _fiber_disks(L0, radii, i, u)
    _, reg = disk_triple_area(*disks)
    coefs = [-(fp.coef[j, 0] / fp.coef[j, 1]) for j in fp.others]
    g = np.zeros(2)
    for arc in reg.arcs:
        g += coefs[arc.source] * arc.normal_integral()
    return fp.jacobian * g


def ball_radii(e: Sequence[float]) -> tuple[float, ...]:
    return tuple(math.sqrt(v / math.pi) for v in e)


def strict_admissibility(
    L0: LinearTuple, e: Sequence[float], step: float = 1e-4, threshold: float = -1e-6, delta: float = 1e-3
) -> tuple[bool, list[dict]]:
    """Positivity of ``K_i^0`` near the ball boundary and a strictly negative
    left radial derivative there, for every index ``i``."""
    from .data_model import is_nondegenerate

    if not is_nondegenerate(L0):
        raise DataError("degenerate data")
    _require_symmetric(L0)
    R = ball_radii(e)
    details = []
    for i in range(4):
        u = R[i]
        grid = np.linspace(u - delta * u, u + delta * u, 21)
        vals = np.array([kernel_disks(L0, R, i, (x, 0.0)) for x in grid])
        k0 = kernel_disks(L0, R, i, (u, 0.0))
        dq = (k0 - kernel_disks(L0, R, i, (u - step, 0.0))) / step
        dq_half = (k0 - kernel_disks(L0, R, i, (u - step / 2, 0.0))) / (step / 2)
        positive = bool(np.all(vals > 0))
        ok = positive and dq < threshold and dq_half < threshold
        details.append(
            {"index": i, "u": u, "positive": positive, "min_K": float(vals.min()),
             "left_derivative": dq, "left_derivative_half_step": dq_half, "strict": bool(ok)}
        )
    return all(d["strict"] for d in details), details


def disk_kernel_field(L0: LinearTuple, e: Sequence[float], i: int, h: float) -> KernelField:
    """``K_i^0`` of the ball tuple on a grid, node by node from the arc formula."""
    R = ball_radii(e)
    E = ball_tuple(e, h)
    U1, U2 = kernel_support(L0, E, i)
    n1 = int(math.ceil(U1 / h)) + 2
    n2 = int(math.ceil(U2 / h)) + 2
    q1 = (np.arange(n1) + 0.5) * h
    q2 = (np.arange(n2) + 0.5) * h
    Q = np.array([[kernel_disks(L0, R, i, (a, b)) for b in q2] for a in q1])
    full = np.block([[Q[::-1, ::-1], Q[::-1, :]], [Q[:, ::-1], Q]])
    return KernelField(i, h, full, {"data": L0.name, "index": i, "radii": list(R)})
