"""Classification of three-disk intersections and the ``r`` transition scan.

A triple ``(D_j, D_k, D_l)`` is

* ``type-i``  -- the intersection is a two-disk lens lying inside the third
  disk, the two circles crossing transversally;
* ``type-ii`` -- the boundary is four arcs, one disk contributing two;
* ``neither`` -- a pairwise corner sits on the remaining circle (the unstable
  coincidence separating the two).

Everything else is reported as ``empty`` or ``non-transverse-other``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .data_model import DataError, LinearTuple, fiber_param, is_fully_symmetric
from .geometry import Disk
from .kernels import ArcRegion, ball_radii, circle_intersections, disk_triple_area, strict_admissibility

NEITHER_TOL = 1e-9
ANGLE_TOL = 1e-6


@dataclass(frozen=True)
class GenericityVerdict:
    case: str
    permutation: tuple[int, int, int] | None
    corners: tuple[tuple[float, float], ...]
    census: tuple[int, ...]
    tol: float
    tol_angle: float
    area: float = 0.0
    notes: str = ""

    def to_dict(self) -> dict:
        return {
            "case": self.case,
            "permutation": list(self.permutation) if self.permutation else None,
            "corners": [list(c) for c in self.corners],
            "census": list(self.census),
            "tol": self.tol,
            "tol_angle": self.tol_angle,
            "area": self.area,
            "notes": self.notes,
        }


def _crossing_angle(d1: Disk, d2: Disk, p: np.ndarray) -> float:
    """Angle between the two circles' tangents at a common point."""
    n1 = p - np.array(d1.center)
    n2 = p - np.array(d2.center)
    c = abs(float(n1 @ n2)) / (np.linalg.norm(n1) * np.linalg.norm(n2))
    return math.acos(min(1.0, c))


def classify_triple(dj: Disk, dk: Disk, dl: Disk, tol: float = NEITHER_TOL, tol_angle: float = ANGLE_TOL) -> GenericityVerdict:
    disks = (dj, dk, dl)
    corners = []
    for a, b in itertools.combinations(range(3), 2):
        c = 3 - a - b
        for p in circle_intersections(disks[a], disks[b]):
            corners.append((a, b, c, p))
    area, reg = disk_triple_area(dj, dk, dl, tol)
    census_map = reg.census
    census = tuple(sorted(census_map.values(), reverse=True))
    corner_pts = tuple((float(p[0]), float(p[1])) for *_, p in corners)

    def verdict(case, perm=None, notes=""):
        return GenericityVerdict(case, perm, corner_pts, census, tol, tol_angle, area, notes)

    # the excluded coincidence: a corner on the remaining circle
    for a, b, c, p in corners:
        if abs(math.dist(p, disks[c].center) - disks[c].radius) <= tol:
            return verdict("neither", (a, b, c), "corner on third circle")
    if area <= 0 or not reg.arcs:
        return verdict("empty")
    for a, b, c, p in corners:
        if _crossing_angle(disks[a], disks[b], p) < tol_angle:
            return verdict("non-transverse-other", (a, b, c), "tangential contact")
    sources = sorted(census_map)
    if len(sources) == 2 and census == (1, 1):
        a, b = sources
        c = 3 - a - b
        return verdict("type-i", (a, b, c))
    if census == (2, 1, 1):
        two = next(k for k, v in census_map.items() if v == 2)
        rest = tuple(k for k in range(3) if k != two)
        return verdict("type-ii", (two, *rest))
    return verdict("non-transverse-other", None, f"arc census {census}")


def fiber_disks(L0: LinearTuple, e: Sequence[float], i: int) -> tuple[float, list[Disk]]:
    """``u`` with ``(u, 0)`` on the ball boundary and the three disks at ``(u, 0)``."""
    if not is_fully_symmetric(L0):
        raise DataError("genericity is defined for fully symmetric data")
    R = ball_radii(e)
    u = R[i]
    fp = fiber_param(L0, i)
    out = []
    for j in fp.others:
        a, b, _, _ = fp.coef[j]
        out.append(Disk((-(a / b) * u, 0.0), R[j] / abs(b)))
    return u, out


def classify_data(L0: LinearTuple, e: Sequence[float], i: int, check_admissible: bool = True) -> GenericityVerdict:
    if check_admissible:
        strict, details = strict_admissibility(L0, e)
        if not strict:
            bad = [d["index"] for d in details if not d["strict"]]
            raise DataError(f"not strictly admissible (failing index {bad})")
    _, disks = fiber_disks(L0, e, i)
    return classify_triple(*disks)


def classify_all(L0: LinearTuple, e: Sequence[float]) -> list[GenericityVerdict]:
    """Verdicts for every base index."""
    return [classify_data(L0, e, i, check_admissible=(i == 0)) for i in range(4)]


def radius_family(r: float) -> tuple[float, float, float, float]:
    """Measures of the ball tuple ``(B, B, B_r, B)``."""
    return (math.pi, math.pi, math.pi * r * r, math.pi)


@dataclass(frozen=True)
class Transition:
    r: float
    kind: str
    bracket: tuple[float, float] = field(default=(0.0, 0.0))


def transition_scan(
    L0: LinearTuple,
    family: Callable[[float], Sequence[float]],
    i: int,
    r_range: tuple[float, float],
    n_scan: int = 100,
    tol: float = 1e-9,
) -> list[Transition]:
    """Radii in ``r_range`` where the verdict changes, by scan plus bisection."""
    lo, hi = r_range
    if not hi > lo:
        return []

    def case(r):
        return classify_data(L0, family(r), i, check_admissible=False).case

    rs = np.linspace(lo, hi, n_scan + 1)
    cases = [case(r) for r in rs]
    out = []
    for k in range(n_scan):
        if cases[k] == cases[k + 1]:
            continue
        a, b = float(rs[k]), float(rs[k + 1])
        ca = cases[k]
        while b - a > tol:
            m = 0.5 * (a + b)
            if case(m) == ca:
                a = m
            else:
                b = m
        out.append(Transition(0.5 * (a + b), f"{cases[k]}->{cases[k + 1]}", (a, b)))
    return out


def figure1_disks(r: float) -> tuple[Disk, Disk, Disk]:
    """``(B, B_r - (1, 0), B + (1, 0))``."""
    return Disk((0.0, 0.0), 1.0), Disk((-1.0, 0.0), r), Disk((1.0, 0.0), 1.0)


__all__ = [
    "GenericityVerdict",
    "ArcRegion",
    "classify_triple",
    "classify_data",
    "classify_all",
    "fiber_disks",
    "radius_family",
    "transition_scan",
    "figure1_disks",
    "Transition",
]
