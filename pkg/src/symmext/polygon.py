"""Convex polygons cut out by half-planes ``n . y <= r``.

Scalar reference implementation: successive clipping of a large square
followed by the shoelace formula.  The vectorized evaluator in
``functional`` is checked against it.
"""

from __future__ import annotations

import numpy as np


def clip(poly: np.ndarray, n, r: float) -> np.ndarray:
    """Intersect a convex polygon (vertex array, ccw) with ``n . y <= r``."""
    if len(poly) == 0:
        return poly
    n = np.asarray(n, dtype=float)
    s = poly @ n - r
    out = []
    m = len(poly)
    for k in range(m):
        p, q = poly[k], poly[(k + 1) % m]
        sp, sq = s[k], s[(k + 1) % m]
        if sp <= 0:
            out.append(p)
        if (sp < 0 < sq) or (sq < 0 < sp):
            out.append(p + (q - p) * (sp / (sp - sq)))
    return np.array(out).reshape(-1, 2)


def shoelace(poly: np.ndarray) -> float:
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def square(half_side: float) -> np.ndarray:
    a = float(half_side)
    return np.array([[-a, -a], [a, -a], [a, a], [-a, a]])


def halfplane_polygon(normals, rhs, half_side: float | None = None) -> np.ndarray:
    """Polygon ``{y: normals[k] . y <= rhs[k] for all k}`` (assumed bounded)."""
    normals = np.asarray(normals, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    if half_side is None:
        norms = np.linalg.norm(normals, axis=1)
        half_side = 4.0 * max(float(np.max(np.abs(rhs))), 1.0) / float(norms.min())
    poly = square(half_side)
    for n, r in zip(normals, rhs):
        poly = clip(poly, n, r)
        if len(poly) == 0:
            break
    return poly


def strip_polygon(rows, widths, shifts=None) -> np.ndarray:
    """``{y: |rows[j] . y + shifts[j]| <= widths[j] for all j}``."""
    rows = np.asarray(rows, dtype=float)
    widths = np.asarray(widths, dtype=float)
    shifts = np.zeros(len(rows)) if shifts is None else np.asarray(shifts, dtype=float)
    normals = np.vstack([rows, -rows])
    rhs = np.concatenate([widths - shifts, widths + shifts])
    return halfplane_polygon(normals, rhs)


def strip_area(rows, widths, shifts=None) -> float:
    return shoelace(strip_polygon(rows, widths, shifts))
