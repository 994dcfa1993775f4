"""Linear data for the four-set functional.

Each of the four maps ``L_j : R^4 -> R^2`` is stored in split form
``L_j(x, y) = (a_j . x, b_j . y + c_j . x)`` where ``a_j`` (``x_row``) and
``b_j`` (``y_row``) are nonzero 2-vectors and the optional ``c_j``
(``ell_row``) is the perturbation row that breaks the split structure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
import numpy as np

INDICES = (0, 1, 2, 3)
DET_RTOL = 1e-12


class DataError(ValueError):
    """Raised for invalid or unsuitable linear data."""


def _vec2(v, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=float).reshape(-1)
    if arr.shape != (2,) or not np.all(np.isfinite(arr)):
        raise DataError(f"{name} must be two finite reals, got {v!r}")
    return arr


@dataclass(frozen=True)
class SplitMap:
    x_row: np.ndarray
    y_row: np.ndarray
    ell_row: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "x_row", _vec2(self.x_row, "x_row"))
        object.__setattr__(self, "y_row", _vec2(self.y_row, "y_row"))
        if self.ell_row is not None:
            object.__setattr__(self, "ell_row", _vec2(self.ell_row, "ell_row"))
        if not np.any(self.x_row) or not np.any(self.y_row):
            raise DataError("x_row and y_row must be nonzero (surjectivity)")

    def to_dict(self) -> dict:
        out = {"x": self.x_row.tolist(), "y": self.y_row.tolist()}
        if self.ell_row is not None:
            out["ell"] = self.ell_row.tolist()
        return out


@dataclass(frozen=True)
class LinearTuple:
    maps: tuple[SplitMap, SplitMap, SplitMap, SplitMap]
    name: str = field(default="", compare=False)

    def __post_init__(self):
        maps = tuple(self.maps)
        if len(maps) != 4:
            raise DataError(f"need exactly 4 maps, got {len(maps)}")
        object.__setattr__(self, "maps", maps)

    @classmethod
    def from_rows(cls, x_rows, y_rows, ell_rows=None, name: str = "") -> "LinearTuple":
        x_rows = np.asarray(x_rows, dtype=float)
        y_rows = np.asarray(y_rows, dtype=float)
        if ell_rows is None:
            maps = [SplitMap(x_rows[j], y_rows[j]) for j in INDICES]
        else:
            ell_rows = np.asarray(ell_rows, dtype=float)
            maps = [SplitMap(x_rows[j], y_rows[j], ell_rows[j]) for j in INDICES]
        return cls(tuple(maps), name=name)

    @property
    def x_rows(self) -> np.ndarray:
        return np.array([m.x_row for m in self.maps])

    @property
    def y_rows(self) -> np.ndarray:
        return np.array([m.y_row for m in self.maps])

    @property
    def ell_rows(self) -> np.ndarray:
        """Perturbation rows as a 4x2 array (zeros where absent)."""
        return np.array([m.ell_row if m.ell_row is not None else np.zeros(2) for m in self.maps])

    @property
    def perturbed(self) -> bool:
        return any(m.ell_row is not None for m in self.maps)

    def base(self) -> "LinearTuple":
        """The split (unperturbed) part of the data."""
        return LinearTuple.from_rows(self.x_rows, self.y_rows, name=self.name)

    def with_ell(self, ell_rows) -> "LinearTuple":
        return LinearTuple.from_rows(self.x_rows, self.y_rows, ell_rows, name=self.name)

    def apply(self, j: int, x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Evaluate ``L_j`` on points ``x, y`` of shape (..., 2)."""
        m = self.maps[j]
        first = x @ m.x_row
        second = y @ m.y_row
        if m.ell_row is not None:
            second = second + x @ m.ell_row
        return first, second

    def matrix(self, j: int) -> np.ndarray:
        """The 2x4 matrix of ``L_j`` acting on (x1, x2, y1, y2)."""
        m = self.maps[j]
        ell = m.ell_row if m.ell_row is not None else np.zeros(2)
        return np.array([[*m.x_row, 0.0, 0.0], [*ell, *m.y_row]])

    def to_dict(self) -> dict:
        return {"maps": [m.to_dict() for m in self.maps]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict, name: str = "") -> "LinearTuple":
        try:
            entries = data["maps"]
        except (KeyError, TypeError) as exc:
            raise DataError("data JSON needs a 'maps' list") from exc
        if len(entries) != 4:
            raise DataError(f"need exactly 4 maps, got {len(entries)}")
        maps = []
        for e in entries:
            maps.append(SplitMap(e["x"], e["y"], e.get("ell")))
        return cls(tuple(maps), name=name)


def _det(a: np.ndarray, b: np.ndarray) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


def _pair_ok(a: np.ndarray, b: np.ndarray) -> bool:
    return abs(_det(a, b)) > DET_RTOL * np.linalg.norm(a) * np.linalg.norm(b)


def is_nondegenerate(L: LinearTuple) -> bool:
    """All pairwise 2x2 determinants of x-rows and of y-rows are nonzero."""
    xr, yr = L.x_rows, L.y_rows
    for i in INDICES:
        for j in INDICES:
            if i < j and not (_pair_ok(xr[i], xr[j]) and _pair_ok(yr[i], yr[j])):
                return False
    return True


def is_fully_symmetric(L: LinearTuple) -> bool:
    if L.perturbed:
        raise DataError("full symmetry is defined for split data only (ell rows present)")
    return all(np.array_equal(m.x_row, m.y_row) for m in L.maps)


def require_split(L: LinearTuple, what: str = "this operation") -> None:
    if L.perturbed:
        raise DataError(f"{what} needs split data; use the perturb module for ell rows")
    if not is_nondegenerate(L):
        raise DataError("linear data is degenerate")


def pairwise_constant(L: LinearTuple) -> float:
    """Max over pairs of 1/(|det x-pair| |det y-pair|).

    ``Lambda(E) <= C |E_i| |E_j|`` holds with this C for every pair i != j,
    because (x, y) -> (L_i z, L_j z) is a bijection with that Jacobian.
    """
    xr, yr = L.x_rows, L.y_rows
    c = 0.0
    for i in INDICES:
        for j in INDICES:
            if i < j:
                c = max(c, 1.0 / abs(_det(xr[i], xr[j]) * _det(yr[i], yr[j])))
    return c


# -- fiber parametrization ---------------------------------------------------


def _kernel_direction(row: np.ndarray) -> np.ndarray:
    k = np.array([-row[1], row[0]]) / np.linalg.norm(row)
    # first nonzero component positive
    lead = k[0] if abs(k[0]) > 1e-14 else k[1]
    return k if lead > 0 else -k


@dataclass(frozen=True)
class FiberParam:
    """``l_{j,i}(u, v) = (alpha_j u1 + beta_j v1, gamma_j u2 + delta_j v2)``.

    ``coef[j] = (alpha, beta, gamma, delta)`` for ``j != i``; the row for
    ``j == i`` is unused. ``jacobian`` is ``|det|`` of the change of
    variables ``z = A u + B v``.
    """

    base_index: int
    coef: np.ndarray
    jacobian: float

    @property
    def others(self) -> tuple[int, ...]:
        return tuple(j for j in INDICES if j != self.base_index)

    def ell(self, j: int, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        a, b, c, d = self.coef[j]
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        return np.stack([a * u[..., 0] + b * v[..., 0], c * u[..., 1] + d * v[..., 1]], axis=-1)

    def pair_nonsingular(self) -> bool:
        """(u, v) -> (l_{j,i}, l_{k,i}) is invertible for all j != k."""
        o = self.others
        for p in range(3):
            for q in range(p + 1, 3):
                a1, b1, c1, d1 = self.coef[o[p]]
                a2, b2, c2, d2 = self.coef[o[q]]
                if abs(a1 * b2 - a2 * b1) < 1e-12 or abs(c1 * d2 - c2 * d1) < 1e-12:
                    return False
        return True


def fiber_param(L: LinearTuple, i: int) -> FiberParam:
    if i not in INDICES:
        raise DataError(f"index {i} not in {INDICES}")
    require_split(L, "fiber_param")
    xi, yi = L.maps[i].x_row, L.maps[i].y_row
    kx, ky = _kernel_direction(xi), _kernel_direction(yi)
    ax = xi / (xi @ xi)
    ay = yi / (yi @ yi)
    coef = np.zeros((4, 4))
    for j in INDICES:
        if j == i:
            continue
        xj, yj = L.maps[j].x_row, L.maps[j].y_row
        coef[j] = (xj @ ax, xj @ kx, yj @ ay, yj @ ky)
    jac = abs(_det(ax, kx) * _det(ay, ky))
    return FiberParam(i, coef, jac)


# -- perturbation range test -------------------------------------------------


def range_inclusion(ell_rows, y_rows, tol: float = 1e-10) -> tuple[bool, np.ndarray | None]:
    """Is the range of ``ell: R^2 -> R^4`` inside the range of ``L_2^0``?

    Returns ``(True, h)`` with ``ell_rows ~= y_rows @ h`` when it is, so that
    ``ell_j(x) = b_j . (h x)``.
    """
    ell_rows = np.asarray(ell_rows, dtype=float).reshape(4, 2)
    y_rows = np.asarray(y_rows, dtype=float).reshape(4, 2)
    h, *_ = np.linalg.lstsq(y_rows, ell_rows, rcond=None)
    resid = np.max(np.abs(y_rows @ h - ell_rows))
    scale = max(1.0, float(np.max(np.abs(ell_rows))))
    if resid <= tol * scale:
        return True, h
    return False, None


# -- presets -------------------------------------------------------------------

_EQ32 = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, -1.0]])

PRESETS: dict[str, LinearTuple] = {
    "eq32": LinearTuple.from_rows(_EQ32, _EQ32, name="eq32"),
}


def load_data(ref: str | Path) -> LinearTuple:
    """Preset name or path to a JSON file ``{"maps": [{"x":..,"y":..,"ell":..}]}``."""
    key = str(ref)
    if key in PRESETS:
        return PRESETS[key]
    path = Path(key)
    if not path.exists():
        raise DataError(f"unknown preset or missing file: {key}")
    return LinearTuple.from_dict(json.loads(path.read_text()), name=path.stem)


def random_split_data(rng: np.random.Generator, symmetric: bool = False, min_det: float = 0.2) -> LinearTuple:
    """Random nondegenerate split data with well-separated row directions."""
    while True:
        x = rng.normal(size=(4, 2))
        y = x.copy() if symmetric else rng.normal(size=(4, 2))
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        y /= np.linalg.norm(y, axis=1, keepdims=True)
        ok = all(
            abs(_det(x[i], x[j])) > min_det and abs(_det(y[i], y[j])) > min_det
            for i in INDICES
            for j in INDICES
            if i < j
        )
        if ok:
            return LinearTuple.from_rows(x, y, name="random")


def perturb_x_rows(L: LinearTuple, rng: np.random.Generator, size: float) -> LinearTuple:
    """Add uniform entries in [-size, size] to the x-rows (split form kept)."""
    x = L.x_rows + rng.uniform(-size, size, size=(4, 2))
    return LinearTuple.from_rows(x, L.y_rows, name=f"{L.name}+dx")


__all__ = [
    "DataError",
    "SplitMap",
    "LinearTuple",
    "FiberParam",
    "is_nondegenerate",
    "is_fully_symmetric",
    "require_split",
    "pairwise_constant",
    "fiber_param",
    "range_inclusion",
    "PRESETS",
    "load_data",
    "random_split_data",
    "perturb_x_rows",
]

