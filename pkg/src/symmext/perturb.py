"""Perturbed data ``L_{j,2}(x, y) = b_j . y + c_j . x``.

Covers the comparison with the vertically symmetrized tuple under the
unperturbed data, the ``t -> 0`` dilation scan and the shear test for when
the perturbation factors through ``L_2^0``.

Dilating every set by ``D_t`` is the same as keeping the sets and scaling the
perturbation rows by ``t**2`` (substitute ``x -> t x``, ``y -> y / t``), so
the scan evaluates all ``t`` on one quadrature rule and takes differences
node by node.  Deficits far below the absolute quadrature error of either
value are then still resolved.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .data_model import DataError, LinearTuple, is_fully_symmetric, range_inclusion
from .functional import (
    EvalReport,
    _integrate,
    _line_rule,
    eval_monte_carlo,
    eval_strips,
    line_integrals,
    thread_count,
)
from .geometry import ColumnSet, GridSet, SymmetricSet, ball_tuple, ddagger_columns, dilate_tuple, rasterize

DEFAULT_T = tuple(2.0**-k for k in range(7))


def _require_perturbed(L: LinearTuple) -> None:
    if not L.perturbed:
        raise DataError("no ell rows")


def ddagger(s, cell: float | None = None):
    """Vertical symmetrization of a set as a ``ColumnSet`` (or the set
    itself when it is already vertically symmetric)."""
    if isinstance(s, (SymmetricSet, ColumnSet)):
        return s
    if isinstance(s, GridSet):
        return ddagger_columns(s)
    if cell is None:
        raise DataError("cell size needed to symmetrize general sets")
    return ddagger_columns(rasterize(s, cell))


def check_ddagger_domination(
    L: LinearTuple, E, n: int = 400_000, seed: int = 0, resolution: float | None = None, cell: float | None = None
) -> tuple[EvalReport, EvalReport, bool]:
    """``lhs`` = functional under perturbed data (Monte Carlo), ``rhs`` = the
    unperturbed functional of the vertically symmetrized tuple (exact)."""
    _require_perturbed(L)
    E = tuple(E)
    lhs = eval_monte_carlo(L, E, n, seed)
    rhs = eval_strips(L.base(), [ddagger(s, cell) for s in E], resolution)
    holds = lhs.value <= rhs.value + 3 * lhs.error_bound + rhs.error_bound
    return lhs, rhs, bool(holds)


@dataclass(frozen=True)
class ScanResult:
    t: np.ndarray
    values: np.ndarray
    reference: float
    deficits: np.ndarray
    sigma: np.ndarray
    p: float
    p_interval: tuple[float, float]
    flagged: bool
    notes: str = ""
    method: str = "exact-strip"

    def monotone(self) -> bool:
        """Deficits strictly decreasing as t decreases."""
        return bool(np.all(np.diff(self.deficits) < 0))

    def positive(self) -> bool:
        return bool(np.all(self.deficits > 0))

    def rows(self) -> list[tuple[float, float, float, float]]:
        return [(float(a), float(b), float(c), float(d)) for a, b, c, d in zip(self.t, self.values, self.deficits, self.sigma)]


def fit_power(t: np.ndarray, d: np.ndarray) -> tuple[float, tuple[float, float], bool]:
    """Least-squares ``log d = log c + p log t`` with a 95% interval for p.

    ``flagged`` is set when fewer than three deficits are positive or the
    interval is wider than 1.
    """
    t = np.asarray(t, dtype=float)
    d = np.asarray(d, dtype=float)
    ok = d > 0
    if ok.sum() < 3:
        return math.nan, (math.nan, math.nan), True
    res = stats.linregress(np.log(t[ok]), np.log(d[ok]))
    q = stats.t.ppf(0.975, ok.sum() - 2)
    lo, hi = res.slope - q * res.stderr, res.slope + q * res.stderr
    return float(res.slope), (float(lo), float(hi)), bool(hi - lo > 1)


def dilation_scan(
    L: LinearTuple,
    E: Sequence[SymmetricSet],
    t_list: Sequence[float] = DEFAULT_T,
    resolution: float | None = None,
    method: str = "exact-strip",
    n: int = 2_000_000,
    seed: int = 0,
) -> ScanResult:
    """Functional of ``D_t E`` under perturbed data for decreasing ``t``.

    ``method="exact-strip"`` uses the scaling identity on one quadrature
    rule; the reported sigma per point is the panel error estimate of the
    deficit integrand (floored at 1e-12 of the reference).
    ``method="monte-carlo"`` evaluates each dilated tuple independently with
    per-point seeds ``1009 * seed + k``, in parallel up to
    ``SYMMEXT_THREADS`` workers.
    """
    _require_perturbed(L)
    t = np.asarray(t_list, dtype=float)
    if t.size == 0 or np.any(t <= 0) or np.any(t > 1) or np.any(np.diff(t) >= 0):
        raise DataError("t values must lie in (0, 1] and decrease")
    E = tuple(E)
    base = L.base()
    if method == "exact-strip":
        rule = _line_rule(L, E, resolution)
        if rule is None:
            raise DataError("empty joint support")
        scales = np.concatenate([[0.0], t**2])
        G = line_integrals(L, E, rule, scales)
        vals, _ = _integrate(rule, G)
        D = G[:1] - G[1:]
        deficits, derr = _integrate(rule, D)
        reference = float(vals[0])
        sigma = np.maximum(derr, 1e-12 * reference)
        values = vals[1:]
    elif method == "monte-carlo":
        reference = eval_strips(base, E, resolution).value
        jobs = [(dilate_tuple(E, float(tk)), seed * 1009 + k) for k, tk in enumerate(t)]
        with ThreadPoolExecutor(max_workers=thread_count()) as pool:
            reps = list(pool.map(lambda job: eval_monte_carlo(L, job[0], n, job[1]), jobs))
        values = np.array([r.value for r in reps])
        sigma = np.array([r.error_bound for r in reps])
        deficits = reference - values
    else:
        raise DataError(f"unknown method {method!r}")
    p, ci, flagged = fit_power(t, deficits)
    return ScanResult(t, np.asarray(values), reference, np.asarray(deficits), np.asarray(sigma), p, ci, flagged, method=method)


def shear_reduction(L: LinearTuple, E, n: int = 400_000, seed: int = 0, resolution: float | None = None) -> dict:
    """When ``ell = L_2^0 o h`` the map ``(x, y) -> (x, y + h x)`` turns the
    perturbed functional into the unperturbed one; compare both numerically."""
    _require_perturbed(L)
    ok, h = range_inclusion(L.ell_rows, L.y_rows)
    if not ok:
        return {"included": False}
    direct = eval_monte_carlo(L, E, n, seed)
    reduced = eval_strips(L.base(), E, resolution)
    gap = abs(direct.value - reduced.value)
    return {
        "included": True,
        "h": h.tolist(),
        "direct": direct.to_dict(),
        "reduced": reduced.to_dict(),
        "within_3sigma": bool(gap <= 3 * direct.error_bound + reduced.error_bound),
    }


def nonexistence_probe(
    L0: LinearTuple,
    ell_rows,
    e: Sequence[float],
    t_list: Sequence[float] = DEFAULT_T,
    cell: float = 1 / 128,
    resolution: float | None = None,
    check_admissible: bool = True,
) -> dict:
    """Numerical signature of the perturbed supremum not being attained.

    With the range test failing, ball witnesses dilated by ``t`` approach the
    unperturbed value from below with a positive margin at every fixed t.
    Split but not fully symmetric base data is accepted and labelled
    exploratory.
    """
    from .kernels import strict_admissibility

    if L0.perturbed:
        raise DataError("base data must be unperturbed")
    exploratory = not is_fully_symmetric(L0)
    if check_admissible and not exploratory:
        strict, details = strict_admissibility(L0, e)
        if not strict:
            bad = [d["index"] for d in details if not d["strict"]]
            raise DataError(f"not strictly admissible (failing index {bad})")
    ell_rows = np.asarray(ell_rows, dtype=float).reshape(4, 2)
    L = L0.with_ell(ell_rows)
    included, h = range_inclusion(ell_rows, L0.y_rows)
    out = {"exploratory": exploratory, "included": bool(included)}
    if included:
        resid = float(np.max(np.abs(L0.y_rows @ h - ell_rows)))
        out.update(
            verdict="included; functional equivalent to unperturbed by shear",
            h=h.tolist(),
            residual=resid,
        )
        return out
    E = ball_tuple(e, cell)
    scan = dilation_scan(L, E, t_list, resolution)
    margin = float(scan.deficits[-1])
    sig = float(scan.sigma[-1])
    approaching = scan.monotone() and scan.positive()
    if approaching and margin > 3 * sig:
        verdict = "not included; supremum approached, margin at smallest t above 3 sigma but shrinking"
    else:
        verdict = "not included; scan inconclusive"
    out.update(
        verdict=verdict,
        reference=scan.reference,
        t=scan.t.tolist(),
        deficits=scan.deficits.tolist(),
        sigma=scan.sigma.tolist(),
        p=scan.p,
        p_interval=list(scan.p_interval),
        margin=margin,
    )
    return out


__all__ = [
    "ScanResult",
    "check_ddagger_domination",
    "dilation_scan",
    "fit_power",
    "nonexistence_probe",
    "shear_reduction",
    "ddagger",
]
