"""Acceptance criteria, one test per criterion.

Each criterion records a PASS/FAIL line that is printed in the terminal
summary (see conftest.py).  Run ``python tests/test_acceptance.py`` to get
the same lines without pytest.
"""

from __future__ import annotations

import math
import time

import numpy as np
import pytest

from symmext.data_model import load_data, perturb_x_rows, random_split_data, range_inclusion
from symmext.functional import (
    check_symmetrization,
    eval_exact_symmetric,
    eval_monte_carlo,
    theta_lower,
    theta_scaled,
    theta_union,
)
from symmext.genericity import classify_triple, figure1_disks, radius_family, transition_scan
from symmext.geometry import (
    GridSet,
    Translated,
    ball_tuple,
    dilate,
    dilate_tuple,
    lambda_compat,
    random_symmetric_set,
)
from symmext.kernels import kernel_grid, pairing
from symmext.perturb import DEFAULT_T, dilation_scan
from symmext.search import SearchConfig, distance_to_balls, run_search

RESULTS: list[tuple[int, bool, str]] = []
EQ32 = load_data("eq32")
E13 = (math.pi, math.pi, 1.69 * math.pi, math.pi)


def _record(k: int, ok: bool, detail: str) -> None:
    RESULTS.append((k, bool(ok), detail))


# -- criteria ------------------------------------------------------------------------------


def criterion_1():
    t0 = time.perf_counter()
    cases = {r: classify_triple(*figure1_disks(r)).case for r in (1.3, 1.85, math.sqrt(3))}
    tr = transition_scan(EQ32, radius_family, 0, (1.3, 1.85))
    dt = time.perf_counter() - t0
    ok = (
        cases[1.3] == "type-i"
        and cases[1.85] == "type-ii"
        and cases[math.sqrt(3)] == "neither"
        and len(tr) == 1
        and abs(tr[0].r - math.sqrt(3)) <= 1e-6
        and dt < 1.0
    )
    rstar = tr[0].r if tr else float("nan")
    return ok, f"verdicts {list(cases.values())}, r*={rstar:.10f}, {dt:.2f}s"


def _rect_union(rng, cell=1 / 64, n=160):
    bits = np.zeros((n, n), dtype=bool)
    for _ in range(rng.integers(1, 4)):
        i0, j0 = rng.integers(0, n - 48, size=2)
        w, h = rng.integers(8, 48, size=2)
        bits[i0 : i0 + w, j0 : j0 + h] = True
    return GridSet(tuple(rng.uniform(-2.0, 0.0, 2)), cell, bits)


def criterion_2():
    rng = np.random.default_rng(2002)
    t0 = time.perf_counter()
    passed = 0
    worst = -math.inf
    for k in range(100):
        L = EQ32 if k % 2 == 0 else random_split_data(rng)
        E = [_rect_union(rng) for _ in range(4)]
        lhs, rhs, holds = check_symmetrization(L, E, n=1_000_000, seed=k)
        passed += holds
        if rhs.value > 0:
            worst = max(worst, (lhs.value - rhs.value) / (3 * lhs.error_bound + rhs.error_bound + 1e-300))
    dt = time.perf_counter() - t0
    ok = passed == 100 and dt < 300
    return ok, f"{passed}/100 hold, max (lhs-rhs)/tol={worst:.2f}, {dt:.0f}s"


def criterion_3():
    rng = np.random.default_rng(3003)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(5):
        L = random_split_data(rng)
        for _ in range(20):
            E = [random_symmetric_set(rng, rng.uniform(0.5, 2.0), 1 / 128) for _ in range(4)]
            ref = eval_exact_symmetric(L, E).value
            for i in range(4):
                val = pairing(kernel_grid(L, E, i, 1 / 128), E[i])
                worst = max(worst, abs(val - ref) / ref)
    dt = time.perf_counter() - t0
    return worst <= 1e-2 and dt < 600, f"max relative gap {worst:.2e} over 400 pairings, {dt:.0f}s"


def criterion_4():
    rng = np.random.default_rng(4004)
    worst_dil = 0.0
    ok = True
    for _ in range(5):
        L = random_split_data(rng)
        E = [random_symmetric_set(rng, rng.uniform(0.5, 2.0), 1 / 64) for _ in range(4)]
        base = eval_exact_symmetric(L, E)
        for t in (0.25, 0.5, 2.0, 4.0):
            rep = eval_exact_symmetric(L, dilate_tuple(E, t))
            tol = 2 * max(base.error_bound, rep.error_bound)
            gap = abs(rep.value - base.value)
            worst_dil = max(worst_dil, gap / tol if tol > 0 else (0.0 if gap == 0 else math.inf))
            ok &= gap <= tol
    worst_tr = 0.0
    B = ball_tuple(E13, 1 / 128)
    ref = eval_monte_carlo(EQ32, B, 4_000_000, seed=40)
    for k in range(5):
        v = rng.normal(size=4)
        moved = [Translated(s, tuple(EQ32.matrix(j) @ v)) for j, s in enumerate(B)]
        mc = eval_monte_carlo(EQ32, moved, 4_000_000, seed=41 + k)
        z = abs(mc.value - ref.value) / math.hypot(mc.error_bound, ref.error_bound)
        worst_tr = max(worst_tr, z)
        ok &= z <= 3
    return ok, f"dilation max gap/(2 eb)={worst_dil:.3f}, translation max |z|={worst_tr:.2f}"


def criterion_5():
    rng = np.random.default_rng(5005)
    est = theta_lower(EQ32, E13, cell=1 / 128)
    worst_scale = 0.0
    for r in (0.5, 2.0):
        sc = theta_scaled(EQ32, est, r)
        direct = theta_lower(EQ32, tuple(r * v for v in E13), cell=math.sqrt(r) / 128)
        for val in (sc.lower_bound, direct.lower_bound):
            worst_scale = max(worst_scale, abs(val - r * r * est.lower_bound) / (r * r * est.lower_bound))
    worst_add = math.inf
    for k in range(10):
        e1 = tuple(rng.uniform(0.5, 3.0, 4))
        e2 = tuple(rng.uniform(0.5, 3.0, 4))
        a = theta_lower(EQ32, e1, cell=1 / 64)
        b = theta_lower(EQ32, e2, cell=1 / 64)
        u = theta_union(EQ32, a, b, n=2_000_000, seed=k)
        s = a.lower_bound + b.lower_bound
        worst_add = min(worst_add, (u.lower_bound - s) / s)
    ok = worst_scale <= 1e-2 and worst_add >= -1e-2
    return ok, f"scaling max rel err {worst_scale:.2e}, min (union-sum)/sum {worst_add:+.2e}"


def criterion_6():
    h = 1 / 128
    t0 = time.perf_counter()
    state, _ = run_search(EQ32, E13, SearchConfig(resolution=h, init="random", seed=0))
    dt = time.perf_counter() - t0
    dist = distance_to_balls(state.tuple, E13)
    ref = eval_exact_symmetric(EQ32, ball_tuple(E13, 1 / 1024)).value
    rel = abs(state.value - ref) / ref
    ok = state.status == "converged" and state.monotone() and max(dist) <= 3 * h and rel <= 1e-2 and dt < 900
    return ok, (
        f"{state.status} after {state.sweep} sweeps, monotone={state.monotone()}, "
        f"max Hausdorff {max(dist):.4f} (3h={3 * h:.4f}), Lambda rel gap {rel:.2e}, {dt:.0f}s"
    )


def criterion_7():
    L = perturb_x_rows(EQ32, np.random.default_rng(7), 1e-2)
    reports = {}
    states = {}
    for h in (1 / 64, 1 / 128):
        st, reg = run_search(L, E13, SearchConfig(resolution=h))
        reports[h], states[h] = reg, st
    fine = reports[1 / 128]
    coarse = reports[1 / 64]
    defect = max(fine.convexity_defect)
    kmin = min(fine.curvature_min)
    smooth_down = all(f <= c for f, c in zip(fine.smoothness, coarse.smoothness))
    ok = defect <= 1e-3 and kmin > 0 and smooth_down and all(s.status == "converged" for s in states.values())
    return ok, (
        f"defect {defect:.1e}, min curvature {kmin:.3f}, smoothness per set "
        f"{[f'{c:.1e}->{f:.1e}' for c, f in zip(coarse.smoothness, fine.smoothness)]}, "
        f"status {[s.status for s in states.values()]}"
    )


def criterion_8():
    ell = np.zeros((4, 2))
    ell[2] = (0.1, 0.0)
    E = ball_tuple([math.pi] * 4, 1 / 128)
    off = dilation_scan(EQ32.with_ell(ell), E, DEFAULT_T)
    not_included = not range_inclusion(ell, EQ32.y_rows)[0]
    part_a = off.positive() and off.monotone() and 1.8 <= off.p <= 2.2 and not_included
    H = np.array([[1.0, 2.0], [0.0, 1.0]])
    ell_in = EQ32.y_rows @ H
    inc, h = range_inclusion(ell_in, EQ32.y_rows)
    resid = float(np.max(np.abs(EQ32.y_rows @ h - ell_in))) if inc else math.inf
    on = dilation_scan(EQ32.with_ell(ell_in), E, DEFAULT_T)
    part_b = inc and resid <= 1e-10 and bool(np.all(np.abs(on.deficits) <= 3 * on.sigma))
    lo, hi = off.p_interval
    return part_a and part_b, (
        f"off-range: positive={off.positive()} monotone={off.monotone()} p={off.p:.3f} "
        f"[95% {lo:.3f}, {hi:.3f}] (target [1.8, 2.2]), not included={not_included}; "
        f"in-range: max |deficit|/sigma={np.max(np.abs(on.deficits) / on.sigma):.2e}, residual {resid:.1e}"
    )


def _bisect_scale(B, delta):
    """Largest-lambda tuple (D_s B, D_s B, B, B) with lambda <= delta."""
    lam = lambda s: lambda_compat([dilate(B, s), dilate(B, s), B, B])  # noqa: E731
    lo, hi = 0.0, 1.0  # log2 s
    while lam(2.0**hi) > delta:
        lo, hi = hi, 2 * hi
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        if lam(2.0**mid) > delta:
            lo = mid
        else:
            hi = mid
    s = 2.0**hi
    return s, lam(s)


def criterion_9():
    rng = np.random.default_rng(9009)
    worst = 0.0
    for _ in range(50):
        E = [random_symmetric_set(rng, rng.uniform(0.3, 3.0), 1 / 64) for _ in range(4)]
        E = [dilate(s, float(np.exp(rng.normal(scale=1.5)))) for s in E]
        worst = max(worst, lambda_compat(E))
    B = ball_tuple([math.pi], 1 / 128)[0]
    vals = []
    for delta in (0.02, 0.01, 0.005):
        s, lam = _bisect_scale(B, delta)
        E = [dilate(B, s), dilate(B, s), B, B]
        worst = max(worst, lam)
        vals.append((delta, s, lam, eval_exact_symmetric(EQ32, E).value))
    decreasing = all(vals[k + 1][3] < vals[k][3] for k in range(2))
    within = all(v[2] <= v[0] for v in vals)
    ok = worst <= 0.5 and decreasing and within
    table = ", ".join(f"delta={d}: s={s:.3g} Lambda={v:.3e}" for d, s, _, v in vals)
    return ok, f"max lambda {worst:.4f}; {table}"


CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
}


@pytest.mark.parametrize("k", sorted(CRITERIA))
def test_criterion(k):
    ok, detail = CRITERIA[k]()
    _record(k, ok, detail)
    assert ok, detail


if __name__ == "__main__":
    for k, fn in sorted(CRITERIA.items()):
        ok, detail = fn()
        print(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}", flush=True)
