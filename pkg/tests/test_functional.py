from __future__ import annotations

import math

import numpy as np
import pytest

from symmext.data_model import DataError, pairwise_constant, random_split_data
from symmext.functional import (
    EvalReport,
    check_symmetrization,
    eval_exact_symmetric,
    eval_monte_carlo,
    lipschitz_ratio,
    strip_areas,
    theta_lower,
    theta_scaled,
    theta_union,
)
from symmext.geometry import (
    Disk,
    GridSet,
    Profile,
    SymmetricSet,
    Translated,
    ball_tuple,
    dilate_tuple,
    disk_of_area,
    random_symmetric_set,
    rasterize,
    symmetrize,
)
from symmext.polygon import strip_area

EQ = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, -1.0]])
EMPTY = SymmetricSet(Profile(np.zeros(0), 0.1))


def _random_tuple(rng, cell=1 / 64):
    return [random_symmetric_set(rng, rng.uniform(0.4, 2.0), cell) for _ in range(4)]


def test_report_validation():
    with pytest.raises(ValueError):
        EvalReport(-1.0, "grid", 0.0, 1)
    with pytest.raises(ValueError):
        EvalReport(1.0, "grid", math.inf, 1)
    with pytest.raises(ValueError):
        EvalReport(1.0, "nope", 0.0, 1)


def test_empty_set_gives_zero(eq32, unit_disks):
    rep = eval_exact_symmetric(eq32, [EMPTY, *unit_disks[1:]])
    assert rep.value == 0.0 and rep.error_bound == 0.0


def test_diamond_area():
    assert strip_areas(EQ, np.ones((1, 4)))[0] == pytest.approx(2.0, abs=1e-14)
    assert strip_area(EQ, np.ones(4)) == pytest.approx(2.0, abs=1e-14)


def test_strip_areas_match_clipping_oracle(rng):
    """Regression: non-integer rows with near-parallel pairs."""
    worst = 0.0
    for _ in range(300):
        rows = rng.normal(size=(4, 2))
        w = rng.uniform(0.0, 2.0, size=4)
        s = rng.normal(scale=0.7, size=4)
        a = strip_areas(rows, w[None], s[None])[0]
        b = strip_area(rows, w, s)
        worst = max(worst, abs(a - b) / max(1.0, b))
    assert worst <= 1e-10


def test_strip_areas_empty_and_degenerate():
    w = np.array([[1.0, 1.0, 0.0, 1.0], [1.0, 1.0, 1.0, 1.0]])
    s = np.array([[0, 0, 0, 0], [0, 0, 5.0, 0]])
    assert np.allclose(strip_areas(EQ, w, s), 0.0)


def test_unit_disks_value(eq32, unit_disks):
    rep = eval_exact_symmetric(eq32, unit_disks)
    mc = eval_monte_carlo(eq32, unit_disks, 4_000_000, seed=3)
    assert abs(rep.value - mc.value) <= 3 * mc.error_bound + rep.error_bound


@pytest.mark.parametrize("t", [0.5, 2.0])
def test_dilation_invariance(eq32, rng, t):
    E = _random_tuple(rng)
    a = eval_exact_symmetric(eq32, E)
    b = eval_exact_symmetric(eq32, dilate_tuple(E, t))
    assert abs(a.value - b.value) <= 2 * max(a.error_bound, b.error_bound) + 1e-12


def test_error_bound_shrinks(eq32, rng):
    E = _random_tuple(rng)
    reps = [eval_exact_symmetric(eq32, E, h) for h in (1 / 16, 1 / 32, 1 / 64)]
    d1 = abs(reps[0].value - reps[1].value)
    d2 = abs(reps[1].value - reps[2].value)
    assert d2 <= d1 + 1e-12
    assert abs(reps[0].value - reps[2].value) <= reps[0].error_bound + reps[2].error_bound + 1e-12


def test_mc_agrees_with_exact_on_random_tuples(rng):
    fails = 0
    for k in range(20):
        L = random_split_data(rng)
        E = _random_tuple(rng)
        ex = eval_exact_symmetric(L, E)
        mc = eval_monte_carlo(L, E, 400_000, seed=k)
        if abs(ex.value - mc.value) > 3 * mc.error_bound + ex.error_bound:
            fails += 1
    # 3 sigma: a single statistical miss is allowed in 20
    assert fails <= 1


def test_disjoint_images_zero(eq32):
    far = Translated(Disk((0.0, 0.0), 0.5), (50.0, 0.0))
    E = [Disk((0.0, 0.0), 0.5), Disk((0.0, 0.0), 0.5), far, Disk((0.0, 0.0), 0.5)]
    rep = eval_monte_carlo(eq32, E, 100_000, seed=0)
    assert rep.value == 0.0 and rep.error_bound == 0.0


def test_mc_seed_stability(eq32, unit_disks):
    reps = [eval_monte_carlo(eq32, unit_disks, 10_000_000, seed=s) for s in (1, 2)]
    se = math.hypot(reps[0].error_bound, reps[1].error_bound)
    assert abs(reps[0].value - reps[1].value) <= 3 * se


def test_mc_deterministic(eq32, unit_disks):
    a = eval_monte_carlo(eq32, unit_disks, 200_000, seed=9)
    b = eval_monte_carlo(eq32, unit_disks, 200_000, seed=9)
    assert a.value == b.value and a.error_bound == b.error_bound


def test_mc_thread_independent(eq32, unit_disks, monkeypatch):
    monkeypatch.setenv("SYMMEXT_THREADS", "1")
    a = eval_monte_carlo(eq32, unit_disks, 200_000, seed=4)
    monkeypatch.setenv("SYMMEXT_THREADS", "4")
    b = eval_monte_carlo(eq32, unit_disks, 200_000, seed=4)
    assert a.value == b.value


def test_mc_rejects_zero(eq32, unit_disks):
    with pytest.raises(DataError):
        eval_monte_carlo(eq32, unit_disks, 0)


def test_exact_rejects_perturbed(eq32, unit_disks):
    with pytest.raises(DataError, match="perturb"):
        eval_exact_symmetric(eq32.with_ell(np.ones((4, 2))), unit_disks)


def test_exact_rejects_grid_sets(eq32, unit_disks):
    with pytest.raises(TypeError):
        eval_exact_symmetric(eq32, [rasterize(unit_disks[0], 0.05), *unit_disks[1:]])


def test_theta_balls_and_scaling(eq32):
    e = (math.pi, math.pi, 1.69 * math.pi, math.pi)
    est = theta_lower(eq32, e, cell=1 / 128)
    assert est.lower_bound > 0
    for r in (0.5, 3.0):
        sc = theta_scaled(eq32, est, r)
        assert sc.lower_bound == pytest.approx(r * r * est.lower_bound, rel=1e-6)
        direct = theta_lower(eq32, tuple(r * v for v in e), cell=math.sqrt(r) / 128)
        assert direct.lower_bound == pytest.approx(r * r * est.lower_bound, rel=1e-6)


def test_theta_rejects_bad_measures(eq32):
    with pytest.raises(DataError):
        theta_lower(eq32, (1.0, 1.0, 0.0, 1.0))


def test_theta_union_superadditive(eq32):
    a = theta_lower(eq32, (math.pi,) * 4, cell=1 / 64)
    b = theta_lower(eq32, (2.0, 1.0, 1.5, 1.0), cell=1 / 64)
    u = theta_union(eq32, a, b, n=2_000_000, seed=5)
    assert u.e == pytest.approx(tuple(x + y for x, y in zip(a.e, b.e)))
    assert u.lower_bound >= a.lower_bound + b.lower_bound - 3 * u.error - a.error - b.error


def _rect_union(rng, cell=1 / 32):
    n = 96
    bits = np.zeros((n, n), dtype=bool)
    for _ in range(rng.integers(1, 4)):
        i0, j0 = rng.integers(0, n - 20, size=2)
        w, h = rng.integers(4, 24, size=2)
        bits[i0 : i0 + w, j0 : j0 + h] = True
    off = rng.uniform(-2.0, 0.0, size=2)
    return GridSet((off[0], off[1]), cell, bits)


def test_symmetrization_already_symmetric(eq32, unit_disks):
    lhs, rhs, holds = check_symmetrization(eq32, unit_disks, n=2_000_000, seed=1)
    assert holds
    assert abs(lhs.value - rhs.value) <= 3 * lhs.error_bound + rhs.error_bound


def test_symmetrization_rect_unions(eq32, rng):
    for k in range(10):
        E = [_rect_union(rng) for _ in range(4)]
        lhs, rhs, holds = check_symmetrization(eq32, E, n=300_000, seed=k)
        assert holds, (lhs, rhs)


def test_symmetrization_general_sets_need_cell(eq32):
    E = [Disk((0.3, 0.1), 1.0)] * 4
    with pytest.raises(DataError):
        check_symmetrization(eq32, E, n=1000)
    _, _, holds = check_symmetrization(eq32, E, n=400_000, cell=1 / 64)
    assert holds


def test_translation_invariance(eq32, unit_disks, rng):
    base = eval_monte_carlo(eq32, unit_disks, 4_000_000, seed=11)
    for _ in range(3):
        v = rng.normal(size=4)
        E = [Translated(s, tuple(eq32.matrix(j) @ v)) for j, s in enumerate(unit_disks)]
        mc = eval_monte_carlo(eq32, E, 4_000_000, seed=12)
        assert abs(mc.value - base.value) <= 3 * math.hypot(mc.error_bound, base.error_bound)


def test_lipschitz_ratio_bounded(rng):
    worst = 0.0
    for _ in range(8):
        L = random_split_data(rng)
        E = _random_tuple(rng)
        F = [symmetrize(rasterize(s, 1 / 64)) if k % 2 else s for k, s in enumerate(_random_tuple(rng))]
        worst = max(worst, lipschitz_ratio(L, E, F) / (4 * pairwise_constant(L)))
    assert worst <= 1.0


def test_lipschitz_zero_for_identical(eq32, unit_disks):
    assert lipschitz_ratio(eq32, unit_disks, unit_disks) == 0.0


def test_quadrature_cauchy(eq32):
    E = [disk_of_area(a, 1 / 256) for a in (1.0, 1.4, 2.0, 0.8)]
    vals = [eval_exact_symmetric(eq32, E, h).value for h in (1 / 8, 1 / 16, 1 / 32, 1 / 64)]
    d = np.abs(np.diff(vals))
    assert np.all(d[1:] <= d[:-1] + 1e-13)


def test_ball_tuple_value_matches_fine_reference(eq32):
    coarse = eval_exact_symmetric(eq32, ball_tuple([math.pi] * 4, 1 / 64)).value
    fine = eval_exact_symmetric(eq32, ball_tuple([math.pi] * 4, 1 / 512)).value
    assert coarse == pytest.approx(fine, rel=2e-3)
