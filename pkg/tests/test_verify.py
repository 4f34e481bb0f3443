import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wermer.branches import branch_fiber, fibers, principal_sqrt
from wermer.schedule import ConstructionParams, build_schedule, from_values
from wermer.verify import (
    CauchyRegion,
    ConeSpec,
    _sqrt_pair_margin,
    branch_point_deltas,
    cap_fiber_samples,
    cone_contains,
    estimate_C,
    hull_separation,
    index_sets,
    region_away_from_fiber,
    remark_audit,
    slope_statistic,
    sublevel_table,
    tilde_alpha,
    verify_mean_value,
    verify_phi_cauchy,
    verify_sublevel_nesting,
    winding_number,
    working_C,
)

vec = st.lists(
    st.complex_numbers(max_magnitude=100, allow_nan=False, allow_infinity=False), min_size=1, max_size=4
)


# -- the square-root constant ---------------------------------------------------


def test_pair_ratio_at_origin_is_sqrt2():
    # z = z' = 0: sqrt(1) and sqrt(-1) are orthogonal, every sign combination gives sqrt 2
    for a in (1, -1):
        for b in (1, -1):
            assert abs(a * principal_sqrt(1.0) - b * principal_sqrt(-1.0)) == pytest.approx(math.sqrt(2))


def test_estimate_C_in_unit_interval():
    C = estimate_C(64)
    assert 0 < C < 1
    assert _sqrt_pair_margin(C, 64) > 0
    for smaller in (0.9 * C, 0.5 * C, 0.1 * C):
        assert _sqrt_pair_margin(smaller, 64) > 0
    assert working_C() <= C


def test_estimate_C_nonincreasing_on_nested_grids():
    # the resolution-32 grid is a subset of the resolution-64 grid
    assert estimate_C(64) <= estimate_C(32)


def test_estimate_C_resolution_floor():
    with pytest.raises(ValueError):
        estimate_C(16)


# -- cones and index sets ---------------------------------------------------------


def test_cone_examples():
    assert cone_contains([0.3 - 2j], ConeSpec(frozenset({1}), 0.01))
    assert cone_contains([1, 0.5], ConeSpec(frozenset({1}), 1.0))
    assert not cone_contains([1, 2], ConeSpec(frozenset({1}), 1.0))
    assert not cone_contains([1, 0.5], ConeSpec(frozenset({1}), 1.0, on_slice=True))
    assert cone_contains([1, 0], ConeSpec(frozenset({1}), 1.0, on_slice=True))


@given(vec, st.complex_numbers(min_magnitude=1e-3, max_magnitude=1e3, allow_nan=False, allow_infinity=False),
       st.floats(0.1, 10), st.data())
def test_cone_homogeneous(zeta, lam, alpha, data):
    P = frozenset(data.draw(st.sets(st.integers(1, len(zeta)), min_size=1)))
    cone = ConeSpec(P, alpha)
    scaled = [lam * c for c in zeta]
    if any(abs(c) == 0 for c in zeta) or any(abs(c) < 1e-280 for c in scaled):
        return
    # stay away from exact ties, where rounding of the scaled moduli decides
    mags = np.abs(zeta)
    for p in P:
        others = np.delete(mags, p - 1)
        if np.any(np.abs(others - alpha * mags[p - 1]) < 1e-9 * (1 + alpha * mags[p - 1])):
            return
    assert cone_contains(zeta, cone) == cone_contains(scaled, cone)


def test_index_sets_partition_levels(rng):
    s = build_schedule(ConstructionParams(n=4, nu_max=9))
    for _ in range(50):
        z = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        nu = int(rng.integers(1, 10))
        sets = index_sets(z, nu, s)
        assert sum(len(v) for v in sets.L.values()) == nu
        assert set().union(*sets.L.values()) == set(range(1, nu + 1))


def test_tilde_alpha_singleton(demo):
    assert tilde_alpha(demo.a[4], 5, {1}, demo) == 6


def test_tilde_alpha_two_hits():
    eps = (1.0, 0.5, 0.3, 0.2, 0.05)
    s = from_values(eps, (10.0, 20.0, 0.0, 30.0, 0.0005))
    # z = a_5 lies within rho_5 = 4^-5 of a_3 and of nothing else
    assert index_sets(0.0005, 5, s).script_L_tilde({1}) == {3, 5}
    assert tilde_alpha(0.0005, 5, {1}, s) == pytest.approx(min(6.0, (eps[2] / eps[4]) ** 2 / 9))


def test_tilde_alpha_exceeds_one_on_built_schedule(demo, rng):
    for nu in range(1, 12):
        assert tilde_alpha(demo.a[nu - 1], nu, {1}, demo) > 1


def test_tilde_alpha_requires_slice_point(demo):
    with pytest.raises(ValueError):
        tilde_alpha(demo.a[2] + 0.1, 3, {1}, demo)


# -- slope statistic ----------------------------------------------------------------


def test_slope_unit_branch_point(unit):
    deltas = [1e-2, 1e-4, 1e-6]
    ss = slope_statistic(0.0, 1, {1}, deltas, 64, unit)
    for d, r in zip(deltas, ss.min_ratios):
        expected = d**-0.5 / 2
        assert 0.5 * expected <= r <= 2 * expected
        assert r > 1
    assert ss.best_delta == 1e-6 and ss.exceeds_threshold


def test_slope_scales_with_eps(demo):
    deltas = branch_point_deltas(3, demo)
    base = slope_statistic(demo.a[2], 3, {1}, deltas, 40, demo, seed=3, C=0.375)
    for t in (0.25, 4.0):
        scaled = slope_statistic(demo.a[2], 3, {1}, deltas, 40, demo.scaled(t), seed=3, C=0.375)
        assert np.allclose(np.array(scaled.min_ratios) / t, base.min_ratios, rtol=1e-10)


def test_slope_guards(demo):
    with pytest.raises(ValueError):
        slope_statistic(demo.a[13], 14, {1}, [1e-3], 4, demo)
    with pytest.raises(ValueError):
        slope_statistic(demo.a[2] + 0.5, 3, {1}, [1e-3], 4, demo)


def test_branch_point_deltas(demo):
    d = branch_point_deltas(4, demo, count=3)
    assert d[0] == pytest.approx((demo.eps[3] / 4) ** 2)
    assert d[1] == pytest.approx(d[0] / 4)


# -- sublevel nesting -----------------------------------------------------------------


def test_nesting_equal_depths_trivial(demo):
    assert verify_sublevel_nesting(3, 3, 2.0, 21, demo).passed


def test_nesting_demo_50_grid(demo):
    rep = verify_sublevel_nesting(3, 5, 2.0, 50, demo)
    assert rep.passed, rep.details
    assert rep.details["item1_points"] > 0 and rep.details["item2_points"] > 0


def test_nesting_corrupted_control(demo):
    bad = demo.with_eps(4, demo.eps[3] * 1000)
    rep = verify_sublevel_nesting(3, 5, 2.0, 41, bad)
    assert not rep.passed
    assert rep.details["item1_margin"] < 0


def test_nesting_margin_monotone_in_R(demo):
    # the R=1 grid (step 0.1) is the R=2 grid (step 0.1) restricted to the smaller ball
    big = verify_sublevel_nesting(3, 5, 2.0, 41, demo).details
    small = verify_sublevel_nesting(3, 5, 1.0, 21, demo).details
    assert small["item1_margin"] >= big["item1_margin"] - 1e-12
    assert small["item2_margin"] >= big["item2_margin"] - 1e-12


def test_nesting_precondition(demo):
    with pytest.raises(ValueError):
        verify_sublevel_nesting(1, 3, 2.0, 11, demo)


# -- Cauchy rate ------------------------------------------------------------------------


def test_cauchy_unit_distance(demo):
    region = region_away_from_fiber(300, 10, 1.0, demo, seed=4)
    rep = verify_phi_cauchy(region, 10, demo)
    assert rep.passed
    assert rep.details["bound"] == pytest.approx(2.0**-10, rel=1e-3)
    assert rep.details["max_gap"] < rep.details["bound"]


def test_cauchy_region_with_fiber_point_is_unknown(demo):
    wj = branch_fiber(0.2, 10, demo).values[0]
    region = CauchyRegion(np.array([[0.2 + 0j]]), np.array([wj]), 0.5)
    rep = verify_phi_cauchy(region, 10, demo)
    assert rep.status == "unknown"


def test_cauchy_bound_decreases_in_nu(demo):
    region = region_away_from_fiber(20, 12, 0.5, demo, seed=1)
    bounds = [verify_phi_cauchy(region, nu, demo).details["bound"] for nu in range(4, 12)]
    assert all(b2 < b1 for b1, b2 in zip(bounds, bounds[1:]))


# -- mean value -------------------------------------------------------------------------


def test_mean_value_depth_one(unit):
    rep = verify_mean_value([0.3 + 0.1j, 1.2], [1, 1j], 0.05, 1, "pluriharmonic", unit, nodes=1024)
    assert rep.passed, rep.details


def test_submean_vacuous_on_fiber(unit):
    rep = verify_mean_value([4.0, 2.0], [1, 1], 0.1, 1, "submean", unit)
    assert rep.passed and rep.worst_margin == math.inf


def test_mean_value_above_fiber_point(demo):
    z = 0.4 - 0.2j
    fib = fibers(z, 6, demo)[0]
    wj = fib[5]
    h = 0.5 * np.abs(fib - wj)[np.abs(fib - wj) > 0].min()
    rep = verify_mean_value([z, wj + 1j * h], [0, 1], h / 2, 6, "pluriharmonic", demo)
    assert rep.passed, rep.details


def test_enclosed_zero_is_unknown_but_submean_holds(demo):
    z = 0.4 - 0.2j
    wj = fibers(z, 4, demo)[0][2]
    center = [z, wj + 1e-3]
    assert winding_number(center, [0, 1], 1e-2, 4, demo) >= 1
    assert verify_mean_value(center, [0, 1], 1e-2, 4, "pluriharmonic", demo).status == "unknown"
    assert verify_mean_value(center, [0, 1], 1e-2, 4, "submean", demo).passed


def test_mean_value_rejects_bad_shapes(demo):
    with pytest.raises(ValueError):
        verify_mean_value([0.1], [1], 0.1, 3, "pluriharmonic", demo)
    with pytest.raises(ValueError):
        verify_mean_value([0.1, 0.2], [1, 0], 0.1, 3, "harmonic", demo)


# -- hull -------------------------------------------------------------------------------


@pytest.fixture(scope="module")
def E_small(demo):
    return cap_fiber_samples(200, 5.0, 12, demo, seed=2)


def test_hull_large_w_separated_first(demo, E_small):
    rep = hull_separation([0.0, 4.9], 5.0, E_small, 12, demo)
    assert rep.passed and rep.details["separating_depth"] == 5


def test_hull_sample_point_not_separated(demo, E_small):
    q = E_small[np.argmin(np.linalg.norm(E_small, axis=1))]
    rep = hull_separation(q, 5.0, E_small, 12, demo)
    assert rep.domain["verdict"] == "IN"
    assert rep.passed and rep.details["separating_depth"] is None


def test_hull_probe_outside_ball(demo, E_small):
    with pytest.raises(ValueError):
        hull_separation([0.0, 6.0], 5.0, E_small, 12, demo)


def test_cap_samples_lie_on_fibers(demo):
    E = cap_fiber_samples(50, 1.0, 10, demo, seed=0)
    assert E.shape == (50, 2)
    assert np.all(np.linalg.norm(E, axis=1) <= 1.0)
    assert np.all(sublevel_table(E, [10], demo)[:, 0] == -math.inf) or np.all(
        sublevel_table(E, [10], demo)[:, 0] < -20
    )


# -- closed-form audit --------------------------------------------------------------------


def test_remark_audit_rows(unit):
    out = remark_audit([(0.1, 0.5), (-0.3, 1j)], 1, unit)
    assert out["points"] == 2 and out["max_abs_diff"] < 1e-14
