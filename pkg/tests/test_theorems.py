import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from shortck import maps as M
from shortck.basin import ClassifyParams, classify_point
from shortck.geometry import FiltrationSpec, PLUS, classify_filtration
from shortck.sequences import (Custom, EtaSchedule, HQSchedule, MapSequence, jacobian_origin, power_tower,
                               shifted_tower)
from shortck.theorems import (ALL_OF_C2, VarietySets, affine_step, base_containment, basin_avoids_image,
                              disjoint_shorts, domain_transform, eta_growth_check, fb_inside_short,
                              find_linear_map, prop12_analytic_bound, prop12_find_z0, prop12_hypothesis,
                              prop12_recursion, region_test, region_value, rewrite_bounded, term_log_ratio,
                              variety_avoidance_check)

ALPHA, BETA = 0.5, 1 / 9


# bounded rewriting


def test_rewrite_examples():
    assert rewrite_bounded(2, 1, 2) == [(2, 1)]
    assert rewrite_bounded(3, 1, 2) == [(1, 0), (2, 1)]
    assert rewrite_bounded(7, 1, 2) == [(1, 0), (2, 0), (2, 0), (2, 1)]
    assert rewrite_bounded(6, 2, 2) == [(2, 0), (2, 0), (2, 2)]


def test_rewrite_errors():
    with pytest.raises(ValueError, match="hypothesis violated"):
        rewrite_bounded(3, 3, 2)
    with pytest.raises(ValueError):
        rewrite_bounded(-1, 0, 2)
    with pytest.raises(ValueError):
        rewrite_bounded(1, 0, 0)


@given(st.integers(0, 60), st.integers(0, 5), st.integers(5, 9))
def test_rewrite_preserves_origin_derivative(p, q, M_bound):
    pairs = rewrite_bounded(p, q, M_bound)
    assert all(a <= M_bound and b <= M_bound for a, b in pairs)
    # independent oracle: the diagonal derivative of the composed word sequence
    ps, qs = tuple(a for a, _ in pairs), tuple(b for _, b in pairs)
    s = MapSequence(HQSchedule(ALPHA, BETA, ps, qs), len(pairs) - 1)
    got = [d.log_modulus for d in jacobian_origin(s, len(pairs) - 1)]
    la, lb = math.log(ALPHA), math.log(BETA)
    assert got[0] == pytest.approx(p * la + q * lb, abs=1e-12)
    assert got[1] == pytest.approx(q * la + p * lb, abs=1e-12)


# region condition


def test_region_example_finds_xi():
    assert region_value(1, 3, 4) == pytest.approx(0.5)
    res = region_test([1] * 50, [3] * 50, ALPHA, BETA, 4, 3)
    assert res.xi is not None and res.xi < 1
    assert res.max_term <= math.log(res.xi) < 0
    assert all(term_log_ratio(ALPHA, BETA, *pq) <= math.log(res.xi) for pq in res.rewritten)


def test_region_autonomous_fast_path():
    assert region_test([1, 2], [0, 0], ALPHA, BETA, 4, 3).message == ALL_OF_C2


def test_region_failure_reports_index():
    p = [1] * 10
    q = [3] * 6 + [4] * 4
    res = region_test(p, q, ALPHA, BETA, 4, 4)
    assert res.xi is None and res.worst_k == 6
    assert region_value(1, 4, 4) == pytest.approx(-0.5)


def test_region_swap_route():
    # q exceeds the bound while p does not: the swap conjugation exchanges their roles
    res = region_test([1] * 5, [3] * 5, ALPHA, BETA, 4, 1)
    assert res.swapped and res.xi is not None
    assert all(a <= 1 or b == 0 for a, b in res.rewritten)


def test_region_errors():
    with pytest.raises(ValueError, match="eigenvalue hypothesis violated"):
        region_test([1], [3], 0.5, 0.05, 4, 3)
    with pytest.raises(ValueError):
        region_test([1], [3], ALPHA, BETA, 2, 3)
    with pytest.raises(ValueError):
        region_test([5], [5], ALPHA, BETA, 4, 3)


@given(st.lists(st.tuples(st.integers(1, 4), st.integers(0, 4)), min_size=1, max_size=20))
def test_region_xi_bounds_every_term(pairs):
    p, q = [a for a, _ in pairs], [b for _, b in pairs]
    res = region_test(p, q, ALPHA, BETA, 4, 4)
    if res.xi is not None:
        assert all(term_log_ratio(ALPHA, BETA, *pq) <= math.log(res.xi) + 1e-12 for pq in res.rewritten)
        assert all(region_value(a, b, 4) >= 0 for a, b in pairs)


# affine recursion


def test_prop12_closed_form_all_g():
    a, b, k = 0.5, 0.3, 2
    res = prop12_recursion("G" * 30, a, b, k, 0.0)
    x = 0.0
    for n in range(1, 31):
        x = affine_step("G", a, b, k, x)
        assert x == pytest.approx(sum(a ** (-(k - 1) * j) for j in range(n)), rel=1e-12)
    assert res.orbit_bound == pytest.approx(abs(x), rel=1e-12)


def test_prop12_all_f_stays_at_origin():
    assert prop12_recursion("F" * 100, 0.5, 0.3, 2, 0.0).orbit_bound == 0


def test_prop12_fixed_points():
    a, b, k = 0.5, 0.3, 2
    z, _ = prop12_find_z0("F" * 200, a, b, k, 200, anchor=5.0)
    assert abs(z) < 1e-6
    z, _ = prop12_find_z0("G" * 80, a, b, k, 80, anchor=5.0)
    assert z == pytest.approx(a ** (k - 1) / (a ** (k - 1) - 1), abs=1e-12)


def test_prop12_depth_consistency():
    a, b, k = 0.5, 0.3, 2
    ch = "FG" * 40
    z60, e60 = prop12_find_z0(ch, a, b, k, 60)
    z80, e80 = prop12_find_z0(ch, a, b, k, 80)
    assert abs(z60 - z80) <= e60 + e80


def test_prop12_hypothesis_validation():
    assert prop12_hypothesis(0.5, 0.3, 2)
    assert not prop12_hypothesis(0.5, 0.2, 2)
    with pytest.raises(ValueError, match="hypothesis violated"):
        prop12_find_z0("FG" * 30, 0.5, 0.2, 2, 60)
    assert prop12_analytic_bound(0.5, 0.2, 2) == math.inf
    assert prop12_analytic_bound(0.5, 0.3, 2) == pytest.approx((0.25 / 0.3) / (1 - 0.25 / 0.3))
    with pytest.raises(ValueError):
        prop12_recursion("FX", 0.5, 0.3, 2, 0.0)


# eta growth


def test_eta_growth_shifted_tower():
    r = eta_growth_check(2.0, shifted_tower(0.5, n_max=40), 40)
    assert r.violations == 0


def test_eta_growth_power_tower():
    r = eta_growth_check(1.01, power_tower(0.5, n_max=40), 40)
    assert r.violations == 0


def test_eta_growth_constructed_violation():
    s = MapSequence(EtaSchedule(3, 2, Custom((0.1, 0.01, 1e-4, 0.5, 1e-40))), 4)
    r = eta_growth_check(2.0, s, 4)
    assert r.violations == 1 and r.indices == [3]


def test_eta_growth_errors():
    with pytest.raises(ValueError, match="M"):
        eta_growth_check(4.0, power_tower(0.5), 5)
    with pytest.raises(ValueError):
        eta_growth_check(1.0, power_tower(0.5), 5)


# disjoint domains


def test_disjoint_domains():
    r = disjoint_shorts(power_tower(0.5, n_max=200), samples=20000, seed=3)
    assert r.domains == 2 and min(r.members) > 0
    assert r.double_memberships == 0 and r.replay_failures == 0


def test_disjoint_translate_leaves_domain():
    base = power_tower(0.5, n_max=200)
    R = 2.0
    p = ClassifyParams(R, 0.5, 200)
    z = np.array([0.3, 0.2j, 0.1])
    assert classify_point(base, z, p).kind == "Attracted"
    moved = M.apply(M.AffineTranslate(3, 3, 3 * R), z)
    assert classify_point(base, moved, p).kind != "Attracted"


def test_disjoint_origin_images_are_members():
    base = power_tower(0.5, n_max=200)
    R = 2.0
    p = ClassifyParams(R, 0.5, 200)
    for i in (1, 2):
        T = domain_transform(3, i, R, 1)
        w = M.apply(T, np.zeros(3))
        assert w[2] == 3 * (i - 1) * R
        assert classify_point(base, M.apply_inverse(T, w), p).kind == "Attracted"


def test_base_containment_picks_axis_one():
    base = power_tower(0.5, n_max=200)
    axis, failures, members = base_containment(base, 2.0, 20000, 1, ClassifyParams(2.0, 0.5, 200))
    assert axis == 1 and failures[1] == 0 and members > 0


def test_disjoint_needs_three_dimensions():
    with pytest.raises(ValueError):
        disjoint_shorts(MapSequence(EtaSchedule(2, 2, Custom((0.5,), extend=True)), 10))


# variety avoidance


def test_variety_set_invariants():
    with pytest.raises(ValueError):
        VarietySets(0.5, 2.0)
    vs = VarietySets(0.25, 2.0)
    assert vs.contains([0, 0, 7]) and vs.contains([0.2, 0, 0])
    assert not vs.contains([1, 0, 1])


def test_variety_examples():
    vs = VarietySets(0.25, 2.0)
    f = FiltrationSpec.standard(3, 2.0)
    assert classify_filtration(M.apply(vs.shift, [0, 0, 1.5]), f).region == PLUS
    z = np.array([0.25 * 4 * 0.99, 0, 4.0])
    assert vs.contains(z)
    assert classify_filtration(M.apply(vs.shift, z), f).region == PLUS


def test_variety_monte_carlo():
    vs = VarietySets(0.5 / 2.0, 2.0)
    bad, _ = variety_avoidance_check(vs, FiltrationSpec.standard(3, 2.0), samples=10**4, seed=0)
    assert bad == 0


def test_basin_avoids_shifted_sets():
    s = power_tower(0.5)
    landed, checked = basin_avoids_image(s, VarietySets(0.25, 2.0), ClassifyParams(2.0, 0.5, 60), 500)
    assert landed == 0 and checked == 500


def test_find_linear_map():
    L, ratio = find_linear_map(3, 0.1, seed=0)
    assert ratio < 0.1
    v = L @ np.array([0, 0, 1.0])
    assert np.abs(v[:2]).max() < 0.1 * np.abs(v[2:]).max()


# Fatou-Bieberbach inclusion


def test_fb_inclusion():
    r = fb_inside_short(0.5, samples=1000, seed=0)
    assert r.checked == 1000 and r.strict_violations == 0 and r.unconverged == 0
    assert r.max_excess <= 1e-6


def test_fb_origin_is_equal_case():
    from shortck.potentials import psi_n
    s = MapSequence(EtaSchedule(3, 2, shifted_tower(0.5).generator.rule), 60)
    # psi_n(0) = (2^n + 1) 2^-n log a, so the limit is log a exactly
    assert psi_n(s, [0, 0, 0], 50) == pytest.approx(math.log(0.5), abs=1e-14)


def test_fb_errors():
    with pytest.raises(ValueError):
        fb_inside_short(1.0)
    with pytest.raises(ValueError):
        fb_inside_short(0.5, d=3)
