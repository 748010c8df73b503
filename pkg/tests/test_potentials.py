import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shortck import maps as M
from shortck.basin import boundary_bisect, classify_points, default_params, ATTRACTED
from shortck.potentials import (GreenParams, envelope_tail, green_floor_constant, green_growth_violations,
                                green_minus, green_plus, green_plus_batch, log_phi_trajectory, phi_n,
                                psi_envelope, psi_evaluator, psi_limit, psi_limit_batch, psi_n, psi_trajectory,
                                sample_shift_plus_region, select_green_block, subaverage_check)
from shortck.sequences import autonomous, compose_inverse, power_tower, uniform_polydisc

from .strategies import points


def test_envelope_tail_closed_form():
    assert envelope_tail(2, 3) == pytest.approx(0.0866433975699932, rel=1e-15)
    # partial sums of the series approach the closed form
    partial = sum(math.log(2) / 3.0 ** (j + 1) for j in range(4, 200))
    assert envelope_tail(3, 4) == pytest.approx(partial, rel=1e-14)


def test_phi_at_origin_is_eta_modulus():
    s = power_tower(0.5)
    for n in (0, 3, 10, 40):
        assert phi_n(s, [0, 0, 0], n).log_modulus == pytest.approx(2**n * math.log(0.5), rel=1e-15)


def test_phi_at_inverse_image_of_origin():
    s = power_tower(0.5)
    z = compose_inverse(s, 5, [0, 0, 0])
    assert np.all(z == 0)
    for n in range(5, 20):
        assert phi_n(s, z, n).log_modulus == pytest.approx(s.eta(n).log_modulus, rel=1e-15)
    assert abs(psi_n(s, z, 20) - math.log(0.5)) < 1e-9
    assert psi_n(s, z, 20) < math.log(0.5) + envelope_tail(2, 20)


def test_phi_growth_along_escaping_axis():
    s = power_tower(0.5)
    lp = log_phi_trajectory(s, [0, 0, 3], 25)[0]
    ratio = lp[1:] / lp[:-1]
    assert np.allclose(ratio[10:], 2.0, rtol=1e-9)


def test_psi_limit_at_origin():
    e = psi_limit(power_tower(0.3), [0, 0, 0])
    assert e.converged and e.value == pytest.approx(math.log(0.3), rel=1e-15)


def test_psi_limit_escaping_point_depth_stability():
    s = power_tower(0.5)
    e = psi_limit(s, [0, 0, 3])
    assert e.converged and e.value > 0
    assert abs(psi_n(s, [0, 0, 3], 20) - psi_n(s, [0, 0, 3], 25)) < 1e-9


def test_psi_vanishes_on_basin_edge():
    s = power_tower(0.5)
    p = default_params(s)
    tol = 1e-9
    edge = boundary_bisect(s, [0, 0, 0], [0, 0, 3], p)
    assert abs(psi_limit(s, edge, tol).value) < 10 * tol
    edge = boundary_bisect(s, [0.1, 0.2j, 0], [1.5, -1.5j, 2], p)
    assert abs(psi_limit(s, edge, tol).value) < 10 * tol


@settings(max_examples=40)
@given(points(3, 3.0))
def test_envelope_is_decreasing(z):
    s = power_tower(0.5)
    traj = psi_trajectory(s, z, 30)[0]
    env = traj + np.array([envelope_tail(2, n) for n in range(31)])
    assert np.all(np.diff(env) <= 1e-12)


def test_estimate_invariants(rng):
    s = power_tower(0.5)
    Z = uniform_polydisc(rng, 500, 3, 3.0)
    b = psi_limit_batch(s, Z, tol=1e-9)
    assert np.all(b.envelope >= b.value)
    assert np.all(b.gap[b.converged] < 1e-9)
    assert psi_envelope(s, Z[0], 10) >= psi_n(s, Z[0], 10)


def test_psi_rejects_bad_arguments():
    s = power_tower(0.5)
    with pytest.raises(ValueError):
        psi_limit(s, [0, 0, 0], tol=0)
    with pytest.raises(TypeError):
        psi_limit(autonomous(M.ShiftLike(3, 2, 2, 1.0), 10), [0, 0, 0])


# Green functions


def test_green_of_bounded_orbit_is_zero():
    S = M.ShiftLike(3, 2, 2, 1.0)
    assert green_plus(S, [0, 0, 0]).value == 0
    assert green_minus(S, [0, 0, 0]).value == 0


def test_green_depth_stability():
    S = M.ShiftLike(3, 2, 2, 1.0)
    lo = green_plus(S, [0, 0, 10], GreenParams(block=2, n_max=20, tolerance=1e-300)).value
    hi = green_plus(S, [0, 0, 10], GreenParams(block=2, n_max=30, tolerance=1e-300)).value
    assert abs(lo - hi) < 1e-8


def test_green_homogeneity_floor(rng):
    S = M.ShiftLike(3, 2, 2, 1.0)
    R = 4.0
    Z = sample_shift_plus_region(rng, S, R, 500)
    g = green_plus_batch(S, Z, GreenParams(block=S.nu)).value
    floor = np.log(green_floor_constant(S) * np.abs(Z).max(axis=1))
    assert np.all(g >= floor - 1e-12)


def test_green_block_selection(rng):
    S = M.ShiftLike(3, 2, 2, 1.0)
    Z = sample_shift_plus_region(rng, S, 4.0, 300)
    block, counts = select_green_block(S, Z)
    assert block == 2 and counts[2] == 0
    assert np.all(green_growth_violations(S, Z, 5, 2) == 0)


def test_green_params_invariants():
    with pytest.raises(ValueError):
        GreenParams(block=0)
    with pytest.raises(ValueError):
        GreenParams(block=1, tolerance=0)


def test_green_depth_invariant_on_converged_points(rng):
    S = M.ShiftLike(3, 2, 2, 1.0)
    Z = sample_shift_plus_region(rng, S, 4.0, 200)
    a = green_plus_batch(S, Z, GreenParams(block=2, n_max=30))
    b = green_plus_batch(S, Z, GreenParams(block=2, n_max=25))
    ok = a.converged & b.converged
    assert ok.any() and np.all(np.abs(a.value[ok] - b.value[ok]) < 10 * 1e-9)


# subaveraging


def test_subaverage_affine_fixture_is_exact():
    ev = lambda Z: np.real(np.asarray(Z)[:, 0])
    r = subaverage_check(ev, [0.3, 0, 0], [1, 0, 0], 0.5, m=64)
    assert abs(r.margin) < 1e-15


def test_subaverage_rejects_too_few_samples_and_nan():
    ev = lambda Z: np.real(np.asarray(Z)[:, 0])
    with pytest.raises(ValueError):
        subaverage_check(ev, [0, 0, 0], [1, 0, 0], 0.1, m=8)
    with pytest.raises(ValueError, match="insufficient convergence"):
        subaverage_check(lambda Z: np.full(len(Z), np.nan), [0, 0, 0], [1, 0, 0], 0.1)
    with pytest.raises(ValueError):
        subaverage_check(ev, [0, 0, 0], [0, 0, 0], 0.1)


def test_subaverage_psi_at_attracted_points(rng):
    s = power_tower(0.5)
    ev = psi_evaluator(s)
    Z = uniform_polydisc(rng, 400, 3, 1.5)
    inside = Z[classify_points(s, Z, default_params(s)).kind == ATTRACTED][:50]
    assert len(inside) == 50
    for z in inside:
        v = rng.normal(size=3) + 1j * rng.normal(size=3)
        assert subaverage_check(ev, z, v, 0.05, m=64).margin >= -1e-6


def test_subaverage_psi_at_escaped_point():
    s = power_tower(0.5)
    r = subaverage_check(psi_evaluator(s), [0, 0, 3], [0.3, 0.2j, 1], 0.05, m=64)
    assert r.margin >= -1e-6
