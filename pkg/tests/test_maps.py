import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from shortck import maps as M
from shortck.logscalar import LogScalar
from shortck.sequences import uniform_polydisc

from .strategies import points


def invertible_maps():
    return [M.EtaStep(3, 2, 0.5), M.EtaStep(4, 2, 0.7j), M.EtaStep(4, 3, 1.5j), M.ShiftLike(3, 2, 2, 1.0), M.ShiftLike(3, 1, 3, 0.5 + 0.5j),
            M.HenonF(0.5, 1 / 9), M.HenonG(0.5, 1 / 9, 2), M.CoordinateSwap(3, 1, 2), M.AffineTranslate(3, 2, 4.0),
            M.Scaling(3, 2.0), M.Linear(np.array([[1, 2j], [0.5, 3]])),
            M.Composite((M.CoordinateSwap(3, 1, 3), M.AffineTranslate(3, 3, 6.0)))]


def test_eta_step_example():
    out = M.apply(M.EtaStep(3, 2, 0.1), [1, 2, 3])
    assert np.allclose(out, [0.3, 4.1, 9.2], rtol=0, atol=1e-14)


def test_eta_step_inverse_example():
    back = M.apply_inverse(M.EtaStep(3, 2, 0.1), [0.3, 4.1, 9.2])
    assert np.allclose(back, [1, 2, 3], rtol=0, atol=1e-12)


def test_henon_f_example():
    assert np.allclose(M.apply(M.HenonF(0.5, 1 / 9), [1, 1]), [1.5, 1 / 9])


def test_scaling_inverse_example():
    assert np.allclose(M.apply_inverse(M.Scaling(2, 2.0), [2, 4]), [1, 2])


@pytest.mark.parametrize("m", [M.EtaStep(3, 2, 0.1), M.ShiftLike(3, 2, 2, 1.0), M.HenonF(0.5, 1 / 9),
                               M.HenonG(0.5, 1 / 9, 3)])
def test_origin_is_fixed_exactly(m):
    assert np.all(M.apply(m, np.zeros(m.k)) == 0)


@pytest.mark.parametrize("m", invertible_maps(), ids=lambda m: type(m).__name__)
def test_round_trip_on_unit_polydisc(m, rng):
    Z = uniform_polydisc(rng, 1000, m.k)
    there = M.apply(m, M.apply_inverse(m, Z))
    back = M.apply_inverse(m, M.apply(m, Z))
    scale = np.maximum(np.abs(Z).max(axis=1, keepdims=True), 1e-300)
    assert np.max(np.abs(there - Z) / scale) < 1e-10
    assert np.max(np.abs(back - Z) / scale) < 1e-10


def test_round_trip_error_scales_with_intermediate_size(rng):
    # small eta with cubic terms: the inverse image is huge and the forward map cancels
    m = M.EtaStep(4, 3, 0.7j)
    Z = uniform_polydisc(rng, 1000, 4)
    X = M.apply_inverse(m, Z)
    err = np.abs(M.apply(m, X) - Z).max(axis=1)
    assert np.max(err / np.abs(X).max(axis=1) ** 3) < 1e-14
    assert np.max(np.abs(M.apply_inverse(m, M.apply(m, Z)) - Z).max(axis=1) / np.abs(Z).max(axis=1)) < 1e-10


def test_inverse_out_of_range():
    tiny = M.EtaStep(3, 2, LogScalar(-800.0))
    with pytest.raises(ValueError, match="inverse out of range"):
        M.apply_inverse(tiny, [1, 1, 1])


def test_overflow_is_flagged_not_raised():
    out = M.apply(M.EtaStep(3, 2, 0.5), [0, 1e200, 1e200])
    assert not np.all(np.isfinite(out))


@pytest.mark.parametrize("bad", [lambda: M.EtaStep(3, 2, 0.0), lambda: M.ShiftLike(3, 1, 2, 0),
                                 lambda: M.Scaling(2, 0.0), lambda: M.Linear(np.ones((2, 2))),
                                 lambda: M.EtaStep(9, 2, 0.5), lambda: M.ShiftLike(3, 3, 2, 1)])
def test_constructor_invariants(bad):
    with pytest.raises(ValueError):
        bad()


def test_linear_reports_condition_number():
    L = M.Linear(np.diag([1.0, 4.0]))
    assert L.condition_number == pytest.approx(4.0)


def test_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension mismatch"):
        M.apply(M.EtaStep(3, 2, 0.1), [1, 2])


@given(points(3, 3.0))
def test_scaled_evaluation_matches_plain(z):
    for m in (M.EtaStep(3, 2, 0.3), M.ShiftLike(3, 2, 2, 1.5), M.Scaling(3, 0.5j)):
        L, U = m.apply_scaled(*M.to_scaled(z[None, :]))
        got = M.from_scaled(L, U)[0]
        want = M.apply(m, z)
        assert np.max(np.abs(got - want)) <= 1e-12 * max(1.0, np.abs(want).max())


def test_scaled_evaluation_survives_overflow():
    m = M.EtaStep(3, 2, 0.5)
    L, U = M.to_scaled(np.array([[0, 3.0, 0]]))
    for _ in range(12):
        L, U = m.apply_scaled(L, U)
    # the z_2 coordinate alone gives at least 2^12 log 3 - small corrections
    assert M.log_sup_scaled(L, U)[0] == pytest.approx(2**12 * math.log(3), rel=1e-3)


@given(points(3, 1.0), points(3, 1.0))
def test_tangent_matches_finite_differences(z, v):
    m = M.EtaStep(3, 2, 0.3)
    h = 1e-6
    fd = (M.apply(m, z + h * v) - M.apply(m, z - h * v)) / (2 * h)
    assert np.allclose(m.tangent(z[None, :], v[None, :])[0], fd, atol=1e-8)


def test_henon_word_diagonal():
    w = M.henon_word(0.5, 1 / 9, 2, 3)
    dg = w.diag_origin()
    assert dg[0].log_modulus == pytest.approx(2 * math.log(0.5) + 3 * math.log(1 / 9))
    assert dg[1].log_modulus == pytest.approx(3 * math.log(0.5) + 2 * math.log(1 / 9))
