import math

import pytest
from hypothesis import given, strategies as st

from shortck.logscalar import LogScalar

from .strategies import complex_numbers


def test_deep_tower_is_representable():
    x = LogScalar.from_complex(0.5) ** (2.0**40)
    assert x.log_modulus == pytest.approx(2.0**40 * math.log(0.5))
    assert x.modulus == 0.0  # the double underflows, the log form does not
    assert not x.is_zero


def test_zero_and_invalid():
    assert LogScalar.from_complex(0).is_zero
    with pytest.raises(ValueError):
        LogScalar(math.nan)
    with pytest.raises(ValueError):
        LogScalar(math.inf)


def test_ordering_by_modulus():
    assert LogScalar.from_complex(0.1) < LogScalar.from_complex(-0.2j)
    assert LogScalar.from_complex(3) >= 2.5


@given(complex_numbers(100), complex_numbers(100))
def test_multiplication_matches_complex(a, b):
    if a == 0 or b == 0:
        return
    got = (LogScalar.from_complex(a) * LogScalar.from_complex(b)).to_complex()
    assert abs(got - a * b) <= 1e-12 * abs(a * b)


@given(complex_numbers(100))
def test_round_trip_and_inverse(a):
    if a == 0:
        return
    x = LogScalar.from_complex(a)
    assert abs(x.to_complex() - a) <= 1e-13 * abs(a)
    assert abs((x * x.inverse()).to_complex() - 1) < 1e-13
    assert 0 <= x.phase < 2 * math.pi
