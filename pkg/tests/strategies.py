"""Shared hypothesis strategies."""
import numpy as np
from hypothesis import strategies as st

finite = st.floats(min_value=-50, max_value=50, allow_nan=False, allow_infinity=False)


@st.composite
def complex_numbers(draw, radius=10.0):
    r = draw(st.floats(min_value=0, max_value=radius))
    t = draw(st.floats(min_value=0, max_value=2 * np.pi))
    return complex(r * np.cos(t), r * np.sin(t))


@st.composite
def points(draw, k=3, radius=10.0):
    return np.array([draw(complex_numbers(radius)) for _ in range(k)], dtype=np.complex128)


@st.composite
def unimodular(draw):
    t = draw(st.floats(min_value=0, max_value=2 * np.pi))
    return complex(np.cos(t), np.sin(t))
