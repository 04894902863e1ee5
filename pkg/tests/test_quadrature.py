import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from tclprep.quadrature import running_transform


def gaussian(s):
    return np.exp(-s**2) * (1 + 0.3j * s)


def oracle(alpha, w, x, g):
    f = lambda s, part: getattr(np.exp(-g * (x - s)) * alpha(s) * np.exp(-1j * w * s), part)
    return integrate.quad(f, 0, x, args=("real",), epsabs=1e-14)[0] + \
        1j * integrate.quad(f, 0, x, args=("imag",), epsabs=1e-14)[0]


@settings(max_examples=25, deadline=None)
@given(st.floats(0, 6), st.floats(-5, 5), st.floats(0, 3))
def test_running_transform_matches_adaptive_quadrature(x, w, g):
    got = running_transform(gaussian, [w], [x], panel=0.05, decay=g)[0, 0]
    assert abs(got - oracle(gaussian, w, x, g)) < 1e-11


def test_grid_evaluation_in_any_order():
    x = np.array([3.0, 0.0, 1.234, 0.05, 2.5])
    w = np.array([0.0, 1.5])
    out = running_transform(gaussian, w, x, panel=0.1, decay=0.4)
    assert out.shape == (5, 2)
    assert np.all(out[1] == 0)
    for i, xi in enumerate(x):
        for k, wk in enumerate(w):
            assert abs(out[i, k] - oracle(gaussian, wk, xi, 0.4)) < 1e-11


def test_input_validation():
    with pytest.raises(ValueError):
        running_transform(gaussian, [0.0], [-1.0], 0.1)
    with pytest.raises(ValueError):
        running_transform(gaussian, [0.0], [1.0], 0.0)
