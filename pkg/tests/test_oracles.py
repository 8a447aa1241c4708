import math
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import jn_zeros

from dbarlab.geometry import ball, complex_ellipsoid, make_domain
from dbarlab.oracles import (
    dirichlet_top_degree_ball,
    first_dirichlet_radial,
    sigma_extrapolate,
    top_degree_oracle,
)
from dbarlab.parallel import n_threads, ordered_map

J11_SQ = 14.681970642123893  # first zero of J_1, squared


def test_bessel_zero_constant():
    assert jn_zeros(1, 1)[0] ** 2 == pytest.approx(J11_SQ, rel=1e-14)


def test_shooting_matches_bessel_zeros():
    assert first_dirichlet_radial(4) == pytest.approx(J11_SQ, rel=1e-9)
    assert first_dirichlet_radial(2) == pytest.approx(jn_zeros(0, 1)[0] ** 2, rel=1e-9)


def test_top_degree_values():
    assert dirichlet_top_degree_ball() == pytest.approx(3.6704927, rel=1e-7)
    assert dirichlet_top_degree_ball(0.5) == pytest.approx(4 * 3.6704927, rel=1e-7)
    assert top_degree_oracle(make_domain("polydisc")) == pytest.approx(jn_zeros(0, 1)[0] ** 2 / 2, rel=1e-9)
    with pytest.raises(ValueError):
        top_degree_oracle(complex_ellipsoid(2))


@settings(max_examples=30, deadline=None)
@given(st.floats(-5, 5), st.floats(-50, 50), st.floats(-500, 500))
def test_extrapolation_exact_on_quadratics(c0, c1, c2):
    s = [1e3, 2e3, 4e3]
    vals = [c0 + c1 / x + c2 / x**2 for x in s]
    assert sigma_extrapolate(s, vals) == pytest.approx(c0, abs=1e-9)


def test_extrapolation_needs_two_points():
    with pytest.raises(ValueError):
        sigma_extrapolate([1e3], [1.0])


def test_ordered_map_keeps_order():
    def slow(x):
        time.sleep(0.01 * (5 - x))
        return x * x

    assert ordered_map(slow, range(5), threads=4) == [0, 1, 4, 9, 16]
    assert ordered_map(slow, [], threads=4) == []


def test_thread_env(monkeypatch):
    monkeypatch.setenv("DBARLAB_THREADS", "3")
    assert n_threads() == 3
    monkeypatch.setenv("DBARLAB_THREADS", "bogus")
    assert n_threads() == 1
