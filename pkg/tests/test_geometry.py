import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dbarlab.geometry import (
    ball,
    boundary_quadrature,
    complex_ellipsoid,
    depth_radius,
    dilate,
    hausdorff_distance,
    interior_quadrature,
    layer_quadrature,
    make_domain,
    offset_domain,
    parse_descriptor,
    signed_distance,
)


def pts(*rows):
    return np.array(rows, dtype=complex)


def test_ball_rho_at_center(unit_ball):
    assert unit_ball.rho(pts([0, 0]))[0] == pytest.approx(-0.5)


def test_ellipsoid_axis_points(ellipsoid):
    r = ellipsoid.rho(pts([0, 0], [1, 0], [0, 1]))
    assert r[0] < 0
    assert r[1] == pytest.approx(0, abs=1e-14)
    assert r[2] == pytest.approx(0, abs=1e-14)


def test_negative_radius_rejected():
    with pytest.raises(ValueError):
        make_domain({"kind": "ball", "radius": -1})


def test_non_real_rho_rejected():
    with pytest.raises(ValueError):
        make_domain({"kind": "custom", "rho": "1j*z1*zb1 - 1"})


def test_descriptor_forms():
    assert parse_descriptor("ball") == {"kind": "ball"}
    d = make_domain("complex_ellipsoid:m=2,radius=0.5")
    assert d.params == {"m": 2, "radius": 0.5}
    d = make_domain("kind = ball\nradius = 2\n")
    assert d.params["radius"] == 2


def test_signed_distance_ball(unit_ball):
    assert np.allclose(signed_distance(unit_ball, pts([0, 0], [2, 0])), [-1, 1])


def test_signed_distance_ellipsoid_center(ellipsoid):
    # brute-force: minimum of |z| over a dense boundary sample
    b = ellipsoid.boundary_sample(96, 48)
    brute = np.min(np.linalg.norm(b, axis=1))
    assert brute == pytest.approx(1.0, abs=1e-3)
    assert signed_distance(ellipsoid, pts([0, 0]))[0] == pytest.approx(-1.0, abs=1e-9)


def test_signed_distance_matches_brute_force(ellipsoid, rng):
    z = (rng.standard_normal((20, 2)) + 1j * rng.standard_normal((20, 2))) * 0.6
    b = ellipsoid.boundary_sample(96, 48)
    brute = np.min(np.linalg.norm(z[:, None, :] - b[None, :, :], axis=2), axis=1)
    sd = signed_distance(ellipsoid, z)
    assert np.all(np.sign(sd) == np.where(ellipsoid.contains(z), -1, 1))
    # the sample is a discretisation, so it over-estimates slightly
    assert np.all(np.abs(sd) <= brute + 1e-9)
    assert np.all(brute - np.abs(sd) < 0.03)


def test_offset_ball_is_ball(unit_ball):
    d = offset_domain(unit_ball, -0.1)
    assert d.kind == "ball" and d.params["radius"] == pytest.approx(0.9)
    d = offset_domain(unit_ball, 0.2)
    assert d.kind == "ball" and d.params["radius"] == pytest.approx(1.2)


def test_offset_ellipsoid(ellipsoid):
    d = offset_domain(ellipsoid, -0.05)
    assert signed_distance(d, pts([0, 0]))[0] == pytest.approx(-0.95, abs=1e-9)


def test_hausdorff_examples(unit_ball):
    assert hausdorff_distance(unit_ball, unit_ball)[0] == pytest.approx(0, abs=1e-12)
    assert hausdorff_distance(unit_ball, ball(0.9))[0] == pytest.approx(0.1)
    assert hausdorff_distance(unit_ball, offset_domain(unit_ball, 0.2))[0] == pytest.approx(0.2)


def test_hausdorff_offset_ellipsoid(ellipsoid):
    h, spacing = hausdorff_distance(ellipsoid, offset_domain(ellipsoid, 0.2), level=1)
    assert abs(h - 0.2) <= spacing


def test_interior_quadrature_oracles(unit_ball):
    q = interior_quadrature(unit_ball, 6)
    z = q.nodes
    assert q.weights.sum() == pytest.approx(math.pi**2 / 2, rel=1e-10)
    assert q.weights @ np.abs(z[:, 0]) ** 2 == pytest.approx(math.pi**2 / 6, rel=1e-10)
    assert abs(q.weights @ (z[:, 0] * np.conj(z[:, 1]))) < 1e-12


def test_interior_volume_brute_force(unit_ball, rng):
    x = rng.uniform(-1, 1, (400_000, 4))
    frac = np.mean(np.sum(x**2, axis=1) < 1)
    assert 16 * frac == pytest.approx(math.pi**2 / 2, rel=0.01)


def test_boundary_quadrature_oracles(unit_ball):
    q = boundary_quadrature(unit_ball, 6)
    assert q.weights.sum() == pytest.approx(2 * math.pi**2, rel=1e-10)
    assert q.weights @ np.abs(q.nodes[:, 0]) ** 2 == pytest.approx(math.pi**2, rel=1e-10)


def test_boundary_quadrature_polydisc_rejected():
    with pytest.raises(ValueError):
        boundary_quadrature(make_domain("polydisc"), 4)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 3), st.integers(0, 3))
def test_monomial_moments_closed_form(a1, a2):
    q = interior_quadrature(ball(), 6)
    val = q.weights @ (np.abs(q.nodes[:, 0]) ** (2 * a1) * np.abs(q.nodes[:, 1]) ** (2 * a2))
    ref = math.pi**2 * math.factorial(a1) * math.factorial(a2) / math.factorial(2 + a1 + a2)
    assert val == pytest.approx(ref, rel=1e-10)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.3, 2.0))
def test_volume_scales_with_radius(r):
    q = interior_quadrature(ball(r), 4)
    assert q.weights.sum() == pytest.approx(math.pi**2 / 2 * r**4, rel=1e-10)


def test_ellipsoid_volume():
    # vol{|z1|^2 + |z2|^4 < 1} = pi^2 * int_0^1 (1 - t^2) dt = 2 pi^2 / 3
    q = interior_quadrature(complex_ellipsoid(2), 8)
    assert q.weights.sum() == pytest.approx(2 * math.pi**2 / 3, rel=1e-6)


def test_boundary_nodes_on_boundary(ellipsoid):
    q = boundary_quadrature(ellipsoid, 4)
    assert np.max(np.abs(ellipsoid.rho(q.nodes))) < 1e-10


def test_dilate_ball(unit_ball):
    d = dilate(unit_ball, 0.8)
    assert d.params["radius"] == pytest.approx(0.8)


def test_depth_radius_ball(unit_ball):
    dirs = np.array([[1, 0, 0, 0], [0, 0, 1, 0]], dtype=float)
    assert np.allclose(depth_radius(unit_ball, dirs, 0.25), 0.75)


def test_layer_partition(ellipsoid):
    full = interior_quadrature(ellipsoid, 3).weights.sum()
    c = layer_quadrature(ellipsoid, 3, 0.1, "collar").weights.sum()
    i = layer_quadrature(ellipsoid, 3, 0.1, "inner").weights.sum()
    assert c + i == pytest.approx(full, rel=1e-6)
    inner = layer_quadrature(ellipsoid, 3, 0.1, "inner")
    assert np.all(signed_distance(ellipsoid, inner.nodes) <= -0.1 + 1e-8)
