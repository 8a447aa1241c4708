import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dbarlab import forms
from dbarlab.forms import PolyForm, contract_normal, dbar, hessian_action, split_normal_tangential, theta
from dbarlab.geometry import ball, boundary_quadrature, interior_quadrature
from dbarlab.poly import Poly

z1, z2 = Poly.z(2, 0), Poly.z(2, 1)
zb1, zb2 = Poly.zbar(2, 0), Poly.zbar(2, 1)
bump = 1 - Poly.norm_squared(2)  # vanishes on the unit sphere


def pt(*x):
    return np.array(x, dtype=complex)


def test_insert_sign():
    assert forms.insert_sign(0, (1,)) == (1, (0, 1))
    assert forms.insert_sign(1, (0,)) == (-1, (0, 1))
    assert forms.insert_sign(0, (0,))[0] == 0


def test_dbar_examples():
    assert dbar(PolyForm.function(zb1)) == PolyForm.basic(2, (0,))
    assert dbar(PolyForm.basic(2, (0,), zb2)) == PolyForm.basic(2, (0, 1), -1.0)


def test_theta_examples():
    assert theta(PolyForm.basic(2, (0,), z1)) == PolyForm.function(Poly.constant(2, -1.0))
    assert theta(PolyForm.basic(2, (0,))).is_zero()
    assert theta(PolyForm.basic(2, (0,), z2)).is_zero()


coef = st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False)
exps = st.tuples(st.integers(0, 3), st.integers(0, 3))


@st.composite
def polys(draw):
    p = Poly(2)
    for _ in range(draw(st.integers(1, 4))):
        p = p + Poly.monomial(draw(exps), draw(exps), draw(coef))
    return p


@settings(max_examples=40, deadline=None)
@given(polys(), polys())
def test_dbar_squared_vanishes(g, h):
    assert dbar(dbar(PolyForm.function(g))).is_zero(1e-12)
    f = PolyForm.basic(2, (0,), g) + PolyForm.basic(2, (1,), h)
    assert (dbar(f + dbar(PolyForm.function(h))) - dbar(f)).is_zero(1e-12)


@settings(max_examples=40, deadline=None)
@given(polys(), polys())
def test_theta_squared_vanishes(g, h):
    assert theta(theta(PolyForm.basic(2, (0, 1), g))).is_zero(1e-12)


def _pair(rule, a, b):
    va, vb = a.evaluate(rule.nodes), b.evaluate(rule.nodes)
    return complex(rule.weights @ np.sum(va * np.conj(vb), axis=-1))


@settings(max_examples=15, deadline=None)
@given(polys(), polys(), st.sampled_from([0, 1]))
def test_theta_is_formal_adjoint(p, g, j):
    # u vanishes on the sphere, so no boundary term enters
    rule = interior_quadrature(ball(), 8)
    u = PolyForm.function(bump * p)
    f = PolyForm.basic(2, (j,), g)
    lhs, rhs = _pair(rule, dbar(u), f), _pair(rule, u, theta(f))
    assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(lhs))


def test_contract_normal_examples(unit_ball):
    v = contract_normal(unit_ball, PolyForm.basic(2, (0,))).evaluate(pt([1, 0]))
    assert v[0, 0] == pytest.approx(0.5)
    tang = PolyForm.basic(2, (0,), zb2) - PolyForm.basic(2, (1,), zb1)
    assert contract_normal(unit_ball, tang).is_zero(1e-14)
    v = contract_normal(unit_ball, PolyForm.basic(2, (0, 1))).evaluate(pt([0, 1]))
    assert np.allclose(v, [[-0.5, 0]])


def test_split_examples(unit_ball):
    tau, nu = split_normal_tangential(unit_ball, PolyForm.basic(2, (0,)), pt(1, 0))
    assert np.allclose(nu, [1, 0]) and np.allclose(tau, 0)
    tau, nu = split_normal_tangential(unit_ball, PolyForm.basic(2, (1,)), pt(1, 0))
    assert np.allclose(nu, 0) and np.allclose(tau, [0, 1])


def test_split_is_orthogonal_projection(unit_ball):
    f = PolyForm.basic(2, (0,)) + PolyForm.basic(2, (1,))
    # at (1, 0) half the form is normal
    tau, nu = split_normal_tangential(unit_ball, f, pt(1, 0))
    assert np.linalg.norm(nu) == pytest.approx(1) and np.linalg.norm(tau) == pytest.approx(1)
    # at (1, 1)/sqrt(2) the form is parallel to the normal covector
    tau, nu = split_normal_tangential(unit_ball, f, pt(1, 1) / math.sqrt(2))
    assert np.linalg.norm(nu) == pytest.approx(math.sqrt(2)) and np.linalg.norm(tau) < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=8, max_size=8))
def test_split_gram_schmidt(x):
    d = ball()
    p = np.array([x[0] + 1j * x[1], x[2] + 1j * x[3]])
    if np.linalg.norm(p) < 1e-3:
        return
    p = p / np.linalg.norm(p)
    c = np.array([x[4] + 1j * x[5], x[6] + 1j * x[7]])
    f = PolyForm.basic(2, (0,), complex(c[0])) + PolyForm.basic(2, (1,), complex(c[1]))
    tau, nu = split_normal_tangential(d, f, p)
    # Gram-Schmidt against the unit normal covector (conj of grad rho direction)
    e = p / np.linalg.norm(p)
    ref_nu = (np.conj(e) @ c) * e
    assert np.allclose(nu, ref_nu, atol=1e-12)
    assert np.allclose(tau + nu, c, atol=1e-12)
    assert abs(np.vdot(nu, tau)) < 1e-12


def test_hessian_action_examples(rng):
    z = pt(0.3 + 0.2j, -0.5j)
    f = PolyForm.basic(2, (0,), 0.7 - 0.1j) + PolyForm.basic(2, (1,), 0.2j)
    assert hessian_action(Poly.norm_squared(2), f, z) == pytest.approx(np.sum(np.abs(f.evaluate(z)) ** 2))
    assert hessian_action((z1 * z1 + zb1 * zb1) * 0.5, f, z) == pytest.approx(0, abs=1e-14)
    b = (z1 * zb1) ** 2
    assert hessian_action(b, PolyForm.basic(2, (0,)), z) == pytest.approx(4 * abs(z[0]) ** 2)


def test_hessian_finite_differences():
    # d^2/dz dzbar = (1/4) Laplacian in the (x, y) plane
    b = (z1 * zb1) ** 2
    z0, h = 0.4 + 0.3j, 1e-4
    f = lambda w: float(np.real(b.evaluate(np.array([[w, 0]]))[0]))
    lap = (f(z0 + h) + f(z0 - h) + f(z0 + 1j * h) + f(z0 - 1j * h) - 4 * f(z0)) / h**2
    assert lap / 4 == pytest.approx(4 * abs(z0) ** 2, rel=1e-6)


def test_hessian_action_top_degree_is_trace():
    # for q = n the action is trace(H) |f|^2
    b = (z1 * zb1) ** 2 + Poly.norm_squared(2)
    z = pt(0.5, 0.1)
    val = hessian_action(b, PolyForm.basic(2, (0, 1)), z)
    assert val == pytest.approx(4 * 0.25 + 2)


def test_green_ball_example(unit_ball):
    qi, qb = interior_quadrature(unit_ball, 4), boundary_quadrature(unit_ball, 4)
    r = forms.check_green(unit_ball, PolyForm.function(zb1), PolyForm.basic(2, (0,)), qi, qb)
    assert r["residual"] < 1e-3
    assert r["interior"] == pytest.approx(math.pi**2 / 2)


def test_green_tangential_form(unit_ball):
    qi, qb = interior_quadrature(unit_ball, 4), boundary_quadrature(unit_ball, 4)
    f = PolyForm.basic(2, (0,), zb2) - PolyForm.basic(2, (1,), zb1)
    r = forms.check_green(unit_ball, PolyForm.function(z1 * zb2 + 1), f, qi, qb)
    assert abs(r["boundary"]) < 1e-12
    assert r["residual"] < 1e-10


def test_green_compact_support(unit_ball):
    qi, qb = interior_quadrature(unit_ball, 6), boundary_quadrature(unit_ball, 6)
    u = PolyForm.function(bump * bump * z1)
    f = PolyForm.basic(2, (0,), bump * bump * zb2)
    r = forms.check_green(unit_ball, u, f, qi, qb)
    assert abs(r["boundary"]) < 1e-12 and r["residual"] < 1e-10


def test_green_fails_with_wrong_theta_sign(unit_ball, monkeypatch):
    qi, qb = interior_quadrature(unit_ball, 4), boundary_quadrature(unit_ball, 4)
    u, f = PolyForm.function(zb1 * z1), PolyForm.basic(2, (0,), z1)
    assert forms.check_green(unit_ball, u, f, qi, qb)["residual"] < 1e-10
    monkeypatch.setattr(forms, "_THETA_SIGN", 1.0)
    assert forms.check_green(unit_ball, u, f, qi, qb)["residual"] > 0.1


def test_form_json_round_trip():
    f = PolyForm.basic(2, (0,), z1 * zb2 + 2j) + PolyForm.basic(2, (1,), zb1)
    assert PolyForm.loads(f.dumps()) == f
