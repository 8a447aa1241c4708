import math

import numpy as np
import pytest

from dbarlab.certify import (
    Certificate,
    CertificateError,
    canonical_certificate,
    catlin_lower_bound,
    check_catlin_on_spectrum,
    check_certificate,
    check_hardy,
    check_interior_ellipticity,
    ellipticity_ladder,
    fit_subelliptic_rate,
    normal_mass_exponent,
    parse_certificate,
)
from dbarlab.discretize import build_system
from dbarlab.eigen import Spectrum, variational_eigenvalues
from dbarlab.forms import PolyForm
from dbarlab.geometry import ball
from dbarlab.oracles import hardy_ball_reference
from dbarlab.poly import Poly
from dbarlab.stability import boundary_mass

z1, zb1 = Poly.z(2, 0), Poly.zbar(2, 0)
NORM = Poly.norm_squared(2)


def cert(b, M, q=1):
    return Certificate(b, M, q)


def test_ball_certificate_passes(unit_ball):
    v = check_certificate(unit_ball, cert(NORM - 1, 1.0), 1000, 0)
    assert v.passed and v.detail["M"] == 1.0


def test_ball_certificate_overclaim_fails(unit_ball):
    assert not check_certificate(unit_ball, cert(NORM - 1, 1.01), 1000, 0).passed


def test_zero_certificate(unit_ball):
    assert check_certificate(unit_ball, cert(Poly(2), 0.0), 1000, 0).passed
    assert not check_certificate(unit_ball, cert(Poly(2), 0.1), 1000, 0).passed


def test_pluriharmonic_certificate_fails_with_witness(unit_ball):
    b = (z1 * z1 + zb1 * zb1) * 0.5 - 1
    v = check_certificate(unit_ball, cert(b, 0.5), 1000, 0)
    assert not v.passed
    assert v.detail["reason"] == "Hessian bound violated"
    assert abs(v.detail["value"]) < 1e-12
    assert np.linalg.norm(v.detail["witness_point"]) <= 1 + 1e-12
    assert np.linalg.norm(v.detail["witness_form"]) == pytest.approx(1)


def test_range_violation(unit_ball):
    v = check_certificate(unit_ball, cert(NORM, 1.0), 1000, 0)
    assert not v.passed and v.detail["reason"] == "b outside [-1, 0]"


def test_top_degree_uses_trace(unit_ball):
    assert check_certificate(unit_ball, cert(NORM - 1, 2.0, q=2), 1000, 0).passed
    assert not check_certificate(unit_ball, cert(NORM - 1, 2.1, q=2), 1000, 0).passed


def test_ellipsoid_canonical_certificate(ellipsoid):
    c = canonical_certificate(ellipsoid, 1)
    assert check_certificate(ellipsoid, c, 1000, 0).passed


def test_certificate_text_round_trip():
    c = parse_certificate("# ball\nb = z1*zb1 + z2*zb2 - 1\nM = 1\nq = 1\n")
    assert c.b == NORM - 1 and c.hessian_bound == 1.0
    c2 = parse_certificate(c.to_text())
    assert c2.b == c.b and c2.hessian_bound == c.hessian_bound
    with pytest.raises(CertificateError):
        parse_certificate("b = z1*zb1")


def test_catlin_bound_values(unit_ball):
    c = cert(NORM - 1, 1.0)
    with pytest.raises(CertificateError):
        catlin_lower_bound(c, 1)
    check_certificate(unit_ball, c)
    assert catlin_lower_bound(c, 1) == pytest.approx(1 / math.e)
    r = 0.5
    cr = cert(NORM * (1 / r**2) - 1, 1 / r**2)
    check_certificate(ball(r), cr)
    assert catlin_lower_bound(cr, 1) == pytest.approx(1 / (math.e * r**2))
    c0 = cert(Poly(2), 0.0)
    check_certificate(unit_ball, c0)
    assert catlin_lower_bound(c0, 1) == 0.0


def _ground(d, N=4, k=4):
    S = build_system(d, 1, N, sigma=100.0 / d.params["radius"])
    return S, variational_eigenvalues(S, k)


def test_catlin_on_ball_spectrum(unit_ball):
    S, sp = _ground(unit_ball)
    c = cert(NORM - 1, 1.0)
    check_certificate(unit_ball, c)
    assert sp.eigenvalues[0] >= (1 / math.e) * 0.98
    m = check_catlin_on_spectrum(S, sp, c)
    assert m["pass"] and len(m["margins"]) == 4
    # H(b) = identity, so the Hessian integral is the mass of each normalised eigenform
    for row in m["margins"]:
        assert row["hessian_integral"] == pytest.approx(1.0, rel=1e-9)


def test_catlin_zero_certificate_margin_is_energy(unit_ball):
    S, sp = _ground(unit_ball, N=2, k=2)
    m = check_catlin_on_spectrum(S, sp, cert(Poly(2), 0.0))
    for row, lam in zip(m["margins"], sp.eigenvalues):
        assert row["margin"] == pytest.approx(row["Q"]) and row["Q"] == pytest.approx(lam)


def test_catlin_scaled_ball():
    d = ball(0.5)
    S, sp = _ground(d)
    c = cert(NORM * 4.0 - 1, 4.0)
    check_certificate(d, c)
    assert sp.eigenvalues[0] >= catlin_lower_bound(c, 1) * 0.98
    assert check_catlin_on_spectrum(S, sp, c)["pass"]


def test_hardy_ball_closed_forms(unit_ball):
    rep = check_hardy(unit_ball, 1 - NORM, level=6)
    ref = hardy_ball_reference()
    assert ref["lhs"] == pytest.approx(16.1203539, rel=1e-7)
    assert rep.lhs == pytest.approx(ref["lhs"], rel=0.01)
    assert rep.rhs_energy == pytest.approx(ref["four_grad"], rel=1e-9)
    assert rep.passed and rep.minimal_A == 0.0


def test_hardy_radial_integrals():
    # independent 1-D quadrature of the radial closed forms
    r, w = np.polynomial.legendre.leggauss(40)
    r, w = (r + 1) / 2, w / 2
    lhs = 2 * math.pi**2 * np.sum(w * (1 + r) ** 2 * r**3)
    grad = 2 * math.pi**2 * np.sum(w * 4 * r**5) * 4
    assert lhs == pytest.approx(49 * math.pi**2 / 30, rel=1e-12)
    assert grad == pytest.approx(16 * math.pi**2 / 3, rel=1e-12)


def test_hardy_zero_function(unit_ball):
    rep = check_hardy(unit_ball, Poly(2), level=4)
    assert rep.lhs == 0 and rep.minimal_A == 0 and rep.passed


def test_hardy_square(unit_ball):
    g = (1 - NORM) * (1 - NORM)
    rep = check_hardy(unit_ball, g, level=6)
    assert rep.minimal_A >= 0 and rep.passed and rep.level_agreement <= 0.01


def test_hardy_forms(unit_ball):
    for f in (PolyForm.basic(2, (0,), 1 - NORM), PolyForm.basic(2, (1,), (1 - NORM) * Poly.zbar(2, 1))):
        rep = check_hardy(unit_ball, f, level=6)
        assert rep.kind == "form" and rep.constant == 16.0 and rep.passed


def test_hardy_rejects_nonvanishing_trace(unit_ball):
    with pytest.raises(ValueError):
        check_hardy(unit_ball, NORM, level=4)
    # tangential forms pass the trace test: only the normal part must vanish
    tang = PolyForm.basic(2, (0,), Poly.zbar(2, 1)) - PolyForm.basic(2, (1,), zb1)
    assert check_hardy(unit_ball, tang, level=4).lhs == pytest.approx(0, abs=1e-20)


def test_interior_ellipticity_constant_form(unit_ball):
    S = build_system(unit_ball, 1, 0, sigma=0.0, level=4)
    v = np.array([1.0, 0.0]) / math.sqrt(math.pi**2 / 2)
    sp = Spectrum(np.array([0.0]), v[:, None].astype(complex))
    for delta in (0.1, 0.3):
        row = check_interior_ellipticity(S, sp, delta)[0]
        ratio = (1 - delta) ** 4
        assert row["lhs"] == pytest.approx(ratio, rel=1e-9)
        assert row["C_emp"] == pytest.approx(delta**2 * ratio, rel=1e-9)
        assert row["C_emp"] <= 1


def test_interior_ellipticity_zero_form(unit_ball):
    S = build_system(unit_ball, 1, 0, sigma=0.0, level=4)
    sp = Spectrum(np.array([0.0]), np.zeros((2, 1), dtype=complex))
    assert check_interior_ellipticity(S, sp, 0.1)[0]["C_emp"] == 0.0


def test_ellipticity_ladder_stable(unit_ball):
    S, sp = _ground(unit_ball, N=4, k=1)
    out = ellipticity_ladder(S, sp, [0.5, 0.25, 0.125])
    assert out["pass"]


def test_subelliptic_rate_synthetic():
    d = [0.2, 0.1, 0.05, 0.025]
    assert fit_subelliptic_rate([(x, x) for x in d], 1.0)["alpha"] == pytest.approx(0.5)
    assert fit_subelliptic_rate([(x, 3 * x**2) for x in d], 1.0)["alpha"] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        fit_subelliptic_rate([(0.1, 0.1), (0.2, 0.2)], 1.0)


def test_subelliptic_rate_ball_ground_state(unit_ball):
    S, sp = _ground(unit_ball, N=4, k=1)
    decay = [(dl, boundary_mass(S, sp, "value", dl)) for dl in (0.2, 0.1, 0.05)]
    fit = fit_subelliptic_rate(decay, float(sp.eigenvalues[0]))
    assert 0 < fit["alpha"] <= 1 and fit["halfwidth"] >= 0


def test_normal_mass_exponent_reported(unit_ball):
    S, sp = _ground(unit_ball, N=4, k=1)
    out = normal_mass_exponent(S, sp, [0.2, 0.1, 0.05])
    assert out["heuristic"] and out["exponent"] > 0 and len(out["norms"]) == 3
