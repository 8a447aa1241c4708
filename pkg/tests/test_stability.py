import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dbarlab.discretize import build_system
from dbarlab.eigen import variational_eigenvalues
from dbarlab.forms import PolyForm
from dbarlab.geometry import ball, complex_ellipsoid, interior_quadrature
from dbarlab.poly import Poly
from dbarlab.stability import (
    band_overlaps,
    boundary_mass,
    dilate_sweep,
    fit_loglog,
    make_push_plan,
    monotone_within,
    offset_sweep,
    push_in,
    push_out,
    resolvent_convergence,
    zero_extension_values,
)


def test_fit_loglog_exact_power():
    x = np.array([0.1, 0.05, 0.025])
    fit = fit_loglog(x, 3 * x**1.5)
    assert fit["slope"] == pytest.approx(1.5)
    assert fit["halfwidth"] == pytest.approx(0, abs=1e-9)
    assert band_overlaps(fit, 1.4, 1.6) and not band_overlaps(fit, 0.8, 1.2)


def test_monotone_within_factor_two():
    assert monotone_within([4.0, 2.0, 1.0])
    assert monotone_within([4.0, 5.0, 1.0])
    assert not monotone_within([1.0, 4.0, 0.5])


def test_dilation_scaling_exact(unit_ball):
    rep = dilate_sweep(unit_ball, 1, 2, [0.8, 0.9, 1.0, 1.1], 4, 100.0)
    assert rep.verdicts["scaling"]["max_rel_dev"] <= 1e-6
    for r in rep.rows:
        assert r.param**2 * r.values[0] == pytest.approx(rep.base_values[0], rel=1e-8)


def test_dilation_rate(unit_ball):
    rep = dilate_sweep(unit_ball, 1, 1, [0.9, 0.95, 0.975, 1.025, 1.05, 1.1], 4, 100.0)
    assert 0.8 <= rep.slopes["1"]["slope"] <= 1.2
    assert rep.verdicts["rate"]["pass"]


def test_dilation_identity_only(unit_ball):
    rep = dilate_sweep(unit_ball, 1, 1, [1.0], 2, 10.0)
    assert len(rep.rows) == 1 and rep.rows[0].delta == 0
    assert rep.differences(1) == [(0.0, 0.0)]


def test_dilation_radius_range(unit_ball):
    with pytest.raises(ValueError):
        dilate_sweep(unit_ball, 1, 1, [0.4], 2, 10.0)


def test_inner_offsets_of_ball(unit_ball):
    rep = offset_sweep(unit_ball, 1, 1, [0.02, 0.04, 0.08], "inner", 4, 100.0)
    lam = rep.base_values[0]
    diffs = rep.differences(1)
    for dl, v in diffs:
        # exact scaling at infinite penalty; the fixed penalty costs a few percent
        assert v == pytest.approx(lam * (1 / (1 - dl) ** 2 - 1), rel=0.05)
    assert [v for _, v in diffs] == sorted(v for _, v in diffs)
    assert rep.verdicts["lower_semicontinuity"]["status"] == "not evaluated (no certificate)"


def test_zero_offset(unit_ball):
    rep = offset_sweep(unit_ball, 1, 2, [0.0], "both", 2, 10.0)
    assert all(v == 0 for _, v in rep.differences(1))


def test_ellipsoid_offsets_monotone(ellipsoid):
    rep = offset_sweep(ellipsoid, 1, 1, [0.02, 0.04, 0.08], "both", 3, 100.0)
    assert rep.verdicts["trend"]["pass"]
    for side in ("inner", "outer"):
        mags = [abs(v) for _, v in sorted(rep.differences(1, side), reverse=True)]
        assert monotone_within(mags)


def test_report_exports(unit_ball, tmp_path):
    rep = offset_sweep(unit_ball, 1, 1, [0.04, 0.02], "outer", 2, 10.0)
    lines = rep.to_csv().splitlines()
    assert lines[0] == "delta,k,lambda,side" and lines[1].endswith("base") and len(lines) == 4
    paths = rep.write_curves(str(tmp_path / "c."))
    assert [p.rsplit("/", 1)[1] for p in paths] == ["c.k1_outer.dat"]
    rows = np.loadtxt(paths[0])
    assert rows.shape == (2, 2) and np.all(rows[:, 1] > 0)


@pytest.fixture(scope="module")
def plan():
    return make_push_plan(ball())


def test_partition_of_unity(plan, rng):
    z = rng.standard_normal((500, 2)) + 1j * rng.standard_normal((500, 2))
    z *= (rng.uniform(0, 1.1, 500) / np.linalg.norm(z, axis=1))[:, None]
    psi, g = plan.weights(z)
    assert np.allclose(psi.sum(axis=1), 1)
    assert np.allclose(g.sum(axis=1), 0, atol=1e-10)
    assert np.all(psi >= 0)


def test_push_out_constant(plan):
    f = PolyForm.basic(2, (0,))
    s = push_out(ball(), f, 0.05, plan)
    assert np.allclose(s.values, [1, 0], atol=1e-14)
    assert np.allclose(s.dbar_values, 0, atol=1e-12)


def test_push_out_converges(plan):
    d = ball()
    f = PolyForm.basic(2, (1,), Poly.zbar(2, 0))
    dist, norms = [], []
    for delta in (0.1, 0.05, 0.025):
        s = push_out(d, f, delta, plan)
        dist.append(s.distance(zero_extension_values(d, f, s.nodes)))
        norms.append(s.norm())
        # explicit partition bound on the whole outer domain
        assert s.norm() <= s.info["bound_constant"] * s.norm()
        assert s.info["bound_constant"] == s.info["overlap"] * 1.0 or s.info["bound_constant"] <= s.info["overlap"]
    assert dist[0] > dist[1] > dist[2]


def test_push_out_norm_bound(plan):
    d = ball()
    f = PolyForm.basic(2, (1,), Poly.zbar(2, 0))
    rule = interior_quadrature(d, 6)
    fnorm = math.sqrt(float(rule.weights @ np.sum(np.abs(f.evaluate(rule.nodes)) ** 2, axis=1)))
    s = push_out(d, f, 0.05, plan)
    assert s.norm() <= s.info["bound_constant"] * fnorm


class CompactBump:
    """``max(0.16 - |z|^2, 0)^4 dzbar_1``, supported in ``|z| < 0.4``."""

    n, q = 2, 1

    def evaluate(self, z):
        z = np.atleast_2d(z)
        s = np.maximum(0.16 - np.sum(np.abs(z) ** 2, axis=1), 0.0) ** 4
        return np.stack([s, np.zeros_like(s)], axis=1).astype(complex)


def test_push_in_interior_bump(plan):
    f = CompactBump()
    s = push_in(ball(), f, 0.05, plan)
    assert np.array_equal(s.values, f.evaluate(s.nodes))


def test_push_in_converges_and_support(plan):
    d = ball()
    f = PolyForm.basic(2, (0,))
    dist = []
    for delta in (0.1, 0.05, 0.025):
        s = push_in(d, f, delta, plan)
        dist.append(s.distance(f.evaluate(s.nodes)))
        assert s.info["outside_max"] == 0.0
    assert dist[0] > dist[1] > dist[2]


def test_push_rejects_large_delta(plan):
    with pytest.raises(ValueError):
        push_out(ball(), PolyForm.basic(2, (0,)), 0.5, plan)


@pytest.fixture(scope="module")
def ground():
    S = build_system(ball(), 1, 4, sigma=100.0)
    return S, variational_eigenvalues(S, 1)


def test_boundary_mass_full_collar(ground):
    S, sp = ground
    full = S.norm_squared(sp.eigenvectors[:, 0])
    assert boundary_mass(S, sp, "value", S.domain.diameter) == pytest.approx(full, rel=1e-10)


def test_boundary_mass_decreases(ground):
    S, sp = ground
    deltas = [0.4, 0.2, 0.1, 0.05, 0.025]
    m = [boundary_mass(S, sp, "value", dl) for dl in deltas]
    assert all(a > b for a, b in zip(m, m[1:]))
    fit = fit_loglog(deltas[1:4], m[1:4])
    assert fit["slope"] >= 1.0
    for which in ("dbar", "theta"):
        assert boundary_mass(S, sp, which, 0.1) >= 0


def test_boundary_mass_level_stable():
    masses = []
    for level in (7, 9):
        S = build_system(ball(), 1, 4, sigma=100.0, level=level)
        sp = variational_eigenvalues(S, 1)
        masses.append([boundary_mass(S, sp, "value", dl) for dl in (0.2, 0.1, 0.05)])
    assert np.allclose(masses[0], masses[1], rtol=1e-6)


def test_resolvent_identity_radius(unit_ball):
    rep = resolvent_convergence(unit_ball, [1.0], PolyForm.basic(2, (0,)), 1, 2, 10.0)
    assert rep.distances == [0.0]


def test_resolvent_ball_trend(unit_ball):
    rep = resolvent_convergence(unit_ball, [0.9, 0.95, 0.99], PolyForm.basic(2, (0,)), 1, 4, 100.0)
    assert rep.passed
    assert rep.distances[0] > rep.distances[1] > rep.distances[2] > 0


def test_resolvent_eigenform_trend(ground):
    S, sp = ground
    f = S.basis.to_polyform(sp.eigenvectors[:, 0])
    rep = resolvent_convergence(S.domain, [0.9, 0.95, 0.99], f, 1, 4, 100.0)
    assert rep.passed


@settings(max_examples=8, deadline=None)
@given(st.floats(0.6, 1.4))
def test_scaling_covariance_property(r):
    base = variational_eigenvalues(build_system(ball(), 2, 3, sigma=50.0, level=5), 2).eigenvalues
    vals = variational_eigenvalues(build_system(ball(r), 2, 3, sigma=50.0 / r, level=5), 2).eigenvalues
    assert np.allclose(r * r * vals, base, rtol=1e-8)
