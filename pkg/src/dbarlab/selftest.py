"""Invariant suite behind ``dbarlab selftest``.

Every check is deterministic given the seed.  Results carry only rounded
numbers so that the printed table is byte-identical across runs and
thread counts; timings are reported separately.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from . import forms
from .certify import canonical_certificate, catlin_lower_bound, check_catlin_on_spectrum, check_certificate, check_hardy
from .discretize import AssemblyError, build_system
from .eigen import hermitian_gen_eig, variational_eigenvalues
from .forms import PolyForm
from .geometry import ball, boundary_quadrature, complex_ellipsoid, interior_quadrature
from .oracles import dirichlet_top_degree_ball, hardy_ball_reference, sigma_extrapolate
from .poly import Poly
from .stability import dilate_sweep, offset_sweep, resolvent_convergence


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"{self.name:<26} {'PASS' if self.passed else 'FAIL'}  {self.detail}"


def _g(x: float) -> str:
    return f"{x:.6g}"


def _lvl(forced: Optional[int], default: int) -> int:
    return default if forced is None else forced


# ---------------------------------------------------------------------------
# individual checks; each returns (passed, detail)


def check_quadrature(level=None, seed=0):
    L = _lvl(level, 6)
    d = ball()
    qi, qb = interior_quadrature(d, L), boundary_quadrature(d, L)
    z1 = np.abs(qi.nodes[:, 0]) ** 2
    zb1 = np.abs(qb.nodes[:, 0]) ** 2
    got = [qi.weights.sum(), qi.weights @ z1, qb.weights.sum(), qb.weights @ zb1]
    ref = [math.pi**2 / 2, math.pi**2 / 6, 2 * math.pi**2, math.pi**2]
    err = max(abs(g - r) / r for g, r in zip(got, ref))
    return err <= 1e-4, f"level={L} max_rel_err={_g(err)}"


def green_test_pairs():
    """``(u, f)`` pairs whose pairings do not vanish by rotational symmetry."""
    z1, z2 = Poly.z(2, 0), Poly.z(2, 1)
    n1, n2 = z1 * z1.conj(), z2 * z2.conj()
    return [
        (PolyForm.function(z2**3), PolyForm.basic(2, (1,), z2**4)),
        (PolyForm.function(1 + n1), PolyForm.basic(2, (0,), z1 + 0.5j * z1 * n2)),
        (PolyForm.basic(2, (0,), z1**3), PolyForm.basic(2, (0, 1), z1**3 * z2)),
        (PolyForm.basic(2, (0,), z1 * z2.conj()), PolyForm.basic(2, (0, 1), z1 * (n1 - 2.0))),
    ]


def _green_residual(d, pairs, L):
    qi, qb = interior_quadrature(d, L), boundary_quadrature(d, L)
    worst = 0.0
    for u, f in pairs:
        r = forms.check_green(d, u, f, qi, qb)
        worst = max(worst, r["residual"] / max(abs(r["interior"]), abs(r["boundary"]), 1e-300))
    return worst


def check_green(level=None, seed=0):
    """Green identity: exact on the ball, residual halving on the ellipsoid."""
    pairs = green_test_pairs()
    L1 = _lvl(level, 4)
    res_ball = _green_residual(ball(), pairs, max(L1, 3))
    E = complex_ellipsoid(2)
    r1 = _green_residual(E, pairs, L1)
    r2 = _green_residual(E, pairs, 2 * L1)
    ok = res_ball <= 1e-9 and (r2 <= r1 / 2 or r2 <= 1e-12)
    return ok, f"ball_rel_residual={_g(res_ball)} ellipsoid_L{L1}={_g(r1)} ellipsoid_L{2 * L1}={_g(r2)}"


def check_dirichlet(level=None, seed=0):
    sigmas = [1e3, 2e3, 4e3]
    try:
        S = build_system(ball(), 2, 8, sigma=sigmas[0], level=level)
    except AssemblyError as exc:
        return False, f"assembly failed: {exc}"
    vals = [float(variational_eigenvalues(S.with_sigma(s), 1).eigenvalues[0]) for s in sigmas]
    ext = sigma_extrapolate(sigmas, vals)
    ref = dirichlet_top_degree_ball()
    rel = abs(ext - ref) / ref
    return rel <= 0.10, f"extrapolated={_g(ext)} oracle={_g(ref)} rel_err={_g(rel)}"


def check_scaling(level=None, seed=0):
    rep = dilate_sweep(ball(), 1, 4, [0.8, 0.9, 1.1], 4, 100.0, level=level)
    dev = rep.verdicts["scaling"]["max_rel_dev"]
    return dev <= 1e-8, f"max_rel_dev={_g(dev)}"


def check_upper_semicontinuity(level=None, seed=0):
    parts, ok = [], True
    for name, d in (("ball", ball()), ("ellipsoid", complex_ellipsoid(2))):
        rep = offset_sweep(d, 1, 4, [0.08, 0.04, 0.02], "both", 4, 100.0, level=level)
        v = rep.verdicts["upper_semicontinuity"]
        worst = max(x["final"] for x in v["per_k"].values())
        ok &= bool(v["pass"])
        parts.append(f"{name}_final={_g(worst)}")
    return ok, " ".join(parts) + " tol=0.05"


def check_rate(level=None, seed=0):
    rep = dilate_sweep(ball(), 1, 1, [0.9, 0.95, 0.975, 1.025, 1.05, 1.1], 4, 100.0, level=level)
    s = rep.slopes["1"]["slope"]
    return 0.8 <= s <= 1.2, f"slope={_g(s)} band=[0.8,1.2]"


def check_catlin(level=None, seed=0):
    d = ball()
    c = canonical_certificate(d, 1)
    v = check_certificate(d, c, 1000, seed)
    if not v.passed:
        return False, "certificate rejected"
    S = build_system(d, 1, 4, sigma=100.0, level=level)
    sp = variational_eigenvalues(S, 4)
    bound = catlin_lower_bound(c, 1)
    lam1 = float(sp.eigenvalues[0])
    margins = check_catlin_on_spectrum(S, sp, c)
    ok = lam1 >= bound * (1 - 0.02) and margins["pass"]
    return ok, f"lambda1={_g(lam1)} bound={_g(bound)} margins_pass={margins['pass']}"


def check_hardy_family(level=None, seed=0):
    d = ball()
    g = 1 - Poly.norm_squared(2)
    L = _lvl(level, 6)
    rep = check_hardy(d, g, level=L)
    ref = hardy_ball_reference()
    e1 = abs(rep.lhs - ref["lhs"]) / ref["lhs"]
    e2 = abs(rep.rhs_energy - ref["four_grad"]) / ref["four_grad"]
    fam = [
        g * g,
        PolyForm.basic(2, (0,), g),
        PolyForm.basic(2, (1,), g),
        PolyForm.basic(2, (0,), g * Poly.zbar(2, 1)),
    ]
    fam_ok = all(check_hardy(d, f, level=L).passed for f in fam)
    ok = e1 <= 0.01 and e2 <= 0.01 and rep.passed and fam_ok
    return ok, f"lhs={_g(rep.lhs)} four_grad={_g(rep.rhs_energy)} family_pass={fam_ok}"


def check_sigma_monotone(level=None, seed=0):
    S = build_system(ball(), 1, 3, sigma=1.0, level=level)
    prev, worst = None, 0.0
    for s in (0.0, 1.0, 10.0, 100.0, 1000.0):
        lam = variational_eigenvalues(S.with_sigma(s), 6).eigenvalues
        if prev is not None:
            worst = max(worst, float(np.max(prev - lam)))
        prev = lam
    return worst <= 1e-9, f"max_decrease={_g(max(worst, 0.0))}"


def check_refinement_monotone(level=None, seed=0):
    L = _lvl(level, 4)
    prev, worst = None, 0.0
    for N in range(0, 5):
        S = build_system(ball(), 1, N, sigma=100.0, level=L)
        lam = variational_eigenvalues(S, 2).eigenvalues
        if prev is not None:
            worst = max(worst, float(np.max(lam - prev)))
        prev = lam
    return worst <= 1e-9, f"max_increase={_g(max(worst, 0.0))}"


def random_pencil(rng, n=8):
    X = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    A = X @ X.conj().T
    Y = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    M = Y @ Y.conj().T + n * np.eye(n)
    return A, M


def max_rayleigh(A, M, Ys):
    """Largest generalized Rayleigh quotient on each subspace ``span(Ys[s])``."""
    Ys, _ = np.linalg.qr(Ys)
    Ah = np.einsum("sik,ij,sjl->skl", Ys.conj(), A, Ys)
    Mh = np.einsum("sik,ij,sjl->skl", Ys.conj(), M, Ys)
    L = np.linalg.cholesky(Mh)
    Li = np.linalg.inv(L)
    C = Li @ Ah @ np.swapaxes(Li.conj(), 1, 2)
    C = (C + np.swapaxes(C.conj(), 1, 2)) / 2
    return np.linalg.eigvalsh(C)[:, -1]


def minmax_bruteforce(A, M, k, trials, rng):
    n = A.shape[0]
    Ys = rng.standard_normal((trials, n, k)) + 1j * rng.standard_normal((trials, n, k))
    return float(np.min(max_rayleigh(A, M, Ys)))


def check_minmax(level=None, seed=0):
    rng = np.random.default_rng(seed)
    worst_one, worst_two = -np.inf, 0.0
    for _ in range(3):
        A, M = random_pencil(rng)
        sp = hermitian_gen_eig(A, M, 8)
        for k in range(1, 9):
            brute = minmax_bruteforce(A, M, k, 10_000, rng)
            worst_one = max(worst_one, sp.eigenvalues[k - 1] - brute)
            own = max_rayleigh(A, M, sp.eigenvectors[None, :, :k])[0]
            worst_two = max(worst_two, abs(own - sp.eigenvalues[k - 1]))
    ok = worst_one <= 1e-9 and worst_two <= 1e-6
    return ok, f"solver_minus_brute={_g(worst_one)} own_space_dev={_g(worst_two)}"


def check_resolvent(level=None, seed=0):
    rep = resolvent_convergence(ball(), [0.9, 0.95, 0.99], PolyForm.basic(2, (0,), 1.0), 1, 4, 100.0, level=level)
    return rep.passed, "distances=" + ",".join(_g(x) for x in rep.distances)


CHECKS: List[tuple] = [
    ("quadrature_oracle", check_quadrature),
    ("green_identity", check_green),
    ("dirichlet_oracle", check_dirichlet),
    ("scaling_covariance", check_scaling),
    ("upper_semicontinuity", check_upper_semicontinuity),
    ("dilation_rate", check_rate),
    ("catlin_bound", check_catlin),
    ("hardy_inequality", check_hardy_family),
    ("sigma_monotonicity", check_sigma_monotone),
    ("refinement_monotonicity", check_refinement_monotone),
    ("minmax_bruteforce", check_minmax),
    ("resolvent_trend", check_resolvent),
]


def run_checks(level: Optional[int] = None, seed: int = 0, only: Optional[List[str]] = None) -> List[CheckResult]:
    out = []
    for name, fn in CHECKS:
        if only and name not in only:
            continue
        t0 = time.perf_counter()
        try:
            ok, detail = fn(level=level, seed=seed)
        except Exception as exc:  # a crashing check is a failed check
            ok, detail = False, f"error: {type(exc).__name__}: {exc}"
        out.append(CheckResult(name, bool(ok), detail, time.perf_counter() - t0))
    return out
