"""Reference values computed independently of the Galerkin pipeline."""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp


def _radial_shoot(mu: float, dim: int, r0: float = 1e-6) -> float:
    """``u(1)`` for ``u'' + ((dim-1)/r) u' + mu u = 0``, ``u(0) = 1``, ``u'(0) = 0``."""
    # series start: u = 1 - mu r^2 / (2 dim) + ...
    u0 = 1 - mu * r0**2 / (2 * dim)
    du0 = -mu * r0 / dim

    def rhs(r, y):
        return [y[1], -(dim - 1) / r * y[1] - mu * y[0]]

    sol = solve_ivp(rhs, (r0, 1.0), [u0, du0], method="DOP853", rtol=1e-12, atol=1e-14)
    return float(sol.y[0, -1])


def first_dirichlet_radial(dim: int, lo: float = 1.0, hi: float = 40.0, tol: float = 1e-11) -> float:
    """First Dirichlet eigenvalue of ``-Laplace`` on the unit ball of ``R^dim``.

    Shooting from the centre and bisecting on the first sign change of
    ``u(1)``; the bracket is refined by a coarse scan first.
    """
    grid = np.linspace(lo, hi, 80)
    vals = [_radial_shoot(m, dim) for m in grid]
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if fa * fb < 0:
            break
    else:
        raise RuntimeError("no sign change found")
    while b - a > tol * b:
        m = (a + b) / 2
        fm = _radial_shoot(m, dim)
        if fa * fm <= 0:
            b, fb = m, fm
        else:
            a, fa = m, fm
    return (a + b) / 2


def dirichlet_top_degree_ball(radius: float = 1.0) -> float:
    """Expected top-degree value on a ball in C^2: one quarter of the B^4 Dirichlet value."""
    return first_dirichlet_radial(4) / 4 / radius**2


def dirichlet_top_degree_polydisc(radius: float = 1.0) -> float:
    """Same for the bidisc: one quarter of twice the disc Dirichlet value."""
    return 2 * first_dirichlet_radial(2) / 4 / radius**2


def sigma_extrapolate(sigmas: Sequence[float], values: Sequence[float]) -> float:
    """Value at ``1/sigma = 0`` of the polynomial in ``1/sigma`` through the points."""
    x = 1.0 / np.asarray(sigmas, dtype=float)
    y = np.asarray(values, dtype=float)
    if len(x) < 2:
        raise ValueError("need at least two penalty values")
    coef = np.polyfit(x, y, len(x) - 1)
    return float(coef[-1])


def top_degree_oracle(domain) -> float:
    if domain.kind == "ball":
        return dirichlet_top_degree_ball(domain.params["radius"])
    if domain.kind == "polydisc":
        return dirichlet_top_degree_polydisc(domain.params["radius"])
    raise ValueError(f"no top-degree oracle for {domain.kind}")


def hardy_ball_reference() -> dict:
    """Closed forms for ``g = 1 - |z|^2`` on the unit ball of C^2."""
    return {"lhs": 49 * math.pi**2 / 30, "four_grad": 16 * math.pi**2 / 3}
