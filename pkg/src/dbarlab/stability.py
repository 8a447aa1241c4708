"""Domain-perturbation experiments.

Perturbed spectra are always obtained by re-assembling the Galerkin system
on the perturbed domain.  Sweeps record the discrete variational values per
perturbation, fit log-log rates against the Hausdorff distance and attach
trend verdicts.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import forms
from .discretize import build_system
from .eigen import apply_inverse, variational_eigenvalues
from .forms import PolyForm
from .geometry import (
    Domain,
    _to_complex,
    _to_real,
    dilate,
    interior_quadrature,
    layer_quadrature,
    level_for_degree,
    offset_domain,
    signed_distance,
)
from .parallel import ordered_map

TREND_FACTOR = 2.0
USC_TOL = 0.05


# ---------------------------------------------------------------------------
# fitting and trend helpers


def fit_loglog(x: Sequence[float], y: Sequence[float]) -> dict:
    """Least-squares slope of ``log y`` against ``log x``.

    The band half-width is twice the standard error of the slope (zero when
    the fit is exactly determined).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 2 or np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("log-log fit needs at least two positive points")
    lx, ly = np.log(x), np.log(y)
    if np.ptp(lx) == 0:
        raise ValueError("log-log fit needs at least two distinct abscissae")
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    slope, icpt = coef
    resid = ly - A @ coef
    dof = len(x) - 2
    if dof > 0:
        s2 = float(resid @ resid) / dof
        se = math.sqrt(s2 / float(np.sum((lx - lx.mean()) ** 2)))
    else:
        se = 0.0
    return {"slope": float(slope), "intercept": float(icpt), "halfwidth": 2 * se, "points": len(x)}


def band_overlaps(fit: dict, lo: float, hi: float) -> bool:
    return fit["slope"] + fit["halfwidth"] >= lo and fit["slope"] - fit["halfwidth"] <= hi


def monotone_within(values_by_decreasing_delta: Sequence[float], factor: float = TREND_FACTOR, atol: float = 1e-12) -> bool:
    """Each value is at most ``factor`` times its predecessor."""
    v = [abs(x) for x in values_by_decreasing_delta]
    return all(v[i + 1] <= factor * v[i] + atol for i in range(len(v) - 1))


# ---------------------------------------------------------------------------
# reports


@dataclass
class SweepRow:
    delta: float
    side: str
    param: float
    values: List[float]


@dataclass
class StabilityReport:
    base_values: List[float]
    rows: List[SweepRow]
    slopes: Dict[str, dict] = field(default_factory=dict)
    verdicts: Dict[str, dict] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.rows.sort(key=lambda r: (r.delta, r.side, r.param))

    @property
    def passed(self) -> bool:
        return all(v.get("pass", True) is not False for v in self.verdicts.values())

    def differences(self, k: int, side: Optional[str] = None):
        """``(delta, lambda_k(perturbed) - lambda_k(base))`` per row."""
        return [
            (r.delta, r.values[k - 1] - self.base_values[k - 1])
            for r in self.rows
            if side is None or r.side == side
        ]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["delta", "k", "lambda", "side"])
        for k, lam in enumerate(self.base_values, 1):
            w.writerow([repr(0.0), k, repr(float(lam)), "base"])
        for r in self.rows:
            for k, lam in enumerate(r.values, 1):
                w.writerow([repr(float(r.delta)), k, repr(float(lam)), r.side])
        return buf.getvalue()

    def to_json_obj(self) -> dict:
        return {
            "label": "discrete variational values",
            "base": [float(x) for x in self.base_values],
            "rows": [
                {"delta": r.delta, "side": r.side, "param": r.param, "values": [float(x) for x in r.values]}
                for r in self.rows
            ],
            "slopes": self.slopes,
            "verdicts": self.verdicts,
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), indent=2, sort_keys=True)

    def curves(self) -> Dict[str, List[tuple]]:
        """Plot-ready ``(delta, |lambda_k(perturbed) - lambda_k(base)|)`` per curve."""
        out = {}
        for side in sorted({r.side for r in self.rows}):
            for k in range(1, len(self.base_values) + 1):
                out[f"k{k}_{side}"] = [(d, abs(v)) for d, v in self.differences(k, side)]
        return out

    def write_curves(self, prefix: str) -> List[str]:
        paths = []
        for name, pts in self.curves().items():
            path = f"{prefix}{name}.dat"
            with open(path, "w") as fh:
                for d, v in pts:
                    fh.write(f"{d!r} {v!r}\n")
            paths.append(path)
        return paths


def _spectrum_values(d: Domain, q: int, k: int, N: int, sigma: float, level: int) -> List[float]:
    sys = build_system(d, q, N, sigma=sigma, level=level)
    return [float(x) for x in variational_eigenvalues(sys, k).eigenvalues]


def _fit_differences(report: StabilityReport, k: int, floor: float = 1e-12) -> Optional[dict]:
    pts = [(dl, abs(v)) for dl, v in report.differences(k) if dl > 0 and abs(v) > floor]
    if len(pts) < 2 or len({p[0] for p in pts}) < 2:
        return None
    return fit_loglog([p[0] for p in pts], [p[1] for p in pts])


# ---------------------------------------------------------------------------
# sweeps


def dilate_sweep(
    d: Domain,
    q: int,
    k: int,
    radii: Sequence[float],
    N: int,
    sigma: float,
    level: Optional[int] = None,
    slope_band: tuple = (0.8, 1.2),
) -> StabilityReport:
    """Spectra of ``r * Omega`` (about the centre) with penalty ``sigma / r``."""
    radii = [float(r) for r in radii]
    if any(not 0.5 < r < 1.5 for r in radii):
        raise ValueError("dilation radii must lie in (0.5, 1.5)")
    t0 = time.perf_counter()
    if level is None:
        level = level_for_degree(N, smooth_radial=d.kind == "ball")
    base = _spectrum_values(d, q, k, N, sigma, level)

    def job(r):
        if r == 1.0:
            return base
        return _spectrum_values(dilate(d, r), q, k, N, sigma / r, level)

    vals = ordered_map(job, radii)
    rows = [
        SweepRow(abs(1.0 - r), "dilate", r, v) for r, v in zip(radii, vals)
    ]
    rep = StabilityReport(base, rows)
    worst = 0.0
    for r, v in zip(radii, vals):
        for j in range(k):
            if base[j] != 0:
                worst = max(worst, abs(r * r * v[j] - base[j]) / abs(base[j]))
    rep.verdicts["scaling"] = {"pass": worst <= 1e-6, "max_rel_dev": worst, "tolerance": 1e-6}
    for j in range(1, k + 1):
        fit = _fit_differences(rep, j)
        if fit is not None:
            rep.slopes[str(j)] = fit
    if "1" in rep.slopes:
        fit = rep.slopes["1"]
        rep.verdicts["rate"] = {
            "pass": band_overlaps(fit, *slope_band),
            "slope": fit["slope"],
            "halfwidth": fit["halfwidth"],
            "band": list(slope_band),
        }
    rep.metadata = {
        "domain": d.label,
        "q": q,
        "N": N,
        "sigma": sigma,
        "level": level,
        "seconds": time.perf_counter() - t0,
    }
    return rep


_PSEUDOCONVEX_KINDS = ("ball", "complex_ellipsoid", "polydisc")


def offset_sweep(
    d: Domain,
    q: int,
    k: int,
    deltas: Sequence[float],
    side: str,
    N: int,
    sigma: float,
    level: Optional[int] = None,
    certificate=None,
    tolerance: float = USC_TOL,
) -> StabilityReport:
    """Spectra of the inner and/or outer parallel domains ``Omega -/+ delta``."""
    if side not in ("inner", "outer", "both"):
        raise ValueError("side must be inner, outer or both")
    deltas = sorted({float(x) for x in deltas})
    if any(x < 0 for x in deltas):
        raise ValueError("offsets must be non-negative")
    t0 = time.perf_counter()
    if level is None:
        level = level_for_degree(N, smooth_radial=d.kind == "ball")
    base = _spectrum_values(d, q, k, N, sigma, level)
    sides = ["inner", "outer"] if side == "both" else [side]
    jobs = [(dl, s) for dl in deltas for s in sides]

    def job(item):
        dl, s = item
        if dl == 0:
            return base
        dom = offset_domain(d, -dl if s == "inner" else dl)
        return _spectrum_values(dom, q, k, N, sigma, level)

    vals = ordered_map(job, jobs)
    rows = [SweepRow(dl, s, -dl if s == "inner" else dl, v) for (dl, s), v in zip(jobs, vals)]
    rep = StabilityReport(base, rows)

    # upper semicontinuity: running max of the positive excess as delta_0 shrinks
    usc = {}
    ok = True
    for j in range(1, k + 1):
        scale = abs(base[j - 1]) or 1.0
        eps = []
        for d0 in deltas:
            exc = [v for dl, v in rep.differences(j) if dl <= d0]
            eps.append(max([0.0] + exc) / scale)
        final = eps[0] if eps else 0.0
        good = final <= tolerance and all(eps[i] <= eps[i + 1] + 1e-15 for i in range(len(eps) - 1))
        ok &= good
        usc[str(j)] = {"eps_by_delta0": eps, "final": final, "pass": good}
    rep.verdicts["upper_semicontinuity"] = {"pass": ok, "tolerance": tolerance, "per_k": usc}

    trend = {}
    for s in sides:
        for j in range(1, k + 1):
            diffs = [v for dl, v in sorted(rep.differences(j, s), reverse=True) if dl > 0]
            trend[f"k{j}_{s}"] = monotone_within(diffs)
    rep.verdicts["trend"] = {"pass": all(trend.values()), "factor": TREND_FACTOR, "curves": trend}

    if certificate is None:
        rep.verdicts["lower_semicontinuity"] = {"pass": None, "status": "not evaluated (no certificate)"}
    elif d.kind not in _PSEUDOCONVEX_KINDS and not (d.kind == "offset" and d.base.kind in _PSEUDOCONVEX_KINDS):
        rep.verdicts["lower_semicontinuity"] = {"pass": None, "status": "no theorem coverage"}
    else:
        lsc = {}
        ok = True
        for j in range(1, k + 1):
            scale = abs(base[j - 1]) or 1.0
            smallest = min(deltas) if deltas else 0.0
            defic = [-v for dl, v in rep.differences(j) if dl <= smallest]
            final = max([0.0] + defic) / scale
            lsc[str(j)] = {"final": final, "pass": final <= tolerance}
            ok &= final <= tolerance
        rep.verdicts["lower_semicontinuity"] = {"pass": ok, "tolerance": tolerance, "per_k": lsc}

    for j in range(1, k + 1):
        fit = _fit_differences(rep, j)
        if fit is not None:
            rep.slopes[str(j)] = fit
    rep.metadata = {
        "domain": d.label,
        "q": q,
        "N": N,
        "sigma": sigma,
        "level": level,
        "side": side,
        "seconds": time.perf_counter() - t0,
    }
    return rep


# ---------------------------------------------------------------------------
# push-out / push-in


def _cell24_directions() -> np.ndarray:
    pts = []
    for i in range(4):
        for s in (1.0, -1.0):
            v = np.zeros(4)
            v[i] = s
            pts.append(v)
    for signs in np.ndindex(2, 2, 2, 2):
        pts.append(0.5 * (1 - 2 * np.array(signs, dtype=float)))
    return _to_complex(np.array(pts))


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t**3 * (10 - 15 * t + 6 * t * t), 30 * t * t * (1 - t) ** 2


@dataclass
class PushPlan:
    """Boundary patches with outward normals and a partition of unity.

    ``psi_0`` is a smoothstep in the depth ``-rho``: zero for depth ``<= a``,
    one for depth ``>= b``.  Patch bumps are ``(1 - s^2)^3`` in the scaled
    distance ``s`` to the anchor, cut off by ``1 - psi_0``.
    """

    domain: Domain
    anchors: np.ndarray
    normals: np.ndarray
    patch_radius: float
    depth_a: float
    depth_b: float
    grad_bound: float

    @property
    def size(self) -> int:
        return len(self.anchors)

    def _raw(self, z):
        z = np.atleast_2d(z)
        x = _to_real(z)
        depth = -self.domain.rho(z)
        gdepth = -self.domain.grad_rho(z)
        t = (depth - self.depth_a) / (self.depth_b - self.depth_a)
        s0, ds0 = _smoothstep(t)
        g0 = (ds0 / (self.depth_b - self.depth_a))[:, None] * gdepth
        diff = x[:, None, :] - _to_real(self.anchors)[None, :, :]
        s2 = np.sum(diff**2, axis=-1) / self.patch_radius**2
        inside = s2 < 1
        one = np.where(inside, 1 - s2, 0.0)
        beta = one**3
        gbeta = (-6 * one**2 / self.patch_radius**2)[..., None] * diff
        cut = 1 - s0
        phi = np.concatenate([s0[:, None], beta * cut[:, None]], axis=1)
        gphi = np.concatenate(
            [g0[:, None, :], gbeta * cut[:, None, None] - beta[..., None] * g0[:, None, :]], axis=1
        )
        return phi, gphi

    def weights(self, z):
        """``psi`` (``(m, L+1)``, column 0 interior) and real gradients."""
        phi, gphi = self._raw(z)
        tot = phi.sum(axis=1)
        if np.min(tot) <= 1e-10:
            i = int(np.argmin(tot))
            raise ValueError(f"partition of unity does not cover point {np.atleast_2d(z)[i]}")
        gtot = gphi.sum(axis=1)
        psi = phi / tot[:, None]
        gpsi = gphi / tot[:, None, None] - phi[..., None] * gtot[:, None, :] / (tot**2)[:, None, None]
        return psi, gpsi

    def dbar_weights(self, z):
        psi, g = self.weights(z)
        return psi, (g[..., 0::2] + 1j * g[..., 1::2]) / 2


def _cell24_dual_directions() -> np.ndarray:
    pts = []
    for i in range(4):
        for j in range(i + 1, 4):
            for si in (1.0, -1.0):
                for sj in (1.0, -1.0):
                    v = np.zeros(4)
                    v[i], v[j] = si, sj
                    pts.append(v / math.sqrt(2))
    return _to_complex(np.array(pts))


def _build_plan(d: Domain, dirs: np.ndarray, angle: float, max_delta: float) -> PushPlan:
    R = d.boundary_radius(dirs)
    anchors = d.center + R[:, None] * dirs
    g = d.grad_rho(anchors)
    nrm = _to_complex(g / np.linalg.norm(g, axis=-1, keepdims=True))
    Rm = float(np.mean(R))
    sample = d.boundary_sample(24, 12)
    gb = float(np.max(np.linalg.norm(d.grad_rho(sample), axis=-1)))
    a = 0.25 * Rm
    if max_delta * gb * 1.05 >= a:
        raise ValueError(f"max_delta={max_delta} too large for the interior cut-off depth {a:.3g}")
    plan = PushPlan(d, anchors, nrm, 2 * math.sin(math.radians(angle / 2)) * Rm, a, 0.4 * Rm, gb)
    # coverage of the boundary and of a shallow interior layer
    plan.weights(sample)
    plan.weights(d.center + 0.7 * (sample - d.center))
    return plan


def _containment_violation(plan: PushPlan, delta: float, level: int):
    d = plan.domain
    nodes = interior_quadrature(offset_domain(d, delta), level).nodes
    psi, _ = plan.weights(nodes)
    for l in range(plan.size):
        active = psi[:, l + 1] > 0
        moved = nodes[active] - 2 * delta * plan.normals[l]
        if np.any(d.rho(moved) > 1e-12):
            return l
    return None


def make_push_plan(d: Domain, max_delta: float = 0.1, level: int = 6) -> PushPlan:
    """Anchors along the 24 vertex directions of the 24-cell, refined on demand.

    The 24 directions have angular covering radius 45 degrees and get
    patches of angular radius 50 degrees.  If a translate ``z - 2 delta n``
    of a patch node leaves the domain for ``delta = max_delta``, the dual
    24-cell directions are added (covering radius about 32 degrees) and the
    patches shrink to 38 degrees.
    """
    if not d.smooth:
        raise ValueError("push plans need a smooth boundary")
    plan = _build_plan(d, _cell24_directions(), 50.0, max_delta)
    if _containment_violation(plan, max_delta, level) is None:
        return plan
    dirs = np.concatenate([_cell24_directions(), _cell24_dual_directions()])
    plan = _build_plan(d, dirs, 38.0, max_delta)
    bad = _containment_violation(plan, max_delta, level)
    if bad is not None:
        raise ValueError(f"no push plan satisfies containment for delta={max_delta} (patch {bad})")
    return plan


@dataclass
class SampledForm:
    """Coefficient values (and optionally ``dbar``) on a quadrature rule."""

    nodes: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    dbar_values: Optional[np.ndarray] = None
    info: dict = field(default_factory=dict)

    def norm(self) -> float:
        return math.sqrt(max(float(np.real(self.weights @ np.sum(np.abs(self.values) ** 2, axis=-1))), 0.0))

    def dbar_norm(self) -> float:
        if self.dbar_values is None:
            return float("nan")
        return math.sqrt(max(float(np.real(self.weights @ np.sum(np.abs(self.dbar_values) ** 2, axis=-1))), 0.0))

    def distance(self, other_values: np.ndarray) -> float:
        diff = self.values - other_values
        return math.sqrt(max(float(np.real(self.weights @ np.sum(np.abs(diff) ** 2, axis=-1))), 0.0))


def _form_values(f, z):
    return f.evaluate(z)


def _form_dbar_values(f, z):
    if isinstance(f, PolyForm):
        if f.q == f.n:
            return None
        return forms.dbar(f).evaluate(z)
    fn = getattr(f, "dbar_evaluate", None)
    return fn(z) if fn is not None else None


def _push(d, f, delta, plan, nodes, sign, extend_by_zero):
    n, q = d.n, f.q
    psi, dpsi = plan.dbar_weights(nodes)
    shifts = [np.zeros(n, dtype=complex)] + [sign * 2 * delta * nl for nl in plan.normals]
    vals = np.zeros((len(nodes), math.comb(n, q)), dtype=complex)
    dvals = None if q == n else np.zeros((len(nodes), math.comb(n, q + 1)), dtype=complex)
    have_dbar = True
    for l, sh in enumerate(shifts):
        active = psi[:, l] > 0
        if not np.any(active):
            continue
        zl = nodes[active] + sh
        inside = d.rho(zl) <= 1e-12
        if not extend_by_zero and l > 0 and not np.all(inside):
            bad = zl[~inside][0]
            raise ValueError(f"patch {l - 1}: translate {bad} of a node leaves the domain")
        fv = _form_values(f, zl)
        if extend_by_zero:
            fv = fv * inside[:, None]
        vals[active] += psi[active, l][:, None] * fv
        if dvals is not None:
            dfv = _form_dbar_values(f, zl)
            if dfv is None:
                have_dbar = False
                continue
            if extend_by_zero:
                dfv = dfv * inside[:, None]
            dvals[active] += forms.wedge_values(dpsi[active, l], fv, n, q) + psi[active, l][:, None] * dfv
    overlap = int(np.max(np.sum(psi > 0, axis=1)))
    info = {
        "delta": delta,
        "overlap": overlap,
        "bound_constant": overlap * float(np.max(psi)),
    }
    return vals, (dvals if have_dbar else None), info


def push_out(d: Domain, f, delta: float, plan: PushPlan, level: int = 6) -> SampledForm:
    """``psi_0 f + sum_l psi_l f(. - 2 delta n_l)`` on the outer parallel domain."""
    if not 0 < delta * plan.grad_bound < plan.depth_a:
        raise ValueError("delta must be positive and below the plan cut-off depth")
    target = offset_domain(d, delta)
    rule = interior_quadrature(target, level)
    vals, dvals, info = _push(d, f, delta, plan, rule.nodes, -1.0, False)
    return SampledForm(rule.nodes, rule.weights, vals, dvals, info)


def push_in(d: Domain, f, delta: float, plan: PushPlan, level: int = 6) -> SampledForm:
    """``psi_0 f~ + sum_l psi_l f~(. + 2 delta n_l)`` with ``f~`` the zero extension.

    Evaluated on the nodes of ``Omega``; ``info['outside_max']`` is the
    largest coefficient size at nodes outside the inner parallel domain.
    """
    if not 0 < delta * plan.grad_bound < plan.depth_a:
        raise ValueError("delta must be positive and below the plan cut-off depth")
    rule = interior_quadrature(d, level)
    vals, dvals, info = _push(d, f, delta, plan, rule.nodes, 1.0, True)
    outside = signed_distance(d, rule.nodes) > -delta
    info["outside_max"] = float(np.max(np.abs(vals[outside]), initial=0.0))
    return SampledForm(rule.nodes, rule.weights, vals, dvals, info)


def zero_extension_values(d: Domain, f, nodes: np.ndarray) -> np.ndarray:
    return _form_values(f, nodes) * (d.rho(nodes) <= 0)[:, None]


# ---------------------------------------------------------------------------
# boundary mass and resolvent trend


def eigenform(sys, spec, index: int = 0) -> PolyForm:
    if not 0 <= index < spec.eigenvectors.shape[1]:
        raise ValueError(f"eigenform index {index} out of range")
    return sys.basis.to_polyform(spec.eigenvectors[:, index])


def boundary_mass(sys, spec, which: str, delta: float, index: int = 0) -> float:
    """``||g||^2`` over the collar ``{dist(z, boundary) < delta}``."""
    if delta <= 0:
        raise ValueError("collar width must be positive")
    f = eigenform(sys, spec, index)
    if which == "value":
        g = f
    elif which == "dbar":
        if f.q == f.n:
            return 0.0
        g = forms.dbar(f)
    elif which == "theta":
        g = forms.theta(f)
    else:
        raise ValueError("which must be value, dbar or theta")
    rule = layer_quadrature(sys.domain, sys.interior.level, delta, "collar")
    vals = g.evaluate(rule.nodes)
    return float(np.real(rule.weights @ np.sum(np.abs(vals) ** 2, axis=-1)))


@dataclass
class ResolventReport:
    radii: List[float]
    distances: List[float]
    verdicts: dict
    metadata: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.verdicts.get("strictly_decreasing", {}).get("pass", False))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r", "distance"])
        for r, dist in zip(self.radii, self.distances):
            w.writerow([repr(r), repr(dist)])
        return buf.getvalue()

    def to_json_obj(self) -> dict:
        return {
            "radii": self.radii,
            "distances": self.distances,
            "verdicts": self.verdicts,
            "metadata": self.metadata,
        }


def resolvent_convergence(
    d: Domain,
    radii: Sequence[float],
    f: PolyForm,
    q: int,
    N: int,
    sigma: float,
    level: Optional[int] = None,
) -> ResolventReport:
    """``||N_r f - N f||`` for inner dilations ``r * Omega`` (zero extension).

    The penalty on ``r * Omega`` is ``sigma / r``, the scale-covariant
    choice.  The L^2 distance is split as the integral over ``r * Omega`` of
    the difference plus the mass of ``N f`` on ``Omega \\ r * Omega``, each
    computed with an exact polynomial rule.
    """
    radii = [float(r) for r in radii]
    if any(not 0 < r <= 1 for r in radii):
        raise ValueError("radii must lie in (0, 1]")
    if f.q != q:
        raise ValueError("form degree does not match q")
    if level is None:
        level = level_for_degree(N, smooth_radial=d.kind == "ball") + 1
    sys = build_system(d, q, N, sigma=sigma, level=level)
    c = apply_inverse(sys, f).coefficients
    basis = sys.basis
    total = float(np.real(np.conj(c) @ sys.M @ c))

    def job(r):
        if r == 1.0:
            return 0.0
        dr = dilate(d, r)
        sr = build_system(dr, q, N, sigma=sigma / r, level=level)
        cr = apply_inverse(sr, f).coefficients
        u = basis.evaluate(c, sr.interior.nodes)
        ur = basis.evaluate(cr, sr.interior.nodes)
        inner_diff = float(np.real(sr.interior.weights @ np.sum(np.abs(ur - u) ** 2, axis=-1)))
        inner_mass = float(np.real(sr.interior.weights @ np.sum(np.abs(u) ** 2, axis=-1)))
        return math.sqrt(max(inner_diff + total - inner_mass, 0.0))

    dist = ordered_map(job, radii)
    order = np.argsort(radii)
    seq = [dist[i] for i in order]
    strict = all(seq[i + 1] < seq[i] for i in range(len(seq) - 1))
    return ResolventReport(
        [radii[i] for i in order],
        seq,
        {
            "strictly_decreasing": {"pass": strict},
            "trend": {"pass": monotone_within(seq), "factor": TREND_FACTOR},
        },
        {"domain": d.label, "q": q, "N": N, "sigma": sigma, "level": level},
    )
