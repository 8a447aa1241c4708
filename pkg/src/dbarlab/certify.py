"""Plurisubharmonic certificates and the inequality checkers.

A certificate is a user-supplied weight ``b`` with ``-1 <= b <= 0`` on the
closed domain and a claimed lower bound ``M`` for the sum of the ``q``
smallest eigenvalues of its complex Hessian.  Certificates are checked by
sampling; nothing here constructs one.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import forms
from .forms import PolyForm, multi_indices
from .geometry import Domain, _to_real, interior_quadrature, layer_quadrature, signed_distance
from .poly import Poly, parse_poly
from .stability import fit_loglog

CATLIN_TOL = 0.02
COLLAR_FLOOR = 1e-3
LEVEL_AGREEMENT = 0.01


class CertificateError(ValueError):
    pass


@dataclass
class Certificate:
    b: Poly
    hessian_bound: float
    q: int = 1
    alpha: Optional[float] = None
    collar: Optional[float] = None
    checked: bool = False

    def to_text(self) -> str:
        lines = [f"b = {poly_to_text(self.b)}", f"M = {self.hessian_bound!r}", f"q = {self.q}"]
        if self.alpha is not None:
            lines.append(f"alpha = {self.alpha!r}")
        if self.collar is not None:
            lines.append(f"collar = {self.collar!r}")
        return "\n".join(lines) + "\n"

    def scaled(self, factor: float) -> "Certificate":
        """Same weight with the claimed Hessian bound multiplied by ``factor``."""
        return Certificate(self.b, self.hessian_bound * factor, self.q, self.alpha, self.collar, self.checked)


def poly_to_text(p: Poly) -> str:
    parts = []
    for (a, b), c in sorted(p.terms.items()):
        factors = [f"({c.real!r}{c.imag:+r}*I)" if c.imag else repr(c.real)]
        for j, e in enumerate(a):
            factors += [f"z{j + 1}"] * e
        for j, e in enumerate(b):
            factors += [f"zb{j + 1}"] * e
        parts.append("*".join(factors))
    return " + ".join(parts) if parts else "0"


def parse_certificate(text: str, n: int = 2) -> Certificate:
    vals = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CertificateError(f"expected key = value, got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        vals[key.lower()] = val
    if "b" not in vals or "m" not in vals:
        raise CertificateError("certificate needs b and M")
    return Certificate(
        parse_poly(vals["b"], n),
        float(vals["m"]),
        int(vals.get("q", 1)),
        float(vals["alpha"]) if "alpha" in vals else None,
        float(vals["collar"]) if "collar" in vals else None,
    )


def load_certificate(path: str, n: int = 2) -> Certificate:
    with open(path) as fh:
        return parse_certificate(fh.read(), n)


def canonical_certificate(d: Domain, q: int = 1) -> Certificate:
    """``b = |z - c|^2 / R^2 - 1`` with ``R`` the bounding radius, ``M = q / R^2``."""
    R = d.bounding_radius
    b = Poly(d.n)
    for j in range(d.n):
        zj = Poly.z(d.n, j) - complex(d.center[j])
        b = b + zj * zj.conj()
    return Certificate(b * (1.0 / R**2) - 1.0, q / R**2, q)


# ---------------------------------------------------------------------------
# certificate checking


@dataclass
class Verdict:
    passed: bool
    detail: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({"pass": self.passed, **self.detail}, indent=2, sort_keys=True, default=_jsonable)


def _jsonable(x):
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    return str(x)


def _hessian_at(b: Poly, z: np.ndarray) -> np.ndarray:
    H = forms.complex_hessian(b)
    n = b.n
    out = np.empty((len(z), n, n), dtype=complex)
    for j in range(n):
        for k in range(n):
            out[:, j, k] = H[j][k].evaluate(z)
    return out


def sample_closed_domain(d: Domain, samples: int, rng: np.random.Generator) -> np.ndarray:
    """Random points of the closed domain; a quarter lie on the boundary."""
    x = rng.standard_normal((samples, 2 * d.n))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    dirs = x[:, 0::2] + 1j * x[:, 1::2]
    R = d.boundary_radius(dirs)
    t = rng.random(samples) ** (1.0 / (2 * d.n))
    t[: samples // 4] = 1.0
    return d.center + (R * t)[:, None] * dirs


def _extremal_forms(H: np.ndarray, n: int, q: int) -> np.ndarray:
    """Unit ``q``-forms minimising ``H_q``: wedge of the ``q`` lowest eigenvectors."""
    w, V = np.linalg.eigh(H)
    Js = multi_indices(n, q)
    out = np.zeros((len(H), len(Js)), dtype=complex)
    for iJ, J in enumerate(Js):
        sub = V[:, list(J), :q]
        # coefficient of dzbar_J in v_1 ^ ... ^ v_q (conjugated frame)
        out[:, iJ] = np.conj(np.linalg.det(sub))
    return out


def check_certificate(d: Domain, c: Certificate, samples: int = 1000, seed: int = 0) -> Verdict:
    if samples < 100:
        raise ValueError("at least 100 samples are required")
    if not 1 <= c.q <= d.n:
        raise ValueError("certificate form degree out of range")
    rng = np.random.default_rng(seed)
    z = sample_closed_domain(d, samples, rng)
    bv = c.b.evaluate(z)
    if np.max(np.abs(bv.imag)) > 1e-9:
        i = int(np.argmax(np.abs(bv.imag)))
        return Verdict(False, {"reason": "b is not real", "witness_point": z[i]})
    H = _hessian_at(c.b, z)
    ncomp = math.comb(d.n, c.q)
    tests = rng.standard_normal((samples, 4, ncomp)) + 1j * rng.standard_normal((samples, 4, ncomp))
    tests /= np.linalg.norm(tests, axis=-1, keepdims=True)
    tests = np.concatenate([tests, _extremal_forms(H, d.n, c.q)[:, None, :]], axis=1)
    need = np.full(samples, c.hessian_bound)
    if c.alpha is not None and c.collar is not None:
        dist = np.maximum(-signed_distance(d, z), 1e-12)
        in_collar = dist < c.collar
        need = np.where(in_collar, c.hessian_bound * dist ** (-2 * c.alpha), need)
    worst = None
    for t in range(tests.shape[1]):
        vals = forms.hessian_action_values(H, tests[:, t, :], d.n, c.q)
        viol = vals - need
        tol = 1e-9 * np.maximum(1.0, np.abs(need))
        if np.any(viol < -tol):
            i = int(np.argmin(viol))
            if worst is None or viol[i] < worst[0]:
                worst = (viol[i], i, t, vals[i])
    if worst is not None:
        _, i, t, val = worst
        return Verdict(
            False,
            {
                "reason": "Hessian bound violated",
                "witness_point": z[i],
                "witness_form": tests[i, t],
                "value": float(val),
                "required": float(need[i]),
            },
        )
    bad = (bv.real < -1 - 1e-9) | (bv.real > 1e-9)
    if np.any(bad):
        i = int(np.argmax(bad))
        return Verdict(False, {"reason": "b outside [-1, 0]", "witness_point": z[i], "b": float(bv.real[i])})
    c.checked = True
    return Verdict(True, {"samples": samples, "seed": seed, "M": c.hessian_bound})


def catlin_lower_bound(c: Certificate, q: int | None = None) -> float:
    if not c.checked:
        raise CertificateError("certificate has not passed check_certificate")
    if q is not None and q != c.q:
        raise CertificateError(f"certificate is for q={c.q}, not q={q}")
    return c.hessian_bound / math.e


def check_catlin_on_spectrum(sys, spec, c: Certificate, tolerance: float = CATLIN_TOL) -> dict:
    """Per-eigenform margins ``Q(f, f) - (1/e) int H_q(b)(f)``."""
    rule = sys.interior
    H = _hessian_at(c.b, rule.nodes)
    margins = []
    for i in range(spec.eigenvectors.shape[1]):
        v = spec.eigenvectors[:, i]
        Q = float(np.real(np.conj(v) @ sys.A @ v))
        vals = sys.basis.evaluate(v, rule.nodes)
        hint = float(rule.weights @ forms.hessian_action_values(H, vals, sys.basis.n, sys.basis.q))
        margin = Q - hint / math.e
        margins.append(
            {
                "index": i + 1,
                "Q": Q,
                "hessian_integral": hint,
                "margin": margin,
                "pass": margin >= -tolerance * abs(Q),
            }
        )
    return {"tolerance": tolerance, "pass": all(m["pass"] for m in margins), "margins": margins}


# ---------------------------------------------------------------------------
# Hardy inequalities


@dataclass
class HardyReport:
    lhs: float
    rhs_energy: float
    rhs_mass: float
    minimal_A: float
    passed: bool
    constant: float
    excluded_mass: float
    excluded_nodes: int
    levels: tuple
    level_agreement: float
    kind: str

    def to_json_obj(self) -> dict:
        return dict(self.__dict__)


def _normal_field(d: Domain, z: np.ndarray) -> np.ndarray:
    """Unit ``(0,1)``-covector along ``dbar`` of the signed distance."""
    if d.kind == "ball":
        g = _to_real(z - d.center)
    else:
        _, nrm = d.closest_point(z)
        g = nrm
    w = (g[..., 0::2] + 1j * g[..., 1::2]) / 2
    return w / np.linalg.norm(w, axis=-1, keepdims=True)


def _normal_component(d: Domain, f: PolyForm, z: np.ndarray) -> np.ndarray:
    w = _normal_field(d, z)
    return forms.contract_values(f.evaluate(z), f.n, f.q, np.conj(w))


def _fd_gradient_sq(fun, z: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """``sum |grad component|^2`` by central differences in the real coordinates."""
    x = _to_real(z)
    total = 0.0
    for k in range(x.shape[1]):
        e = np.zeros(x.shape[1])
        e[k] = h
        zp = (x + e)[:, 0::2] + 1j * (x + e)[:, 1::2]
        zm = (x - e)[:, 0::2] + 1j * (x - e)[:, 1::2]
        der = (fun(zp) - fun(zm)) / (2 * h)
        total = total + np.sum(np.abs(der) ** 2, axis=-1)
    return total


def _poly_gradient_sq(p: Poly, z: np.ndarray) -> np.ndarray:
    out = 0.0
    for j in range(p.n):
        out = out + np.abs(p.dx(j).evaluate(z)) ** 2 + np.abs(p.dy(j).evaluate(z)) ** 2
    return out


def _hardy_once(d: Domain, f, level: int, floor: float):
    rule = interior_quadrature(d, level)
    z, w = rule.nodes, rule.weights
    dist = -signed_distance(d, z)
    keep = dist >= floor
    if isinstance(f, Poly):
        vals = np.abs(f.evaluate(z)) ** 2
        grad = _poly_gradient_sq(f, z)
        energy_scale = 4.0
    else:
        vals = np.sum(np.abs(_normal_component(d, f, z)) ** 2, axis=-1)
        grad = _fd_gradient_sq(lambda y: _normal_component(d, f, y), z)
        energy_scale = 0.25
    lhs = float(w[keep] @ (vals[keep] / dist[keep] ** 2))
    return {
        "lhs": lhs,
        "energy": energy_scale * float(w @ grad),
        "mass": float(w @ vals),
        "excluded_mass": float(w[~keep] @ vals[~keep]),
        "excluded_nodes": int(np.sum(~keep)),
    }


def check_hardy(d: Domain, f, q_int=None, level: int = 6, A: float = 0.0, floor: float = COLLAR_FLOOR) -> HardyReport:
    """Weighted ``1/d^2`` inequality for a scalar ``Poly`` or the normal part of a form.

    Scalar path: ``lhs <= 4 ||grad g||^2 + A ||g||^2``.  Form path:
    ``lhs <= 16 (Q(f_N, f_N) + A ||f_N||^2)`` with ``Q(f_N, f_N)`` taken as
    ``(1/4) ||grad f_N||^2``.  ``q_int`` optionally fixes the first level.
    """
    if q_int is not None:
        level = q_int.level
    sample = d.boundary_sample(24, 12)
    if isinstance(f, Poly):
        trace = np.abs(f.evaluate(sample))
        kind, const = "scalar", 4.0
    else:
        trace = np.linalg.norm(_normal_component(d, f, sample), axis=-1)
        kind, const = "form", 16.0
    if np.max(trace) > 1e-6:
        raise ValueError(f"normal trace does not vanish on the boundary (max {np.max(trace):.3e})")
    lo = _hardy_once(d, f, level, floor)
    hi = _hardy_once(d, f, level + 2, floor)
    agree = 0.0
    for key in ("lhs", "energy", "mass"):
        ref = max(abs(hi[key]), 1e-300)
        if abs(hi[key]) > 0:
            agree = max(agree, abs(lo[key] - hi[key]) / ref)
    lhs, energy, mass = hi["lhs"], hi["energy"], hi["mass"]
    if kind == "scalar":
        # lhs <= energy + A mass
        slack = lhs - energy
    else:
        slack = lhs / const - energy
    if slack <= 0:
        amin = 0.0
    elif mass > 0:
        amin = slack / mass
    else:
        amin = float("inf")
    holds = slack - A * mass <= 1e-12 * max(1.0, abs(lhs))
    resolved = agree <= LEVEL_AGREEMENT
    return HardyReport(
        lhs,
        energy,
        mass,
        amin,
        bool(holds and resolved),
        const,
        hi["excluded_mass"],
        hi["excluded_nodes"],
        (level, level + 2),
        agree,
        kind,
    )


# ---------------------------------------------------------------------------
# interior ellipticity and decay rates


def _w1_energy(f: PolyForm, z: np.ndarray) -> np.ndarray:
    val = np.sum(np.abs(f.evaluate(z)) ** 2, axis=-1)
    grad = 0.0
    for p in f.comps.values():
        grad = grad + _poly_gradient_sq(p, z)
    return val + grad


def check_interior_ellipticity(sys, spec, delta: float, indices: Optional[Sequence[int]] = None) -> List[dict]:
    """``C_emp = ||f||^2_{W^1(Omega_delta)} / (Q(f, f) + delta^-2 ||f||^2)`` per eigenform."""
    rule = layer_quadrature(sys.domain, sys.interior.level, delta, "inner")
    if indices is None:
        indices = range(spec.eigenvectors.shape[1])
    out = []
    for i in indices:
        v = spec.eigenvectors[:, i]
        f = sys.basis.to_polyform(v)
        lhs = float(rule.weights @ _w1_energy(f, rule.nodes))
        Q = float(np.real(np.conj(v) @ sys.A @ v))
        mass = float(np.real(np.conj(v) @ sys.M @ v))
        rhs = Q + mass / delta**2
        out.append({"index": i + 1, "delta": delta, "lhs": lhs, "rhs": rhs, "C_emp": lhs / rhs if rhs > 0 else 0.0})
    return out


def ellipticity_ladder(sys, spec, deltas: Sequence[float], ratio: float = 4.0) -> dict:
    rows = []
    for dl in deltas:
        rows.extend(check_interior_ellipticity(sys, spec, dl))
    verdict = True
    for i in sorted({r["index"] for r in rows}):
        cs = [r["C_emp"] for r in rows if r["index"] == i and r["C_emp"] > 0]
        if cs and max(cs) / min(cs) > ratio:
            verdict = False
    return {"rows": rows, "pass": verdict, "ratio": ratio}


def fit_subelliptic_rate(decay: Sequence[tuple], Q_value: float) -> dict:
    """``alpha = slope / 2`` from ``log mass`` against ``log delta``."""
    if len(decay) < 3:
        raise ValueError("need at least three decay points")
    d = np.array([p[0] for p in decay], dtype=float)
    m = np.array([p[1] for p in decay], dtype=float)
    if np.any(m <= 0):
        raise ValueError("boundary masses must be positive")
    fit = fit_loglog(d, m)
    alpha = fit["slope"] / 2
    return {
        "alpha": alpha,
        "halfwidth": fit["halfwidth"] / 2,
        "constant": math.exp(fit["intercept"]) / Q_value if Q_value > 0 else float("inf"),
        "fit": fit,
    }


def normal_mass_exponent(sys, spec, deltas: Sequence[float], index: int = 0) -> dict:
    """Exponent of ``||f_N||_{A_delta}`` in ``delta`` (heuristic, threshold 1.4)."""
    f = sys.basis.to_polyform(spec.eigenvectors[:, index])
    norms = []
    for dl in deltas:
        rule = layer_quadrature(sys.domain, sys.interior.level, dl, "collar")
        vals = np.sum(np.abs(_normal_component(sys.domain, f, rule.nodes)) ** 2, axis=-1)
        norms.append(math.sqrt(float(rule.weights @ vals)))
    fit = fit_loglog(deltas, norms)
    return {"norms": norms, "exponent": fit["slope"], "at_least_1.4": fit["slope"] >= 1.4, "heuristic": True}
