"""Star-shaped bounded domains in C^2 and their quadrature rules.

Points are complex arrays of shape ``(m, n)``.  Real gradients use the
coordinate order ``(x_1, y_1, x_2, y_2)``.  Directions on the unit sphere
S^3 are parametrised by Hopf coordinates

    theta = (sqrt(1 - u) e^{i phi_1}, sqrt(u) e^{i phi_2}),

for which the surface measure is ``du dphi_1 dphi_2 / 2``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Optional

import numpy as np
from scipy.spatial import cKDTree

from .poly import Poly, parse_poly

KINDS = ("ball", "complex_ellipsoid", "polydisc", "custom", "offset")


# ---------------------------------------------------------------------------
# quadrature primitives


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Nodes in C^n with positive weights; ``kind`` is interior or boundary."""

    nodes: np.ndarray
    weights: np.ndarray
    kind: str
    level: int
    spacing: float = float("nan")

    def __post_init__(self):
        if np.any(self.weights <= 0):
            raise ValueError("quadrature weights must be positive")

    def __len__(self):
        return len(self.weights)

    def integrate(self, values: np.ndarray) -> complex:
        return np.sum(self.weights * values)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            n = self.nodes.shape[1]
            w.writerow([f"{p}{j + 1}" for j in range(n) for p in ("re_z", "im_z")] + ["weight"])
            for z, wt in zip(self.nodes, self.weights):
                row = []
                for zj in z:
                    row += [repr(float(zj.real)), repr(float(zj.imag))]
                w.writerow(row + [repr(float(wt))])


def sphere_rule(n_phi: int, n_u: int):
    """Product rule on S^3: Gauss-Legendre in ``u``, trapezoid in both phases.

    Exact for ``theta^a conj(theta)^b`` with ``|a_j - b_j| < n_phi`` and
    ``|a| <= 2 n_u - 1``.  Total weight is ``2 pi^2``.
    """
    x, wx = np.polynomial.legendre.leggauss(n_u)
    u = (x + 1) / 2
    wu = wx / 2
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    wphi = 2 * np.pi / n_phi
    U, P1, P2 = np.meshgrid(u, phi, phi, indexing="ij")
    W = np.broadcast_to(wu[:, None, None] * wphi * wphi / 2, U.shape)
    dirs = np.stack(
        [np.sqrt(1 - U) * np.exp(1j * P1), np.sqrt(U) * np.exp(1j * P2)], axis=-1
    ).reshape(-1, 2)
    return dirs, np.ascontiguousarray(W).reshape(-1)


def rule_sizes(level: int):
    """``(n_phi, n_u, n_r)`` for a refinement level; exact to degree ``4 level``."""
    if level < 1:
        raise ValueError("quadrature level must be >= 1")
    return 4 * level + 1, level + 1, 2 * level + 2


def level_for_degree(N: int, smooth_radial: bool = True) -> int:
    """Quadrature level integrating degree ``2N + 4`` monomials on built-ins."""
    lvl = max(1, math.ceil((2 * N + 4) / 4))
    return lvl if smooth_radial else lvl + 3


def _to_real(z: np.ndarray) -> np.ndarray:
    out = np.empty(z.shape[:-1] + (2 * z.shape[-1],))
    out[..., 0::2] = z.real
    out[..., 1::2] = z.imag
    return out


def _to_complex(x: np.ndarray) -> np.ndarray:
    return x[..., 0::2] + 1j * x[..., 1::2]


# ---------------------------------------------------------------------------
# domains


@dataclass(frozen=True, eq=False)
class Domain:
    """A bounded domain, star-shaped about ``center``.

    ``rho_poly`` is the polynomial defining function (``None`` for the
    polydisc and for offset domains, whose defining functions are evaluated
    numerically).
    """

    kind: str
    center: np.ndarray
    bounding_radius: float
    rho_poly: Optional[Poly] = None
    params: Dict = field(default_factory=dict)
    base: Optional["Domain"] = None
    shift: float = 0.0
    n: int = 2

    # -- identity ----------------------------------------------------------
    @property
    def smooth(self) -> bool:
        return self.kind != "polydisc"

    @property
    def label(self) -> str:
        if self.kind == "offset":
            return f"offset({self.base.label},{self.shift:+.6g})"
        items = ",".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{self.kind}({items})"

    @property
    def diameter(self) -> float:
        return 2.0 * self.bounding_radius

    # -- defining function -------------------------------------------------
    @cached_property
    def _grad_polys(self):
        p = self.rho_poly
        out = []
        for j in range(self.n):
            out += [p.dx(j), p.dy(j)]
        return out

    @cached_property
    def _hess_polys(self):
        g = self._grad_polys
        out = []
        for gi in g:
            row = []
            for j in range(self.n):
                row += [gi.dx(j), gi.dy(j)]
            out.append(row)
        return out

    def rho(self, z) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        if self.rho_poly is not None:
            return self.rho_poly.evaluate(z).real
        if self.kind == "polydisc":
            r = self.params["radius"]
            return np.max(np.abs(z - self.center) ** 2 - r * r, axis=-1) / (2 * r)
        if self.kind == "offset":
            return self.base.signed_distance(z) - self.shift
        raise ValueError(f"no defining function for kind {self.kind}")

    def grad_rho(self, z) -> np.ndarray:
        """Real gradient of the defining function, shape ``(m, 2n)``."""
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        if self.rho_poly is not None:
            return np.stack([g.evaluate(z).real for g in self._grad_polys], axis=-1)
        if self.kind == "offset":
            _, normal = self.base.closest_point(z)
            return normal
        if self.kind == "polydisc":
            r = self.params["radius"]
            w = z - self.center
            j = np.argmax(np.abs(w), axis=-1)
            g = np.zeros(z.shape[:-1] + (2 * self.n,))
            rows = np.arange(len(z))
            g[rows, 2 * j] = w[rows, j].real / r
            g[rows, 2 * j + 1] = w[rows, j].imag / r
            return g
        raise ValueError(f"no gradient for kind {self.kind}")

    def hess_rho(self, z) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        return np.stack(
            [np.stack([h.evaluate(z).real for h in row], axis=-1) for row in self._hess_polys],
            axis=-2,
        )

    def drho_dz(self, z) -> np.ndarray:
        """``d rho / d z_k`` from the real gradient, shape ``(m, n)``."""
        g = self.grad_rho(z)
        return (g[:, 0::2] - 1j * g[:, 1::2]) / 2.0

    def contains(self, z) -> np.ndarray:
        return self.rho(z) < 0

    # -- star parametrisation ---------------------------------------------
    def boundary_radius(self, dirs: np.ndarray) -> np.ndarray:
        """Distance from ``center`` to the boundary along unit directions."""
        dirs = np.atleast_2d(dirs)
        p = self.params
        if self.kind == "ball":
            return np.full(len(dirs), p["radius"])
        if self.kind == "complex_ellipsoid":
            m, r = p["m"], p["radius"]
            a = np.abs(dirs[:, 0]) ** 2
            b = np.abs(dirs[:, 1]) ** (2 * m)
            # solve a s + b s^m = 1 for s = (R/r)^2
            return r * np.sqrt(_solve_power_root(a, b, m))
        if self.kind == "polydisc":
            return p["radius"] / np.max(np.abs(dirs), axis=-1)
        return self._ray_root(dirs)

    def _ray_root(self, dirs: np.ndarray, iters: int = 64) -> np.ndarray:
        if self.kind == "offset":
            return self._offset_ray_root(dirs)
        lo = np.zeros(len(dirs))
        hi = np.full(len(dirs), self.bounding_radius)
        c = self.center[None, :]
        f_hi = self.rho(c + hi[:, None] * dirs)
        if np.any(f_hi <= 0):
            raise ValueError("domain not contained in its bounding ball")
        for _ in range(iters):
            mid = (lo + hi) / 2
            inside = self.rho(c + mid[:, None] * dirs) < 0
            lo = np.where(inside, mid, lo)
            hi = np.where(inside, hi, mid)
        return (lo + hi) / 2

    def _offset_ray_root(self, dirs: np.ndarray) -> np.ndarray:
        # Newton on t -> sd(c + t theta) - shift, using |grad sd| = 1
        base = self.base
        t = base.boundary_radius(dirs) + self.shift
        c = self.center[None, :]
        rd = _to_real(dirs)
        for _ in range(30):
            z = c + t[:, None] * dirs
            p, nrm = base.closest_point(z)
            sd = base.signed_distance(z)
            g = sd - self.shift
            slope = np.maximum(np.sum(nrm * rd, axis=-1), 1e-3)
            t = t - g / slope
            if np.max(np.abs(g)) < 1e-13:
                break
        if np.any(t <= 0):
            raise ValueError("offset boundary does not enclose the star center")
        return t

    def check_star_shaped(self, dirs: np.ndarray, samples: int = 64) -> None:
        """Every sampled ray crosses the boundary exactly once."""
        t = np.linspace(0, self.bounding_radius, samples + 1)[1:]
        pts = self.center[None, None, :] + t[None, :, None] * dirs[:, None, :]
        vals = self.rho(pts.reshape(-1, self.n)).reshape(len(dirs), samples)
        crossings = np.sum(np.diff(np.sign(vals), axis=1) != 0, axis=1)
        bad = np.nonzero(crossings != 1)[0]
        if len(bad):
            raise ValueError(
                f"domain is not star-shaped about its center: ray {dirs[bad[0]]} "
                f"crosses the boundary {int(crossings[bad[0]])} times"
            )

    def boundary_sample(self, n_phi: int = 48, n_u: int = 24) -> np.ndarray:
        dirs, _ = sphere_rule(n_phi, n_u)
        return self.center[None, :] + self.boundary_radius(dirs)[:, None] * dirs

    # -- distance ----------------------------------------------------------
    @cached_property
    def _tree(self):
        pts = self.boundary_sample(64, 32)
        return cKDTree(_to_real(pts)), pts

    def closest_point(self, z) -> tuple:
        """Nearest boundary point and the outward unit normal there.

        Starts from the nearest point of a dense boundary sample and refines
        it with Newton steps on the Lagrange system of the projection.
        """
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        if self.kind == "ball":
            w = z - self.center
            r = np.linalg.norm(w, axis=-1)
            safe = np.where(r > 0, r, 1.0)
            u = np.where((r > 0)[:, None], w / safe[:, None], np.array([1.0, 0.0]))
            p = self.center + self.params["radius"] * u
            return p, _to_real(u)
        if self.kind == "offset":
            p, nrm = self.base.closest_point(z)
            return _to_complex(_to_real(p) + self.shift * nrm), nrm
        if self.rho_poly is None:
            raise ValueError(f"closest point not supported for kind {self.kind}")
        tree, pts = self._tree
        x = _to_real(z)
        _, idx = tree.query(x)
        p = _to_real(pts[idx])
        g = np.stack([gp.evaluate(_to_complex(p)).real for gp in self._grad_polys], -1)
        lam = np.sum((x - p) * g, -1) / np.sum(g * g, -1)
        d = x.shape[-1]
        eye = np.eye(d)
        active = np.arange(len(p))
        for _ in range(16):
            pa, xa, la = p[active], x[active], lam[active]
            pc = _to_complex(pa)
            g = np.stack([gp.evaluate(pc).real for gp in self._grad_polys], -1)
            H = self.hess_rho(pc)
            r1 = pa - xa + la[:, None] * g
            r2 = self.rho(pc)
            J = np.zeros((len(pa), d + 1, d + 1))
            J[:, :d, :d] = eye + la[:, None, None] * H
            J[:, :d, d] = g
            J[:, d, :d] = g
            rhs = -np.concatenate([r1, r2[:, None]], axis=1)
            step = np.linalg.solve(J, rhs[..., None])[..., 0]
            p[active] = pa + step[:, :d]
            lam[active] = la + step[:, d]
            done = np.max(np.abs(step), axis=1) < 1e-13 * max(1.0, self.bounding_radius)
            active = active[~done]
            if not len(active):
                break
        pc = _to_complex(p)
        g = np.stack([gp.evaluate(pc).real for gp in self._grad_polys], -1)
        nrm = g / np.linalg.norm(g, axis=-1, keepdims=True)
        # fall back to the raw sample where Newton drifted off the boundary
        bad = np.abs(self.rho(pc)) > 1e-8
        if np.any(bad):
            pb = pts[idx[bad]]
            pc[bad] = pb
            gb = np.stack([gp.evaluate(pb).real for gp in self._grad_polys], -1)
            nrm[bad] = gb / np.linalg.norm(gb, axis=-1, keepdims=True)
        return pc, nrm

    def signed_distance(self, z) -> np.ndarray:
        """Negative inside, positive outside."""
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        if self.kind == "ball":
            return np.linalg.norm(z - self.center, axis=-1) - self.params["radius"]
        if self.kind == "polydisc":
            r = self.params["radius"]
            a = np.abs(z - self.center)
            outside = np.sqrt(np.sum(np.maximum(a - r, 0) ** 2, axis=-1))
            inside = -np.min(r - a, axis=-1)
            return np.where(np.all(a <= r, axis=-1), inside, outside)
        if self.kind == "offset":
            return self.base.signed_distance(z) - self.shift
        p, _ = self.closest_point(z)
        dist = np.linalg.norm(z - p, axis=-1)
        return np.where(self.rho(z) < 0, -dist, dist)

    # -- curvature -------------------------------------------------------
    @cached_property
    def reach(self) -> float:
        """Reciprocal of the largest principal curvature on a boundary sample."""
        if self.kind == "ball":
            return float(self.params["radius"])
        if self.kind == "offset":
            return max(self.base.reach - abs(self.shift), 0.0) if self.shift < 0 else self.base.reach + self.shift
        if self.kind == "polydisc" or self.rho_poly is None:
            return 0.0
        pts = self.boundary_sample(24, 12)
        g = self.grad_rho(pts)
        gn = np.linalg.norm(g, axis=-1)
        nu = g / gn[:, None]
        P = np.eye(2 * self.n)[None] - nu[:, :, None] * nu[:, None, :]
        S = P @ self.hess_rho(pts) @ P / gn[:, None, None]
        kmax = np.max(np.abs(np.linalg.eigvalsh(S)))
        return float(1.0 / kmax) if kmax > 0 else float("inf")


def _solve_power_root(a: np.ndarray, b: np.ndarray, m: int) -> np.ndarray:
    """Positive root ``s`` of ``a s + b s^m = 1`` (``a, b >= 0``, not both 0)."""
    if m == 1:
        return 1.0 / (a + b)
    if m == 2:
        disc = np.sqrt(a * a + 4 * b)
        # stable form of (-a + disc) / (2 b)
        return 2.0 / (a + disc)
    lo = np.zeros_like(a)
    hi = np.ones_like(a) / np.maximum(np.minimum(a + b, 1.0), 1e-300)
    hi = np.maximum(hi, 1.0)
    for _ in range(80):
        mid = (lo + hi) / 2
        big = a * mid + b * mid**m > 1
        hi = np.where(big, mid, hi)
        lo = np.where(big, lo, mid)
    return (lo + hi) / 2


# ---------------------------------------------------------------------------
# construction


def _center_array(center, n=2) -> np.ndarray:
    if center is None:
        return np.zeros(n, dtype=complex)
    c = np.asarray([complex(x) for x in center], dtype=complex)
    if c.shape != (n,):
        raise ValueError(f"center must have {n} complex entries")
    return c


def _shifted_norm_sq(c: np.ndarray, j: int, n: int) -> Poly:
    w = Poly.z(n, j) - complex(c[j])
    return w * w.conj()


def make_domain(spec) -> Domain:
    """Build a :class:`Domain` from a descriptor (dict or descriptor text).

    Recognised kinds: ``ball`` (``radius``), ``complex_ellipsoid`` (``m``,
    ``radius``), ``polydisc`` (``radius``) and ``custom`` (``rho`` polynomial
    text, ``bounding_radius``).  All accept ``center``.
    """
    if isinstance(spec, str):
        spec = parse_descriptor(spec)
    spec = dict(spec)
    kind = spec.get("kind", "ball")
    if kind in ("ellipsoid", "complex-ellipsoid"):
        kind = "complex_ellipsoid"
    n = 2
    c = _center_array(spec.get("center"), n)
    radius = float(spec.get("radius", 1.0))
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    if kind == "ball":
        rho = (sum((_shifted_norm_sq(c, j, n) for j in range(n)), Poly(n)) - radius**2) * (
            1 / (2 * radius)
        )
        d = Domain("ball", c, radius, rho, {"radius": radius})
    elif kind == "complex_ellipsoid":
        m = spec.get("m", 2)
        if int(m) != float(m) or int(m) < 1:
            raise ValueError(f"exponent m must be a positive integer, got {m}")
        m = int(m)
        w1 = _shifted_norm_sq(c, 0, n) * (1 / radius**2)
        w2 = _shifted_norm_sq(c, 1, n) * (1 / radius**2)
        rho = (w1 + w2**m - 1) * (radius / 2)
        # max |z|^2 on the boundary is 1 + t - t^m at t = m^(-1/(m-1))
        t = m ** (-1.0 / (m - 1)) if m > 1 else 0.0
        br = radius * math.sqrt(1 + t - t**m) if m > 1 else radius
        d = Domain("complex_ellipsoid", c, br, rho, {"m": m, "radius": radius})
    elif kind == "polydisc":
        d = Domain("polydisc", c, radius * math.sqrt(2), None, {"radius": radius})
    elif kind == "custom":
        rho = spec["rho"]
        if isinstance(rho, str):
            rho = parse_poly(rho, n)
        br = float(spec.get("bounding_radius", 2.0))
        if br <= 0:
            raise ValueError("bounding_radius must be positive")
        d = Domain("custom", c, br, rho, {"rho": spec.get("rho") if isinstance(spec.get("rho"), str) else "poly"})
    else:
        raise ValueError(f"unknown domain kind {kind!r}")
    validate_domain(d)
    return d


def validate_domain(d: Domain) -> None:
    if d.rho_poly is not None and not d.rho_poly.is_real():
        raise ValueError("defining function is not real-valued (coefficients not conjugate-symmetric)")
    if d.rho(d.center[None, :])[0] >= 0:
        raise ValueError("defining function must be negative at the center")
    dirs, _ = sphere_rule(9, 4)
    if d.rho_poly is not None:
        rng = np.random.default_rng(0)
        pts = d.center + d.bounding_radius * (rng.standard_normal((32, d.n)) + 1j * rng.standard_normal((32, d.n))) / 3
        vals = d.rho_poly.evaluate(pts)
        if np.max(np.abs(vals.imag)) > 1e-10 * max(1.0, np.max(np.abs(vals.real))):
            raise ValueError("defining function is not real-valued")
    if d.kind in ("custom",):
        d.check_star_shaped(dirs)
    if d.smooth and d.rho_poly is not None:
        pts = d.center + d.boundary_radius(dirs)[:, None] * dirs
        g = np.linalg.norm(d.grad_rho(pts), axis=-1)
        if np.min(g) <= 1e-10:
            raise ValueError("gradient of the defining function vanishes on the boundary")


def ball(radius: float = 1.0, center=None) -> Domain:
    return make_domain({"kind": "ball", "radius": radius, "center": center})


def complex_ellipsoid(m: int = 2, radius: float = 1.0, center=None) -> Domain:
    return make_domain({"kind": "complex_ellipsoid", "m": m, "radius": radius, "center": center})


def dilate(d: Domain, r: float) -> Domain:
    """The image ``center + r (Omega - center)`` for built-in kinds."""
    if d.kind not in ("ball", "complex_ellipsoid", "polydisc"):
        raise ValueError("dilation is only defined for built-in kinds")
    spec = dict(d.params)
    spec["radius"] = d.params["radius"] * r
    spec["kind"] = d.kind
    spec["center"] = list(d.center)
    return make_domain(spec)


def parse_descriptor(text: str) -> dict:
    """Parse ``kind:key=val,...`` shorthand or ``key = value`` lines."""
    text = text.strip()
    out: dict = {}
    if "\n" in text or ("=" in text and ":" not in text.split("=")[0] and "\n" in text):
        lines = text.splitlines()
    elif ":" in text:
        kind, _, rest = text.partition(":")
        out["kind"] = kind.strip()
        lines = [p for p in _split_top(rest)]
    elif "=" in text:
        lines = _split_top(text)
    else:
        return {"kind": text}
    for line in lines:
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        k, sep, v = line.partition("=")
        if not sep:
            raise ValueError(f"malformed descriptor entry {line!r}")
        k, v = k.strip(), v.strip()
        if k == "center":
            out[k] = [complex(x.strip().replace(" ", "")) for x in v.strip("()[]").split(";" if ";" in v else ",")]
        elif k in ("radius", "bounding_radius"):
            out[k] = float(v)
        elif k == "m":
            out[k] = float(v) if "." in v else int(v)
        else:
            out[k] = v
    return out


def _split_top(text: str):
    """Split on commas not inside brackets."""
    parts, depth, cur = [], 0, ""
    for ch in text:
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append(cur)
            cur = ""
        else:
            cur += ch
    if cur:
        parts.append(cur)
    return parts


# ---------------------------------------------------------------------------
# operations


def offset_domain(d: Domain, delta: float) -> Domain:
    """Outer (``delta > 0``) or inner (``delta < 0``) parallel domain."""
    delta = float(delta)
    if delta == 0:
        return d
    if d.kind == "ball":
        r = d.params["radius"] + delta
        if r <= 0:
            raise ValueError(f"offset {delta} collapses the ball")
        return ball(r, d.center)
    if not d.smooth:
        raise ValueError("offsets need a smooth boundary")
    reach = d.reach
    if delta < 0 and abs(delta) >= reach:
        raise ValueError(f"|delta|={abs(delta):.3g} exceeds the reach estimate {reach:.3g}")
    if d.kind == "offset":
        return offset_domain(d.base, d.shift + delta)
    out = Domain(
        "offset", d.center, d.bounding_radius + max(delta, 0.0), None, {"delta": delta}, base=d, shift=delta
    )
    if out.rho(d.center[None, :])[0] >= 0:
        raise ValueError("inner offset does not contain the star center")
    return out


def signed_distance(d: Domain, z) -> np.ndarray:
    """Signed Euclidean distance to the boundary (negative inside)."""
    return d.signed_distance(np.atleast_2d(np.asarray(z, dtype=complex)))


def hausdorff_distance(d1: Domain, d2: Domain, level: int = 1) -> tuple:
    """Sample estimate of ``max(dH(O1, O2), dH(O1^c, O2^c))``.

    Returns ``(estimate, spacing)`` where ``spacing`` is the sampling
    resolution and serves as the error bar.
    """
    if d1.n != d2.n:
        raise ValueError("dimension mismatch")
    if d1.kind == d2.kind == "ball":
        r1, r2 = d1.params["radius"], d2.params["radius"]
        return float(np.linalg.norm(d1.center - d2.center) + abs(r1 - r2)), 0.0
    R = max(d1.bounding_radius, d2.bounding_radius)
    h = R / (8 * level)
    n_phi = max(8, int(math.ceil(2 * math.pi * R / h)))
    n_u = max(4, int(math.ceil((math.pi / 2) * R / h)))
    dirs, _ = sphere_rule(n_phi, n_u)

    t = np.arange(1, int(math.ceil(R / h)) + 1) * h
    same_center = np.allclose(d1.center, d2.center)
    radii = {id(d1): d1.boundary_radius(dirs), id(d2): d2.boundary_radius(dirs)}

    def one_sided(a: Domain, b: Domain):
        Ra, Rb = radii[id(a)], radii[id(b)]
        # sup over a of dist(., b): dist has no interior maxima off b, so the
        # boundary of a suffices
        pa = a.center + Ra[:, None] * dirs
        sd_b = b.signed_distance(pa)
        sup_set = max(0.0, float(np.max(sd_b)))
        # sup over a^c of dist(., b^c) = sup over b minus a of -sd_b;
        # candidates are boundary points of a inside b plus a radial grid of b
        tt = np.minimum(t[None, :], Rb[:, None])
        if same_center:
            keep = tt >= Ra[:, None]
            grid = (b.center + tt[..., None] * dirs[:, None, :])[keep]
        else:
            grid = (b.center + tt[..., None] * dirs[:, None, :]).reshape(-1, a.n)
            grid = grid[a.rho(grid) >= 0]
        cand = np.concatenate([pa[sd_b <= 0], grid])
        sup_comp = 0.0
        if len(cand):
            v = -b.signed_distance(cand)
            sup_comp = max(0.0, float(np.max(v)))
        return sup_set, sup_comp

    s12, c21 = one_sided(d1, d2)
    s21, c12 = one_sided(d2, d1)
    return max(s12, s21, c12, c21), h


def interior_quadrature(d: Domain, level: int) -> QuadratureRule:
    """Radial Gauss-Legendre x S^3 product rule in star coordinates."""
    n_phi, n_u, n_r = rule_sizes(level)
    dirs, wdir = sphere_rule(n_phi, n_u)
    R = d.boundary_radius(dirs)
    if d.kind == "custom":
        d.check_star_shaped(dirs[:: max(1, len(dirs) // 512)])
    x, wx = np.polynomial.legendre.leggauss(n_r)
    s = (x + 1) / 2
    ws = wx / 2
    t = R[:, None] * s[None, :]
    w = wdir[:, None] * ws[None, :] * R[:, None] * t**3
    nodes = d.center + t[..., None] * dirs[:, None, :]
    return QuadratureRule(
        nodes.reshape(-1, d.n), w.reshape(-1), "interior", level, d.bounding_radius / n_r
    )


def boundary_quadrature(d: Domain, level: int) -> QuadratureRule:
    """S^3 rule pushed to the boundary with surface element ``R^3 / (theta . nu)``."""
    if not d.smooth:
        raise ValueError(f"boundary quadrature needs a smooth boundary ({d.kind})")
    n_phi, n_u, _ = rule_sizes(level)
    dirs, wdir = sphere_rule(n_phi, n_u)
    R = d.boundary_radius(dirs)
    nodes = d.center + R[:, None] * dirs
    g = d.grad_rho(nodes)
    gn = np.linalg.norm(g, axis=-1)
    if np.min(gn) < 1e-12:
        raise ValueError("|grad rho| vanishes at a boundary node")
    cosang = np.sum(_to_real(dirs) * g, axis=-1) / gn
    w = wdir * R**3 / cosang
    return QuadratureRule(nodes, w, "boundary", level, d.bounding_radius * 2 * math.pi / n_phi)


def depth_radius(d: Domain, dirs: np.ndarray, depth: float, R: np.ndarray | None = None) -> np.ndarray:
    """Radius along each ray where the signed distance equals ``-depth``.

    Exact for balls; bisection on ``[0, R]`` otherwise (the signed distance
    is increasing along rays near the boundary of a star-shaped domain).
    Rays that never reach that depth return 0.
    """
    if R is None:
        R = d.boundary_radius(dirs)
    if d.kind == "ball":
        return np.maximum(R - depth, 0.0)
    lo = np.zeros_like(R)
    hi = R.copy()
    deep = signed_distance(d, d.center[None, :])[0] <= -depth
    if not deep:
        return np.zeros_like(R)
    for _ in range(40):
        mid = (lo + hi) / 2
        sd = signed_distance(d, d.center + mid[:, None] * dirs)
        below = sd < -depth
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return (lo + hi) / 2


def layer_quadrature(d: Domain, level: int, depth: float, part: str = "collar") -> QuadratureRule:
    """Rule for the collar ``{dist < depth}`` or the inner part ``{dist > depth}``.

    Gauss-Legendre radially on the sub-interval of each ray, so thin collars
    are resolved regardless of ``level``.
    """
    if depth <= 0:
        raise ValueError("layer depth must be positive")
    if part not in ("collar", "inner"):
        raise ValueError("part must be collar or inner")
    n_phi, n_u, n_r = rule_sizes(level)
    dirs, wdir = sphere_rule(n_phi, n_u)
    R = d.boundary_radius(dirs)
    T = depth_radius(d, dirs, depth, R)
    lo, hi = (T, R) if part == "collar" else (np.zeros_like(R), T)
    keep = hi > lo
    if not np.any(keep):
        raise ValueError(f"the {part} of depth {depth} contains no quadrature nodes")
    dirs, wdir, lo, hi = dirs[keep], wdir[keep], lo[keep], hi[keep]
    x, wx = np.polynomial.legendre.leggauss(n_r)
    s = (x + 1) / 2
    t = lo[:, None] + (hi - lo)[:, None] * s[None, :]
    w = wdir[:, None] * (wx / 2)[None, :] * (hi - lo)[:, None] * t**3
    nodes = d.center + t[..., None] * dirs[:, None, :]
    ok = w.reshape(-1) > 0
    return QuadratureRule(nodes.reshape(-1, d.n)[ok], w.reshape(-1)[ok], part, level, float(np.max(hi - lo)) / n_r)
