"""Exact calculus of (0,q)-forms with polynomial coefficients.

Multi-indices are strictly increasing tuples of 0-based coordinate indices,
so ``(0,)`` is ``dzbar_1`` and ``(0, 1)`` is ``dzbar_1 ^ dzbar_2``.  The
pointwise inner product treats the ``dzbar_J`` as orthonormal.
"""
from __future__ import annotations

import json
from itertools import combinations
from typing import Dict, List, Mapping, Tuple

import numpy as np

from .poly import Poly

MultiIndex = Tuple[int, ...]

# Sign of the formal adjoint.  Only the fault-injection path of the
# self-test changes it.
_THETA_SIGN = -1.0


def multi_indices(n: int, q: int) -> List[MultiIndex]:
    """Canonical (lexicographic) list of strictly increasing ``q``-tuples."""
    if not 0 <= q <= n:
        raise ValueError(f"degree q={q} outside 0..{n}")
    return list(combinations(range(n), q))


def insert_sign(j: int, K: MultiIndex) -> Tuple[int, MultiIndex]:
    """Return ``(sign, J)`` with ``dzbar_j ^ dzbar_K = sign * dzbar_J``.

    ``sign`` is 0 when ``j`` already occurs in ``K``.
    """
    if j in K:
        return 0, K
    pos = sum(1 for k in K if k < j)
    J = tuple(sorted(K + (j,)))
    return (-1) ** pos, J


class PolyForm:
    """A (0,q)-form ``sum'_J f_J dzbar_J`` on C^n with polynomial coefficients."""

    __slots__ = ("n", "q", "comps")

    def __init__(self, n: int, q: int, comps: Mapping[MultiIndex, Poly] | None = None):
        self.n, self.q = int(n), int(q)
        if not 0 <= self.q <= self.n:
            raise ValueError(f"degree q={q} outside 0..{n}")
        out: Dict[MultiIndex, Poly] = {}
        for J, p in (comps or {}).items():
            J = tuple(J)
            if len(J) != self.q or list(J) != sorted(set(J)) or any(not 0 <= j < n for j in J):
                raise ValueError(f"bad multi-index {J} for (0,{q})-form on C^{n}")
            if not isinstance(p, Poly):
                p = Poly.constant(n, p)
            if p.n != n:
                raise ValueError("coefficient dimension mismatch")
            if not p.is_zero():
                out[J] = out[J] + p if J in out else p
        self.comps = out

    @classmethod
    def zero(cls, n: int, q: int) -> "PolyForm":
        return cls(n, q, {})

    @classmethod
    def function(cls, p: Poly) -> "PolyForm":
        return cls(p.n, 0, {(): p})

    @classmethod
    def basic(cls, n: int, J: MultiIndex, coef: Poly | complex = 1.0) -> "PolyForm":
        """``coef * dzbar_J``."""
        return cls(n, len(J), {tuple(J): coef})

    def component(self, J: MultiIndex) -> Poly:
        return self.comps.get(tuple(J), Poly(self.n))

    def antisym(self, j: int, K: MultiIndex) -> Poly:
        """Antisymmetric extension ``f_{jK}`` for unsorted index ``(j, *K)``."""
        s, J = insert_sign(j, K)
        if s == 0:
            return Poly(self.n)
        return self.component(J) * s

    def __add__(self, other: "PolyForm") -> "PolyForm":
        self._check(other)
        comps = dict(self.comps)
        for J, p in other.comps.items():
            comps[J] = comps[J] + p if J in comps else p
        return PolyForm(self.n, self.q, comps)

    def __neg__(self):
        return PolyForm(self.n, self.q, {J: -p for J, p in self.comps.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, c):
        """Multiply every coefficient by a scalar or a :class:`Poly`."""
        return PolyForm(self.n, self.q, {J: p * c for J, p in self.comps.items()})

    __rmul__ = __mul__

    def __eq__(self, other):
        return (
            isinstance(other, PolyForm)
            and (self.n, self.q) == (other.n, other.q)
            and self.comps == other.comps
        )

    def __repr__(self):
        return f"PolyForm(n={self.n}, q={self.q}, {self.comps})"

    def _check(self, other):
        if (self.n, self.q) != (other.n, other.q):
            raise ValueError("form type mismatch")

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(p.is_zero(tol) for p in self.comps.values())

    @property
    def degree(self) -> int:
        return max((p.degree for p in self.comps.values()), default=0)

    def evaluate(self, points) -> np.ndarray:
        """Coefficient values, shape ``(..., C(n, q))`` in canonical index order."""
        z = np.asarray(points, dtype=complex)
        idx = multi_indices(self.n, self.q)
        out = np.zeros(z.shape[:-1] + (len(idx),), dtype=complex)
        for i, J in enumerate(idx):
            if J in self.comps:
                out[..., i] = self.comps[J].evaluate(z)
        return out

    def norm_squared_at(self, points) -> np.ndarray:
        v = self.evaluate(points)
        return np.sum(np.abs(v) ** 2, axis=-1)

    # serialization ------------------------------------------------------
    def to_json_obj(self) -> dict:
        return {
            "n": self.n,
            "q": self.q,
            "components": [
                {"J": list(J), "terms": p.to_json_obj()} for J, p in sorted(self.comps.items())
            ],
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "PolyForm":
        n = obj["n"]
        return cls(
            n,
            obj["q"],
            {tuple(c["J"]): Poly.from_json_obj(n, c["terms"]) for c in obj["components"]},
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json_obj())

    @classmethod
    def loads(cls, s: str) -> "PolyForm":
        return cls.from_json_obj(json.loads(s))


def dbar(f: PolyForm) -> PolyForm:
    """Cauchy-Riemann operator on (0,q)-forms: sum_l d f_J/d zbar_l dzbar_l ^ dzbar_J."""
    if f.q >= f.n:
        raise ValueError(f"dbar of a (0,{f.q})-form on C^{f.n} is not defined")
    comps: Dict[MultiIndex, Poly] = {}
    for J, p in f.comps.items():
        for l in range(f.n):
            s, L = insert_sign(l, J)
            if s == 0:
                continue
            d = p.dzbar(l)
            if d.is_zero():
                continue
            comps[L] = comps[L] + d * s if L in comps else d * s
    return PolyForm(f.n, f.q + 1, comps)


def theta(f: PolyForm) -> PolyForm:
    """Formal adjoint of dbar: ``-sum'_K sum_j d f_{jK}/d z_j dzbar_K``."""
    if f.q < 1:
        raise ValueError("theta needs q >= 1")
    comps: Dict[MultiIndex, Poly] = {}
    for K in multi_indices(f.n, f.q - 1):
        acc = Poly(f.n)
        for j in range(f.n):
            acc = acc + f.antisym(j, K).dz(j)
        if not acc.is_zero():
            comps[K] = acc * _THETA_SIGN
    return PolyForm(f.n, f.q - 1, comps)


def contract(f: PolyForm, drho: List[Poly]) -> PolyForm:
    """Interior product with ``sum_k drho[k] d/d zbar_k`` (first slot)."""
    if f.q < 1:
        raise ValueError("contraction needs q >= 1")
    comps: Dict[MultiIndex, Poly] = {}
    for K in multi_indices(f.n, f.q - 1):
        acc = Poly(f.n)
        for k in range(f.n):
            acc = acc + f.antisym(k, K) * drho[k]
        if not acc.is_zero(1e-15):
            comps[K] = acc
    return PolyForm(f.n, f.q - 1, comps)


def contract_normal(domain, f: PolyForm) -> PolyForm:
    """``(dbar rho)^* -| f`` with the domain's polynomial defining function."""
    rho = getattr(domain, "rho_poly", domain)
    if rho is None:
        raise ValueError("domain has no polynomial defining function")
    return contract(f, [rho.dz(k) for k in range(f.n)])


def contract_values(values: np.ndarray, n: int, q: int, g: np.ndarray) -> np.ndarray:
    """Pointwise contraction of sampled coefficients with the vector ``g``.

    ``values`` has shape ``(m, C(n,q))``; ``g`` has shape ``(m, n)`` and holds
    the coefficients ``g_k`` of ``sum_k g_k d/d zbar_k``.
    """
    Js = {J: i for i, J in enumerate(multi_indices(n, q))}
    Ks = multi_indices(n, q - 1)
    out = np.zeros(values.shape[:-1] + (len(Ks),), dtype=complex)
    for iK, K in enumerate(Ks):
        for k in range(n):
            s, J = insert_sign(k, K)
            if s:
                out[..., iK] += s * values[..., Js[J]] * g[..., k]
    return out


def wedge_values(w: np.ndarray, values: np.ndarray, n: int, q: int) -> np.ndarray:
    """Pointwise ``w ^ f`` for a (0,1)-covector ``w`` and sampled (0,q)-form."""
    Ks = {K: i for i, K in enumerate(multi_indices(n, q))}
    Js = multi_indices(n, q + 1)
    out = np.zeros(values.shape[:-1] + (len(Js),), dtype=complex)
    for K, iK in Ks.items():
        for k in range(n):
            s, J = insert_sign(k, K)
            if s:
                out[..., Js.index(J)] += s * w[..., k] * values[..., iK]
    return out


def split_normal_tangential(domain, f: PolyForm, z) -> Tuple[np.ndarray, np.ndarray]:
    """Pointwise split ``f = f_tau + f_nu`` at the boundary point ``z``.

    ``f_nu = w ^ (w^* -| f)`` with ``w`` the unit (0,1)-covector along
    ``dbar rho``; this is the orthogonal projection onto the normal part.
    """
    z = np.asarray(z, dtype=complex).reshape(1, -1)
    grad = domain.grad_rho(z)[0]  # real gradient in (x_1, y_1, ...) order
    gnorm = float(np.linalg.norm(grad))
    if gnorm < 1e-8:
        raise ValueError(f"|grad rho| = {gnorm:.3g} too small at split point")
    # d rho / d zbar_k = (rho_x + i rho_y) / 2
    w = (grad[0::2] + 1j * grad[1::2]) / 2.0
    w = w / np.linalg.norm(w)
    vals = f.evaluate(z)
    fN = contract_values(vals, f.n, f.q, np.conj(w)[None, :])
    f_nu = wedge_values(w[None, :], fN, f.n, f.q - 1)
    f_tau = vals - f_nu
    return f_tau[0], f_nu[0]


def complex_hessian(b: Poly) -> List[List[Poly]]:
    """Matrix of ``d^2 b / dz_j dzbar_k``."""
    return [[b.dz(j).dzbar(k) for k in range(b.n)] for j in range(b.n)]


def hessian_action_values(H: np.ndarray, values: np.ndarray, n: int, q: int) -> np.ndarray:
    """``H_q(b)(f)`` from a sampled Hessian ``H`` (``(m, n, n)``) and coefficients."""
    Js = {J: i for i, J in enumerate(multi_indices(n, q))}
    out = np.zeros(values.shape[:-1])
    for K in multi_indices(n, q - 1):
        fk = np.zeros(values.shape[:-1] + (n,), dtype=complex)
        for j in range(n):
            s, J = insert_sign(j, K)
            if s:
                fk[..., j] = s * values[..., Js[J]]
        out += np.real(np.einsum("...jk,...j,...k->...", H, fk, np.conj(fk)))
    return out


def hessian_action(b: Poly, f: PolyForm, z) -> float:
    """Complex Hessian of ``b`` applied to ``f`` at ``z`` (a real number)."""
    if f.q < 1:
        raise ValueError("Hessian action needs q >= 1")
    z = np.asarray(z, dtype=complex).reshape(1, -1)
    H = np.array([[h.evaluate(z)[0] for h in row] for row in complex_hessian(b)])
    return float(hessian_action_values(H[None], f.evaluate(z), f.n, f.q)[0])


def check_green(domain, u: PolyForm, f: PolyForm, interior, boundary) -> dict:
    """Numerically test ``<dbar u, f> - <u, theta f> = bdy`` on ``domain``.

    The boundary pairing is ``int_{bd} <u, (dbar rho)^* -| f> / |grad rho| dS``,
    which follows from the divergence theorem with outward unit normal
    ``grad rho / |grad rho|``.  Returns the two sides and their residual.
    """
    if f.q != u.q + 1 or f.n != u.n:
        raise ValueError("need u of type (0,q) and f of type (0,q+1)")
    zi, wi = interior.nodes, interior.weights
    du = dbar(u).evaluate(zi)
    fv = f.evaluate(zi)
    tf = theta(f).evaluate(zi)
    uv = u.evaluate(zi)
    lhs = np.sum(wi[:, None] * du * np.conj(fv)) - np.sum(wi[:, None] * uv * np.conj(tf))
    zb, wb = boundary.nodes, boundary.weights
    grad = domain.grad_rho(zb)
    gnorm = np.linalg.norm(grad, axis=1)
    drho_dz = (grad[:, 0::2] - 1j * grad[:, 1::2]) / 2.0
    cf = contract_values(f.evaluate(zb), f.n, f.q, drho_dz)
    ub = u.evaluate(zb)
    rhs = np.sum((wb / gnorm)[:, None] * ub * np.conj(cf))
    return {"interior": complex(lhs), "boundary": complex(rhs), "residual": float(abs(lhs - rhs))}
