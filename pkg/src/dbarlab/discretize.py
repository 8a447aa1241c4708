"""Polynomial Galerkin trial spaces and matrix assembly.

Every trial form is a monomial ``z^a conj(z)^b dzbar_J``.  The mass, energy
and penalty matrices are therefore sesquilinear combinations of moments
``int z^alpha conj(z)^beta`` (interior) and ``int g_k conj(g_l) z^alpha
conj(z)^beta dS`` (boundary, ``g`` the unit-normalised ``d rho / dz``).
The moments come from the quadrature rules; the combinatorics of dbar,
theta and the contraction are exact.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from itertools import product
from typing import List, Optional

import numpy as np
import scipy.linalg as sla

from . import forms
from .forms import PolyForm, insert_sign, multi_indices
from .geometry import Domain, QuadratureRule, boundary_quadrature, interior_quadrature, level_for_degree
from .parallel import deterministic_blas, ordered_map
from .poly import Poly, eval_monomials

CHUNK = 2048


class AssemblyError(ValueError):
    pass


# ---------------------------------------------------------------------------
# basis


@dataclass(frozen=True, eq=False)
class BasisDescriptor:
    """Monomials of total degree ``<= N`` times every ``dzbar_J``, ``|J| = q``.

    Element ``i`` is monomial ``i // ncomp`` with multi-index ``i % ncomp``.
    """

    n: int
    q: int
    N: int
    a: np.ndarray  # (n_mono, n) exponents of z
    b: np.ndarray  # (n_mono, n) exponents of conj(z)
    Js: List[tuple] = field(default_factory=list)

    @property
    def ncomp(self) -> int:
        return len(self.Js)

    @property
    def n_mono(self) -> int:
        return len(self.a)

    @property
    def size(self) -> int:
        return self.n_mono * self.ncomp

    def __len__(self):
        return self.size

    def element(self, i: int) -> tuple:
        m, j = divmod(i, self.ncomp)
        return tuple(self.a[m]), tuple(self.b[m]), self.Js[j]

    def element_form(self, i: int) -> PolyForm:
        a, b, J = self.element(i)
        return PolyForm.basic(self.n, J, Poly.monomial(a, b))

    def to_polyform(self, c: np.ndarray) -> PolyForm:
        c = np.asarray(c).reshape(self.n_mono, self.ncomp)
        comps = {}
        for j, J in enumerate(self.Js):
            terms = {
                (tuple(self.a[m]), tuple(self.b[m])): c[m, j]
                for m in range(self.n_mono)
                if c[m, j] != 0
            }
            comps[J] = Poly(self.n, terms)
        return PolyForm(self.n, self.q, comps)

    def evaluate(self, c: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Coefficients of ``sum_i c_i e_i`` at points, shape ``(m, ncomp)``."""
        C = np.asarray(c, dtype=complex).reshape(self.n_mono, self.ncomp)
        return eval_monomials(np.atleast_2d(points), self.a, self.b, C)


def monomial_exponents(n: int, N: int):
    """Exponent pairs with ``|a| + |b| <= N`` in graded lexicographic order."""
    keys = []
    for e in product(range(N + 1), repeat=2 * n):
        if sum(e) <= N:
            keys.append((sum(e), e))
    keys.sort()
    arr = np.array([e for _, e in keys], dtype=np.intp).reshape(-1, 2 * n)
    return arr[:, :n], arr[:, n:]


def build_basis(n: int, q: int, N: int) -> BasisDescriptor:
    if not 1 <= q <= n:
        raise ValueError(f"form degree q={q} must lie in 1..{n}")
    if N < 0:
        raise ValueError("degree bound N must be >= 0")
    a, b = monomial_exponents(n, N)
    return BasisDescriptor(n, q, N, a, b, multi_indices(n, q))


# ---------------------------------------------------------------------------
# moments


def moment_table(nodes: np.ndarray, weights: np.ndarray, D: int) -> np.ndarray:
    """``T[a1, b1, a2, b2] = sum_nodes w z1^a1 zb1^b1 z2^a2 zb2^b2`` (n = 2).

    Node chunks are fixed, so the reduction order does not depend on the
    worker count.
    """
    if nodes.shape[1] != 2:
        raise NotImplementedError("moment tables are implemented for C^2")
    pairs = [(i, k - i) for k in range(D + 1) for i in range(k + 1)]
    pa = np.array([p[0] for p in pairs], dtype=np.intp)
    pb = np.array([p[1] for p in pairs], dtype=np.intp)
    weights = np.asarray(weights, dtype=complex)

    def chunk(s):
        z = nodes[s : s + CHUNK]
        w = weights[s : s + CHUNK]
        zp = np.empty((D + 1, len(z), 2), dtype=complex)
        zp[0] = 1.0
        for k in range(1, D + 1):
            zp[k] = zp[k - 1] * z
        zc = np.conj(zp)
        X1 = zp[pa, :, 0] * zc[pb, :, 0]  # (P, m)
        X2 = zp[pa, :, 1] * zc[pb, :, 1]
        return (X1 * w[None, :]) @ X2.T

    parts = ordered_map(chunk, range(0, len(nodes), CHUNK))
    S = parts[0].copy()
    for p in parts[1:]:
        S += p
    T = np.zeros((D + 1,) * 4, dtype=complex)
    T[pa[:, None], pb[:, None], pa[None, :], pb[None, :]] = S
    return T


def _boundary_tables(d: Domain, rule: QuadratureRule, D: int) -> np.ndarray:
    g = d.drho_dz(rule.nodes)
    g = g / np.linalg.norm(d.grad_rho(rule.nodes), axis=-1)[:, None]
    n = d.n
    out = np.zeros((n, n) + (D + 1,) * 4, dtype=complex)
    for k in range(n):
        for l in range(n):
            out[k, l] = moment_table(rule.nodes, rule.weights * g[:, k] * np.conj(g[:, l]), D)
    return out


# ---------------------------------------------------------------------------
# slot expansions: each basis element maps to a few monomial forms


def _slots_identity(B: BasisDescriptor):
    nb = B.size
    m_idx = np.arange(nb) // B.ncomp
    j_idx = np.arange(nb) % B.ncomp
    return (
        np.ones((nb, 1), dtype=complex),
        B.a[m_idx][:, None, :],
        B.b[m_idx][:, None, :],
        j_idx[:, None],
        np.zeros((nb, 1), dtype=np.intp),
    )


def _slots_dbar(B: BasisDescriptor):
    n, nb = B.n, B.size
    targets = {J: i for i, J in enumerate(multi_indices(n, B.q + 1))}
    c = np.zeros((nb, n), dtype=complex)
    a = np.zeros((nb, n, n), dtype=np.intp)
    b = np.zeros((nb, n, n), dtype=np.intp)
    L = np.full((nb, n), -1, dtype=np.intp)
    for i in range(nb):
        ai, bi, J = B.element(i)
        for l in range(n):
            s, T = insert_sign(l, J)
            if s == 0 or bi[l] == 0:
                continue
            c[i, l] = s * bi[l]
            a[i, l] = ai
            b[i, l] = bi
            b[i, l, l] -= 1
            L[i, l] = targets[T]
    return c, a, b, L, np.zeros_like(L)


def _slots_theta(B: BasisDescriptor):
    n, nb, q = B.n, B.size, B.q
    targets = {K: i for i, K in enumerate(multi_indices(n, q - 1))}
    c = np.zeros((nb, q), dtype=complex)
    a = np.zeros((nb, q, n), dtype=np.intp)
    b = np.zeros((nb, q, n), dtype=np.intp)
    L = np.full((nb, q), -1, dtype=np.intp)
    for i in range(nb):
        ai, bi, J = B.element(i)
        for t, j in enumerate(J):
            K = tuple(x for x in J if x != j)
            s, _ = insert_sign(j, K)
            if ai[j] == 0:
                continue
            c[i, t] = forms._THETA_SIGN * s * ai[j]
            a[i, t] = ai
            a[i, t, j] -= 1
            b[i, t] = bi
            L[i, t] = targets[K]
    return c, a, b, L, np.zeros_like(L)


def _slots_contract(B: BasisDescriptor):
    n, nb, q = B.n, B.size, B.q
    targets = {K: i for i, K in enumerate(multi_indices(n, q - 1))}
    c = np.zeros((nb, q), dtype=complex)
    a = np.zeros((nb, q, n), dtype=np.intp)
    b = np.zeros((nb, q, n), dtype=np.intp)
    L = np.full((nb, q), -1, dtype=np.intp)
    G = np.zeros((nb, q), dtype=np.intp)
    for i in range(nb):
        ai, bi, J = B.element(i)
        for t, k in enumerate(J):
            K = tuple(x for x in J if x != k)
            s, _ = insert_sign(k, K)
            c[i, t] = s
            a[i, t] = ai
            b[i, t] = bi
            L[i, t] = targets[K]
            G[i, t] = k
    return c, a, b, L, G


def _slot_gram(table: np.ndarray, slots, weighted: bool = False) -> np.ndarray:
    """``out[i, j] = <sum_t c_jt phi_jt, sum_s c_is phi_is>`` from moments.

    With ``weighted`` the table carries two leading axes ``(k_j, k_i)``
    selecting the boundary weight ``g_{k_j} conj(g_{k_i})``.
    """
    c, a, b, L, G = slots
    nb, S = c.shape
    out = np.zeros((nb, nb), dtype=complex)
    for s in range(S):
        for t in range(S):
            ci, cj = c[:, s], c[:, t]
            if not (np.any(ci) and np.any(cj)):
                continue
            mask = (L[:, s][:, None] == L[:, t][None, :]) & (L[:, s][:, None] >= 0)
            alpha = a[None, :, t, :] + b[:, None, s, :]
            beta = b[None, :, t, :] + a[:, None, s, :]
            idx = (alpha[..., 0], beta[..., 0], alpha[..., 1], beta[..., 1])
            if weighted:
                vals = table[(G[None, :, t], G[:, None, s]) + idx]
            else:
                vals = table[idx]
            out += np.where(mask, np.conj(ci)[:, None] * cj[None, :] * vals, 0)
    return out


def _hermitian(X: np.ndarray) -> np.ndarray:
    return (X + X.conj().T) / 2


# ---------------------------------------------------------------------------
# system


@dataclass(frozen=True, eq=False)
class GalerkinSystem:
    """Mass ``M``, energy ``E`` and penalty ``B`` matrices; ``A = E + sigma B``."""

    basis: BasisDescriptor
    M: np.ndarray
    E: np.ndarray
    B: np.ndarray
    sigma: float
    domain: Domain
    levels: tuple
    interior: QuadratureRule
    boundary: Optional[QuadratureRule] = None

    @property
    def A(self) -> np.ndarray:
        if self.sigma == 0:
            return self.E.copy()
        return self.E + self.sigma * self.B

    def with_sigma(self, sigma: float) -> "GalerkinSystem":
        if sigma < 0:
            raise ValueError("penalty weight must be >= 0")
        return replace(self, sigma=float(sigma))

    def quadratic_form(self, c: np.ndarray) -> float:
        c = np.asarray(c)
        return float(np.real(np.conj(c) @ self.A @ c))

    def norm_squared(self, c: np.ndarray) -> float:
        c = np.asarray(c)
        return float(np.real(np.conj(c) @ self.M @ c))

    # export ------------------------------------------------------------
    def to_csv(self, prefix: str) -> List[str]:
        """Dense CSV per matrix, real and imaginary parts interleaved per entry."""
        paths = []
        for name in ("M", "E", "B"):
            X = getattr(self, name)
            inter = np.empty((X.shape[0], 2 * X.shape[1]))
            inter[:, 0::2] = X.real
            inter[:, 1::2] = X.imag
            path = f"{prefix}{name}.csv"
            np.savetxt(path, inter, delimiter=",", fmt="%.17g")
            paths.append(path)
        return paths

    def to_binary(self, path: str) -> None:
        write_binary(path, self.basis, self.M, self.E, self.B)


BINARY_MAGIC = b"DBLB"


def write_binary(path: str, basis: BasisDescriptor, *mats: np.ndarray) -> None:
    """Header ``magic, n, q, N, size, count`` (little-endian int64) then the
    matrices row-major with float64 real/imag pairs."""
    with open(path, "wb") as fh:
        fh.write(BINARY_MAGIC)
        fh.write(struct.pack("<6q", basis.n, basis.q, basis.N, basis.size, basis.size, len(mats)))
        for X in mats:
            arr = np.empty(X.shape + (2,), dtype="<f8")
            arr[..., 0] = X.real
            arr[..., 1] = X.imag
            fh.write(arr.tobytes(order="C"))


def read_binary(path: str):
    with open(path, "rb") as fh:
        if fh.read(4) != BINARY_MAGIC:
            raise ValueError("not a dbarlab matrix file")
        n, q, N, rows, cols, count = struct.unpack("<6q", fh.read(48))
        mats = []
        for _ in range(count):
            raw = np.frombuffer(fh.read(rows * cols * 16), dtype="<f8").reshape(rows, cols, 2)
            mats.append(raw[..., 0] + 1j * raw[..., 1])
    return {"n": n, "q": q, "N": N}, mats


def default_sigma(d: Domain) -> float:
    return 100.0 / d.diameter


def assemble(
    d: Domain,
    basis: BasisDescriptor,
    q_int: QuadratureRule,
    q_bdy: Optional[QuadratureRule],
    sigma: float,
) -> GalerkinSystem:
    if sigma < 0:
        raise ValueError("penalty weight must be >= 0")
    if d.n != basis.n:
        raise ValueError("basis and domain dimensions differ")
    if q_bdy is None and (d.smooth or basis.q != basis.n):
        raise ValueError("a boundary rule is required unless the penalty is disabled (polydisc, q = n)")
    D = max(2 * basis.N, 1)
    with deterministic_blas():
        T = moment_table(q_int.nodes, q_int.weights, D)
        M = _hermitian(_slot_gram(T, _slots_identity(basis)))
        E = np.zeros_like(M)
        if basis.q < basis.n:
            E += _slot_gram(T, _slots_dbar(basis))
        E += _slot_gram(T, _slots_theta(basis))
        E = _hermitian(E)
        if q_bdy is not None:
            Tb = _boundary_tables(d, q_bdy, D)
            Bm = _hermitian(_slot_gram(Tb, _slots_contract(basis), weighted=True))
        else:
            Bm = np.zeros_like(M)
        dm = np.sqrt(np.real(np.diag(M)))
        if np.any(dm <= 0):
            raise AssemblyError("mass matrix has a non-positive diagonal entry")
        Ms = M / dm[:, None] / dm[None, :]
        try:
            sla.cholesky(Ms, lower=True)
        except np.linalg.LinAlgError:
            ev = np.linalg.eigvalsh(Ms)
            cond = ev[-1] / ev[0] if ev[0] > 0 else float("inf")
            raise AssemblyError(
                f"mass matrix is not positive definite (condition number {cond:.3e}); "
                "quadrature too coarse for the basis"
            ) from None
    levels = (q_int.level, q_bdy.level if q_bdy is not None else None)
    return GalerkinSystem(basis, M, E, Bm, float(sigma), d, levels, q_int, q_bdy)


def build_system(d: Domain, q: int, N: int, sigma: float | None = None, level: int | None = None):
    """Basis, quadratures and assembly with the default level for ``N``."""
    basis = build_basis(d.n, q, N)
    if level is None:
        level = level_for_degree(N, smooth_radial=d.kind == "ball")
    qi = interior_quadrature(d, level)
    qb = boundary_quadrature(d, level) if d.smooth else None
    if sigma is None:
        sigma = default_sigma(d)
    return assemble(d, basis, qi, qb, sigma)


class LoadVector(np.ndarray):
    """Complex vector ``<f, e_i>`` carrying an ``underintegrated`` flag."""

    underintegrated: bool = False


def load_vector(f: PolyForm, basis: BasisDescriptor, q_int: QuadratureRule) -> LoadVector:
    if (f.n, f.q) != (basis.n, basis.q):
        raise ValueError("form type does not match the basis")
    degf = f.degree
    D = max(basis.N + degf, 1)
    out = np.zeros(basis.size, dtype=complex)
    if not f.is_zero():
        with deterministic_blas():
            T = moment_table(q_int.nodes, q_int.weights, D)
        mi = np.arange(basis.size) // basis.ncomp
        ji = np.arange(basis.size) % basis.ncomp
        ai, bi = basis.a[mi], basis.b[mi]
        for J, p in f.comps.items():
            jJ = basis.Js.index(J)
            sel = ji == jJ
            for (al, be), coef in p.terms.items():
                alpha = np.asarray(al)[None, :] + bi[sel]
                beta = np.asarray(be)[None, :] + ai[sel]
                out[sel] += coef * T[alpha[:, 0], beta[:, 0], alpha[:, 1], beta[:, 1]]
    v = out.view(LoadVector)
    v.underintegrated = D > 4 * q_int.level
    return v
