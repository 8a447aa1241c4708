"""Polynomials in z and conj(z) with complex coefficients.

A :class:`Poly` stores a sparse map ``(a, b) -> c`` standing for the term
``c * z**a * conj(z)**b`` where ``a`` and ``b`` are exponent tuples of
length ``n``.  Differentiation is exact; only integrals are numerical.
"""
from __future__ import annotations

import json
from typing import Dict, Iterable, Mapping, Tuple

import numpy as np

Exponent = Tuple[int, ...]
Key = Tuple[Exponent, Exponent]


def _unit(n: int, j: int) -> Exponent:
    return tuple(1 if i == j else 0 for i in range(n))


def _add_exp(a: Exponent, b: Exponent) -> Exponent:
    return tuple(x + y for x, y in zip(a, b))


class Poly:
    """Sparse polynomial in ``z_1..z_n`` and their conjugates."""

    __slots__ = ("n", "terms")

    def __init__(self, n: int, terms: Mapping[Key, complex] | None = None):
        self.n = int(n)
        clean: Dict[Key, complex] = {}
        for (a, b), c in (terms or {}).items():
            a, b = tuple(int(x) for x in a), tuple(int(x) for x in b)
            if len(a) != n or len(b) != n:
                raise ValueError(f"exponent length mismatch for n={n}: {a}, {b}")
            if min(a + b, default=0) < 0:
                raise ValueError("negative exponent")
            c = complex(c)
            if c != 0:
                clean[(a, b)] = clean.get((a, b), 0) + c
        self.terms = {k: v for k, v in clean.items() if v != 0}

    # constructors -------------------------------------------------------
    @classmethod
    def constant(cls, n: int, c: complex = 1.0) -> "Poly":
        zero = (0,) * n
        return cls(n, {(zero, zero): c})

    @classmethod
    def z(cls, n: int, j: int) -> "Poly":
        """The coordinate ``z_j`` (0-based ``j``)."""
        return cls(n, {(_unit(n, j), (0,) * n): 1.0})

    @classmethod
    def zbar(cls, n: int, j: int) -> "Poly":
        return cls(n, {((0,) * n, _unit(n, j)): 1.0})

    @classmethod
    def monomial(cls, a: Exponent, b: Exponent, c: complex = 1.0) -> "Poly":
        return cls(len(a), {(tuple(a), tuple(b)): c})

    @classmethod
    def norm_squared(cls, n: int) -> "Poly":
        """``|z|^2``."""
        return sum((cls.z(n, j) * cls.zbar(n, j) for j in range(n)), cls(n))

    # arithmetic ---------------------------------------------------------
    def _check(self, other: "Poly") -> None:
        if other.n != self.n:
            raise ValueError("dimension mismatch")

    def __add__(self, other):
        if not isinstance(other, Poly):
            other = Poly.constant(self.n, other)
        self._check(other)
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, 0) + v
        return Poly(self.n, out)

    __radd__ = __add__

    def __neg__(self):
        return Poly(self.n, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-other if isinstance(other, Poly) else -complex(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Poly):
            c = complex(other)
            return Poly(self.n, {k: v * c for k, v in self.terms.items()})
        self._check(other)
        out: Dict[Key, complex] = {}
        for (a1, b1), c1 in self.terms.items():
            for (a2, b2), c2 in other.terms.items():
                k = (_add_exp(a1, a2), _add_exp(b1, b2))
                out[k] = out.get(k, 0) + c1 * c2
        return Poly(self.n, out)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out = Poly.constant(self.n)
        for _ in range(int(k)):
            out = out * self
        return out

    def __eq__(self, other):
        return isinstance(other, Poly) and self.n == other.n and self.terms == other.terms

    def __hash__(self):
        return hash((self.n, tuple(sorted(self.terms.items(), key=lambda kv: kv[0]))))

    def __repr__(self):
        if not self.terms:
            return "Poly(0)"
        parts = [f"({c:.6g})z^{a}zb^{b}" for (a, b), c in sorted(self.terms.items())]
        return "Poly(" + " + ".join(parts) + ")"

    # calculus -----------------------------------------------------------
    def dz(self, j: int) -> "Poly":
        """Exact derivative with respect to ``z_j``."""
        out = {}
        for (a, b), c in self.terms.items():
            if a[j]:
                a2 = tuple(x - (i == j) for i, x in enumerate(a))
                out[(a2, b)] = out.get((a2, b), 0) + c * a[j]
        return Poly(self.n, out)

    def dzbar(self, j: int) -> "Poly":
        """Exact derivative with respect to ``conj(z_j)``."""
        out = {}
        for (a, b), c in self.terms.items():
            if b[j]:
                b2 = tuple(x - (i == j) for i, x in enumerate(b))
                out[(a, b2)] = out.get((a, b2), 0) + c * b[j]
        return Poly(self.n, out)

    def conj(self) -> "Poly":
        return Poly(self.n, {(b, a): np.conj(c) for (a, b), c in self.terms.items()})

    def dx(self, j: int) -> "Poly":
        """Real partial derivative along ``Re z_j``."""
        return self.dz(j) + self.dzbar(j)

    def dy(self, j: int) -> "Poly":
        """Real partial derivative along ``Im z_j``."""
        return (self.dz(j) - self.dzbar(j)) * 1j

    # queries ------------------------------------------------------------
    @property
    def degree(self) -> int:
        return max((sum(a) + sum(b) for a, b in self.terms), default=0)

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(abs(c) <= tol for c in self.terms.values())

    def is_real(self, tol: float = 1e-12) -> bool:
        """Conjugate symmetry of coefficients, ``c_{a,b} == conj(c_{b,a})``."""
        for (a, b), c in self.terms.items():
            if abs(c - np.conj(self.terms.get((b, a), 0))) > tol * max(1.0, abs(c)):
                return False
        return True

    def __call__(self, points) -> np.ndarray:
        return self.evaluate(points)

    def evaluate(self, points) -> np.ndarray:
        """Evaluate at ``points`` (shape ``(..., n)`` complex)."""
        z = np.asarray(points, dtype=complex)
        if z.shape[-1] != self.n:
            raise ValueError(f"points must have last axis {self.n}")
        flat = z.reshape(-1, self.n)
        if not self.terms:
            return np.zeros(z.shape[:-1], dtype=complex)
        keys = list(self.terms)
        A = np.array([k[0] for k in keys], dtype=np.intp)
        B = np.array([k[1] for k in keys], dtype=np.intp)
        c = np.array([self.terms[k] for k in keys], dtype=complex)
        return eval_monomials(flat, A, B, c).reshape(z.shape[:-1])

    # serialization ------------------------------------------------------
    def to_json_obj(self) -> list:
        return [
            {"a": list(a), "b": list(b), "c": [float(np.real(c)), float(np.imag(c))]}
            for (a, b), c in sorted(self.terms.items())
        ]

    @classmethod
    def from_json_obj(cls, n: int, obj: Iterable[dict]) -> "Poly":
        return cls(n, {(tuple(t["a"]), tuple(t["b"])): complex(*t["c"]) for t in obj})

    def dumps(self) -> str:
        return json.dumps({"n": self.n, "terms": self.to_json_obj()})

    @classmethod
    def loads(cls, s: str) -> "Poly":
        d = json.loads(s)
        return cls.from_json_obj(d["n"], d["terms"])


def parse_poly(text: str, n: int = 2) -> Poly:
    """Parse a polynomial written in ``z1, z2, zb1, zb2`` (``zb`` = conjugate).

    Supports ``+ - *``, integer powers ``**`` and parentheses, plus ``I`` or
    ``1j`` for the imaginary unit.  Used by descriptor and certificate files.
    """
    import ast

    tree = ast.parse(text.replace("^", "**"), mode="eval")

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float, complex)):
            return Poly.constant(n, node.value)
        if isinstance(node, ast.Name):
            name = node.id
            if name == "I":
                return Poly.constant(n, 1j)
            if name.startswith("zb") and name[2:].isdigit():
                return Poly.zbar(n, int(name[2:]) - 1)
            if name.startswith("z") and name[1:].isdigit():
                return Poly.z(n, int(name[1:]) - 1)
            raise ValueError(f"unknown symbol {name!r}")
        if isinstance(node, ast.BinOp):
            left = ev(node.left)
            if isinstance(node.op, ast.Pow):
                if not (isinstance(node.right, ast.Constant) and isinstance(node.right.value, int)):
                    raise ValueError("only integer powers are supported")
                return left ** node.right.value
            right = ev(node.right)
            if isinstance(node.op, ast.Add):
                return left + right
            if isinstance(node.op, ast.Sub):
                return left - right
            if isinstance(node.op, ast.Mult):
                return left * right
            if isinstance(node.op, ast.Div):
                if right.degree != 0:
                    raise ValueError("division only by constants")
                return left * (1.0 / right.terms.get(((0,) * n, (0,) * n), 0))
        if isinstance(node, ast.UnaryOp):
            v = ev(node.operand)
            if isinstance(node.op, ast.USub):
                return -v
            if isinstance(node.op, ast.UAdd):
                return v
        raise ValueError(f"unsupported expression: {ast.dump(node)}")

    return ev(tree)


def power_tables(z: np.ndarray, deg: int):
    """``zp[k] = z**k`` and ``zcp[k] = conj(z)**k`` for ``k <= deg``."""
    zp = np.empty((deg + 1,) + z.shape, dtype=complex)
    zp[0] = 1.0
    for k in range(1, deg + 1):
        zp[k] = zp[k - 1] * z
    return zp, np.conj(zp)


def eval_monomials(z: np.ndarray, A: np.ndarray, B: np.ndarray, coef=None, chunk: int = 4096):
    """Monomials ``z^A conj(z)^B`` at points ``z`` (``(m, n)``).

    With ``coef`` (one per monomial, or a matrix ``(T, r)``) returns the
    combinations ``(m,)`` or ``(m, r)``; otherwise the ``(m, T)`` table.
    """
    m, n = z.shape
    T = len(A)
    deg = int(max(A.max(initial=0), B.max(initial=0)))
    if coef is None:
        out = np.empty((m, T), dtype=complex)
    else:
        coef = np.asarray(coef, dtype=complex)
        out = np.zeros((m,) + coef.shape[1:], dtype=complex)
    for s in range(0, m, chunk):
        zc = z[s : s + chunk]
        zp, zcp = power_tables(zc, deg)
        V = np.ones((len(zc), T), dtype=complex)
        for j in range(n):
            V *= zp[A[:, j], :, j].T
            V *= zcp[B[:, j], :, j].T
        if coef is None:
            out[s : s + chunk] = V
        else:
            out[s : s + chunk] = V @ coef
    return out
