"""Generalized Hermitian eigenproblems and the discrete resolvent.

The pencil ``(A, M)`` is first equilibrated by ``diag(M)^(-1/2)``.  When the
equilibrated mass matrix is well conditioned it is Cholesky-factored; when
it is not, directions of ``M`` with eigenvalue below ``1e-12 * ||M||`` are
discarded and the pencil is solved on the complement.  The reported values
are discrete variational values: min-max values of the Rayleigh quotient
over the trial space.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .parallel import deterministic_blas

COND_LIMIT = 1e12
FILTER_REL = 1e-12
CLAMP_REL = 1e-10


class SolverError(ValueError):
    pass


class SingularOperatorError(SolverError):
    def __init__(self, message: str, smallest: float):
        super().__init__(message)
        self.smallest = smallest


@dataclass
class Spectrum:
    """Ascending discrete variational values with ``M``-orthonormal vectors."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.eigenvalues)

    def to_json(self) -> str:
        obj = {
            "label": "discrete variational values",
            "metadata": self.metadata,
            "values": [float(x) for x in self.eigenvalues],
        }
        return json.dumps(obj, indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "value"])
        for i, lam in enumerate(self.eigenvalues, 1):
            w.writerow([i, repr(float(lam))])
        return buf.getvalue()


def _reduce(M: np.ndarray):
    """Return ``W`` with ``W* M W = I`` on the retained subspace, plus info."""
    d = np.sqrt(np.real(np.diag(M)))
    if np.any(d <= 0):
        raise SolverError("mass matrix has non-positive diagonal")
    Ms = M / d[:, None] / d[None, :]
    Ms = (Ms + Ms.conj().T) / 2
    info = {"filtered": 0}
    try:
        L = sla.cholesky(Ms, lower=True)
        diagL = np.abs(np.diag(L))
        cond_est = (diagL.max() / diagL.min()) ** 2
    except np.linalg.LinAlgError:
        L, cond_est = None, np.inf
    if L is not None and cond_est <= COND_LIMIT:
        W = sla.solve_triangular(L, np.eye(len(M)), lower=True, trans="C")
        W = W / d[:, None]
        info["method"] = "cholesky"
        return W, info
    w, V = np.linalg.eigh(Ms)
    if w[-1] <= 0:
        raise SolverError("mass matrix is not positive definite")
    keep = w > FILTER_REL * w[-1]
    info["method"] = "filtered"
    info["filtered"] = int(np.sum(~keep))
    W = V[:, keep] / np.sqrt(w[keep])[None, :]
    W = W / d[:, None]
    return W, info


def hermitian_gen_eig(A: np.ndarray, M: np.ndarray, k: int | None = None) -> Spectrum:
    A = np.asarray(A, dtype=complex)
    M = np.asarray(M, dtype=complex)
    if A.shape != M.shape or A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise SolverError("A and M must be square matrices of the same size")
    n = A.shape[0]
    if k is None:
        k = n
    if k < 1 or k > n:
        raise SolverError(f"k={k} outside 1..{n}")
    with deterministic_blas():
        W, info = _reduce(M)
        if W.shape[1] < k:
            raise SolverError(f"only {W.shape[1]} directions survive mass filtering, k={k}")
        C = W.conj().T @ A @ W
        C = (C + C.conj().T) / 2
        lam, Y = np.linalg.eigh(C)
        V = W @ Y[:, :k]
    lam = lam[:k].copy()
    scale = max(np.abs(lam).max(initial=0.0), np.linalg.norm(A, 2) if n <= 64 else np.linalg.norm(A))
    lam[np.abs(lam) < CLAMP_REL * scale] = 0.0
    # fix the phase of each eigenvector for reproducible output
    for j in range(V.shape[1]):
        i = np.argmax(np.abs(V[:, j]) > 1e-8 * np.abs(V[:, j]).max())
        V[:, j] *= np.exp(-1j * np.angle(V[i, j]))
    info["n"] = n
    return Spectrum(lam, V, info)


def variational_eigenvalues(sys, k: int) -> Spectrum:
    if k > sys.basis.size:
        raise SolverError(f"k={k} exceeds basis size {sys.basis.size}")
    spec = hermitian_gen_eig(sys.A, sys.M, k)
    spec.metadata.update(
        {
            "sigma": sys.sigma,
            "N": sys.basis.N,
            "q": sys.basis.q,
            "levels": list(sys.levels),
            "domain": sys.domain.label,
        }
    )
    return spec


@dataclass
class ResolventSolution:
    coefficients: np.ndarray
    residual: float
    smallest: float


def smallest_pencil_value(sys) -> float:
    return float(hermitian_gen_eig(sys.A, sys.M, 1).eigenvalues[0])


def apply_inverse(sys, f) -> ResolventSolution:
    """Solve ``(E + sigma B) c = load_vector(f)``."""
    from .discretize import load_vector

    lam0 = smallest_pencil_value(sys)
    if lam0 <= 1e-10:
        raise SingularOperatorError(
            f"operator is singular on the trial space (smallest value {lam0:.3e})", lam0
        )
    b = np.asarray(load_vector(f, sys.basis, sys.interior))
    if not np.any(b):
        return ResolventSolution(np.zeros_like(b), 0.0, lam0)
    A = sys.A
    with deterministic_blas():
        d = np.sqrt(np.real(np.diag(A)))
        As = A / d[:, None] / d[None, :]
        As = (As + As.conj().T) / 2
        try:
            cf = sla.cho_factor(As, lower=True)
            c = sla.cho_solve(cf, b / d) / d
        except np.linalg.LinAlgError:
            c = resolvent_by_expansion(sys, b)
    res = float(np.linalg.norm(A @ c - b) / np.linalg.norm(b))
    return ResolventSolution(c, res, lam0)


def resolvent_by_expansion(sys, b: np.ndarray) -> np.ndarray:
    """``sum_i <b, v_i> v_i / lambda_i`` over the full pencil spectrum."""
    spec = hermitian_gen_eig(sys.A, sys.M, None)
    V, lam = spec.eigenvectors, spec.eigenvalues
    if np.any(lam <= 0):
        raise SingularOperatorError("operator has a kernel on the trial space", float(lam.min()))
    return V @ ((V.conj().T @ b) / lam)
