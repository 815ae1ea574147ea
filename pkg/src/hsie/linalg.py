"""Complex linear-algebra kernel.

Sparse matrices are :class:`scipy.sparse.csr_matrix` with complex entries,
factorizations wrap SuperLU (threshold partial pivoting), and the
shift-and-invert Arnoldi iteration is implemented here on top of that
factorization.  Dense eigenproblems go through LAPACK.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConvergenceError, SingularMatrixError, SingularShiftError

PIVOT_TOL = 1e-13

SparseComplexMatrix = sp.csr_matrix


def as_csr(m) -> sp.csr_matrix:
    """Return ``m`` as a complex CSR matrix with sorted, unique column indices."""
    out = sp.csr_matrix(m, dtype=complex)
    out.sum_duplicates()
    out.sort_indices()
    return out


class LuFactorization:
    """LU factors of a square sparse matrix, ``Pr A Pc = L U``."""

    def __init__(self, m, pivot_tol: float = PIVOT_TOL):
        m = sp.csc_matrix(m, dtype=complex)
        if m.shape[0] != m.shape[1]:
            raise ValueError(f"matrix must be square, got {m.shape}")
        self.shape = m.shape
        scale = abs(m).max() if m.nnz else 0.0
        if scale == 0.0:
            raise SingularMatrixError("zero matrix", pivot=0)
        try:
            self._lu = spla.splu(m, permc_spec="COLAMD", diag_pivot_thresh=1.0)
        except RuntimeError as exc:
            raise SingularMatrixError(
                f"exactly singular pivot ({exc})", pivot=_first_small_pivot(m, pivot_tol)
            ) from exc
        udiag = np.abs(self._lu.U.diagonal())
        bad = np.flatnonzero(udiag <= pivot_tol * scale)
        if bad.size:
            raise SingularMatrixError(
                f"pivot {bad[0]} has magnitude {udiag[bad[0]]:.3e} "
                f"(threshold {pivot_tol:g} relative to {scale:.3e})",
                pivot=int(bad[0]),
            )
        self.perm_r = self._lu.perm_r
        self.perm_c = self._lu.perm_c

    def solve(self, b):
        b = np.asarray(b, dtype=complex)
        return self._lu.solve(b)

    @property
    def nnz(self):
        return self._lu.L.nnz + self._lu.U.nnz


def _first_small_pivot(m, tol):
    # only used to name the pivot in the error message
    if m.shape[0] > 3000:
        return None
    _, _, u = sla.lu(m.toarray())
    d = np.abs(np.diag(u))
    bad = np.flatnonzero(d <= tol * max(d.max(), 1e-300))
    return int(bad[0]) if bad.size else None


def lu_factor(m, pivot_tol: float = PIVOT_TOL) -> LuFactorization:
    return LuFactorization(m, pivot_tol=pivot_tol)


@dataclass
class RitzPair:
    value: complex
    vector: np.ndarray
    residual: float
    converged: bool


def arnoldi_shift_invert(a, b, shift, krylov_dim, n_wanted, tol=1e-8, seed=0):
    """Eigenpairs of the pencil ``a x = lam b x`` closest to ``shift``.

    A single Krylov space of dimension ``krylov_dim`` is built for
    ``(a - shift b)^{-1} b`` with classical Gram-Schmidt applied twice.
    No restarts are performed.

    Returns
    -------
    list of RitzPair
        The ``n_wanted`` Ritz pairs nearest to the shift, ordered by
        distance.  ``residual`` is ``||a v - lam b v|| / ||v||``; pairs whose
        residual exceeds ``tol * (||a|| + |lam| ||b||)`` carry
        ``converged=False`` instead of raising.
    """
    a = as_csr(a)
    b = as_csr(b)
    n = a.shape[0]
    if krylov_dim < n_wanted:
        raise ValueError("krylov_dim must be >= n_wanted")
    krylov_dim = min(krylov_dim, n)
    try:
        lu = lu_factor(a - shift * b)
    except SingularMatrixError as exc:
        raise SingularShiftError(f"shift {shift} hits the spectrum: {exc}", pivot=exc.pivot) from exc

    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    V = np.zeros((n, krylov_dim + 1), dtype=complex)
    H = np.zeros((krylov_dim + 1, krylov_dim), dtype=complex)
    V[:, 0] = v0 / np.linalg.norm(v0)
    m = krylov_dim
    for j in range(krylov_dim):
        w = lu.solve(b @ V[:, j])
        for _ in range(2):
            h = V[:, : j + 1].conj().T @ w
            w -= V[:, : j + 1] @ h
            H[: j + 1, j] += h
        H[j + 1, j] = np.linalg.norm(w)
        if abs(H[j + 1, j]) < 1e-14 * np.abs(H[: j + 1, j]).max():
            m = j + 1
            break
        V[:, j + 1] = w / H[j + 1, j]

    theta, Y = sla.eig(H[:m, :m])
    order = np.argsort(-np.abs(theta))
    norm_a = spla.norm(a, np.inf)
    norm_b = spla.norm(b, np.inf)
    pairs = []
    for i in order[: min(n_wanted, m)]:
        if theta[i] == 0:
            continue
        lam = shift + 1.0 / theta[i]
        x = V[:, :m] @ Y[:, i]
        x /= np.linalg.norm(x)
        res = float(np.linalg.norm(a @ x - lam * (b @ x)))
        pairs.append(RitzPair(complex(lam), x, res, res <= tol * (norm_a + abs(lam) * norm_b)))
    return pairs


def dense_eig(m, vectors=False):
    """All eigenvalues (and optionally right eigenvectors) of a dense matrix."""
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"matrix must be square, got {m.shape}")
    try:
        if vectors:
            return sla.eig(m)
        return sla.eigvals(m)
    except sla.LinAlgError as exc:
        raise ConvergenceError(f"QR iteration failed: {exc}") from exc


def dense_generalized_eig(a, b, vectors=False):
    """Eigenvalues of the dense pencil ``a x = lam b x``."""
    try:
        if vectors:
            return sla.eig(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))
        return sla.eigvals(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))
    except sla.LinAlgError as exc:
        raise ConvergenceError(f"QZ iteration failed: {exc}") from exc


def gauss_legendre(n: int, a: float = -1.0, b: float = 1.0):
    """Gauss-Legendre nodes and weights on ``[a, b]``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (b - a)
    return half * x + 0.5 * (a + b), half * w
