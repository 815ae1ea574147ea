"""Hardy space infinite elements in the longitudinal direction.

The basis functions are given through their Laplace transforms

    L phi_1(s) = 1 / (s - s0),
    L phi_j(s) = psi_{j-2}(s) / (s - s0),   j >= 2,
    psi_k(s) = (s0 + s1)/(s - s1) * ((s + s0)/(s - s0))**floor((k+1)/2)
                                  * ((s + s1)/(s - s1))**floor(k/2),

so that ``phi_1(0) = 1`` and ``phi_j(0) = 0`` otherwise.  All element
matrices are frequency independent tridiagonal matrices.

Matrix conventions
------------------
``mass[j, k] = int phi_j phi_k``, ``stiffness[j, k] = int phi_j' phi_k'`` and
``drift[j, k] = int phi_j' phi_k`` (derivative on the *first* index), all over
``(0, inf)``.  These are the values of the time-domain integrals; they are
checked against a contour-quadrature evaluation of the Laplace-domain
pairing in the test-suite.  Compared with the closed-form tables usually
quoted for this basis, the mass matrix is half as large and the drift
matrix is the negative transpose (see :func:`printed_long_matrices`).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .curve import PoleParams, gamma_derivative, gamma_point
from .errors import ConvergenceError, SingularMatrixError
from .linalg import gauss_legendre


@dataclass(frozen=True)
class LongitudinalMatrices:
    n: int
    mass: np.ndarray
    drift: np.ndarray
    stiffness: np.ndarray

    def leading(self, m: int) -> "LongitudinalMatrices":
        return LongitudinalMatrices(m, self.mass[:m, :m], self.drift[:m, :m], self.stiffness[:m, :m])


@dataclass(frozen=True)
class HardyBasisSpec:
    params: PoleParams
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")


class PairingKind(enum.Enum):
    MASS = "mass"
    DRIFT = "drift"
    STIFFNESS = "stiffness"


def _tridiag(diag, off):
    return np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)


def _printed_tables(p: PoleParams, n: int):
    s0, s1 = p.s0, p.s1
    dm = np.full(n, s0 + s1, dtype=complex)
    dm[0] = s1
    om = np.array([-s1 if k % 2 == 0 else -s0 for k in range(n - 1)], dtype=complex)
    ds = np.full(n, s0 + s1, dtype=complex)
    ds[0] = s0
    os_ = np.array([s0 if k % 2 == 0 else s1 for k in range(n - 1)], dtype=complex)
    tm = _tridiag(dm, om)
    ts = _tridiag(ds, os_)
    td = np.diag(np.ones(n - 1), 1) - np.diag(np.ones(n - 1), -1)
    td[0, 0] = 1.0
    return tm, ts, td.astype(complex)


def printed_long_matrices(p: PoleParams, n: int) -> LongitudinalMatrices:
    """The closed-form tables as they are commonly quoted for this basis.

    ``M = -1/(s0 s1) T_M``, ``S = -1/2 T_S`` and ``D = 1/2 (e1 e1^T + J)`` with
    ``J`` the skew shift matrix.  Kept for reference and comparison only;
    the solvers use :func:`assemble_long`.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    tm, ts, td = _printed_tables(p, n)
    return LongitudinalMatrices(n, -tm / (p.s0 * p.s1), 0.5 * td, -0.5 * ts)


def assemble_long(p: PoleParams, n: int) -> LongitudinalMatrices:
    """Mass, drift and stiffness matrices of the first ``n`` basis functions."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if p.s0 * p.s1 == 0:
        raise ValueError("s0*s1 must be nonzero")
    tm, ts, _ = _printed_tables(p, n)
    mass = -tm / (2.0 * p.s0 * p.s1)
    stiffness = -0.5 * ts
    drift = 0.5 * (np.diag(np.ones(n - 1), 1) - np.diag(np.ones(n - 1), -1)).astype(complex)
    drift[0, 0] = -0.5
    return LongitudinalMatrices(n, mass, drift, stiffness)


# --- Laplace-domain representation -------------------------------------------------


def _factors(p: PoleParams, j: int):
    """``L phi_j`` as ``const * prod (s - a)^e`` -> (const, {a: e})."""
    s0, s1 = p.s0, p.s1
    fac = {}

    def add(a, e):
        fac[a] = fac.get(a, 0) + e

    add(s0, -1)
    const = 1.0 + 0j
    if j >= 2:
        k = j - 2
        const = s0 + s1
        add(s1, -1)
        e0, e1 = (k + 1) // 2, k // 2
        add(-s0, e0)
        add(s0, -e0)
        add(-s1, e1)
        add(s1, -e1)
    return const, {a: e for a, e in fac.items() if e != 0}


def laplace_basis(p: PoleParams, j: int, s):
    """``L phi_j`` evaluated at ``s``."""
    const, fac = _factors(p, j)
    s = np.asarray(s, dtype=complex)
    out = np.full(s.shape, const, dtype=complex)
    for a, e in fac.items():
        out = out * (s - a) ** e
    return out


def laplace_basis_derivative(p: PoleParams, j: int, s):
    """Laplace transform of ``phi_j'``, i.e. ``s L phi_j(s) - phi_j(0)``."""
    s = np.asarray(s, dtype=complex)
    return s * laplace_basis(p, j, s) - (1.0 if j == 1 else 0.0)


def _binomial_series(c, e, order):
    """Taylor coefficients of ``(c + t)^e`` up to ``t^order``."""
    out = np.zeros(order + 1, dtype=complex)
    out[0] = c**e
    for k in range(1, order + 1):
        out[k] = out[k - 1] * (e - k + 1) / (k * c)
    return out


def partial_fractions(p: PoleParams, j: int):
    """Principal parts of ``L phi_j``: ``{pole: [c_1, ..., c_m]}`` with terms ``c_k / (s - pole)^k``."""
    const, fac = _factors(p, j)
    poles = {a: -e for a, e in fac.items() if e < 0}
    out = {}
    for a, m in poles.items():
        series = np.zeros(m, dtype=complex)
        series[0] = const
        for b, e in fac.items():
            if b == a:
                continue
            series = np.convolve(series, _binomial_series(a - b, e, m - 1))[:m]
        # g(s) = sum series[k] t^k, coefficient of (s-a)^-k is series[m-k]
        out[a] = [series[m - k] for k in range(1, m + 1)]
    return out


def eval_basis(p: PoleParams, j: int, x):
    """Time-domain basis function ``phi_j(x)`` for ``x >= 0`` (exact partial fractions)."""
    if j < 1:
        raise ValueError("basis index starts at 1")
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape, dtype=complex)
    for a, coeffs in partial_fractions(p, j).items():
        poly = np.zeros(x.shape, dtype=complex)
        for k, c in enumerate(coeffs, start=1):
            poly = poly + c * x ** (k - 1) / math.factorial(k - 1)
        out = out + poly * np.exp(a * x)
    return out[()] if out.ndim == 0 else out


def eval_basis_derivative(p: PoleParams, j: int, x):
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape, dtype=complex)
    for a, coeffs in partial_fractions(p, j).items():
        poly = np.zeros(x.shape, dtype=complex)
        dpoly = np.zeros(x.shape, dtype=complex)
        for k, c in enumerate(coeffs, start=1):
            poly = poly + c * x ** (k - 1) / math.factorial(k - 1)
            if k >= 2:
                dpoly = dpoly + c * x ** (k - 2) / math.factorial(k - 2)
        out = out + (a * poly + dpoly) * np.exp(a * x)
    return out[()] if out.ndim == 0 else out


# --- contour-quadrature oracle -----------------------------------------------------


def _contour_integral(p, fun, panels, order):
    # r = tan(theta) maps the real line onto (-pi/2, pi/2); the integrand stays
    # bounded at the ends because it decays like 1/s^2.
    edges = np.linspace(-0.5 * math.pi, 0.5 * math.pi, panels + 1)
    scale = max(abs(p.s0), abs(p.s1))
    tq, wq = gauss_legendre(order)
    total = 0j
    for lo, hi in zip(edges[:-1], edges[1:]):
        th = 0.5 * (hi - lo) * tq + 0.5 * (hi + lo)
        w = 0.5 * (hi - lo) * wq
        r = scale * np.tan(th)
        jac = scale / np.cos(th) ** 2
        s = gamma_point(p, r)
        ds = gamma_derivative(p, r)
        total += np.sum(w * fun(s) * ds * jac)
    return total


def hardy_pairing_oracle(p: PoleParams, j: int, k: int, kind, tol=1e-10, max_level=8):
    """Evaluate ``(-i / 2 pi) int_Gamma F_j(s) G_k(-s) ds`` by quadrature along the curve.

    ``F`` and ``G`` are the Laplace transforms of the basis functions (MASS),
    of the derivative and the function (DRIFT) or of both derivatives
    (STIFFNESS).  The curve is traversed in the direction of increasing
    parameter ``r``.  Panel count and order are doubled until two
    successive estimates agree to ``tol``.
    """
    kind = PairingKind(kind)
    if j < 1 or k < 1:
        raise ValueError("basis indices start at 1")
    f = laplace_basis if kind is PairingKind.MASS else laplace_basis_derivative
    g = laplace_basis_derivative if kind is PairingKind.STIFFNESS else laplace_basis

    def integrand(s):
        return f(p, j, s) * g(p, k, -s)

    panels, order = 16, 16
    prev = _contour_integral(p, integrand, panels, order)
    for _ in range(max_level):
        panels *= 2
        cur = _contour_integral(p, integrand, panels, order)
        if abs(cur - prev) < tol * max(1.0, abs(cur)):
            return complex(-1j / (2 * math.pi) * cur)
        prev = cur
    raise ConvergenceError(
        f"contour quadrature did not converge for ({j}, {k}, {kind.value})",
        iterations=max_level,
        estimate=complex(-1j / (2 * math.pi) * prev),
    )


def oracle_matrix(p: PoleParams, n: int, kind, tol=1e-10):
    return np.array([[hardy_pairing_oracle(p, j, k, kind, tol) for k in range(1, n + 1)] for j in range(1, n + 1)])


# --- 1D convected Helmholtz model problem -------------------------------------------


def convected_1d_matrix(long: LongitudinalMatrices, omega):
    """System matrix of ``-u'' + u' - omega^2 u = 0`` (row = test function)."""
    return long.stiffness + long.drift.T - omega**2 * long.mass


def solve_convected_1d(p: PoleParams, omega, neumann_datum, n: int):
    """Solve the discrete problem with ``u'(0) = neumann_datum``.

    Returns the coefficient vector and the value of the discrete solution
    at ``x = 0`` (the first coefficient, since only ``phi_1`` is nonzero there).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    a = convected_1d_matrix(assemble_long(p, n), omega)
    rhs = np.zeros(n, dtype=complex)
    rhs[0] = -neumann_datum
    lu = sla.lu_factor(a)
    piv = np.abs(np.diag(lu[0]))
    if piv.min() <= 1e-13 * max(piv.max(), 1e-300):
        raise SingularMatrixError(
            f"convected 1D system singular at omega={omega}", pivot=int(np.argmin(piv))
        )
    coeffs = sla.lu_solve(lu, rhs)
    return coeffs, complex(coeffs[0])


def convected_roots(omega):
    """Exponents ``lam`` of the solutions ``exp(lam x)`` of ``-u'' + u' - omega^2 u = 0``."""
    disc = np.sqrt(complex(1 - 4 * omega**2))
    return (1 + disc) / 2, (1 - disc) / 2
