"""Rayleigh-Lamb dispersion relations for a traction-free strip ``|eta| < R``.

With ``alpha^2 = omega^2/c_L^2 - kappa^2`` and ``beta^2 = omega^2/c_T^2 - kappa^2``
the relations read

    F_S = 4 kappa^2 alpha beta sin(alpha R) cos(beta R) + (kappa^2 - beta^2)^2 cos(alpha R) sin(beta R)
    F_A = 4 kappa^2 alpha beta cos(alpha R) sin(beta R) + (kappa^2 - beta^2)^2 sin(alpha R) cos(beta R).

``F_S`` is odd in ``beta`` and ``F_A`` is odd in ``alpha``, so both depend on
the square-root branch.  Root finding therefore uses the normalized forms
``F_S / beta`` and ``F_A / alpha``, which are entire functions of
``alpha^2``, ``beta^2`` and ``kappa^2`` and have the same roots apart from
the spurious zeros ``beta = 0`` and ``alpha = 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from ..curve import Branch, ClassifiedWavenumber, WaveClass
from ..errors import (
    DegenerateFrequencyError,
    DegenerateRootError,
    RootFindingError,
)
from ..fem import Material
from ..linalg import gauss_legendre

GV_TOL = 1e-3
REAL_TOL = 1e-8


@dataclass(frozen=True)
class DispersionContext:
    material: Material
    R: float = 1.0

    def __post_init__(self):
        if not self.R > 0:
            raise ValueError("half width must be positive")

    @property
    def c_L(self) -> float:
        return self.material.c_L

    @property
    def c_T(self) -> float:
        return self.material.c_T

    def alpha_beta(self, kappa, omega):
        a = np.sqrt(np.asarray(omega**2 / self.c_L**2 - kappa**2, dtype=complex))
        b = np.sqrt(np.asarray(omega**2 / self.c_T**2 - kappa**2, dtype=complex))
        return a, b

    def cut_on_frequencies(self, omega_max: float) -> List[float]:
        """Frequencies with a vanishing wavenumber: ``c n pi / (2R)`` for ``c`` in ``{c_T, c_L}``."""
        out = []
        for c in (self.c_T, self.c_L):
            n = 1
            while c * n * math.pi / (2 * self.R) <= omega_max:
                out.append(c * n * math.pi / (2 * self.R))
                n += 1
        return sorted(out)


def _branch(branch) -> Branch:
    return branch if isinstance(branch, Branch) else Branch(branch)


# --- entire building blocks ----------------------------------------------------------

_SERIES_TERMS = 18


def _cs(w):
    """``cos(sqrt w)``, ``sin(sqrt w)/sqrt w`` and their ``w``-derivatives (entire in ``w``)."""
    w = np.asarray(w, dtype=complex)
    r = np.sqrt(w)
    small = np.abs(w) < 0.25
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.cos(r)
        s = np.where(small, 1.0, np.sin(r) / np.where(small, 1.0, r))
        ds = np.where(small, 0.0, (c - s) / (2 * np.where(small, 1.0, w)))
    if np.any(small):
        ws = w[small]
        ser = np.zeros_like(ws)
        dser = np.zeros_like(ws)
        term = np.ones_like(ws)
        for k in range(_SERIES_TERMS):
            fac = (-1) ** k / math.factorial(2 * k + 1)
            ser = ser + fac * ws**k
            if k >= 1:
                dser = dser + k * fac * ws ** (k - 1)
        s = np.array(s)
        ds = np.array(ds)
        s[small] = ser
        ds[small] = dser
    dc = -0.5 * s
    return c, s, dc, ds


def _entire(ctx: DispersionContext, branch: Branch, kappa, omega):
    """Normalized relation ``G(k2, a2, b2)`` and its partial derivatives."""
    R = ctx.R
    k2 = np.asarray(kappa, dtype=complex) ** 2
    om2 = np.asarray(omega, dtype=complex) ** 2
    a2 = om2 / ctx.c_L**2 - k2
    b2 = om2 / ctx.c_T**2 - k2
    ca, sa, dca, dsa = _cs(R * R * a2)
    cb, sb, dcb, dsb = _cs(R * R * b2)
    # derivatives w.r.t. a2, b2 pick up a factor R^2 from the chain rule
    dca, dsa, dcb, dsb = R * R * dca, R * R * dsa, R * R * dcb, R * R * dsb
    q = (k2 - b2) ** 2
    dq_k = 2 * (k2 - b2)
    if branch is Branch.SYMMETRIC:
        # 4 k2 R a2 sinc(aR) cos(bR) + (k2 - b2)^2 cos(aR) R sinc(bR)
        t1 = 4 * k2 * R * a2 * sa * cb
        t2 = q * ca * R * sb
        g = t1 + t2
        g_k = 4 * R * a2 * sa * cb + dq_k * ca * R * sb
        g_a = 4 * k2 * R * (sa + a2 * dsa) * cb + q * dca * R * sb
        g_b = 4 * k2 * R * a2 * sa * dcb - dq_k * ca * R * sb + q * ca * R * dsb
    else:
        # 4 k2 R b2 sinc(bR) cos(aR) + (k2 - b2)^2 R sinc(aR) cos(bR)
        t1 = 4 * k2 * R * b2 * sb * ca
        t2 = q * R * sa * cb
        g = t1 + t2
        g_k = 4 * R * b2 * sb * ca + dq_k * R * sa * cb
        g_a = 4 * k2 * R * b2 * sb * dca + q * R * dsa * cb
        g_b = 4 * k2 * R * (sb + b2 * dsb) * ca - dq_k * R * sa * cb + q * R * sa * dcb
    # |kappa dG/dkappa| keeps the scale finite where both terms vanish (kappa = beta, cos(beta R) = 0)
    scale = np.abs(t1) + np.abs(t2) + np.abs(2 * k2 * (g_k - g_a - g_b))
    return g, g_k, g_a, g_b, scale


def dispersion_entire(ctx: DispersionContext, branch, kappa, omega):
    """Branch-free normalized relation (``F_S / beta`` or ``F_A / alpha``)."""
    return _entire(ctx, _branch(branch), kappa, omega)[0]


def dispersion_derivatives(ctx: DispersionContext, branch, kappa, omega):
    """``(G, dG/dkappa, dG/domega, scale)`` of the normalized relation."""
    g, g_k, g_a, g_b, scale = _entire(ctx, _branch(branch), kappa, omega)
    kappa = np.asarray(kappa, dtype=complex)
    omega = np.asarray(omega, dtype=complex)
    dk = 2 * kappa * (g_k - g_a - g_b)
    dw = 2 * omega * (g_a / ctx.c_L**2 + g_b / ctx.c_T**2)
    return g, dk, dw, scale


def dispersion_f(ctx: DispersionContext, branch, kappa, omega):
    """The relation ``F_S`` or ``F_A`` exactly as written, principal square roots."""
    branch = _branch(branch)
    a, b = ctx.alpha_beta(kappa, omega)
    k2 = np.asarray(kappa, dtype=complex) ** 2
    R = ctx.R
    q = (k2 - b * b) ** 2
    if branch is Branch.SYMMETRIC:
        out = 4 * k2 * a * b * np.sin(a * R) * np.cos(b * R) + q * np.cos(a * R) * np.sin(b * R)
    else:
        out = 4 * k2 * a * b * np.cos(a * R) * np.sin(b * R) + q * np.sin(a * R) * np.cos(b * R)
    return out[()] if np.ndim(out) == 0 else out


# --- group velocity and classification --------------------------------------------------


def group_velocity(ctx: DispersionContext, branch, kappa_real: float, omega: float, tol: float = GV_TOL) -> float:
    """``d omega / d kappa`` on a real root by implicit differentiation.

    Raises :class:`DegenerateRootError` when ``|d omega/d kappa| < tol``,
    i.e. at coalescing roots and at ``kappa = 0`` cut-ons.
    """
    _, dk, dw, _ = dispersion_derivatives(ctx, branch, complex(kappa_real), complex(omega))
    if dw == 0:
        raise DegenerateRootError(f"dF/domega vanishes at kappa={kappa_real}, omega={omega}")
    v = float(np.real(-dk / dw))
    if abs(v) < tol:
        raise DegenerateRootError(
            f"group velocity {v:.3e} below {tol:g} at kappa={kappa_real:.6g}, omega={omega:.6g}"
        )
    return v


def classify(ctx: DispersionContext, branch, kappa: complex, omega: float, gv_tol: float = GV_TOL,
             real_tol: float = REAL_TOL) -> ClassifiedWavenumber:
    """Outgoing/incoming class of a root at real ``omega``."""
    branch = _branch(branch)
    kappa = complex(kappa)
    if abs(kappa.imag) <= real_tol * max(1.0, abs(kappa)):
        try:
            v = group_velocity(ctx, branch, kappa.real, omega, gv_tol)
        except DegenerateRootError as exc:
            raise DegenerateFrequencyError(
                f"omega={omega} is within tolerance of a zero-group-velocity frequency: {exc}"
            ) from exc
        wc = WaveClass.OUTGOING_PROPAGATING if v > 0 else WaveClass.INCOMING_PROPAGATING
        return ClassifiedWavenumber(complex(kappa.real, 0.0), branch, wc, v)
    wc = WaveClass.OUTGOING_EVANESCENT if kappa.imag > 0 else WaveClass.INCOMING_EVANESCENT
    return ClassifiedWavenumber(kappa, branch, wc, None)


# --- root finding -----------------------------------------------------------------------


def _newton(ctx, branch, kappa, omega, tol=1e-13, maxit=50, real=False):
    k = complex(kappa)
    for _ in range(maxit):
        g, dk, _, scale = dispersion_derivatives(ctx, branch, k, omega)
        if dk == 0:
            break
        step = g / dk
        if real:
            step = step.real
        k = k - step
        if abs(step) <= tol * max(1.0, abs(k)):
            break
    g, _, _, scale = dispersion_derivatives(ctx, branch, k, omega)
    return k, abs(g), float(scale)


def _contour(ctx, branch, omega, box, n_gauss, panels):
    """``(1/2 pi i) int F'/F`` and ``(1/2 pi i) int kappa F'/F`` around ``box``."""
    x0, x1, y0, y1 = box
    corners = [complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1)]
    t, w = gauss_legendre(n_gauss, 0.0, 1.0)
    tt = (t[None, :] + np.arange(panels)[:, None]) / panels
    tt = tt.ravel()
    ww = np.tile(w, panels) / panels
    n0 = n1 = 0j
    for a, b in zip(corners, corners[1:] + corners[:1]):
        z = a + (b - a) * tt
        g, dk, _, _ = dispersion_derivatives(ctx, branch, z, omega)
        h = dk / g * (b - a) * ww
        n0 += np.sum(h)
        n1 += np.sum(z * h)
    return n0 / (2j * math.pi), n1 / (2j * math.pi)


def _count(ctx, branch, omega, box, n_gauss=64):
    """Winding number of the box or ``None`` when the quadrature is not near-integer."""
    prev = None
    for panels in (1, 2, 4, 8):
        n0, n1 = _contour(ctx, branch, omega, box, n_gauss, panels)
        k = round(n0.real)
        if abs(n0 - k) < 1e-3 and (prev is None or prev[0] == k):
            if prev is not None or panels >= 2:
                return k, n1
        prev = (k, n1) if abs(n0 - k) < 1e-3 else None
    return None


def _in_box(z, box, tol=0.0):
    x0, x1, y0, y1 = box
    return x0 - tol <= z.real <= x1 + tol and y0 - tol <= z.imag <= y1 + tol


_SPLITS = (0.5371, 0.4629, 0.5813, 0.4187, 0.6211, 0.3789, 0.5127, 0.4873, 0.6533, 0.3467)
_SHIFT_H = 0.0219  # horizontal cuts use shifted fractions so cut lines of both kinds never share corners


def _halves(box, frac, vertical):
    x0, x1, y0, y1 = box
    if vertical:
        xm = x0 + frac * (x1 - x0)
        return [(x0, xm, y0, y1), (xm, x1, y0, y1)]
    ym = y0 + (frac + _SHIFT_H) * (y1 - y0)
    if abs(ym) < 1e-6 * (y1 - y0):
        return None
    return [(x0, x1, y0, ym), (x0, x1, ym, y1)]


def _find(ctx, branch, omega, box, count, depth, out, min_size):
    if count == 0:
        return
    x0, x1, y0, y1 = box
    width, height = x1 - x0, y1 - y0
    if count == 1:
        n = _count(ctx, branch, omega, box)
        guess = n[1] if n is not None else complex(0.5 * (x0 + x1), 0.5 * (y0 + y1))
        k, res, scale = _newton(ctx, branch, guess, omega)
        if _in_box(k, box, 1e-9 * max(1.0, abs(k))) and res <= 1e-10 * max(scale, 1e-300):
            out.append(k)
            return
    if max(width, height) < min_size or depth > 60:
        raise DegenerateFrequencyError(
            f"{count} roots of the {branch.value} relation cluster in a box of size "
            f"{max(width, height):.2e} near {complex(0.5 * (x0 + x1), 0.5 * (y0 + y1)):.6g} at omega={omega}"
        )
    prefer = width >= height
    for vertical in (prefer, not prefer):
        for frac in _SPLITS:
            halves = _halves(box, frac, vertical)
            if halves is None:
                continue
            counts = [_count(ctx, branch, omega, h) for h in halves]
            if all(c is not None for c in counts) and sum(c[0] for c in counts) == count:
                for h, c in zip(halves, counts):
                    _find(ctx, branch, omega, h, c[0], depth + 1, out, min_size)
                return
    centre = complex(0.5 * (x0 + x1), 0.5 * (y0 + y1))
    if count >= 2 and max(width, height) < 1e-4 * max(1.0, abs(centre)):
        # a tiny box whose every cut touches a root: the roots have coalesced on the cut
        raise DegenerateFrequencyError(
            f"{count} roots of the {branch.value} relation coalesce near {centre:.6g} at omega={omega}"
        )
    raise RootFindingError(f"could not split box {box} at omega={omega} without hitting a root")


def _raw_roots(ctx, branch, omega, box, retries=5):
    x0, x1, y0, y1 = box
    for attempt in range(retries + 1):
        # small deterministic enlargement on retry moves the contour off a root
        pad = 0.0 if attempt == 0 else 1e-3 * attempt * (1 + 0.37 * attempt)
        b = (x0 - pad, x1 + pad * 1.3, y0 - pad * 0.7, y1 + pad)
        n = _count(ctx, branch, omega, b)
        if n is None:
            continue
        total = n[0]
        out: List[complex] = []
        _find(ctx, branch, omega, b, total, 0, out, min_size=1e-7)
        return out, total
    raise RootFindingError(f"argument principle failed on {box} after {retries} retries at omega={omega}")


def lamb_roots(
    ctx: DispersionContext,
    omega: float,
    search_box: Tuple[float, float, float, float] = (-6.0, 6.0, -6.0, 6.0),
    max_count: Optional[int] = None,
    branches: Sequence = (Branch.SYMMETRIC, Branch.ANTISYMMETRIC),
    gv_tol: float = GV_TOL,
) -> List[ClassifiedWavenumber]:
    """All roots of ``F_S`` and ``F_A`` in ``search_box = (re0, re1, im0, im1)``, classified.

    The spurious zeros ``beta = 0`` (symmetric) and ``alpha = 0``
    (antisymmetric) of the unnormalized relations are not roots here.
    The list is sorted by ``|Im kappa|``, then ``|Re kappa|``, then
    ``Re kappa``.
    """
    omega = float(omega)
    if omega <= 0:
        raise ValueError("omega must be positive")
    out = []
    for br in branches:
        br = _branch(br)
        roots, total = _raw_roots(ctx, br, omega, search_box)
        if len(roots) != total:
            raise RootFindingError(f"found {len(roots)} of {total} roots for branch {br.value}")
        for k in roots:
            if abs(k.imag) <= 1e-6 * max(1.0, abs(k)):
                kr, res, scale = _newton(ctx, br, complex(k.real), omega, real=True)
                if res <= 1e-10 * scale:
                    k = complex(kr.real, 0.0)
            out.append(classify(ctx, br, k, omega, gv_tol))
    out.sort(key=lambda w: (round(abs(w.kappa.imag), 9), round(abs(w.kappa.real), 9), w.kappa.real, w.branch.value))
    if max_count is not None:
        out = out[:max_count]
    return out


def outgoing(roots: Sequence[ClassifiedWavenumber]) -> List[ClassifiedWavenumber]:
    return [w for w in roots if w.outgoing]


def root_residual(ctx, w: ClassifiedWavenumber, omega) -> float:
    """``|G| / scale`` of a classified root."""
    g, _, _, scale = dispersion_derivatives(ctx, w.branch, w.kappa, omega)
    return float(abs(g) / scale)


# --- mode shapes --------------------------------------------------------------------


def _mode_parts(ctx, branch, kappa, omega, eta):
    branch = _branch(branch)
    a, b = ctx.alpha_beta(kappa, omega)
    a, b = complex(a), complex(b)
    k = complex(kappa)
    R = ctx.R
    eta = np.asarray(eta, dtype=float)
    # single power of (kappa^2 - beta^2); the squared factor only appears in F
    q = k * k - b * b
    if branch is Branch.SYMMETRIC:
        w1 = 1j * k * q * np.sin(b * R) * np.cos(a * eta) + 2j * k * a * b * np.sin(a * R) * np.cos(b * eta)
        w2 = -a * q * np.sin(b * R) * np.sin(a * eta) + 2 * k * k * a * np.sin(a * R) * np.sin(b * eta)
        d1 = -1j * k * q * a * np.sin(b * R) * np.sin(a * eta) - 2j * k * a * b * b * np.sin(a * R) * np.sin(b * eta)
        d2 = -a * a * q * np.sin(b * R) * np.cos(a * eta) + 2 * k * k * a * b * np.sin(a * R) * np.cos(b * eta)
    else:
        # shear-potential amplitude -2i kappa alpha cos(alpha R) makes the faces traction free
        w1 = 1j * k * q * np.cos(b * R) * np.sin(a * eta) + 2j * k * a * b * np.cos(a * R) * np.sin(b * eta)
        w2 = a * q * np.cos(b * R) * np.cos(a * eta) - 2 * k * k * a * np.cos(a * R) * np.cos(b * eta)
        d1 = 1j * k * q * a * np.cos(b * R) * np.cos(a * eta) + 2j * k * a * b * b * np.cos(a * R) * np.cos(b * eta)
        d2 = -a * a * q * np.cos(b * R) * np.sin(a * eta) + 2 * k * k * a * b * np.cos(a * R) * np.sin(b * eta)
    return np.array([w1, w2]), np.array([d1, d2])


def lamb_mode(ctx: DispersionContext, branch, kappa, eta, omega):
    """Transverse profile ``w(eta)`` as printed for the symmetric/antisymmetric family."""
    return _mode_parts(ctx, branch, kappa, omega, eta)[0]


def lamb_mode_derivative(ctx: DispersionContext, branch, kappa, eta, omega):
    return _mode_parts(ctx, branch, kappa, omega, eta)[1]


def lamb_field(ctx: DispersionContext, branch, kappa, xi, eta, omega):
    """``exp(i kappa xi) w(eta)`` in the local frame (components along ``xi``, ``eta``)."""
    xi = np.asarray(xi, dtype=float)
    return np.exp(1j * complex(kappa) * xi) * lamb_mode(ctx, branch, kappa, eta, omega)


def lamb_field_gradient(ctx: DispersionContext, branch, kappa, xi, eta, omega):
    """``grad[c, d] = d u_c / d x_d`` with ``x_0 = xi``, ``x_1 = eta``."""
    xi = np.asarray(xi, dtype=float)
    w, dw = _mode_parts(ctx, branch, kappa, omega, eta)
    ph = np.exp(1j * complex(kappa) * xi)
    g = np.empty((2, 2) + np.broadcast(xi, np.asarray(eta)).shape, dtype=complex)
    g[:, 0] = 1j * complex(kappa) * ph * w
    g[:, 1] = ph * dw
    return g


def mode_norm(ctx: DispersionContext, branch, kappa, omega, n_quad: int = 64) -> float:
    """``||w||_{L^2(-R, R)}`` by Gauss quadrature."""
    x, wq = gauss_legendre(n_quad, -ctx.R, ctx.R)
    w = lamb_mode(ctx, branch, kappa, x, omega)
    return float(math.sqrt(np.sum(wq * np.sum(np.abs(w) ** 2, axis=0))))


def mode_flux(ctx: DispersionContext, branch, kappa, omega, n_quad: int = 64) -> float:
    """Time-averaged power ``(omega/2) Im int (sigma(u) e_xi) . conj(u)`` through a cross-section."""
    mat = ctx.material
    x, wq = gauss_legendre(n_quad, -ctx.R, ctx.R)
    u = lamb_field(ctx, branch, kappa, 0.0, x, omega)
    g = lamb_field_gradient(ctx, branch, kappa, 0.0, x, omega)
    t1 = (2 * mat.mu + mat.lam) * g[0, 0] + mat.lam * g[1, 1]
    t2 = mat.mu * (g[0, 1] + g[1, 0])
    return float(0.5 * omega * np.imag(np.sum(wq * (t1 * np.conj(u[0]) + t2 * np.conj(u[1])))))


def modal_residual(ctx: DispersionContext, branch, kappa, omega, xi, eta, h: float = 1e-4):
    """Strong-form residual ``-div sigma(u) - rho omega^2 u`` by central differences of the exact gradient."""
    mat = ctx.material
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)

    def sigma(x, e):
        g = lamb_field_gradient(ctx, branch, kappa, x, e, omega)
        eps = 0.5 * (g + np.swapaxes(g, 0, 1))
        tr = eps[0, 0] + eps[1, 1]
        s = 2 * mat.mu * eps
        s[0, 0] = s[0, 0] + mat.lam * tr
        s[1, 1] = s[1, 1] + mat.lam * tr
        return s

    dsx = (sigma(xi + h, eta) - sigma(xi - h, eta)) / (2 * h)
    dse = (sigma(xi, eta + h) - sigma(xi, eta - h)) / (2 * h)
    div = dsx[:, 0] + dse[:, 1]
    u = lamb_field(ctx, branch, kappa, xi, eta, omega)
    return -div - mat.rho * omega**2 * u


def traction(ctx: DispersionContext, branch, kappa, omega, xi, eta):
    """``sigma(u) (0, 1)^T`` of the mode."""
    mat = ctx.material
    g = lamb_field_gradient(ctx, branch, kappa, xi, eta, omega)
    t1 = mat.mu * (g[0, 1] + g[1, 0])
    t2 = (2 * mat.mu + mat.lam) * g[1, 1] + mat.lam * g[0, 0]
    return np.array([t1, t2])


# --- reference field ------------------------------------------------------------------


def mode_order_key(w: ClassifiedWavenumber):
    """Propagating before evanescent (ascending ``|Im kappa|``), then ascending ``|Re kappa|``."""
    return (round(abs(w.kappa.imag), 9), round(abs(w.kappa.real), 9), w.kappa.real)


class LambField:
    """Superposition of Lamb modes ``sum_j c_j exp(i kappa_j xi) w_j(eta)``.

    The local frame is placed by ``origin`` (where ``xi = eta = 0``) and
    ``normal`` (direction of ``xi``); ``eta`` runs along the normal rotated
    by +90 degrees.  Calls return global Cartesian components.
    """

    def __init__(self, ctx, omega, modes, coefficients, origin=(0.0, 0.0), normal=(1.0, 0.0)):
        self.ctx = ctx
        self.omega = float(omega)
        self.modes = list(modes)
        self.coefficients = [complex(c) for c in coefficients]
        self.origin = np.asarray(origin, dtype=float)
        n = np.asarray(normal, dtype=float)
        self.q = np.array([n, [-n[1], n[0]]])  # rows: e_xi, e_eta

    def local(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        dx, dy = x - self.origin[0], y - self.origin[1]
        return self.q[0, 0] * dx + self.q[0, 1] * dy, self.q[1, 0] * dx + self.q[1, 1] * dy

    def __call__(self, x, y):
        """``(u, grad)`` at global points; shapes ``(2, n)`` and ``(2, 2, n)``."""
        xi, eta = self.local(x, y)
        u = np.zeros((2,) + xi.shape, dtype=complex)
        g = np.zeros((2, 2) + xi.shape, dtype=complex)
        for w, c in zip(self.modes, self.coefficients):
            u = u + c * lamb_field(self.ctx, w.branch, w.kappa, xi, eta, self.omega)
            g = g + c * lamb_field_gradient(self.ctx, w.branch, w.kappa, xi, eta, self.omega)
        # to global components: u_glob = Q^T u_loc, grad_glob = Q^T grad_loc Q
        q = self.q
        ug = np.einsum("ca,c...->a...", q, u)
        gg = np.einsum("ca,cd...,db->ab...", q, g, q)
        return ug, gg

    def value(self, x, y):
        return self(x, y)[0]


def reference_field(ctx: DispersionContext, omega: float, n_symmetric: int = 5, n_antisymmetric: int = 4,
                    search_box=(-8.0, 8.0, -8.0, 8.0), origin=(0.0, 0.0), normal=(1.0, 0.0)) -> LambField:
    """Sum of the first outgoing symmetric and antisymmetric modes, each with unit ``L^2`` profile."""
    roots = lamb_roots(ctx, omega, search_box)
    modes = []
    for br, n in ((Branch.SYMMETRIC, n_symmetric), (Branch.ANTISYMMETRIC, n_antisymmetric)):
        sel = sorted([w for w in roots if w.outgoing and w.branch is br], key=mode_order_key)
        if len(sel) < n:
            raise RootFindingError(f"only {len(sel)} outgoing {br.value} modes in the search box")
        modes.extend(sel[:n])
    coeffs = [1.0 / mode_norm(ctx, w.branch, w.kappa, omega) for w in modes]
    return LambField(ctx, omega, modes, coeffs, origin, normal)


# --- zero group velocity scan ---------------------------------------------------------


def _real_roots(ctx, branch, omega, kmax, n_grid=4000):
    ks = np.linspace(kmax * 1e-6, kmax, n_grid)
    f = np.real(dispersion_entire(ctx, branch, ks, omega))
    out = []
    for i in np.flatnonzero(np.sign(f[:-1]) * np.sign(f[1:]) < 0):
        out.append(brentq(lambda k: float(np.real(dispersion_entire(ctx, branch, k, omega))), ks[i], ks[i + 1], xtol=1e-14))
    return out


def real_lamb_roots(ctx: DispersionContext, omega: float, kmax: Optional[float] = None,
                    gv_tol: float = GV_TOL) -> List[ClassifiedWavenumber]:
    """Real roots ``kappa > 0`` of both relations with signed group velocity.

    Intended for dispersion tables: a root whose group velocity cannot be
    evaluated (a coalescence point) is returned with ``group_velocity = nan``.
    """
    kmax = 2.0 * omega / ctx.c_T + 2.0 if kmax is None else kmax
    out = []
    for br in (Branch.SYMMETRIC, Branch.ANTISYMMETRIC):
        for k in _real_roots(ctx, br, omega, kmax):
            try:
                out.append(classify(ctx, br, complex(k), omega, gv_tol))
            except (DegenerateFrequencyError, DegenerateRootError):
                out.append(ClassifiedWavenumber(complex(k), br, WaveClass.OUTGOING_PROPAGATING, float("nan")))
    return out


def _zgv_newton(ctx, branch, kappa, omega, h=1e-6, maxit=40):
    """Solve ``G = dG/dkappa = 0`` for a coalescence point ``(kappa, omega)``."""
    k, w = float(kappa), float(omega)

    def fun(k, w):
        g, dk, _, _ = dispersion_derivatives(ctx, branch, k, w)
        return np.array([np.real(g), np.real(dk)])

    for _ in range(maxit):
        f = fun(k, w)
        jk = (fun(k + h, w) - fun(k - h, w)) / (2 * h)
        jw = (fun(k, w + h) - fun(k, w - h)) / (2 * h)
        jac = np.column_stack([jk, jw])
        try:
            step = np.linalg.solve(jac, -f)
        except np.linalg.LinAlgError:
            break
        k += step[0]
        w += step[1]
        if abs(step[1]) < 1e-13 and abs(step[0]) < 1e-11:
            break
    return k, w


def zero_group_velocity_frequencies(ctx: DispersionContext, omega_range, n_grid: int = 400,
                                    tol: float = 1e-6) -> List[float]:
    """Frequencies in ``omega_range`` where real roots coalesce or reach ``kappa = 0``.

    The number of positive real roots of each relation is tracked on a
    grid; every change is bisected to ``tol``.  Changes by one are
    ``kappa = 0`` cut-ons (refined on ``G(0, omega) = 0``), changes by two
    are coalescences (refined by Newton on ``G = dG/dkappa = 0``).
    """
    w0, w1 = omega_range
    if not (np.isfinite(w0) and np.isfinite(w1)) or w1 <= w0:
        raise ValueError("omega_range must be a finite increasing pair")
    kmax = 2.0 * w1 / ctx.c_T + 2.0
    grid = np.linspace(w0, w1, n_grid + 1)
    found = []
    for br in (Branch.SYMMETRIC, Branch.ANTISYMMETRIC):
        counts = [len(_real_roots(ctx, br, w, kmax)) for w in grid]
        for i in range(n_grid):
            if counts[i] == counts[i + 1]:
                continue
            a, b = grid[i], grid[i + 1]
            ca = counts[i]
            while b - a > tol:
                m = 0.5 * (a + b)
                if len(_real_roots(ctx, br, m, kmax)) == ca:
                    a = m
                else:
                    b = m
            jump = abs(counts[i + 1] - counts[i])
            if jump % 2 == 1:
                g0 = lambda w: float(np.real(dispersion_entire(ctx, br, 0.0, w)))
                try:
                    found.append(brentq(g0, a - 10 * tol, b + 10 * tol, xtol=1e-14))
                except ValueError:
                    found.append(0.5 * (a + b))
            else:
                # coalescence: the two roots that disappear are closest on the richer side
                side = a if counts[i] > counts[i + 1] else b
                roots = sorted(_real_roots(ctx, br, side, kmax))
                if len(roots) >= 2:
                    gaps = np.diff(roots)
                    j = int(np.argmin(gaps))
                    kz, wz = _zgv_newton(ctx, br, 0.5 * (roots[j] + roots[j + 1]), side)
                    found.append(wz if abs(wz - side) < 1e-3 else 0.5 * (a + b))
                else:
                    found.append(0.5 * (a + b))
    return sorted(found)
