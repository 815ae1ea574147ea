"""Hardy space infinite elements attached to a block mesh.

Each port is a straight boundary segment with outward normal ``n``.  In the
port frame ``xi`` runs along ``n`` and ``eta`` along ``n`` rotated by +90
degrees, and the exterior field is expanded as

    u(xi, eta) = sum_{j, l} phi_j(xi) phi^trans_l(eta) (a_jl, b_jl),

with ``(a, b)`` the components along ``(e_xi, e_eta)``.  Because
``phi_j(0) = delta_1j``, the layer ``j = 1`` is the interior trace and shares
its degrees of freedom; layers ``j >= 2`` are appended after the interior
unknowns.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .curve import ClassifiedWavenumber, PoleParams, WaveClass
from .errors import ClassificationError, CouplingError, SingularFrequencyError, SingularMatrixError
from .fem import (
    DofMap,
    Material,
    TransverseMatrices,
    dirichlet_lift,
    element_field,
    stress_from_gradient,
)
from .hardy1d import LongitudinalMatrices, assemble_long
from .linalg import as_csr, gauss_legendre, lu_factor

_NORMALS = {"left": (-1.0, 0.0), "right": (1.0, 0.0), "bottom": (0.0, -1.0), "top": (0.0, 1.0)}


@dataclass
class WaveguidePort:
    """Semi-infinite strip attached to the boundary segment tagged ``name``."""

    name: str
    params: PoleParams
    n_long: int
    material: Optional[Material] = None

    def __post_init__(self):
        if self.n_long < 2:
            raise ValueError("n_long must be >= 2")


@dataclass
class PortFrame:
    normal: Tuple[float, float]
    origin: Tuple[float, float]
    half_width: float
    eta_sign: float  # +1 if eta increases with the tangential coordinate
    comp: Tuple[int, int]  # global component of (u_xi, u_eta)
    sign: Tuple[float, float]

    @property
    def tangent(self):
        n = self.normal
        return (-n[1], n[0])

    def to_local(self, x, y):
        dx = np.asarray(x) - self.origin[0]
        dy = np.asarray(y) - self.origin[1]
        n, t = self.normal, self.tangent
        return n[0] * dx + n[1] * dy, t[0] * dx + t[1] * dy


def _frame(dofs: DofMap, name: str) -> PortFrame:
    edges = dofs.segment_edges(name)
    sides = {e.side for e in edges}
    if len(sides) != 1:
        raise CouplingError(f"port {name!r} spans several element sides {sorted(sides)}")
    n = _NORMALS[sides.pop()]
    pts = np.array([e.a for e in edges] + [e.b for e in edges])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    origin = tuple(0.5 * (lo + hi))
    half = 0.5 * float(np.max(hi - lo))
    t = (-n[1], n[0])
    if n[1] == 0:  # vertical segment: tangential coordinate is y
        eta_sign = t[1]
        comp = (0, 1)
        sign = (n[0], t[1])
    else:
        eta_sign = t[0]
        comp = (1, 0)
        sign = (n[1], t[0])
    return PortFrame(n, origin, half, eta_sign, comp, sign)


def assemble_port(material: Material, long: LongitudinalMatrices, trans: TransverseMatrices):
    """Exterior stiffness and mass in the local frame.

    Ordering: component ``xi`` block then component ``eta`` block, each with
    index ``j * n_trans + l``.  ``long.drift`` and ``trans.drift`` both carry
    the derivative on the row (test) index.
    """
    mu, lam, rho = material.mu, material.lam, material.rho
    ml, dl, sl = (sp.csr_matrix(m) for m in (long.mass, long.drift, long.stiffness))
    mt, dt, st = (sp.csr_matrix(m) for m in (trans.mass, trans.drift, trans.stiffness))
    if ml.shape[0] != long.n:
        raise ValueError("inconsistent longitudinal matrices")
    k = sp.kron
    a11 = (2 * mu + lam) * k(sl, mt) + mu * k(ml, st)
    a12 = mu * k(dl.T, dt) + lam * k(dl, dt.T)
    a21 = mu * k(dl, dt.T) + lam * k(dl.T, dt)
    a22 = (2 * mu + lam) * k(ml, st) + mu * k(sl, mt)
    a = sp.bmat([[a11, a12], [a21, a22]], format="csr")
    mm = rho * k(ml, mt)
    b = sp.bmat([[mm, None], [None, mm]], format="csr")
    return as_csr(a), as_csr(b)


@dataclass
class PortData:
    port: WaveguidePort
    frame: PortFrame
    trace: np.ndarray  # interior scalar dofs of the trace, transverse order
    trans: TransverseMatrices
    long: LongitudinalMatrices
    offset: int  # first appended scalar dof
    index: np.ndarray  # global vector index of each local exterior unknown
    signs: np.ndarray
    a: sp.csr_matrix  # global-size contributions
    b: sp.csr_matrix

    @property
    def n_trans(self) -> int:
        return len(self.trace)

    def layer(self, j: int) -> np.ndarray:
        """Global vector indices of layer ``j`` (1-based), local component order."""
        nt = self.n_trans
        nl = self.long.n
        loc = np.concatenate([c * nl * nt + (j - 1) * nt + np.arange(nt) for c in range(2)])
        return self.index[loc]

    def exterior_dofs(self) -> np.ndarray:
        return np.sort(np.concatenate([self.layer(j) for j in range(2, self.long.n + 1)]))


@dataclass
class AssembledSystem:
    """The pencil ``(A, B)`` with interior dofs first, then appended port layers."""

    A: sp.csr_matrix
    B: sp.csr_matrix
    dofs: DofMap
    ports: Dict[str, PortData] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def n_interior(self) -> int:
        return self.dofs.n_vector

    def partition(self):
        """``(interior, trace, exterior)`` vector index sets (trace is part of interior)."""
        trace = np.unique(np.concatenate([np.concatenate([2 * p.trace, 2 * p.trace + 1]) for p in self.ports.values()])) if self.ports else np.array([], dtype=int)
        ext = np.arange(self.n_interior, self.n)
        return np.arange(self.n_interior), trace, ext

    def pencil(self, omega):
        return as_csr(self.A - omega**2 * self.B)


def _port_layout(dofs: DofMap, port: WaveguidePort, offset: int):
    frame = _frame(dofs, port.name)
    trace, trans = dofs.trace(port.name)
    if frame.eta_sign < 0:
        trans = trans.reversed_orientation()
    nt = len(trace)
    nl = port.n_long
    index = np.empty(2 * nl * nt, dtype=int)
    signs = np.empty(2 * nl * nt)
    for c in range(2):
        g, s = frame.comp[c], frame.sign[c]
        for j in range(nl):
            sc = trace if j == 0 else offset + (j - 1) * nt + np.arange(nt)
            sl = slice(c * nl * nt + j * nt, c * nl * nt + (j + 1) * nt)
            index[sl] = 2 * sc + g
            signs[sl] = s
    return frame, trace, trans, index, signs


def _to_global(m, index, signs, n):
    m = sp.coo_matrix(m)
    vals = m.data * signs[m.row] * signs[m.col]
    return as_csr(sp.coo_matrix((vals, (index[m.row], index[m.col])), shape=(n, n)))


def _port_material(dofs: DofMap, port: WaveguidePort) -> Material:
    if port.material is not None:
        return port.material
    e = dofs.segment_edges(port.name)[0]
    el = dofs.elements[e.element]
    return dofs.mesh.blocks[el.block].material


def assemble_global(interior, ports: Sequence[WaveguidePort] = (), interface_terms: Sequence = ()) -> AssembledSystem:
    """Couple the interior pencil with the port elements.

    ``interior`` is the triple returned by :func:`hsie.fem.assemble_interior`;
    ``interface_terms`` are extra sparse matrices added to ``A``.
    """
    a_int, b_int, dofs = interior
    n_int = dofs.n_scalar
    names = [p.name for p in ports]
    if len(set(names)) != len(names):
        raise CouplingError("port names must be unique")
    offset = n_int
    layouts = []
    for port in ports:
        try:
            layout = _port_layout(dofs, port, offset)
        except Exception as exc:
            raise CouplingError(f"port {port.name!r}: {exc}") from exc
        layouts.append((port, layout))
        offset += (port.n_long - 1) * len(layout[1])
    n = 2 * offset
    pad = lambda m: sp.csr_matrix((m.data, m.indices, np.r_[m.indptr, np.full(n - m.shape[0], m.indptr[-1])]), shape=(n, n)) if m.shape[0] < n else m
    A = pad(as_csr(a_int))
    B = pad(as_csr(b_int))
    data = {}
    for port, (frame, trace, trans, index, signs) in layouts:
        mat = _port_material(dofs, port)
        long = assemble_long(port.params, port.n_long)
        if trans.n != len(trace):
            raise CouplingError(f"port {port.name!r}: trace space mismatch")
        ae, be = assemble_port(mat, long, trans)
        ag = _to_global(ae, index, signs, n)
        bg = _to_global(be, index, signs, n)
        A = A + ag
        B = B + bg
        data[port.name] = PortData(port, frame, trace, trans, long, 0, index, signs, ag, bg)
    for term in interface_terms:
        t = as_csr(term)
        A = A + pad(t)
    off = n_int
    for port, (frame, trace, *_r) in layouts:
        data[port.name].offset = off
        off += (port.n_long - 1) * len(trace)
    # all contributions are symmetric in exact arithmetic; remove last-bit differences
    A = 0.5 * (A + A.T)
    B = 0.5 * (B + B.T)
    return AssembledSystem(as_csr(A), as_csr(B), dofs, data)


# --- sources ---------------------------------------------------------------------------


def _lamb_ctx(material: Material, half_width: float):
    from .spectral.dispersion import DispersionContext

    return DispersionContext(material, half_width)


def incident_rhs(system: AssembledSystem, port_name: str, modes: Sequence[Tuple[ClassifiedWavenumber, complex]],
                 omega: float) -> np.ndarray:
    """Load vector for incident Lamb modes entering through a port.

    The exterior unknowns carry the scattered field ``u - u_inc`` while the
    interior unknowns carry the total field.  This gives the traction of
    ``u_inc`` on the interface plus the exterior operator applied to the
    trace of ``u_inc``.
    """
    from .spectral.dispersion import lamb_field, lamb_field_gradient

    pd = system.ports[port_name]
    n = system.n
    rhs = np.zeros(n, dtype=complex)
    mat = _port_material(system.dofs, pd.port)
    ctx = _lamb_ctx(mat, pd.frame.half_width)
    for w, amp in modes:
        if w.wave_class is not WaveClass.INCOMING_PROPAGATING:
            raise ClassificationError(f"incident mode {w.kappa} is {w.wave_class.value}, expected incoming propagating")
    active = [(w, complex(a)) for w, a in modes if a != 0]
    if not active:
        return rhs
    trans = pd.trans
    bp = trans.breakpoints
    p = trans.p
    from .fem import ScalarBasis, interval_dofs

    basis = ScalarBasis(p)
    tq, wq = gauss_legendre(2 * p + 6)
    table = interval_dofs(len(bp) - 1, p)
    nt = trans.n
    trac = np.zeros((2, nt), dtype=complex)  # local components, transverse test functions
    proj = np.zeros((2, nt), dtype=complex)
    vals = basis.values(tq)
    centre = 0.5 * (bp[0] + bp[-1])
    for e in range(len(bp) - 1):
        h = bp[e + 1] - bp[e]
        tcoord = bp[e] + 0.5 * (tq + 1) * h
        # eta measured from the segment midpoint along e_eta
        eta = pd.frame.eta_sign * (tcoord - centre)
        for w, amp in active:
            u = amp * lamb_field(ctx, w.branch, w.kappa, 0.0, eta, omega)
            g = amp * lamb_field_gradient(ctx, w.branch, w.kappa, 0.0, eta, omega)
            t_xi = (2 * mat.mu + mat.lam) * g[0, 0] + mat.lam * g[1, 1]
            t_eta = mat.mu * (g[0, 1] + g[1, 0])
            ww = 0.5 * h * wq
            trac[0, table[e]] += (vals * ww) @ t_xi
            trac[1, table[e]] += (vals * ww) @ t_eta
            proj[0, table[e]] += (vals * ww) @ u[0]
            proj[1, table[e]] += (vals * ww) @ u[1]
    g_inc = np.linalg.solve(trans.mass, proj.T).T  # L2 projection onto the trace space
    # surface term, scattered into the j = 1 layer
    idx1 = pd.layer(1)
    s1 = pd.signs[np.concatenate([c * pd.long.n * nt + np.arange(nt) for c in range(2)])]
    np.add.at(rhs, idx1, s1 * trac.ravel())
    ginc_global = np.zeros(n, dtype=complex)
    ginc_global[idx1] = s1 * g_inc.ravel()
    ext = as_csr(pd.a - omega**2 * pd.b)
    rhs += ext @ ginc_global
    return rhs


def incident_trace(system: AssembledSystem, port_name: str, modes, omega) -> np.ndarray:
    """Global vector holding the projected trace of the incident field on the port layer ``j = 1``."""
    from .spectral.dispersion import lamb_field
    from .fem import ScalarBasis, interval_dofs

    pd = system.ports[port_name]
    mat = _port_material(system.dofs, pd.port)
    ctx = _lamb_ctx(mat, pd.frame.half_width)
    trans = pd.trans
    bp = trans.breakpoints
    basis = ScalarBasis(trans.p)
    tq, wq = gauss_legendre(2 * trans.p + 6)
    table = interval_dofs(len(bp) - 1, trans.p)
    vals = basis.values(tq)
    proj = np.zeros((2, trans.n), dtype=complex)
    centre = 0.5 * (bp[0] + bp[-1])
    for e in range(len(bp) - 1):
        h = bp[e + 1] - bp[e]
        eta = pd.frame.eta_sign * (bp[e] + 0.5 * (tq + 1) * h - centre)
        for w, amp in modes:
            u = complex(amp) * lamb_field(ctx, w.branch, w.kappa, 0.0, eta, omega)
            proj[0, table[e]] += (vals * 0.5 * h * wq) @ u[0]
            proj[1, table[e]] += (vals * 0.5 * h * wq) @ u[1]
    g = np.linalg.solve(trans.mass, proj.T).T
    out = np.zeros(system.n, dtype=complex)
    nt = trans.n
    s1 = pd.signs[np.concatenate([c * pd.long.n * nt + np.arange(nt) for c in range(2)])]
    out[pd.layer(1)] = s1 * g.ravel()
    return out


@dataclass
class Solution:
    coeffs: np.ndarray
    residual: float
    omega: complex

    def interior(self, system: AssembledSystem) -> np.ndarray:
        return self.coeffs[: system.n_interior]


def scattering_solve(system: AssembledSystem, omega, rhs=None, dirichlet=None) -> Solution:
    """Solve ``(A - omega^2 B) x = rhs`` with optional Dirichlet data on tagged edges.

    ``dirichlet`` is a field ``f(x, y) -> (2, n)`` or a coefficient vector;
    ``None`` imposes homogeneous values on Dirichlet edges.
    """
    n = system.n
    rhs = np.zeros(n, dtype=complex) if rhs is None else np.asarray(rhs, dtype=complex)
    k = system.pencil(omega)
    if dirichlet is not None and not callable(dirichlet):
        dv = np.zeros(n, dtype=complex)
        dv[: len(dirichlet)] = dirichlet
        dirichlet = dv
    red = dirichlet_lift(k, rhs, system.dofs, dirichlet)
    if not np.any(red.rhs) and not np.any(red.lift):
        return Solution(np.zeros(n, dtype=complex), 0.0, omega)
    try:
        lu = lu_factor(red.matrix)
    except SingularMatrixError as exc:
        raise SingularFrequencyError(f"system singular at omega={omega}: {exc}", pivot=exc.pivot) from exc
    x = lu.solve(red.rhs)
    res = float(np.linalg.norm(red.matrix @ x - red.rhs) / max(np.linalg.norm(red.rhs), 1e-300))
    return Solution(red.expand(x), res, omega)


# --- post-processing ------------------------------------------------------------------


def energy_flux(dofs: DofMap, coeffs, x_line: float, omega: float, n_quad: Optional[int] = None) -> float:
    """Time-averaged power ``(omega/2) Im int sigma(u) e_x . conj(u) dy`` through ``x = x_line``."""
    n_quad = n_quad or dofs.p + 4
    t, w = gauss_legendre(n_quad)
    total = 0.0
    seen = set()
    for el in dofs.elements:
        if not (el.x0 - 1e-12 <= x_line <= el.x1 + 1e-12):
            continue
        key = (round(el.y0, 10), round(el.y1, 10))
        if key in seen:
            continue
        seen.add(key)
        tx = np.full_like(t, 2 * (x_line - el.x0) / (el.x1 - el.x0) - 1)
        u, g = element_field(dofs, el, coeffs, tx, t)
        sig = stress_from_gradient(dofs.mesh.blocks[el.block].material, g)
        integrand = sig[0, 0] * np.conj(u[0]) + sig[1, 0] * np.conj(u[1])
        total += float(np.imag(np.sum(0.5 * (el.y1 - el.y0) * w * integrand)))
    return 0.5 * omega * total
