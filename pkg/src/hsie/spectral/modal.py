"""Transverse modal problems: fixed-wavenumber eigenproblems and the essential spectrum."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linear_sum_assignment

from ..curve import PoleParams, gamma_point
from ..fem import (
    Block,
    BlockMesh,
    Material,
    ScalarBasis,
    Segment,
    TransverseMatrices,
    assemble_interior,
)
from ..linalg import dense_generalized_eig


def modal_matrices(trans: TransverseMatrices, material: Material, kappa):
    """``A(kappa)`` and ``B`` of the waveguide operator for fields ``exp(i kappa xi) w(eta)``.

    Obtained from the port element by replacing the longitudinal matrices
    with their plane-wave symbols: stiffness by ``kappa**2``, mass by 1, the
    drift (derivative on the test index) by ``-i kappa`` and its transpose
    by ``+i kappa``.  ``A(kappa)`` is Hermitian for real ``kappa`` and
    ``A(-kappa) = A(kappa).T``.
    """
    mu, lam, rho = material.mu, material.lam, material.rho
    mt, dt, st = trans.mass, trans.drift, trans.stiffness
    k = complex(kappa)
    a11 = (2 * mu + lam) * k * k * mt + mu * st
    a12 = mu * (1j * k) * dt + lam * (-1j * k) * dt.T
    a21 = mu * (-1j * k) * dt.T + lam * (1j * k) * dt
    a22 = (2 * mu + lam) * st + mu * k * k * mt
    a = np.block([[a11, a12], [a21, a22]])
    z = np.zeros_like(mt)
    b = rho * np.block([[mt, z], [z, mt]])
    return a, b


def transverse_modal_evp(trans: TransverseMatrices, material: Material, kappa) -> np.ndarray:
    """All ``omega**2`` for which ``exp(i kappa xi) w(eta)`` solves the discrete strip problem."""
    a, b = modal_matrices(trans, material, kappa)
    if np.isreal(kappa):
        vals = sla.eigh(a, b, eigvals_only=True).astype(complex)
    else:
        vals = dense_generalized_eig(a, b)
    return vals[np.argsort(vals.real)]


def principal_omega(omega2) -> np.ndarray:
    """Square roots with ``Re >= 0`` (and ``Im >= 0`` on the imaginary axis)."""
    w = np.sqrt(np.asarray(omega2, dtype=complex))
    flip = (w.real < 0) | ((w.real == 0) & (w.imag < 0))
    return np.where(flip, -w, w)


@dataclass
class EssentialCurve:
    r: np.ndarray
    kappa: np.ndarray
    omega: np.ndarray

    @property
    def start(self) -> complex:
        return complex(self.omega[0])


@dataclass
class EssentialSpectrum:
    params: PoleParams
    curves: List[EssentialCurve] = field(default_factory=list)

    def distance(self, omega) -> np.ndarray:
        """Distance of each ``omega`` to the nearest polyline."""
        omega = np.atleast_1d(np.asarray(omega, dtype=complex))
        best = np.full(omega.shape, np.inf)
        for c in self.curves:
            p = c.omega
            if p.size == 1:
                best = np.minimum(best, np.abs(omega - p[0]))
                continue
            a, b = p[:-1], p[1:]
            d = b - a
            dd = np.abs(d) ** 2
            dd[dd == 0] = 1.0
            t = np.real((omega[:, None] - a[None, :]) * np.conj(d)[None, :]) / dd[None, :]
            t = np.clip(t, 0.0, 1.0)
            dist = np.abs(omega[:, None] - (a[None, :] + t * d[None, :])).min(axis=1)
            best = np.minimum(best, dist)
        return best

    def points(self) -> np.ndarray:
        if not self.curves:
            return np.zeros(0, dtype=complex)
        return np.concatenate([c.omega for c in self.curves])


def essential_spectrum(p: PoleParams, trans: TransverseMatrices, material: Material,
                       r_range=(0.0, -5.0), n_samples: int = 300, omega_max: float = 2.5) -> EssentialSpectrum:
    """Frequencies ``omega`` for which some ``i kappa_n(omega)`` lies on the curve of ``p``.

    The curve is sampled at ``kappa = -i gamma(r)`` for ``n_samples``
    equidistant ``r`` in ``r_range``.  Curves are seeded at the first sample
    by every ``omega`` with ``|omega| <= omega_max`` and followed through
    the later samples by optimal nearest-neighbour matching.  With
    ``r_range[0] = 0`` the seeds are the cut-on frequencies.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rs = np.linspace(r_range[0], r_range[1], n_samples)
    kappas = -1j * np.asarray(gamma_point(p, rs), dtype=complex).reshape(-1)
    samples = [principal_omega(transverse_modal_evp(trans, material, k)) for k in kappas]
    seed = np.flatnonzero(np.abs(samples[0]) <= omega_max)
    seed = seed[np.argsort(samples[0][seed].real)]
    paths = [[samples[0][i]] for i in seed]
    for w in samples[1:]:
        if not paths:
            break
        last = np.array([pth[-1] for pth in paths])
        cost = np.abs(last[:, None] - w[None, :])
        rows, cols = linear_sum_assignment(cost)
        for i, j in zip(rows, cols):
            paths[i].append(w[j])
    curves = [EssentialCurve(rs.copy(), kappas.copy(), np.array(pth)) for pth in paths]
    return EssentialSpectrum(p, curves)


def dirichlet_eigenvalues(rect, material: Material, p: int, n_wanted: int, n_elem: int = 4) -> np.ndarray:
    """Frequencies of the clamped rectangle ``rect = (x0, x1, y0, y1)``.

    Returns the square roots of the ``n_wanted`` smallest eigenvalues of
    the interior pencil with all boundary dofs removed.
    """
    x0, x1, y0, y1 = rect
    mesh = BlockMesh(
        [Block("rect", x0, x1, y0, y1, n_elem, n_elem, material)],
        [
            Segment("dirichlet", x0, y0, x1, y0),
            Segment("dirichlet", x1, y0, x1, y1),
            Segment("dirichlet", x0, y1, x1, y1),
            Segment("dirichlet", x0, y0, x0, y1),
        ],
    )
    a, b, dofs = assemble_interior(mesh, ScalarBasis(p))
    fixed = dofs.dirichlet_dofs()
    free = np.setdiff1d(np.arange(dofs.n_vector), fixed)
    af = np.real(a[free][:, free].toarray())
    bf = np.real(b[free][:, free].toarray())
    n_wanted = min(n_wanted, len(free))
    vals = sla.eigh(af, bf, eigvals_only=True, subset_by_index=(0, n_wanted - 1))
    return np.sqrt(np.maximum(vals, 0.0))
