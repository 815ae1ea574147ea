"""Resonances of the coupled pencil and their separation from the discretized essential spectrum."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np

from ..linalg import arnoldi_shift_invert
from ..waveguide import AssembledSystem
from .modal import EssentialSpectrum, principal_omega

DEDUP_RTOL = 1e-6


class SpectrumLabel(enum.Enum):
    RESONANCE_CANDIDATE = "ResonanceCandidate"
    ESSENTIAL_CLUSTER = "EssentialCluster"
    UNCLASSIFIED = "Unclassified"


@dataclass
class SpectrumResult:
    """Eigenfrequencies with residuals and, after classification, labels.

    ``eigenvalues`` are frequencies ``omega`` (principal square roots of the
    pencil eigenvalues).
    """

    eigenvalues: np.ndarray
    residuals: np.ndarray
    converged: np.ndarray
    labels: Optional[List[SpectrumLabel]] = None
    essential: Optional[EssentialSpectrum] = None
    vectors: Optional[np.ndarray] = field(default=None, repr=False)

    def __len__(self):
        return len(self.eigenvalues)

    def with_label(self, label: SpectrumLabel) -> np.ndarray:
        if self.labels is None:
            raise ValueError("spectrum has not been classified")
        return np.array([w for w, l in zip(self.eigenvalues, self.labels) if l is label])

    def window(self, re=(-np.inf, np.inf), im=(-np.inf, np.inf)) -> "SpectrumResult":
        keep = (
            (self.eigenvalues.real >= re[0]) & (self.eigenvalues.real <= re[1])
            & (self.eigenvalues.imag >= im[0]) & (self.eigenvalues.imag <= im[1])
        )
        idx = np.flatnonzero(keep)
        return SpectrumResult(
            self.eigenvalues[idx],
            self.residuals[idx],
            self.converged[idx],
            None if self.labels is None else [self.labels[i] for i in idx],
            self.essential,
            None if self.vectors is None else self.vectors[:, idx],
        )


def _free(system: AssembledSystem):
    fixed = system.dofs.dirichlet_dofs()
    mask = np.ones(system.n, dtype=bool)
    mask[fixed] = False
    return np.flatnonzero(mask)


def resonances(system: AssembledSystem, shifts: Sequence[complex], krylov_dim: int = 200, n_wanted: int = 40,
               tol: float = 1e-8, seed: int = 0, keep_vectors: bool = False) -> SpectrumResult:
    """Eigenfrequencies of ``A x = omega^2 B x`` near the frequency shifts.

    Each entry of ``shifts`` is a frequency; the Arnoldi shift is its square.
    Dirichlet dofs are removed.  Values found from several shifts are merged,
    keeping the smaller residual when two agree to ``1e-6`` relative.
    """
    if len(shifts) == 0:
        raise ValueError("at least one shift is required")
    free = _free(system)
    a = system.A[free][:, free]
    b = system.B[free][:, free]
    found = []
    for k, s in enumerate(shifts):
        pairs = arnoldi_shift_invert(a, b, complex(s) ** 2, krylov_dim, n_wanted, tol=tol, seed=seed + k)
        for pr in pairs:
            found.append((complex(principal_omega(pr.value)), pr.residual, pr.converged, pr.vector))
    found.sort(key=lambda t: (round(t[0].real, 12), round(t[0].imag, 12)))
    merged: List[tuple] = []
    for item in found:
        for i, other in enumerate(merged):
            if abs(item[0] - other[0]) <= DEDUP_RTOL * max(abs(item[0]), abs(other[0]), 1e-300):
                if item[1] < other[1]:
                    merged[i] = item
                break
        else:
            merged.append(item)
    merged.sort(key=lambda t: (t[0].real, t[0].imag))
    w = np.array([m[0] for m in merged], dtype=complex)
    res = np.array([m[1] for m in merged])
    conv = np.array([m[2] for m in merged], dtype=bool)
    vecs = None
    if keep_vectors and merged:
        vecs = np.zeros((system.n, len(merged)), dtype=complex)
        for j, m in enumerate(merged):
            vecs[free, j] = m[3]
    return SpectrumResult(w, res, conv, vectors=vecs)


def classify_spectrum(result_a: SpectrumResult, result_b: SpectrumResult, ess_a: EssentialSpectrum,
                      ess_b: EssentialSpectrum, tol: float = 0.02) -> SpectrumResult:
    """Label the eigenvalues of run ``a`` using a twin run with different pole parameters.

    * within ``tol`` of the essential polylines of ``a``: EssentialCluster;
    * matched within ``tol`` by an eigenvalue of ``b`` and farther than
      ``tol`` from both sets of polylines: ResonanceCandidate;
    * otherwise: Unclassified.
    """
    w = result_a.eigenvalues
    da = ess_a.distance(w) if len(w) else np.zeros(0)
    db = ess_b.distance(w) if len(w) else np.zeros(0)
    labels = []
    for i, om in enumerate(w):
        if da[i] <= tol:
            labels.append(SpectrumLabel.ESSENTIAL_CLUSTER)
            continue
        match = len(result_b.eigenvalues) > 0 and np.min(np.abs(result_b.eigenvalues - om)) <= tol
        if match and db[i] > tol:
            labels.append(SpectrumLabel.RESONANCE_CANDIDATE)
        else:
            labels.append(SpectrumLabel.UNCLASSIFIED)
    return replace(result_a, labels=labels, essential=ess_a)
