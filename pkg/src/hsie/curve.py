"""Two-pole separating curves and the choice of the pole parameters.

A pair of complex poles ``(s0, s1)`` defines the curve

    g(s) = |s - s0| |s - s1| / (|s + s0| |s + s1|) = 1,

with the outgoing side ``g < 1`` (containing the poles) and the incoming
side ``g > 1``.  Laplace-domain points ``i*kappa`` of outgoing modes have to
lie on the outgoing side.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateCurveError, NotAdmissibleError, SeparationError

ON_TOL = 1e-9


@dataclass(frozen=True)
class PoleParams:
    s0: complex
    s1: complex

    def __post_init__(self):
        object.__setattr__(self, "s0", complex(self.s0))
        object.__setattr__(self, "s1", complex(self.s1))
        if self.s0 == 0 or self.s1 == 0:
            raise ValueError("poles must be nonzero")

    def scaled(self, c: float) -> "PoleParams":
        return PoleParams(c * self.s0, c * self.s1)

    def swapped(self) -> "PoleParams":
        return PoleParams(self.s1, self.s0)


class CurveSide(enum.Enum):
    PLUS = "plus"
    ON = "on"
    MINUS = "minus"


class Branch(enum.Enum):
    SYMMETRIC = "S"
    ANTISYMMETRIC = "A"


class WaveClass(enum.Enum):
    OUTGOING_PROPAGATING = "outgoing_propagating"
    INCOMING_PROPAGATING = "incoming_propagating"
    OUTGOING_EVANESCENT = "outgoing_evanescent"
    INCOMING_EVANESCENT = "incoming_evanescent"

    @property
    def outgoing(self) -> bool:
        return self in (WaveClass.OUTGOING_PROPAGATING, WaveClass.OUTGOING_EVANESCENT)

    @property
    def propagating(self) -> bool:
        return self in (WaveClass.OUTGOING_PROPAGATING, WaveClass.INCOMING_PROPAGATING)


@dataclass(frozen=True)
class ClassifiedWavenumber:
    kappa: complex
    branch: Branch
    wave_class: WaveClass
    group_velocity: Optional[float] = None

    @property
    def outgoing(self) -> bool:
        return self.wave_class.outgoing

    @property
    def laplace_point(self) -> complex:
        """The point ``i*kappa`` where the mode's Laplace transform has its pole."""
        return 1j * self.kappa


def g_value(p: PoleParams, s) -> float:
    """Membership function of the curve; 0 at the poles, +inf at their mirrors."""
    s = np.asarray(s, dtype=complex)
    num = np.abs(s - p.s0) * np.abs(s - p.s1)
    den = np.abs(s + p.s0) * np.abs(s + p.s1)
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.where(den == 0, np.inf, num / np.where(den == 0, 1.0, den))
    return g[()] if g.ndim == 0 else g


def side_of_curve(p: PoleParams, s, tol: float = ON_TOL) -> CurveSide:
    if tol <= 0:
        raise ValueError("tol must be positive")
    g = g_value(p, s)
    if g < 1 - tol:
        return CurveSide.PLUS
    if g > 1 + tol:
        return CurveSide.MINUS
    return CurveSide.ON


def _bracket(p: PoleParams, r):
    c = abs(p.s0) ** 2 * p.s1 + abs(p.s1) ** 2 * p.s0
    return r * r * (p.s0 + p.s1) + c


def gamma_point(p: PoleParams, r):
    """Point of the curve with modulus ``|r|`` (explicit parameterization)."""
    r = np.asarray(r, dtype=float)
    w = _bracket(p, r)
    aw = np.abs(w)
    if np.any(aw == 0):
        raise DegenerateCurveError(f"parameterization degenerate at r={r[aw == 0]}")
    out = -1j * r * w / aw
    return out[()] if out.ndim == 0 else out


def gamma_derivative(p: PoleParams, r):
    """d gamma / d r, used for contour quadrature along the curve."""
    r = np.asarray(r, dtype=float)
    w = _bracket(p, r)
    dw = 2 * r * (p.s0 + p.s1)
    aw = np.abs(w)
    daw = np.real(np.conj(w) * dw) / aw
    unit = w / aw
    dunit = (dw * aw - w * daw) / aw**2
    out = -1j * (unit + r * dunit)
    return out[()] if out.ndim == 0 else out


def admissible(p: PoleParams) -> bool:
    s0, s1 = p.s0, p.s1
    return (
        s0.real < 0
        and s1.real < 0
        and (s0 + s1).imag > 0
        and abs(s0) ** 2 * s1.imag + abs(s1) ** 2 * s0.imag < 0
    )


def zeta(p: PoleParams) -> float:
    """Nonzero crossing ``i*zeta`` of the curve with the positive imaginary axis."""
    if not admissible(p):
        raise NotAdmissibleError(f"{p} violates the admissibility conditions")
    num = abs(p.s0) ** 2 * p.s1.imag + abs(p.s1) ** 2 * p.s0.imag
    return math.sqrt(-num / (p.s0 + p.s1).imag)


def params_case1(direction_real_part: float, direction_imag_part: float, modulus: float = None) -> PoleParams:
    """Equal poles ``s0 = s1`` pointing along the requested direction.

    The curve is then the straight line ``i (s0 + s1) R``.  Without an
    explicit modulus the requested direction is used as given.
    """
    if direction_real_part >= 0:
        raise ValueError("the direction must have a negative real part")
    if direction_imag_part <= 0:
        raise ValueError("the direction must have a positive imaginary part")
    d = complex(direction_real_part, direction_imag_part)
    if modulus is not None:
        d = modulus * d / abs(d)
    return PoleParams(d, d)


def separates(p: PoleParams, spectrum: Sequence[ClassifiedWavenumber]):
    """Check that outgoing points ``i*kappa`` lie in the outgoing side and incoming ones outside.

    Returns ``(ok, margin)`` with ``margin = min |g - 1|`` over the spectrum.
    """
    ok = True
    margin = math.inf
    for w in spectrum:
        g = float(g_value(p, w.laplace_point))
        margin = min(margin, abs(g - 1.0))
        if w.outgoing and not g < 1:
            ok = False
        if not w.outgoing and not g > 1:
            ok = False
    return ok, margin


def _violations(p, spectrum):
    out = []
    for w in spectrum:
        g = float(g_value(p, w.laplace_point))
        if (w.outgoing and not g < 1) or (not w.outgoing and not g > 1):
            out.append(w)
    return out


def default_theta(spectrum: Sequence[ClassifiedWavenumber]) -> float:
    """Midpoint between the backward outgoing wavenumber and the next real outgoing one."""
    backward = [
        abs(w.kappa.real)
        for w in spectrum
        if w.wave_class is WaveClass.OUTGOING_PROPAGATING and w.kappa.real < 0
    ]
    if not backward:
        raise ValueError("spectrum contains no backward outgoing wavenumber")
    kb = max(backward)
    larger = [
        w.kappa.real
        for w in spectrum
        if w.wave_class is WaveClass.OUTGOING_PROPAGATING and w.kappa.real > kb
    ]
    if not larger:
        raise ValueError("no real outgoing wavenumber beyond the backward one")
    return 0.5 * (kb + min(larger))


def params_case2(theta: float, seed: PoleParams, spectrum, steps: int = 64, min_margin: float = 1e-6):
    """Curved poles crossing the imaginary axis at ``0`` and ``+-i*theta``.

    ``seed`` is scaled so that its crossing sits at ``theta``; if that does
    not separate ``spectrum``, the second pole is pushed towards the mirror
    of the first along ``t = 0, 1/steps, ...`` until it does.
    """
    if theta is None:
        theta = default_theta(spectrum)
    if theta <= 0:
        raise ValueError("theta must be positive")
    base = seed.scaled(theta / zeta(seed))
    s0, s1 = base.s0, base.s1
    last = base
    for k in range(steps):
        t = k / steps
        mid = t * s0.conjugate() + (1 - t) * s1
        trial = PoleParams(s0, mid)
        if not admissible(trial):
            continue
        z = zeta(trial)
        cand = PoleParams(s0 * theta / z, mid * theta / z)
        last = cand
        ok, margin = separates(cand, spectrum)
        if ok and margin >= min_margin:
            return cand
    bad = _violations(last, spectrum)
    raise SeparationError(
        "no homotopy step separates the spectrum; violating wavenumbers: "
        + ", ".join(f"{w.kappa:.6g} ({w.wave_class.value})" for w in bad),
        violating=bad,
    )


def error_indicator(p: PoleParams, kappa) -> float:
    """Per-basis-function contraction factor of the Hardy expansion for mode ``kappa``."""
    return g_value(p, 1j * np.asarray(kappa, dtype=complex))
