"""End-to-end acceptance checks.

Each test records a one-line verdict that is printed in the pytest terminal
summary.  Criteria that cannot be met as stated are kept at their stated
tolerances and fail; the analysis is in the decisions ledger.
"""
import math
import os

import numpy as np
import pytest

from hsie.cli import RunConfig, build_problem, resonance_study, scatter_sweep
from hsie.curve import PoleParams, WaveClass
from hsie.errors import DegenerateFrequencyError, HsieError
from hsie.fem import (
    Block,
    BlockMesh,
    Material,
    ScalarBasis,
    Segment,
    assemble_interior,
    h1_relative_error,
    interface_mass,
    transverse_matrices,
)
from hsie.hardy1d import PairingKind, oracle_matrix, printed_long_matrices, solve_convected_1d
from hsie.spectral.dispersion import (
    DispersionContext,
    LambField,
    lamb_roots,
    real_lamb_roots,
    reference_field,
    zero_group_velocity_frequencies,
)
from hsie.spectral.modal import dirichlet_eigenvalues, essential_spectrum, principal_omega, transverse_modal_evp
from hsie.spectral.resonance import SpectrumLabel, classify_spectrum, resonances
from hsie.waveguide import WaveguidePort, assemble_global, scattering_solve

CONFIGS = os.path.join(os.path.dirname(__file__), os.pardir, "configs")
MAT = Material(1.0, 0.25, 1.0)
CTX = DispersionContext(MAT, 1.0)
PP = PoleParams(-0.374158 - 0.488609j, -0.775234 + 1.03962j)
LINE = PoleParams(-1 + 0.2j, -1 + 0.2j)
LINE_TWIN = PoleParams(-0.7 + 0.3j, -0.7 + 0.3j)


def closed_form_cut_ons(ctx, omega_max):
    return np.array([0.0] + ctx.cut_on_frequencies(omega_max))


# --- criterion 1 ----------------------------------------------------------------------------


def test_c1_exact_dtn_trace(criterion):
    s0 = (1 + 1j * math.sqrt(3)) / 2
    _, tr1 = solve_convected_1d(PoleParams(s0, s0), 1.0, 1.0, 2)
    _, tr2 = solve_convected_1d(PoleParams(0.2, 0.2), 0.4, 1.0, 2)
    e1 = abs(tr1 - (0.5 - 0.8660254037844386j))
    e2 = abs(tr2 - 5.0)
    ok = criterion("1", e1 <= 1e-10 and e2 <= 1e-10, f"errors {e1:.1e}, {e2:.1e} (tol 1e-10)")
    assert ok


# --- criterion 2 ----------------------------------------------------------------------------


def test_c2_printed_tables_match_oracle_up_to_one_constant(criterion):
    worst = 0.0
    for p in (PP, PoleParams(-0.6 - 0.3j, -1.1 + 0.9j)):
        printed = printed_long_matrices(p, 6)
        pr = np.concatenate([printed.mass.ravel(), printed.drift.ravel(), printed.stiffness.ravel()])
        orc = np.concatenate([oracle_matrix(p, 6, k).ravel() for k in (PairingKind.MASS, PairingKind.DRIFT,
                                                                        PairingKind.STIFFNESS)])
        c = np.vdot(pr, orc) / np.vdot(pr, pr)  # best single constant in least squares
        worst = max(worst, float(np.abs(c * pr - orc).max()))
    ok = criterion("2", worst <= 1e-8, f"max deviation after best global constant {worst:.2e} (tol 1e-8)")
    assert ok


# --- criterion 3 ----------------------------------------------------------------------------


def test_c3_zero_group_velocity_frequencies(criterion):
    found = np.array(zero_group_velocity_frequencies(CTX, (1.5, 1.8)))
    d1 = np.min(np.abs(found - 1.6260))
    d2 = np.min(np.abs(found - 1.7206))
    c_l = CTX.c_L * math.pi / 2
    d3 = np.min(np.abs(found - c_l))
    ok = d1 <= 1e-3 and d2 <= 1e-3 and d3 <= 1e-4 and abs(c_l - 1.7207) <= 1e-4
    criterion("3", ok, f"found {np.round(found, 7).tolist()}; offsets {d1:.1e}, {d2:.1e}; cut-on {d3:.1e}")
    assert ok


def test_c3_exact_zgv_is_reported_as_degenerate():
    """At the exact coalescence frequency the pipeline refuses to classify."""
    w = [f for f in zero_group_velocity_frequencies(CTX, (1.5, 1.8)) if abs(f - 1.626) < 1e-2][0]
    with pytest.raises(DegenerateFrequencyError):
        lamb_roots(CTX, w)


# --- criterion 4 ----------------------------------------------------------------------------


def test_c4_dispersion_evp_duality(criterion):
    trans = transverse_matrices(ScalarBasis(12), (-1.0, 1.0), 1)
    worst = 0.0
    for omega in np.linspace(0.85, 1.95, 10):
        for w in real_lamb_roots(CTX, float(omega)):
            vals = principal_omega(transverse_modal_evp(trans, MAT, w.kappa.real))
            worst = max(worst, float(np.min(np.abs(vals - omega))))
    ok = criterion("4", worst <= 1e-6, f"max |omega_evp - omega| {worst:.1e} (tol 1e-6)")
    assert ok


# --- criteria 5, 6 and 10: the Dirichlet/port strip -------------------------------------------


def strip_errors(omega, p, n_long_list, length=15.0, nx=60, ny=8, params=PP, field=None):
    mesh = BlockMesh([Block("s", 0, length, -1, 1, nx, ny, MAT)],
                     [Segment("dirichlet", 0, -1, 0, 1), Segment("port", length, -1, length, 1, "out")])
    interior = assemble_interior(mesh, ScalarBasis(p))
    dofs = interior[2]
    ref = reference_field(CTX, omega) if field is None else field
    out = []
    for nl in n_long_list:
        system = assemble_global(interior, [WaveguidePort("out", params, nl)])
        sol = scattering_solve(system, omega, None, ref.value)
        out.append(h1_relative_error(dofs, sol.coeffs[: dofs.n_vector], ref))
    return np.array(out)


def effective_orders(n, e):
    """``k(n) = log(e(n)/e(n+10)) / log((n+10)/n)`` for the pairs present in ``n``."""
    pos = {m: i for i, m in enumerate(n)}
    return [(m, math.log(e[pos[m]] / e[pos[m + 10]]) / math.log((m + 10) / m)) for m in n if m + 10 in pos]


# p = 4 reaches its plateau early, so it is sampled more densely
N_LONG = {4: list(range(2, 42, 2)), 8: [5, 10, 15, 20, 25, 30, 35, 40]}


@pytest.fixture(scope="module")
def c5_errors():
    return {p: strip_errors(1.66, p, n) for p, n in N_LONG.items()}


def test_c5_super_algebraic_convergence(criterion, c5_errors):
    details = []
    ok = True
    for p, e in c5_errors.items():
        n = N_LONG[p]
        plateau = e[-1]
        orders = [(m, k) for m, k in effective_orders(n, e) if e[n.index(m + 10)] >= 10 * plateau]
        ks = [k for _, k in orders]
        grows = len(ks) >= 2 and all(b > a for a, b in zip(ks, ks[1:]))
        ok &= grows
        details.append(f"p={p}: orders {[round(k, 2) for k in ks]}")
    drop = c5_errors[4][-1] / c5_errors[8][-1]
    ok &= drop >= 10
    details.append(f"plateau p=4 {c5_errors[4][-1]:.2e}, p=8 {c5_errors[8][-1]:.2e} (ratio {drop:.0f})")
    criterion("5", ok, "; ".join(details))
    assert ok


def test_c6a_failure_frequency_1626(criterion):
    try:
        err = float(strip_errors(1.6260, 4, [30])[0])
        ok = err > 0.1
        detail = f"relative H1 error {err:.2e} at n_long=30 (needs > 0.1 or a degenerate-frequency error)"
    except DegenerateFrequencyError:
        ok, detail = True, "DegenerateFrequencyError raised"
    criterion("6a", ok, detail)
    assert ok


def test_c6b_poor_convergence_near_cut_on(criterion):
    good = strip_errors(1.66, 4, [10, 20])
    bad = strip_errors(1.7205, 4, [10, 20])
    r_good, r_bad = good[1] / good[0], bad[1] / bad[0]
    ok = r_bad >= 5 * r_good
    criterion("6b", ok, f"e(20)/e(10): {r_good:.3f} at 1.66, {r_bad:.3f} at 1.7205")
    assert ok


def test_c10_exact_mode_representation(criterion):
    omega = 1.66
    back = [w for w in lamb_roots(CTX, omega) if w.wave_class is WaveClass.OUTGOING_PROPAGATING and w.kappa.real < 0][0]
    params = PoleParams(1j * back.kappa, -0.775234 + 1.03962j)
    field = LambField(CTX, omega, [back], [1.0])
    table = {p: strip_errors(omega, p, [2, 6, 10], length=6.0, nx=12, ny=4, params=params, field=field)
             for p in (3, 4, 5, 6)}
    flat = all(e.max() <= 1.05 * e.min() for e in table.values())
    # the remaining error is the finite element error: it vanishes under p-refinement
    ps = sorted(table)
    shrinking = all(table[b].max() <= 0.2 * table[a].min() for a, b in zip(ps, ps[1:]))
    ok = flat and shrinking
    spread = max(e.max() / e.min() - 1 for e in table.values())
    criterion("10", ok, f"max spread over n_long {spread:.1%}; errors by p "
                        f"{[f'{table[p][0]:.1e}' for p in ps]}")
    assert ok


# --- criterion 7 ----------------------------------------------------------------------------


@pytest.fixture(scope="module")
def c7_runs():
    p, nl = 6, 60
    mesh = BlockMesh([Block("s", 0, 5, -1, 1, 10, 4, MAT)],
                     [Segment("port", 0, -1, 0, 1, "left"), Segment("port", 5, -1, 5, 1, "right")])
    interior = assemble_interior(mesh, ScalarBasis(p))
    trans = transverse_matrices(ScalarBasis(p), (-1.0, 1.0), 4)
    out = {}
    for params in (LINE, LINE_TWIN):
        system = assemble_global(interior, [WaveguidePort("left", params, nl), WaveguidePort("right", params, nl)])
        res = resonances(system, [0.5, 1.0, 1.5, 2.0], krylov_dim=300, n_wanted=150)
        ess = essential_spectrum(params, trans, MAT, (0.0, -5.0), 300, 2.5)
        out[params] = (res, ess)
    (ra, ea), (rb, eb) = out[LINE], out[LINE_TWIN]
    return classify_spectrum(ra, rb, ea, eb, 0.02), trans


def test_c7a_curves_start_at_cut_ons(criterion, c7_runs):
    _, trans = c7_runs
    worst = 0.0
    for params in (LINE, PP):
        ess = essential_spectrum(params, trans, MAT, (0.0, -5.0), 300, 2.5)
        cut = closed_form_cut_ons(CTX, 2.6)
        worst = max(worst, max(float(np.min(np.abs(cut - c.start))) for c in ess.curves))
    ok = criterion("7a", worst <= 5e-3, f"max start offset {worst:.1e} (tol 5e-3)")
    assert ok


def test_c7b_eigenvalues_cluster_on_essential_spectrum(criterion, c7_runs):
    res, _ = c7_runs
    keep = res.converged & np.array([l is not SpectrumLabel.RESONANCE_CANDIDATE for l in res.labels])
    d = res.essential.distance(res.eigenvalues[keep])
    frac = float(np.mean(d <= 0.02))
    ok = criterion("7b", frac >= 0.9, f"{frac:.1%} of {keep.sum()} eigenvalues within 0.02 (needs 90%)")
    assert ok


def test_c7c_single_resonance_candidate(criterion, c7_runs):
    res, _ = c7_runs
    cands = res.with_label(SpectrumLabel.RESONANCE_CANDIDATE)
    ok = criterion("7c", len(cands) == 1, f"{len(cands)} ResonanceCandidate(s) {np.round(cands, 4).tolist()}")
    assert ok


# --- criterion 8 ----------------------------------------------------------------------------


def test_c8a_clamped_square_double_eigenvalue(criterion):
    w = dirichlet_eigenvalues((-0.5, 0.5, -0.5, 0.5), Material(1.0, 0.2, 4.0), 6, 8)
    pairs = [(a, b) for a, b in zip(w, w[1:]) if abs(b - a) <= 1e-6 * a and abs(a - 1.89) <= 0.02]
    ok = criterion("8a", len(pairs) >= 1, f"lowest eigenvalues {np.round(w[:4], 5).tolist()}")
    assert ok


def test_c8b_interface_resonances(criterion):
    cfg = RunConfig.load(os.path.join(CONFIGS, "interface_resonances.ini"))
    res = resonance_study(cfg)
    targets = [1.636 - 0.045j, 1.620 - 0.014j, 1.633 - 0.026j]
    dist = [float(np.min(np.abs(res.eigenvalues - t))) for t in targets]
    ok = criterion("8b", max(dist) <= 0.01, f"distances to targets {[f'{d:.1e}' for d in dist]} (tol 0.01)")
    assert ok


# --- criterion 9 (stretch) ------------------------------------------------------------------


@pytest.mark.slow
def test_c9_cavity_resonances_and_stress_peaks(criterion):
    cfg = RunConfig.load(os.path.join(CONFIGS, "cavity_resonances.ini"))
    res = resonance_study(cfg)
    cands = res.with_label(SpectrumLabel.RESONANCE_CANDIDATE)
    targets = [1.625 - 0.003j, 1.655 - 0.003j]
    dist = [float(np.min(np.abs(cands - t))) if len(cands) else np.inf for t in targets]
    sweep = scatter_sweep(RunConfig.load(os.path.join(CONFIGS, "cavity_scatter.ini")))
    w = sweep.column("omega").astype(float)
    s = sweep.column("stress_norm").astype(float)
    peaks = [w[i] for i in range(1, len(w) - 1) if s[i] > s[i - 1] and s[i] > s[i + 1]]
    off = [min(abs(pk - t.real) for pk in peaks) if peaks else np.inf for t in targets]
    ok = max(dist) <= 0.02 and max(off) <= 0.005
    criterion("9", ok, f"candidate distances {[f'{d:.1e}' for d in dist]}; peaks {np.round(peaks, 3).tolist()} "
                       "(stretch)")
    assert ok
