import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, strategies as st

from conftest import LINE
from hsie.curve import PoleParams, gamma_point
from hsie.fem import Material, ScalarBasis, transverse_matrices
from hsie.spectral.modal import (
    EssentialCurve,
    EssentialSpectrum,
    dirichlet_eigenvalues,
    essential_spectrum,
    modal_matrices,
    principal_omega,
    transverse_modal_evp,
)

MAT = Material(1.0, 0.25, 1.0)
TRANS = transverse_matrices(ScalarBasis(8), (-1.0, 1.0), 2)
CUT_ONS = [0.0, 0.993459, 1.720721, 1.986918]


def test_cut_on_frequencies_at_zero_wavenumber():
    w = principal_omega(transverse_modal_evp(TRANS, MAT, 0.0))
    w = np.sort(w.real)
    assert w[0] == pytest.approx(0.0, abs=1e-6) and w[1] == pytest.approx(0.0, abs=1e-6)
    assert w[2:5] == pytest.approx(CUT_ONS[1:], abs=1e-6)


@given(st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False))
def test_modal_matrix_symmetry(k):
    a_pos, b = modal_matrices(TRANS, MAT, k)
    a_neg, _ = modal_matrices(TRANS, MAT, -k)
    assert np.allclose(a_neg, a_pos.T, atol=1e-12)
    assert np.allclose(b, b.T)


@given(st.floats(-3, 3))
def test_modal_matrix_hermitian_for_real_wavenumber(k):
    a, _ = modal_matrices(TRANS, MAT, k)
    assert np.allclose(a, a.conj().T, atol=1e-12)


def test_modal_evp_matches_lamb_root():
    """A real Lamb root at omega is an eigenvalue omega^2 of the discrete strip problem."""
    from hsie.spectral.dispersion import DispersionContext, real_lamb_roots

    ctx = DispersionContext(MAT, 1.0)
    for w in real_lamb_roots(ctx, 1.3):
        vals = transverse_modal_evp(TRANS, MAT, w.kappa.real)
        assert np.min(np.abs(vals - 1.3**2)) <= 1e-8


def test_principal_omega_branch():
    assert principal_omega(4.0) == pytest.approx(2.0)
    assert principal_omega(-4.0) == pytest.approx(2.0j)
    w = principal_omega(np.array([1 - 1j, -1 - 1j, -1 + 1j]))
    assert np.all(w.real >= 0)


def test_essential_spectrum_starts_at_cut_ons():
    es = essential_spectrum(PoleParams(*LINE), TRANS, MAT, n_samples=60)
    starts = sorted(c.start.real for c in es.curves)
    assert starts[:5] == pytest.approx([0.0, 0.0] + CUT_ONS[1:], abs=1e-5)
    for c in es.curves:
        assert len(c.omega) == 60


def test_essential_spectrum_line_enters_backward_window():
    es = essential_spectrum(PoleParams(*LINE), TRANS, MAT, n_samples=150)
    hits = [c for c in es.curves
            if np.any((c.omega.real > 1.58) & (c.omega.real < 1.65) & (c.omega.imag > 0))]
    assert len(hits) >= 1


def test_essential_spectrum_sample_points_lie_on_the_curve():
    p = PoleParams(-0.374158 - 0.488609j, -0.775234 + 1.03962j)
    es = essential_spectrum(p, TRANS, MAT, r_range=(-0.5, -2.0), n_samples=4)
    c = es.curves[0]
    assert np.allclose(1j * c.kappa, gamma_point(p, c.r))


def test_essential_spectrum_reflected_range_same_set():
    p = PoleParams(*LINE)
    a = essential_spectrum(p, TRANS, MAT, r_range=(0.0, -2.0), n_samples=9).points()
    b = essential_spectrum(p, TRANS, MAT, r_range=(0.0, 2.0), n_samples=9).points()
    for w in a:
        assert np.min(np.abs(b - w)) <= 1e-8 * max(1, abs(w))


def test_essential_spectrum_single_sample_and_validation():
    es = essential_spectrum(PoleParams(*LINE), TRANS, MAT, n_samples=1)
    assert all(len(c.omega) == 1 for c in es.curves)
    with pytest.raises(ValueError):
        essential_spectrum(PoleParams(*LINE), TRANS, MAT, n_samples=0)


def test_distance_to_polylines():
    c = EssentialCurve(np.zeros(3), np.zeros(3), np.array([0.0, 1.0, 1.0 + 1.0j]))
    es = EssentialSpectrum(PoleParams(*LINE), [c])
    d = es.distance([0.5 + 0.25j, 2.0 + 0.5j, -1.0])
    assert d == pytest.approx([0.25, 1.0, 1.0])


def _clamped_oracle(p):
    """Dense eigenvalues of the clamped square, assembled independently of the block mesh helper."""
    from hsie.fem import Block, BlockMesh, Segment, assemble_interior

    mat = Material(1.0, 0.2, 4.0)
    segs = [Segment("dirichlet", -0.5, -0.5, 0.5, -0.5), Segment("dirichlet", 0.5, -0.5, 0.5, 0.5),
            Segment("dirichlet", -0.5, 0.5, 0.5, 0.5), Segment("dirichlet", -0.5, -0.5, -0.5, 0.5)]
    a, b, dofs = assemble_interior(BlockMesh([Block("c", -0.5, 0.5, -0.5, 0.5, 4, 4, mat)], segs), ScalarBasis(p))
    free = np.setdiff1d(np.arange(dofs.n_vector), dofs.dirichlet_dofs())
    vals = sla.eigvals(a[free][:, free].toarray(), b[free][:, free].toarray())
    return np.sort(np.sqrt(vals.real))


def test_dirichlet_eigenvalues_oracle_and_multiplicity():
    mat = Material(1.0, 0.2, 4.0)
    w4 = dirichlet_eigenvalues((-0.5, 0.5, -0.5, 0.5), mat, 4, 8)
    assert w4 == pytest.approx(_clamped_oracle(4)[:8], rel=1e-9)
    w = dirichlet_eigenvalues((-0.5, 0.5, -0.5, 0.5), mat, 6, 8)
    # first pair is degenerate under the square's rotation symmetry
    assert w[0] == pytest.approx(1.8972, abs=5e-4)
    assert w[1] - w[0] <= 1e-8


def test_dirichlet_eigenvalues_decrease_with_p():
    mat = Material(1.0, 0.2, 4.0)
    prev = np.inf
    for p in (2, 3, 4, 5, 6):
        w0 = dirichlet_eigenvalues((-0.5, 0.5, -0.5, 0.5), mat, p, 1)[0]
        assert w0 <= prev + 1e-12
        prev = w0
