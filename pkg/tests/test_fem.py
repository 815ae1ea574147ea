import math

import numpy as np
import pytest
import scipy.linalg as sla
import scipy.sparse.linalg as spla
from hypothesis import given, strategies as st

from hsie.errors import MeshError
from hsie.fem import (
    Block,
    BlockMesh,
    Material,
    ScalarBasis,
    Segment,
    assemble_interior,
    boundary_interpolant,
    dirichlet_lift,
    element_field,
    evaluate,
    h1_norms,
    h1_relative_error,
    interface_mass,
    lame_from,
    stress_norm,
    transverse_matrices,
)

MAT = Material(1.0, 0.25, 1.0)


def box_segments(x0, x1, y0, y1, kind="dirichlet"):
    return [
        Segment(kind, x0, y0, x1, y0),
        Segment(kind, x1, y0, x1, y1),
        Segment(kind, x0, y1, x1, y1),
        Segment(kind, x0, y0, x0, y1),
    ]


def two_by_two(p, kind=None, mat=MAT):
    blocks = [
        Block("a", 0, 1, 0, 1, 2, 1, mat),
        Block("b", 1, 2, 0, 1, 1, 1, mat),
        Block("c", 0, 1, 1, 2, 2, 2, mat),
        Block("d", 1, 2, 1, 2, 1, 2, mat),
    ]
    segs = box_segments(0, 2, 0, 2, kind) if kind else []
    return assemble_interior(BlockMesh(blocks, segs), ScalarBasis(p))


def solve_dirichlet(interior, field):
    a, _, dofs = interior
    red = dirichlet_lift(a, None, dofs, field)
    x = spla.spsolve(red.matrix.tocsc(), red.rhs)
    return red.expand(x)


def linear_field(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.array([0.3 + 0.5 * x - 0.2 * y, -0.1 + 0.4 * x + 0.7 * y])


def test_lame_examples():
    assert lame_from(1, 0.25) == pytest.approx((0.4, 0.4))
    assert lame_from(1, 0.2) == pytest.approx((0.4166667, 0.2777778), abs=1e-7)
    assert lame_from(2, 0.25) == pytest.approx((0.8, 0.8))
    with pytest.raises(ValueError):
        lame_from(1, 0.5)


def test_wave_speeds():
    m = Material(1.0, 0.25, 1.0)
    assert m.c_L == pytest.approx(math.sqrt(1.2)) and m.c_T == pytest.approx(math.sqrt(0.4))


def test_transverse_p1_unit_interval():
    t = transverse_matrices(ScalarBasis(1), (0.0, 1.0))
    assert np.allclose(t.mass, [[1 / 3, 1 / 6], [1 / 6, 1 / 3]])
    assert np.allclose(t.stiffness, [[1, -1], [-1, 1]])
    # stored with the derivative on the row index; the hat-function table is its transpose
    assert np.allclose(t.drift.T, [[-0.5, 0.5], [-0.5, 0.5]])


@pytest.mark.parametrize("p,ne", [(1, 1), (3, 2), (6, 4)])
def test_transverse_identities(p, ne):
    basis = ScalarBasis(p)
    t = transverse_matrices(basis, (-1.0, 1.0), ne)
    const = np.zeros(t.n)
    const[: ne + 1] = 1.0
    assert np.allclose(t.stiffness @ const, 0, atol=1e-12)
    assert np.all(np.linalg.eigvalsh(t.mass) > 0)
    assert np.all(np.linalg.eigvalsh(t.stiffness) > -1e-12)
    # integration by parts: D + D^T = [phi_l phi_m] evaluated between the ends
    bnd = np.zeros_like(t.mass)
    bnd[ne, ne] = 1.0  # right end vertex
    bnd[0, 0] = -1.0
    assert np.allclose(t.drift + t.drift.T, bnd, atol=1e-12)


def test_transverse_nested_under_p_enrichment():
    lo = transverse_matrices(ScalarBasis(3), (-1.0, 1.0))
    hi = transverse_matrices(ScalarBasis(6), (-1.0, 1.0))
    assert np.allclose(hi.mass[:4, :4], lo.mass)
    assert np.allclose(hi.stiffness[:4, :4], lo.stiffness)


def test_basis_trace_separability():
    b = ScalarBasis(5)
    v = b.values(np.array([-1.0, 1.0]))
    assert np.allclose(v[2:], 0)
    assert np.allclose(v[:2], np.eye(2))


def test_rigid_motions_in_kernel():
    a, b, dofs = assemble_interior(BlockMesh([Block("q", 0, 1, 0, 1, 1, 1, MAT)]), ScalarBasis(3))
    trans = boundary_interpolant_all(dofs, lambda x, y: np.array([np.ones_like(x), np.zeros_like(x)]))
    rot = boundary_interpolant_all(dofs, lambda x, y: np.array([-y, x]))
    assert np.abs(a @ trans).max() <= 1e-12
    assert np.abs(a @ rot).max() <= 1e-12


def boundary_interpolant_all(dofs, field):
    # exact for fields linear in x and y: vertex values only
    out = np.zeros(dofs.n_vector, dtype=complex)
    for el in dofs.elements:
        corners = [(el.x0, el.y0), (el.x1, el.y0), (el.x0, el.y1), (el.x1, el.y1)]
        for (x, y) in corners:
            from hsie.fem import _key

            d = dofs.vertex[_key(x, y)]
            v = field(np.array([x]), np.array([y])).reshape(2)
            out[2 * d], out[2 * d + 1] = v
    return out


def test_floating_kernel_is_rigid_body_space():
    a, b, _ = assemble_interior(BlockMesh([Block("q", 0, 2, 0, 1, 2, 1, MAT)]), ScalarBasis(2))
    ev = sla.eigh(a.toarray().real, b.toarray().real, eigvals_only=True)
    assert np.all(np.abs(ev[:3]) <= 1e-10)
    assert ev[3] > 1e-3
    assert np.all(np.linalg.eigvalsh(b.toarray().real) > 0)
    assert abs(a - a.T).max() == 0 and abs(b - b.T).max() == 0


@pytest.mark.parametrize("p", [1, 3])
def test_patch_test(p):
    interior = two_by_two(p, "dirichlet")
    u = solve_dirichlet(interior, linear_field)
    dofs = interior[2]
    pts = np.array([[0.3, 0.7], [1.5, 1.2], [0.9, 1.9]])
    assert np.allclose(evaluate(dofs, u, pts), linear_field(pts[:, 0], pts[:, 1]).T, atol=1e-12)
    a = interior[0]
    red = dirichlet_lift(a, None, dofs, linear_field)
    assert np.abs(red.rhs + 0).max() > 0  # data enters the right-hand side
    assert np.abs((a @ u)[red.free]).max() <= 1e-12


def test_dirichlet_lift_zero_data():
    a, _, dofs = two_by_two(2, "dirichlet")
    rhs = np.arange(dofs.n_vector, dtype=complex)
    red = dirichlet_lift(a, rhs, dofs, None)
    assert np.array_equal(red.rhs, rhs[red.free])
    with pytest.raises(ValueError):
        bad = np.full(dofs.n_vector, np.nan)
        dirichlet_lift(a, None, dofs, bad)


def test_projection_error_decreases_with_p():
    field = lambda x, y: np.array([np.sin(2 * x) * np.cos(y), np.exp(0.5 * x) * y])
    errs = []
    for p in (1, 2, 3, 4, 5):
        dofs = two_by_two(p, "dirichlet")[2]
        c = boundary_interpolant(dofs, field)
        edge = [e for e in dofs.boundary_edges if e.a[1] == 0.0 and e.b[1] == 0.0]
        t = np.linspace(0, 2, 41)
        u = evaluate(dofs, c, np.column_stack([t, np.zeros_like(t)]))
        errs.append(np.abs(u.T - field(t, 0 * t)).max())
        assert edge
    assert all(e1 < e0 for e0, e1 in zip(errs, errs[1:]))


def test_interface_mass_examples():
    mesh = BlockMesh([Block("sq", 0, 1, 0, 1, 2, 2, MAT), Block("out", 1, 2, 0, 1, 2, 2, MAT)])
    dofs = assemble_interior(mesh, ScalarBasis(1))[2]
    assert interface_mass(dofs, "sq", 0.0).nnz == 0
    m = interface_mass(dofs, "sq", 1.5)
    u = np.zeros(dofs.n_vector)
    u[0::2] = 1.0
    assert (u @ m @ u).real == pytest.approx(4 * 1.5)
    m2 = interface_mass(dofs, "sq", 3.0)
    assert abs(m2 - 2 * m).max() < 1e-14
    assert abs(m - m.T).max() == 0


def test_interface_must_be_closed():
    dofs = assemble_interior(BlockMesh([Block("sq", 0, 1, 0, 1, 2, 2, MAT)]), ScalarBasis(1))[2]
    with pytest.raises(MeshError):
        interface_mass(dofs, [Segment("neumann", 0, 0, 1, 0)], 1.0)


def test_mesh_errors():
    with pytest.raises(MeshError):
        BlockMesh([Block("a", 0, 2, 0, 1, 1, 1, MAT), Block("b", 1, 3, 0, 1, 1, 1, MAT)])
    with pytest.raises(MeshError):
        assemble_interior(BlockMesh([Block("a", 0, 1, 0, 1, 1, 2, MAT), Block("b", 1, 2, 0, 1, 1, 3, MAT)]), ScalarBasis(1))
    dofs = assemble_interior(BlockMesh([Block("a", 0, 1, 0, 1, 1, 1, MAT)]), ScalarBasis(1))[2]
    with pytest.raises(MeshError):
        evaluate(dofs, np.zeros(dofs.n_vector), [[3.0, 3.0]])


def test_stress_norm_examples():
    interior = two_by_two(1, "dirichlet")
    dofs = interior[2]
    const = solve_dirichlet(interior, lambda x, y: np.array([np.ones_like(x), 2 * np.ones_like(x)]))
    assert stress_norm(dofs, const) <= 1e-12
    u = solve_dirichlet(interior, linear_field)
    # grad = [[0.5, -0.2], [0.4, 0.7]] -> eps = [[0.5, 0.1], [0.1, 0.7]], tr = 1.2
    mu, lam = MAT.mu, MAT.lam
    sig = np.array([[2 * mu * 0.5 + lam * 1.2, 2 * mu * 0.1], [2 * mu * 0.1, 2 * mu * 0.7 + lam * 1.2]])
    expected = math.sqrt(np.sum(sig**2) * 0.5)  # element (0, 0.5) x (0, 1) of block a
    assert stress_norm(dofs, u, (0, 0.5, 0, 1)) == pytest.approx(expected, abs=1e-10)


def test_continuity_across_elements():
    interior = two_by_two(4, "dirichlet")
    dofs = interior[2]
    field = lambda x, y: np.array([np.sin(x + y), np.cos(x * y)])
    u = solve_dirichlet(interior, field)
    for el in dofs.elements:
        for tx, ty in ((-1, -1), (1, -1), (-1, 1), (1, 1)):
            x = el.x0 if tx < 0 else el.x1
            y = el.y0 if ty < 0 else el.y1
            here = element_field(dofs, el, u, np.array([tx]), np.array([ty]))[0][:, 0]
            for other in dofs.elements:
                if other is el or not (other.x0 <= x <= other.x1 and other.y0 <= y <= other.y1):
                    continue
                ox = -1 if x == other.x0 else 1
                oy = -1 if y == other.y0 else 1
                there = element_field(dofs, other, u, np.array([ox]), np.array([oy]))[0][:, 0]
                assert np.abs(here - there).max() <= 1e-12


def _fe_field(dofs, u):
    def ref(x, y):
        vals = np.empty((2, len(x)), dtype=complex)
        grads = np.empty((2, 2, len(x)), dtype=complex)
        for i, (xi, yi) in enumerate(zip(x, y)):
            el = dofs.element_at(xi, yi)
            tx = 2 * (xi - el.x0) / (el.x1 - el.x0) - 1
            ty = 2 * (yi - el.y0) / (el.y1 - el.y0) - 1
            v, g = element_field(dofs, el, u, np.array([tx]), np.array([ty]))
            vals[:, i], grads[:, :, i] = v[:, 0], g[:, :, 0]
        return vals, grads

    return ref


def test_h1_error_examples():
    interior = two_by_two(2, "dirichlet")
    dofs = interior[2]
    u = solve_dirichlet(interior, linear_field)
    ref = _fe_field(dofs, u)
    assert h1_relative_error(dofs, u, ref) <= 1e-13

    def bump(x, y):
        b = np.array([np.sin(np.pi * x / 2) * np.sin(np.pi * y / 2), 0 * x])
        g = np.zeros((2, 2, len(x)))
        g[0, 0] = np.pi / 2 * np.cos(np.pi * x / 2) * np.sin(np.pi * y / 2)
        g[0, 1] = np.pi / 2 * np.sin(np.pi * x / 2) * np.cos(np.pi * y / 2)
        return b, g

    bnorm = math.sqrt(1.0 + 2 * (np.pi / 2) ** 2 * 1.0)  # L2 + H1 seminorm parts over (0,2)^2
    shifted = lambda x, y: tuple(r + s for r, s in zip(ref(x, y), bump(x, y)))
    err, refn = h1_norms(dofs, u, shifted, quad_order=10)
    assert err == pytest.approx(bnorm, rel=1e-8)
    assert h1_relative_error(dofs, u, shifted, quad_order=10) == pytest.approx(bnorm / refn, rel=1e-12)


def test_h1_error_decreases_with_p():
    """Dirichlet problem whose exact solution is a single Lamb mode."""
    from hsie.spectral.dispersion import DispersionContext, LambField, lamb_roots, outgoing

    omega = 0.6
    ctx = DispersionContext(MAT, 1.0)
    mode = [w for w in outgoing(lamb_roots(ctx, omega)) if w.wave_class.propagating][0]
    ref = LambField(ctx, omega, [mode], [1.0])
    errs = []
    for p in (1, 2, 3, 4, 5):
        mesh = BlockMesh([Block("s", 0, 2, -1, 1, 2, 2, MAT)], box_segments(0, 2, -1, 1))
        a, b, dofs = assemble_interior(mesh, ScalarBasis(p))
        red = dirichlet_lift(a - omega**2 * b, None, dofs, ref.value)
        u = red.expand(spla.spsolve(red.matrix.tocsc(), red.rhs))
        errs.append(h1_relative_error(dofs, u, ref))
    assert all(e1 < e0 for e0, e1 in zip(errs, errs[1:]))
    assert errs[-1] < 1e-4


def test_assembly_deterministic():
    a1, b1, _ = two_by_two(3)
    a2, b2, _ = two_by_two(3)
    assert np.array_equal(a1.data, a2.data) and np.array_equal(a1.indices, a2.indices)
    assert np.array_equal(b1.data, b2.data)


@given(st.floats(0.1, 10), st.floats(0.01, 0.49))
def test_lame_invariants(E, nu):
    mu, lam = lame_from(E, nu)
    assert mu == pytest.approx(E / (2 * (1 + nu)))
    assert lam == pytest.approx(E * nu / ((1 + nu) * (1 - 2 * nu)))
    m = Material(E, nu, 1.0)
    assert m.c_L > m.c_T


@given(st.integers(1, 7), st.floats(-3, 0), st.floats(0.1, 4), st.integers(1, 4))
def test_transverse_mass_integrates_constants(p, a, length, ne):
    t = transverse_matrices(ScalarBasis(p), (a, a + length), ne)
    one = np.zeros(t.n)
    one[: ne + 1] = 1.0  # vertex functions sum to one
    assert one @ t.mass @ one == pytest.approx(length)
    assert np.allclose(t.stiffness @ one, 0, atol=1e-12)
