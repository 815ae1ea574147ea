"""Plane-strain finite elements on block-structured rectangular meshes.

The interior domain is a union of axis-aligned rectangular blocks, each
subdivided into a uniform grid of rectangles.  On every rectangle the
scalar shape functions are tensor products of a 1D hierarchical basis
(two linear vertex functions plus integrated Legendre bubbles).  Since
all elements are aligned with the axes and share the orientation of the
coordinate axes, edge bubbles of neighbouring elements match without sign
corrections.

Displacement vectors are stored interleaved: global index ``2*s + c`` is
component ``c`` (0 for x, 1 for y) of scalar degree of freedom ``s``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from numpy.polynomial import legendre as npleg

from .errors import MeshError
from .linalg import as_csr, gauss_legendre

KEY_DIGITS = 10


# --- material -----------------------------------------------------------------------


def lame_from(E: float, nu: float) -> Tuple[float, float]:
    """Lame constants ``(mu, lambda)`` of the plane-strain model."""
    if not E > 0:
        raise ValueError("Young's modulus must be positive")
    if nu == 0.5:
        raise ValueError("nu = 1/2 is incompressible; lambda is infinite")
    if not 0 < nu < 0.5:
        raise ValueError("Poisson's ratio must lie in (0, 1/2)")
    mu = E / (2 * (1 + nu))
    lam = E * nu / ((1 + nu) * (1 - 2 * nu))
    return mu, lam


@dataclass(frozen=True)
class Material:
    E: float = 1.0
    nu: float = 0.25
    rho: float = 1.0

    def __post_init__(self):
        lame_from(self.E, self.nu)
        if not self.rho > 0:
            raise ValueError("density must be positive")

    @property
    def mu(self) -> float:
        return lame_from(self.E, self.nu)[0]

    @property
    def lam(self) -> float:
        return lame_from(self.E, self.nu)[1]

    @property
    def c_L(self) -> float:
        return math.sqrt((self.lam + 2 * self.mu) / self.rho)

    @property
    def c_T(self) -> float:
        return math.sqrt(self.mu / self.rho)


# --- 1D hierarchical basis ----------------------------------------------------------


@dataclass(frozen=True)
class ScalarBasis:
    """1D hierarchical shape functions of order ``p`` on the reference interval ``[-1, 1]``.

    Index 0 and 1 are the vertex functions ``(1 -+ t)/2``, index ``k >= 2``
    is the integrated Legendre polynomial ``int_{-1}^t P_{k-1}``, scaled to
    unit ``H^1`` seminorm.
    """

    p: int

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("polynomial order must be >= 1")

    @property
    def size(self) -> int:
        return self.p + 1

    def values(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty((self.p + 1, t.size))
        out[0] = 0.5 * (1 - t)
        out[1] = 0.5 * (1 + t)
        for k in range(2, self.p + 1):
            ck = np.zeros(k + 1)
            ck[k] = 1.0
            ck2 = np.zeros(k + 1)
            ck2[k - 2] = 1.0
            scale = math.sqrt((2 * k - 1) / 2.0) / (2 * k - 1)
            out[k] = scale * (npleg.legval(t, ck) - npleg.legval(t, ck2))
        return out

    def derivatives(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty((self.p + 1, t.size))
        out[0] = -0.5
        out[1] = 0.5
        for k in range(2, self.p + 1):
            c = np.zeros(k)
            c[k - 1] = 1.0
            out[k] = math.sqrt((2 * k - 1) / 2.0) * npleg.legval(t, c)
        return out

    def reference_matrices(self):
        """``(M, D, S)`` on ``[-1, 1]`` with ``D[a, b] = int N_a' N_b``."""
        x, w = gauss_legendre(self.p + 2)
        v = self.values(x)
        d = self.derivatives(x)
        return (v * w) @ v.T, (d * w) @ v.T, (d * w) @ d.T

    def element_matrices(self, a: float, b: float):
        h = b - a
        if not h > 0:
            raise MeshError(f"degenerate interval ({a}, {b})")
        m, d, s = self.reference_matrices()
        return 0.5 * h * m, d, (2.0 / h) * s


@dataclass(frozen=True)
class TransverseMatrices:
    """Surface matrices of a subdivided interval.

    DOF order: the ``n_elem + 1`` vertices from left to right, then the
    bubbles of each element in turn.
    """

    mass: np.ndarray
    drift: np.ndarray
    stiffness: np.ndarray
    breakpoints: np.ndarray
    p: int

    @property
    def n(self) -> int:
        return self.mass.shape[0]

    def reversed_orientation(self) -> "TransverseMatrices":
        """Same space with the coordinate direction reversed (``d/deta -> -d/deta``)."""
        return TransverseMatrices(self.mass, -self.drift, self.stiffness, self.breakpoints, self.p)


def interval_dofs(n_elem: int, p: int) -> np.ndarray:
    """Local-to-global DOF table for a subdivided interval (see :class:`TransverseMatrices`)."""
    table = np.empty((n_elem, p + 1), dtype=int)
    for e in range(n_elem):
        table[e, 0] = e
        table[e, 1] = e + 1
        table[e, 2:] = n_elem + 1 + e * (p - 1) + np.arange(p - 1)
    return table


def transverse_matrices(basis: ScalarBasis, interval, n_elem: int = 1) -> TransverseMatrices:
    """``M_t``, ``D_t``, ``S_t`` of the hierarchical space on ``interval`` split into ``n_elem`` pieces.

    ``interval`` may also be an explicit increasing array of breakpoints.
    """
    if np.ndim(interval) == 1 and len(interval) > 2:
        bp = np.asarray(interval, dtype=float)
    else:
        a, b = interval
        bp = np.linspace(a, b, n_elem + 1)
    if np.any(np.diff(bp) <= 0):
        raise MeshError("breakpoints must be strictly increasing")
    ne = len(bp) - 1
    p = basis.p
    n = ne + 1 + ne * (p - 1)
    m = np.zeros((n, n))
    d = np.zeros((n, n))
    s = np.zeros((n, n))
    table = interval_dofs(ne, p)
    for e in range(ne):
        me, de, se = basis.element_matrices(bp[e], bp[e + 1])
        idx = np.ix_(table[e], table[e])
        m[idx] += me
        d[idx] += de
        s[idx] += se
    return TransverseMatrices(m, d, s, bp, p)


# --- block mesh -----------------------------------------------------------------------


@dataclass
class Block:
    name: str
    x0: float
    x1: float
    y0: float
    y1: float
    nx: int
    ny: int
    material: Material = field(default_factory=Material)

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise MeshError(f"block {self.name!r} has non-positive extent")
        if self.nx < 1 or self.ny < 1:
            raise MeshError(f"block {self.name!r} needs at least one element per direction")

    def contains(self, x, y, tol=1e-12) -> bool:
        return self.x0 - tol <= x <= self.x1 + tol and self.y0 - tol <= y <= self.y1 + tol


@dataclass(frozen=True)
class Segment:
    """Axis-aligned boundary segment carrying a tag.

    ``kind`` is one of ``"dirichlet"``, ``"neumann"`` or ``"port"``; ports
    need a ``name``.
    """

    kind: str
    x0: float
    y0: float
    x1: float
    y1: float
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("dirichlet", "neumann", "port"):
            raise MeshError(f"unknown boundary kind {self.kind!r}")
        if self.x0 != self.x1 and self.y0 != self.y1:
            raise MeshError("boundary segments must be axis aligned")
        if self.kind == "port" and not self.name:
            raise MeshError("port segments need a name")

    @property
    def vertical(self) -> bool:
        return self.x0 == self.x1

    def covers(self, a, b, tol=1e-10) -> bool:
        """True if the straight edge ``a``-``b`` lies on this segment."""
        if self.vertical:
            lo, hi = sorted((self.y0, self.y1))
            return (
                abs(a[0] - self.x0) < tol
                and abs(b[0] - self.x0) < tol
                and lo - tol <= min(a[1], b[1])
                and max(a[1], b[1]) <= hi + tol
            )
        lo, hi = sorted((self.x0, self.x1))
        return (
            abs(a[1] - self.y0) < tol
            and abs(b[1] - self.y0) < tol
            and lo - tol <= min(a[0], b[0])
            and max(a[0], b[0]) <= hi + tol
        )


def _key(x, y):
    return (round(float(x), KEY_DIGITS) + 0.0, round(float(y), KEY_DIGITS) + 0.0)


@dataclass
class Element:
    index: int
    block: int
    x0: float
    x1: float
    y0: float
    y1: float
    dofs: np.ndarray  # scalar dofs in local order i*(p+1) + k


@dataclass
class BoundaryEdge:
    a: Tuple[float, float]
    b: Tuple[float, float]
    element: int
    side: str  # "left", "right", "bottom", "top"
    kind: str = "neumann"
    name: str = ""

    @property
    def vertical(self) -> bool:
        return self.side in ("left", "right")


class BlockMesh:
    """Conforming mesh assembled from rectangular blocks.

    Parameters
    ----------
    blocks : sequence of Block
        Non-overlapping rectangles; neighbouring blocks must share whole
        element edges (no hanging nodes).
    boundary : sequence of Segment
        Tags for exterior edges.  Untagged exterior edges are traction free.
    """

    def __init__(self, blocks: Sequence[Block], boundary: Sequence[Segment] = ()):
        if not blocks:
            raise MeshError("mesh needs at least one block")
        self.blocks = list(blocks)
        names = [b.name for b in self.blocks]
        if len(set(names)) != len(names):
            raise MeshError("block names must be unique")
        self.boundary = list(boundary)
        self._check_overlap()

    def _check_overlap(self):
        for i, a in enumerate(self.blocks):
            for b in self.blocks[i + 1:]:
                ox = min(a.x1, b.x1) - max(a.x0, b.x0)
                oy = min(a.y1, b.y1) - max(a.y0, b.y0)
                if ox > 1e-12 and oy > 1e-12:
                    raise MeshError(f"blocks {a.name!r} and {b.name!r} overlap")

    def block(self, name: str) -> Block:
        for b in self.blocks:
            if b.name == name:
                return b
        raise MeshError(f"no block named {name!r}")

    def block_index(self, name: str) -> int:
        return [b.name for b in self.blocks].index(self.block(name).name)

    @property
    def port_names(self) -> List[str]:
        return [s.name for s in self.boundary if s.kind == "port"]

    def cells(self):
        """Yield ``(block index, x0, x1, y0, y1)`` of every element, block by block."""
        for bi, b in enumerate(self.blocks):
            xs = np.linspace(b.x0, b.x1, b.nx + 1)
            ys = np.linspace(b.y0, b.y1, b.ny + 1)
            for i in range(b.nx):
                for j in range(b.ny):
                    yield bi, xs[i], xs[i + 1], ys[j], ys[j + 1]

    def locate(self, x: float, y: float):
        """Block containing ``(x, y)`` or ``None``."""
        for bi, b in enumerate(self.blocks):
            if b.contains(x, y):
                return bi
        return None


class DofMap:
    """Numbering of the scalar degrees of freedom for a mesh and a basis order."""

    def __init__(self, mesh: BlockMesh, basis: ScalarBasis):
        self.mesh = mesh
        self.basis = basis
        p = basis.p
        self.p = p
        vertex: Dict[tuple, int] = {}
        edge: Dict[tuple, int] = {}
        count = 0

        def vdof(pt):
            nonlocal count
            k = _key(*pt)
            if k not in vertex:
                vertex[k] = count
                count += 1
            return vertex[k]

        def edofs(a, b):
            nonlocal count
            k = (_key(*a), _key(*b))
            if k not in edge:
                edge[k] = count
                count += p - 1
            return edge[k] + np.arange(p - 1)

        self.elements: List[Element] = []
        edge_use: Dict[tuple, list] = {}
        for bi, x0, x1, y0, y1 in mesh.cells():
            loc = np.empty((p + 1, p + 1), dtype=int)
            xs = (x0, x1)
            ys = (y0, y1)
            for i in range(2):
                for k in range(2):
                    loc[i, k] = vdof((xs[i], ys[k]))
            if p > 1:
                for i in range(2):
                    loc[i, 2:] = edofs((xs[i], y0), (xs[i], y1))
                for k in range(2):
                    loc[2:, k] = edofs((x0, ys[k]), (x1, ys[k]))
                loc[2:, 2:] = count + np.arange((p - 1) ** 2).reshape(p - 1, p - 1)
                count += (p - 1) ** 2
            el = Element(len(self.elements), bi, x0, x1, y0, y1, loc.ravel())
            self.elements.append(el)
            for side, a, b in (
                ("left", (x0, y0), (x0, y1)),
                ("right", (x1, y0), (x1, y1)),
                ("bottom", (x0, y0), (x1, y0)),
                ("top", (x0, y1), (x1, y1)),
            ):
                edge_use.setdefault((_key(*a), _key(*b)), []).append((el.index, side, a, b))
        self.n_scalar = count
        self.vertex = vertex
        self.edge = edge
        self.boundary_edges: List[BoundaryEdge] = []
        for k, uses in edge_use.items():
            if len(uses) > 2:
                raise MeshError(f"edge {k} shared by more than two elements")
            if len(uses) == 1:
                ei, side, a, b = uses[0]
                self._check_exterior(a, b, side)
                be = BoundaryEdge(_key(*a), _key(*b), ei, side)
                for seg in mesh.boundary:
                    if seg.covers(a, b):
                        be.kind, be.name = seg.kind, seg.name
                self.boundary_edges.append(be)
        for seg in mesh.boundary:
            if not any(seg.covers(e.a, e.b) for e in self.boundary_edges):
                raise MeshError(f"boundary segment {seg} does not lie on the mesh boundary")

    def _check_exterior(self, a, b, side):
        # an unmatched edge must face the outside of the block union
        mx, my = 0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])
        h = max(abs(b[0] - a[0]), abs(b[1] - a[1]))
        off = {"left": (-1, 0), "right": (1, 0), "bottom": (0, -1), "top": (0, 1)}[side]
        px, py = mx + 1e-6 * h * off[0], my + 1e-6 * h * off[1]
        for blk in self.mesh.blocks:
            if blk.x0 < px < blk.x1 and blk.y0 < py < blk.y1:
                raise MeshError(
                    f"non-conforming interface near ({mx:g}, {my:g}): subdivisions of neighbouring blocks differ"
                )

    @property
    def n_vector(self) -> int:
        return 2 * self.n_scalar

    def edge_dofs(self, a, b) -> np.ndarray:
        """Scalar dofs of an element edge ``a -> b`` (increasing coordinate): vertices, then bubbles."""
        a, b = _key(*a), _key(*b)
        out = [self.vertex[a], self.vertex[b]]
        if self.p > 1:
            out.extend(self.edge[(a, b)] + np.arange(self.p - 1))
        return np.asarray(out, dtype=int)

    def dirichlet_scalar_dofs(self) -> np.ndarray:
        out = set()
        for e in self.boundary_edges:
            if e.kind == "dirichlet":
                out.update(self.edge_dofs(e.a, e.b).tolist())
        return np.array(sorted(out), dtype=int)

    def dirichlet_dofs(self) -> np.ndarray:
        """Vector dofs (both components) on Dirichlet edges."""
        s = self.dirichlet_scalar_dofs()
        return np.sort(np.concatenate([2 * s, 2 * s + 1]))

    def segment_edges(self, name: str) -> List[BoundaryEdge]:
        edges = [e for e in self.boundary_edges if e.kind == "port" and e.name == name]
        if not edges:
            raise MeshError(f"no boundary edges tagged as port {name!r}")
        return edges

    def trace(self, name: str):
        """Trace space of a port segment.

        Returns ``(dofs, transverse)`` where ``dofs`` are the scalar dofs in
        the order of :func:`transverse_matrices` along the increasing tangential
        coordinate and ``transverse`` the corresponding surface matrices.
        """
        edges = self.segment_edges(name)
        vertical = edges[0].vertical
        if any(e.vertical != vertical for e in edges):
            raise MeshError(f"port {name!r} is not straight")
        ax = 1 if vertical else 0
        edges = sorted(edges, key=lambda e: e.a[ax])
        bp = [edges[0].a[ax]] + [e.b[ax] for e in edges]
        for e0, e1 in zip(edges[:-1], edges[1:]):
            if abs(e0.b[ax] - e1.a[ax]) > 1e-10:
                raise MeshError(f"port {name!r} is not connected")
        ne = len(edges)
        p = self.p
        dofs = np.empty(ne + 1 + ne * (p - 1), dtype=int)
        table = interval_dofs(ne, p)
        for i, e in enumerate(edges):
            dofs[table[i]] = self.edge_dofs(e.a, e.b)
        trans = transverse_matrices(self.basis, np.asarray(bp) if ne > 1 else (bp[0], bp[1]), ne)
        return dofs, trans

    def element_at(self, x: float, y: float, tol: float = 1e-12) -> Element:
        for el in self.elements:
            if el.x0 - tol <= x <= el.x1 + tol and el.y0 - tol <= y <= el.y1 + tol:
                return el
        raise MeshError(f"point ({x}, {y}) lies outside the mesh")

    def elements_in(self, region) -> List[Element]:
        """Elements inside a region given as a block name or ``(x0, x1, y0, y1)``."""
        if isinstance(region, str):
            bi = self.mesh.block_index(region)
            return [e for e in self.elements if e.block == bi]
        if region is None:
            return list(self.elements)
        x0, x1, y0, y1 = region
        tol = 1e-12
        return [
            e
            for e in self.elements
            if e.x0 >= x0 - tol and e.x1 <= x1 + tol and e.y0 >= y0 - tol and e.y1 <= y1 + tol
        ]


# --- assembly ---------------------------------------------------------------------------


def elasticity_blocks(mu, lam, mx, dx, sx, my, dy, sy):
    """Stiffness of the plane-strain form for tensor-product spaces.

    The first factor belongs to the first coordinate and ``d`` carries the
    derivative on its row index.  Returns the 2x2 block matrix as a dense
    array ordered ``[component 1 | component 2]``.
    """
    a11 = (2 * mu + lam) * np.kron(sx, my) + mu * np.kron(mx, sy)
    a12 = mu * np.kron(dx.T, dy) + lam * np.kron(dx, dy.T)
    a21 = mu * np.kron(dx, dy.T) + lam * np.kron(dx.T, dy)
    a22 = (2 * mu + lam) * np.kron(mx, sy) + mu * np.kron(sx, my)
    return np.block([[a11, a12], [a21, a22]])


def _element_pair(basis: ScalarBasis, mat: Material, hx: float, hy: float):
    mx, dx, sx = basis.element_matrices(0.0, hx)
    my, dy, sy = basis.element_matrices(0.0, hy)
    a = elasticity_blocks(mat.mu, mat.lam, mx, dx, sx, my, dy, sy)
    m = mat.rho * np.kron(mx, my)
    z = np.zeros_like(m)
    b = np.block([[m, z], [z, m]])
    # exact symmetry; the quadrature products differ from their transposes in the last bit
    return 0.5 * (a + a.T), 0.5 * (b + b.T)


def _scatter(elements, mats, n):
    rows, cols, vals = [], [], []
    for el, k in zip(elements, mats):
        g = np.concatenate([2 * el.dofs, 2 * el.dofs + 1])
        rows.append(np.repeat(g, g.size))
        cols.append(np.tile(g, g.size))
        vals.append(k.ravel())
    if not rows:
        return sp.csr_matrix((n, n), dtype=complex)
    m = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    return as_csr(m)


def assemble_interior(mesh: BlockMesh, basis: ScalarBasis):
    """Stiffness and mass matrices of the interior problem.

    Returns
    -------
    A, B : scipy.sparse.csr_matrix
        ``a(u, v) = int 2 mu eps(u):eps(v) + lambda div u div v`` and
        ``b(u, v) = int rho u.v`` on the interleaved vector dofs.
    dofs : DofMap
    """
    dofs = DofMap(mesh, basis)
    cache = {}
    ks, ms = [], []
    for el in dofs.elements:
        hx, hy = el.x1 - el.x0, el.y1 - el.y0
        if hx <= 0 or hy <= 0:
            raise MeshError(f"element {el.index} is degenerate")
        mat = mesh.blocks[el.block].material
        key = (round(hx, 12), round(hy, 12), mat)
        if key not in cache:
            cache[key] = _element_pair(basis, mat, hx, hy)
        a, m = cache[key]
        ks.append(a)
        ms.append(m)
    n = dofs.n_vector
    a, b = _scatter(dofs.elements, ks, n), _scatter(dofs.elements, ms, n)
    # duplicate summation order differs between (i, j) and (j, i); averaging restores exact symmetry
    return as_csr(0.5 * (a + a.T)), as_csr(0.5 * (b + b.T)), dofs


def _chain_edges(dofs: DofMap, interface):
    """Element edges along an interface given as block name or list of segments."""
    if isinstance(interface, str):
        b = dofs.mesh.block(interface)
        segs = [
            Segment("neumann", b.x0, b.y0, b.x1, b.y0),
            Segment("neumann", b.x1, b.y0, b.x1, b.y1),
            Segment("neumann", b.x0, b.y1, b.x1, b.y1),
            Segment("neumann", b.x0, b.y0, b.x0, b.y1),
        ]
    else:
        segs = list(interface)
    out = []
    for a, b in _all_edges(dofs):
        if any(s.covers(a, b) for s in segs):
            out.append((a, b))
    covered = sum(abs(b[0] - a[0]) + abs(b[1] - a[1]) for a, b in out)
    length = sum(abs(s.x1 - s.x0) + abs(s.y1 - s.y0) for s in segs)
    if abs(covered - length) > 1e-9 * max(1.0, length):
        raise MeshError("interface is not a union of element edges")
    degree: Dict[tuple, int] = {}
    for a, b in out:
        degree[a] = degree.get(a, 0) + 1
        degree[b] = degree.get(b, 0) + 1
    if not out or any(d != 2 for d in degree.values()):
        raise MeshError("interface chain is not closed")
    return out


def _all_edges(dofs: DofMap):
    seen = set()
    for el in dofs.elements:
        for a, b in (
            ((el.x0, el.y0), (el.x0, el.y1)),
            ((el.x1, el.y0), (el.x1, el.y1)),
            ((el.x0, el.y0), (el.x1, el.y0)),
            ((el.x0, el.y1), (el.x1, el.y1)),
        ):
            k = (_key(*a), _key(*b))
            if k not in seen:
                seen.add(k)
                yield k


def interface_mass(dofs: DofMap, interface, alpha: complex) -> sp.csr_matrix:
    """``alpha * int_interface u.v ds`` on the interleaved vector dofs.

    ``interface`` is a block name (its boundary) or a sequence of
    :class:`Segment` forming a closed chain of element edges.
    """
    edges = _chain_edges(dofs, interface)
    n = dofs.n_vector
    if alpha == 0:
        return sp.csr_matrix((n, n), dtype=complex)
    rows, cols, vals = [], [], []
    for a, b in edges:
        h = abs(b[0] - a[0]) + abs(b[1] - a[1])
        m = dofs.basis.element_matrices(0.0, h)[0]
        s = dofs.edge_dofs(a, b)
        for c in range(2):
            g = 2 * s + c
            rows.append(np.repeat(g, g.size))
            cols.append(np.tile(g, g.size))
            vals.append(alpha * m.ravel())
    m = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    return as_csr(m)


# --- Dirichlet data ---------------------------------------------------------------------


def boundary_interpolant(dofs: DofMap, field_fn: Callable, kind: str = "dirichlet") -> np.ndarray:
    """Coefficients of the trace of ``field_fn`` on all edges of the given kind.

    Vertex values are interpolated; edge bubbles come from the ``L^2``
    projection of the remainder on each edge.  ``field_fn(x, y)`` returns an
    array of shape ``(2, n)``.
    """
    out = np.zeros(dofs.n_vector, dtype=complex)
    basis = dofs.basis
    tq, wq = gauss_legendre(2 * basis.p + 2)
    vals = basis.values(tq)
    mb = (vals[2:] * wq) @ vals[2:].T
    done_vertices = set()
    for e in dofs.boundary_edges:
        if e.kind != kind:
            continue
        ed = dofs.edge_dofs(e.a, e.b)
        for pt, d in ((e.a, ed[0]), (e.b, ed[1])):
            if d not in done_vertices:
                v = np.asarray(field_fn(np.array([pt[0]]), np.array([pt[1]])), dtype=complex).reshape(2)
                out[2 * d] = v[0]
                out[2 * d + 1] = v[1]
                done_vertices.add(d)
        if basis.p == 1:
            continue
        xs = e.a[0] + 0.5 * (tq + 1) * (e.b[0] - e.a[0])
        ys = e.a[1] + 0.5 * (tq + 1) * (e.b[1] - e.a[1])
        f = np.asarray(field_fn(xs, ys), dtype=complex)
        for c in range(2):
            lin = out[2 * ed[0] + c] * vals[0] + out[2 * ed[1] + c] * vals[1]
            rhs = (vals[2:] * wq) @ (f[c] - lin)
            out[2 * ed[2:] + c] = np.linalg.solve(mb, rhs)
    return out


@dataclass
class ReducedSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    free: np.ndarray
    lift: np.ndarray

    def expand(self, x_free) -> np.ndarray:
        out = self.lift.copy()
        out[self.free] += x_free
        return out


def dirichlet_lift(matrix, rhs, dofs: DofMap, boundary_values=None) -> ReducedSystem:
    """Eliminate Dirichlet dofs.

    ``boundary_values`` is ``None`` (homogeneous data), a callable field
    ``f(x, y) -> (2, n)`` or a full-length coefficient vector.
    """
    matrix = as_csr(matrix)
    n = matrix.shape[0]
    rhs = np.zeros(n, dtype=complex) if rhs is None else np.asarray(rhs, dtype=complex)
    fixed = dofs.dirichlet_dofs()
    lift = np.zeros(n, dtype=complex)
    if boundary_values is not None:
        if callable(boundary_values):
            vals = boundary_interpolant(dofs, boundary_values)
        else:
            vals = np.asarray(boundary_values, dtype=complex)
            if vals.shape != (dofs.n_vector,) and vals.shape != (n,):
                raise ValueError("boundary value vector has the wrong length")
            if np.any(np.isnan(vals[fixed])):
                raise ValueError("missing boundary values on Dirichlet dofs")
        lift[fixed] = vals[fixed]
    mask = np.ones(n, dtype=bool)
    mask[fixed] = False
    free = np.flatnonzero(mask)
    red_rhs = rhs[free] - (matrix @ lift)[free]
    red = matrix[free][:, free]
    return ReducedSystem(as_csr(red), red_rhs, free, lift)


# --- evaluation --------------------------------------------------------------------------


def _ref_coords(el: Element, x, y):
    tx = 2 * (np.asarray(x) - el.x0) / (el.x1 - el.x0) - 1
    ty = 2 * (np.asarray(y) - el.y0) / (el.y1 - el.y0) - 1
    return tx, ty


def element_field(dofs: DofMap, el: Element, coeffs, tx, ty):
    """Displacement and gradient at reference points of one element.

    Returns ``u`` of shape ``(2, n)`` and ``grad`` of shape ``(2, 2, n)``
    with ``grad[c, d] = d u_c / d x_d``.
    """
    b = dofs.basis
    vx, dx = b.values(tx), b.derivatives(tx)
    vy, dy = b.values(ty), b.derivatives(ty)
    sx = 2.0 / (el.x1 - el.x0)
    sy = 2.0 / (el.y1 - el.y0)
    q = b.size
    u = np.empty((2, np.size(tx)), dtype=complex)
    g = np.empty((2, 2, np.size(tx)), dtype=complex)
    for c in range(2):
        cc = np.asarray(coeffs)[2 * el.dofs + c].reshape(q, q)
        u[c] = np.einsum("ik,in,kn->n", cc, vx, vy)
        g[c, 0] = sx * np.einsum("ik,in,kn->n", cc, dx, vy)
        g[c, 1] = sy * np.einsum("ik,in,kn->n", cc, vx, dy)
    return u, g


def evaluate(dofs: DofMap, coeffs, points) -> np.ndarray:
    """Displacement at physical points, shape ``(n, 2)``."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.empty((len(pts), 2), dtype=complex)
    for i, (x, y) in enumerate(pts):
        el = dofs.element_at(x, y)
        tx, ty = _ref_coords(el, x, y)
        u, _ = element_field(dofs, el, coeffs, np.atleast_1d(tx), np.atleast_1d(ty))
        out[i] = u[:, 0]
    return out


def _element_quadrature(el: Element, n: int):
    t, w = gauss_legendre(n)
    tx, ty = np.meshgrid(t, t, indexing="ij")
    ww = np.outer(w, w).ravel() * 0.25 * (el.x1 - el.x0) * (el.y1 - el.y0)
    x = el.x0 + 0.5 * (tx.ravel() + 1) * (el.x1 - el.x0)
    y = el.y0 + 0.5 * (ty.ravel() + 1) * (el.y1 - el.y0)
    return tx.ravel(), ty.ravel(), x, y, ww


def stress_from_gradient(mat: Material, grad):
    """Plane-strain stress ``sigma = 2 mu eps + lambda tr(eps) I`` from ``grad[c, d]``."""
    eps = 0.5 * (grad + np.swapaxes(grad, 0, 1))
    tr = eps[0, 0] + eps[1, 1]
    sig = 2 * mat.mu * eps
    sig[0, 0] += mat.lam * tr
    sig[1, 1] += mat.lam * tr
    return sig


def stress_norm(dofs: DofMap, coeffs, region=None, quad_order: Optional[int] = None) -> float:
    """``L^2`` norm over ``region`` of the Frobenius norm of the stress."""
    n = quad_order or dofs.p + 2
    total = 0.0
    for el in dofs.elements_in(region):
        tx, ty, _, _, w = _element_quadrature(el, n)
        _, g = element_field(dofs, el, coeffs, tx, ty)
        sig = stress_from_gradient(dofs.mesh.blocks[el.block].material, g)
        total += float(np.sum(w * np.sum(np.abs(sig) ** 2, axis=(0, 1))))
    return math.sqrt(total)


def h1_norms(dofs: DofMap, coeffs, reference, region=None, quad_order: Optional[int] = None):
    """``(|u - u_ref|_{H^1}, |u_ref|_{H^1})`` over ``region``.

    ``reference(x, y)`` returns ``(u, grad)`` with shapes ``(2, n)`` and
    ``(2, 2, n)``.
    """
    n = quad_order or dofs.p + 4
    err = 0.0
    ref = 0.0
    for el in dofs.elements_in(region):
        tx, ty, x, y, w = _element_quadrature(el, n)
        u, g = element_field(dofs, el, coeffs, tx, ty)
        ur, gr = reference(x, y)
        du = np.abs(u - ur) ** 2
        dg = np.abs(g - gr) ** 2
        err += float(np.sum(w * (du.sum(axis=0) + dg.sum(axis=(0, 1)))))
        ref += float(np.sum(w * (np.abs(ur) ** 2).sum(axis=0) + w * (np.abs(gr) ** 2).sum(axis=(0, 1))))
    return math.sqrt(err), math.sqrt(ref)


def h1_relative_error(dofs: DofMap, coeffs, reference, region=None, quad_order: Optional[int] = None) -> float:
    """``||u - u_ref||_{H^1} / ||u_ref||_{H^1}`` over ``region``."""
    err, ref = h1_norms(dofs, coeffs, reference, region, quad_order)
    if ref == 0:
        raise ValueError("reference field has zero H1 norm on the region")
    return err / ref


def lobatto_dump(dofs: DofMap, coeffs, n_points: int = 3):
    """Nodal field at a tensor grid of Gauss-Lobatto points per element.

    Returns rows ``(x, y, u1, u2)`` with complex displacements.
    """
    if n_points < 2:
        raise ValueError("need at least the two endpoints")
    if n_points == 2:
        t = np.array([-1.0, 1.0])
    else:
        c = np.zeros(n_points)
        c[-1] = 1.0
        inner = npleg.legroots(npleg.legder(c))
        t = np.concatenate([[-1.0], np.sort(inner.real), [1.0]])
    tx, ty = np.meshgrid(t, t, indexing="ij")
    tx, ty = tx.ravel(), ty.ravel()
    rows = []
    for el in dofs.elements:
        u, _ = element_field(dofs, el, coeffs, tx, ty)
        x = el.x0 + 0.5 * (tx + 1) * (el.x1 - el.x0)
        y = el.y0 + 0.5 * (ty + 1) * (el.y1 - el.y0)
        rows.extend(zip(x, y, u[0], u[1]))
    return rows
