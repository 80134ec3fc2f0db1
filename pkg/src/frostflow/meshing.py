"""P1 finite elements on segment and structured-triangle meshes.

Provides the bilinear forms of the coupled system: scalar mass/stiffness
with elementwise coefficients, Robin boundary matrices and loads, the
vector elasticity-type form with homogeneous Dirichlet constraint, and the
1D Neumann cosine eigenbasis used by the spectral pressure mode.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .plasticity import IsoPair, identity_tensor

__all__ = [
    "MeshError",
    "Mesh",
    "BoundaryData",
    "AssembledForms",
    "SpectralBasis1D",
    "build_mesh",
    "mesh_to_text",
    "mesh_from_text",
    "assemble_scalar",
    "assemble_elasticity",
    "robin_load",
    "iso_matrix",
]

_SQRT2 = np.sqrt(2.0)


class MeshError(ValueError):
    pass


@dataclass
class Mesh:
    """Conforming mesh with marked boundary facets.

    1D: segments with endpoint facets (markers 1 left, 2 right).
    2D: structured right triangles on a rectangle (markers 1 left, 2 right,
    3 bottom, 4 top); boundary integrals use the counting measure in 1D and
    edge length in 2D.
    """

    dim: int
    nodes: np.ndarray          # (n, dim)
    elements: np.ndarray       # (m, dim + 1)
    boundary_facets: np.ndarray  # (k, dim)
    boundary_markers: np.ndarray  # (k,)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    @property
    def ncomp(self) -> int:
        return {1: 1, 2: 3}[self.dim]

    def _cached(self, key, compute):
        got = self.__dict__.get(key)
        if got is None:
            got = self.__dict__[key] = compute()
        return got

    def element_measures(self) -> np.ndarray:
        def compute():
            xs = self.nodes[self.elements]
            if self.dim == 1:
                return np.abs(xs[:, 1, 0] - xs[:, 0, 0])
            a = xs[:, 1] - xs[:, 0]
            b = xs[:, 2] - xs[:, 0]
            return 0.5 * np.abs(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])
        return self._cached("_measures", compute)

    def facet_measures(self) -> np.ndarray:
        if self.dim == 1:
            return np.ones(self.boundary_facets.shape[0])
        xs = self.nodes[self.boundary_facets]
        return np.linalg.norm(xs[:, 1] - xs[:, 0], axis=1)

    def boundary_nodes(self) -> np.ndarray:
        return np.unique(self.boundary_facets.ravel())

    def shape_gradients(self) -> np.ndarray:
        """(m, dim+1, dim): gradient of each vertex shape function."""
        def compute():
            xs = self.nodes[self.elements]
            if self.dim == 1:
                h = (xs[:, 1, 0] - xs[:, 0, 0])[:, None]
                return np.stack([-1.0 / h, 1.0 / h], axis=1)
            out = np.zeros((self.n_elements, 3, 2))
            x0, x1, x2 = xs[:, 0], xs[:, 1], xs[:, 2]
            det = ((x1[:, 0] - x0[:, 0]) * (x2[:, 1] - x0[:, 1])
                   - (x2[:, 0] - x0[:, 0]) * (x1[:, 1] - x0[:, 1]))
            out[:, 1, 0] = (x2[:, 1] - x0[:, 1]) / det
            out[:, 1, 1] = -(x2[:, 0] - x0[:, 0]) / det
            out[:, 2, 0] = -(x1[:, 1] - x0[:, 1]) / det
            out[:, 2, 1] = (x1[:, 0] - x0[:, 0]) / det
            out[:, 0] = -(out[:, 1] + out[:, 2])
            return out
        return self._cached("_shape_gradients", compute)

    def element_gradient(self, nodal: np.ndarray) -> np.ndarray:
        """(m, dim) constant gradient of a P1 nodal field per element."""
        grads = self.shape_gradients()
        vals = np.asarray(nodal)[self.elements]
        return np.einsum("eav,ea->ev", grads, vals)

    def element_mean(self, nodal: np.ndarray) -> np.ndarray:
        return np.mean(np.asarray(nodal)[self.elements], axis=1)

    def node_volumes(self) -> np.ndarray:
        def compute():
            meas = self.element_measures()
            vols = np.zeros(self.n_nodes)
            share = meas / (self.dim + 1)
            np.add.at(vols, self.elements, share[:, None])
            return vols
        return self._cached("_node_volumes", compute)

    def element_to_node(self, per_element: np.ndarray) -> np.ndarray:
        """Volume-weighted recovery of an element field to the nodes."""
        meas = self.element_measures()
        share = meas / (self.dim + 1)
        num = np.zeros(self.n_nodes)
        np.add.at(num, self.elements,
                  (per_element * share)[:, None] * np.ones(self.dim + 1))
        return num / self.node_volumes()

    def strain_displacement(self) -> np.ndarray:
        """(m, ncomp, (dim+1)*dim): Mandel strain of local vector dofs."""
        def compute():
            grads = self.shape_gradients()
            m, nv, d = grads.shape
            out = np.zeros((m, self.ncomp, nv * d))
            for a in range(nv):
                if d == 1:
                    out[:, 0, a] = grads[:, a, 0]
                else:
                    gx, gy = grads[:, a, 0], grads[:, a, 1]
                    out[:, 0, a * 2] = gx
                    out[:, 1, a * 2 + 1] = gy
                    out[:, 2, a * 2] = gy / _SQRT2
                    out[:, 2, a * 2 + 1] = gx / _SQRT2
            return out
        return self._cached("_strain_displacement", compute)

    def element_strain(self, u_flat: np.ndarray) -> np.ndarray:
        """(m, ncomp) Mandel strain of a flattened displacement field."""
        dmat = self.strain_displacement()
        loc = self._local_vector_dofs(u_flat)
        return np.einsum("ecl,el->ec", dmat, loc)

    def _local_vector_dofs(self, u_flat):
        u = np.asarray(u_flat).reshape(self.n_nodes, self.dim)
        return u[self.elements].reshape(self.n_elements, -1)


def mesh_to_text(mesh: Mesh) -> str:
    """Serialize a mesh: header, node coordinates, elements, marked facets."""
    lines = [f"{mesh.dim} {mesh.n_nodes} {mesh.n_elements} "
             f"{mesh.boundary_facets.shape[0]}"]
    for row in mesh.nodes:
        lines.append(" ".join(repr(float(v)) for v in row))
    for row in mesh.elements:
        lines.append(" ".join(str(int(v)) for v in row))
    for row, marker in zip(mesh.boundary_facets, mesh.boundary_markers):
        lines.append(" ".join(str(int(v)) for v in row) + f" {int(marker)}")
    return "\n".join(lines) + "\n"


def mesh_from_text(text: str) -> Mesh:
    rows = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    rows = [ln for ln in rows if ln]
    if not rows:
        raise MeshError("empty mesh file")
    try:
        dim, n_nodes, n_elems, n_facets = (int(v) for v in rows[0].split())
    except ValueError as exc:
        raise MeshError(f"bad mesh header {rows[0]!r}") from exc
    expected = 1 + n_nodes + n_elems + n_facets
    if len(rows) != expected:
        raise MeshError(f"mesh file has {len(rows)} lines, expected "
                        f"{expected}")
    nodes = np.array([[float(v) for v in ln.split()]
                      for ln in rows[1:1 + n_nodes]])
    elements = np.array([[int(v) for v in ln.split()]
                         for ln in rows[1 + n_nodes:1 + n_nodes + n_elems]])
    facet_rows = [[int(v) for v in ln.split()]
                  for ln in rows[1 + n_nodes + n_elems:]]
    facets = np.array([r[:-1] for r in facet_rows], dtype=int)
    markers = np.array([r[-1] for r in facet_rows], dtype=int)
    mesh = Mesh(dim, nodes, elements, facets.reshape(n_facets, dim), markers)
    if nodes.shape[1] != dim or elements.shape[1] != dim + 1:
        raise MeshError("node/element widths do not match the dimension")
    if np.any(mesh.element_measures() <= 0):
        raise MeshError("mesh has degenerate elements")
    return mesh


def build_mesh(dim: int, extents, resolution) -> Mesh:
    """Uniform segment mesh (1D) or structured triangulation (2D)."""
    if dim == 1:
        x0, x1 = (extents[0], extents[1]) if np.ndim(extents) == 1 \
            else (extents[0][0], extents[0][1])
        if not x1 > x0:
            raise MeshError("empty interval")
        n = int(resolution)
        if n < 2:
            raise MeshError("resolution must be at least 2")
        xs = np.linspace(x0, x1, n + 1)[:, None]
        elements = np.stack([np.arange(n), np.arange(1, n + 1)], axis=1)
        facets = np.array([[0], [n]])
        markers = np.array([1, 2])
        return Mesh(1, xs, elements, facets, markers)
    if dim != 2:
        raise MeshError("only 1D and 2D meshes are supported")
    (x0, x1), (y0, y1) = extents
    if not (x1 > x0 and y1 > y0):
        raise MeshError("empty rectangle")
    nx, ny = (resolution, resolution) if np.isscalar(resolution) else resolution
    nx, ny = int(nx), int(ny)
    if min(nx, ny) < 1 or max(nx, ny) < 2:
        raise MeshError("resolution must be at least 2")
    xs, ys = np.meshgrid(np.linspace(x0, x1, nx + 1),
                         np.linspace(y0, y1, ny + 1), indexing="ij")
    nodes = np.stack([xs.ravel(), ys.ravel()], axis=1)

    def nid(i, j):
        return i * (ny + 1) + j

    elements = []
    for i in range(nx):
        for j in range(ny):
            a, b = nid(i, j), nid(i + 1, j)
            c, d = nid(i + 1, j + 1), nid(i, j + 1)
            elements.append([a, b, c])
            elements.append([a, c, d])
    facets, markers = [], []
    for j in range(ny):
        facets.append([nid(0, j), nid(0, j + 1)]); markers.append(1)
        facets.append([nid(nx, j), nid(nx, j + 1)]); markers.append(2)
    for i in range(nx):
        facets.append([nid(i, 0), nid(i + 1, 0)]); markers.append(3)
        facets.append([nid(i, ny), nid(i + 1, ny)]); markers.append(4)
    return Mesh(2, nodes, np.array(elements), np.array(facets),
                np.array(markers))


# ---------------------------------------------------------------------------
# boundary data


@dataclass
class BoundaryData:
    """Robin coefficients per facet and time-dependent outer traces.

    p_star / theta_star are callables (x, t) -> values at facet nodes;
    alpha / omega are arrays aligned with mesh.boundary_facets.
    """

    alpha: np.ndarray
    omega: np.ndarray
    p_star: Callable
    theta_star: Callable

    @classmethod
    def uniform(cls, mesh: Mesh, alpha, omega, p_star, theta_star):
        k = mesh.boundary_facets.shape[0]
        p_fn = p_star if callable(p_star) else (
            lambda x, t, v=float(p_star): np.full(x.shape[0], v))
        t_fn = theta_star if callable(theta_star) else (
            lambda x, t, v=float(theta_star): np.full(x.shape[0], v))
        return cls(alpha=np.full(k, float(alpha)),
                   omega=np.full(k, float(omega)), p_star=p_fn,
                   theta_star=t_fn)


# ---------------------------------------------------------------------------
# assembly


def _scalar_matrix(mesh: Mesh, element_kernel) -> sp.csr_matrix:
    nv = mesh.dim + 1
    kes = element_kernel()  # (m, nv, nv)
    rows = np.repeat(mesh.elements, nv, axis=1).ravel()
    cols = np.tile(mesh.elements, (1, nv)).ravel()
    return sp.csr_matrix((kes.ravel(), (rows, cols)),
                         shape=(mesh.n_nodes, mesh.n_nodes))


def mass_matrix(mesh: Mesh) -> sp.csr_matrix:
    nv = mesh.dim + 1
    meas = mesh.element_measures()
    base = (np.ones((nv, nv)) + np.eye(nv)) / (nv * (nv + 1.0))
    return _scalar_matrix(mesh, lambda: meas[:, None, None] * base)


def stiffness_matrix(mesh: Mesh, coeff=None) -> sp.csr_matrix:
    grads = mesh.shape_gradients()
    meas = mesh.element_measures()
    c = np.ones(mesh.n_elements) if coeff is None else np.asarray(coeff)
    if np.any(c <= 0):
        raise MeshError("diffusion coefficient must be strictly positive")
    kes = np.einsum("e,eav,ebv->eab", meas * c, grads, grads)
    return _scalar_matrix(mesh, lambda: kes)


def robin_matrix(mesh: Mesh, coeff_per_facet) -> sp.csr_matrix:
    coeff = np.asarray(coeff_per_facet, dtype=float)
    n = mesh.n_nodes
    if mesh.dim == 1:
        nodes = mesh.boundary_facets[:, 0]
        return sp.csr_matrix((coeff, (nodes, nodes)), shape=(n, n))
    meas = mesh.facet_measures()
    base = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
    kes = (coeff * meas)[:, None, None] * base
    rows = np.repeat(mesh.boundary_facets, 2, axis=1).ravel()
    cols = np.tile(mesh.boundary_facets, (1, 2)).ravel()
    return sp.csr_matrix((kes.ravel(), (rows, cols)), shape=(n, n))


def robin_load(mesh: Mesh, coeff_per_facet, trace_fn, t: float) -> np.ndarray:
    """Load vector of the Robin data term at time t."""
    coeff = np.asarray(coeff_per_facet, dtype=float)
    out = np.zeros(mesh.n_nodes)
    if mesh.boundary_facets.size == 0:
        return out
    if mesh.dim == 1:
        nodes = mesh.boundary_facets[:, 0]
        vals = np.asarray(trace_fn(mesh.nodes[nodes], t), dtype=float)
        np.add.at(out, nodes, coeff * vals)
        return out
    meas = mesh.facet_measures()
    base = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
    xs = mesh.nodes[mesh.boundary_facets]      # (k, 2, 2)
    vals = np.asarray(trace_fn(xs.reshape(-1, 2), t)).reshape(-1, 2)
    loads = (coeff * meas)[:, None] * np.einsum("ab,kb->ka", base, vals)
    np.add.at(out, mesh.boundary_facets, loads)
    return out


def iso_matrix(pair: IsoPair, ncomp: int) -> np.ndarray:
    """Mandel-coordinate matrix of an isotropic fourth-order tensor."""
    d = {1: 1, 3: 2, 6: 3}[ncomp]
    eye_t = identity_tensor(ncomp)
    p_sph = np.outer(eye_t, eye_t) / d
    return 2.0 * pair.shear * (np.eye(ncomp) - p_sph) + pair.bulk * d * p_sph


def elasticity_matrix(mesh: Mesh, pair: IsoPair) -> sp.csr_matrix:
    """Vector form int (A grad_s u) : grad_s v over all dofs (unconstrained)."""
    dmat = mesh.strain_displacement()          # (m, ncomp, nloc)
    meas = mesh.element_measures()
    a_mat = iso_matrix(pair, mesh.ncomp)
    kes = np.einsum("e,ecl,cd,edk->elk", meas, dmat, a_mat, dmat)
    nv, d = mesh.dim + 1, mesh.dim
    loc_dofs = (mesh.elements[:, :, None] * d
                + np.arange(d)[None, None, :]).reshape(mesh.n_elements, -1)
    rows = np.repeat(loc_dofs, nv * d, axis=1).ravel()
    cols = np.tile(loc_dofs, (1, nv * d)).ravel()
    n = mesh.n_nodes * d
    return sp.csr_matrix((kes.ravel(), (rows, cols)), shape=(n, n))


def tensor_load(mesh: Mesh, element_tensors: np.ndarray) -> np.ndarray:
    """Load vector int T_e : grad_s v for elementwise Mandel tensors."""
    dmat = mesh.strain_displacement()
    meas = mesh.element_measures()
    contrib = np.einsum("e,ec,ecl->el", meas, element_tensors, dmat)
    d = mesh.dim
    loc_dofs = (mesh.elements[:, :, None] * d
                + np.arange(d)[None, None, :]).reshape(mesh.n_elements, -1)
    out = np.zeros(mesh.n_nodes * d)
    np.add.at(out, loc_dofs, contrib)
    return out


def div_load(mesh: Mesh, element_values: np.ndarray) -> np.ndarray:
    """Load vector int w_e div(v) for elementwise scalars w_e."""
    eye_t = identity_tensor(mesh.ncomp)
    tensors = np.asarray(element_values)[:, None] * eye_t[None, :]
    return tensor_load(mesh, tensors)


def vector_mass_load(mesh: Mesh, element_vectors: np.ndarray) -> np.ndarray:
    """Load vector int g . v for elementwise constant vectors g."""
    meas = mesh.element_measures()
    d = mesh.dim
    share = meas / (mesh.dim + 1)
    contrib = (share[:, None] * np.asarray(element_vectors))  # (m, d)
    out = np.zeros(mesh.n_nodes * d)
    for a in range(mesh.dim + 1):
        dofs = (mesh.elements[:, a, None] * d + np.arange(d)[None, :])
        np.add.at(out, dofs, contrib)
    return out


@dataclass
class AssembledForms:
    """Cached discrete operators for one mesh and boundary setup."""

    mesh: Mesh
    mass: sp.csr_matrix
    lumped: np.ndarray
    stiffness: sp.csr_matrix
    robin_alpha: sp.csr_matrix
    robin_omega: sp.csr_matrix
    boundary: BoundaryData
    visc_matrix: sp.csr_matrix
    hard_matrix: sp.csr_matrix
    interior_dofs: np.ndarray

    @classmethod
    def build(cls, mesh: Mesh, boundary: BoundaryData, visc: IsoPair,
              hard: IsoPair) -> "AssembledForms":
        mass = mass_matrix(mesh)
        lumped = np.asarray(mass.sum(axis=1)).ravel()
        k_visc = elasticity_matrix(mesh, visc)
        k_hard = elasticity_matrix(mesh, hard)
        bnodes = mesh.boundary_nodes()
        all_dofs = np.arange(mesh.n_nodes * mesh.dim)
        constrained = (bnodes[:, None] * mesh.dim
                       + np.arange(mesh.dim)[None, :]).ravel()
        interior = np.setdiff1d(all_dofs, constrained)
        return cls(mesh=mesh, mass=mass, lumped=lumped,
                   stiffness=stiffness_matrix(mesh),
                   robin_alpha=robin_matrix(mesh, boundary.alpha),
                   robin_omega=robin_matrix(mesh, boundary.omega),
                   boundary=boundary,
                   visc_matrix=k_visc, hard_matrix=k_hard,
                   interior_dofs=interior)

    def pressure_load(self, t: float) -> np.ndarray:
        return robin_load(self.mesh, self.boundary.alpha,
                          self.boundary.p_star, t)

    def temperature_load(self, t: float) -> np.ndarray:
        return robin_load(self.mesh, self.boundary.omega,
                          self.boundary.theta_star, t)

    def check_constrained(self):
        if self.interior_dofs.size == 0:
            raise MeshError("no interior displacement dofs")


def assemble_scalar(mesh: Mesh, coeff=None, boundary_coeff=None):
    """Scalar operator: stiffness with elementwise coefficient plus an
    optional Robin boundary matrix."""
    k = stiffness_matrix(mesh, coeff)
    if boundary_coeff is not None:
        k = k + robin_matrix(mesh, boundary_coeff)
    return k


def assemble_elasticity(mesh: Mesh, pair: IsoPair):
    """Constrained elasticity operator (u = 0 on the whole boundary).

    Returns (matrix_on_interior_dofs, interior_dof_indices).
    """
    k = elasticity_matrix(mesh, pair)
    bnodes = mesh.boundary_nodes()
    constrained = (bnodes[:, None] * mesh.dim
                   + np.arange(mesh.dim)[None, :]).ravel()
    interior = np.setdiff1d(np.arange(mesh.n_nodes * mesh.dim), constrained)
    if interior.size == 0:
        raise MeshError("all displacement dofs are constrained")
    kc = k[interior][:, interior].tocsc()
    lb = pair.lower_bound(mesh.ncomp)
    if lb <= 0:
        raise MeshError("elasticity tensor is not coercive")
    return kc, interior


def vector_h1_matrix(mesh: Mesh) -> sp.csr_matrix:
    """Componentwise H1 matrix (grad-grad plus mass) on interleaved dofs."""
    comp = (stiffness_matrix(mesh) + mass_matrix(mesh)).tocoo()
    n, d = mesh.n_nodes, mesh.dim
    rows, cols, vals = [], [], []
    for c in range(d):
        rows.append(comp.row * d + c)
        cols.append(comp.col * d + c)
        vals.append(comp.data)
    return sp.csr_matrix((np.concatenate(vals),
                          (np.concatenate(rows), np.concatenate(cols))),
                         shape=(n * d, n * d))


def korn_ratio(mesh: Mesh, pair: IsoPair) -> float:
    """Smallest Rayleigh quotient of the constrained elasticity form against
    the vector H1 norm; positive by the Korn inequality."""
    kc, interior = assemble_elasticity(mesh, pair)
    h1 = vector_h1_matrix(mesh)[interior][:, interior]
    if kc.shape[0] <= 600:
        from scipy.linalg import eigh
        vals = eigh(kc.toarray(), h1.toarray(), eigvals_only=True)
        return float(vals[0])
    val = spla.eigsh(kc, k=1, M=h1.tocsc(), sigma=0, which="LM",
                     return_eigenvectors=False)
    return float(val[0])


# ---------------------------------------------------------------------------
# spectral basis


@dataclass
class SpectralBasis1D:
    """Neumann cosine eigenbasis on a 1D mesh, trapezoid-orthonormal."""

    vectors: np.ndarray      # (n_modes, n_nodes)
    eigenvalues: np.ndarray  # (n_modes,)
    weights: np.ndarray      # trapezoid weights (n_nodes,)

    @classmethod
    def build(cls, mesh: Mesh, n_modes: int) -> "SpectralBasis1D":
        if mesh.dim != 1:
            raise MeshError("spectral basis is 1D only")
        xs = mesh.nodes[:, 0]
        n = xs.size
        if n_modes > n - 1:
            raise MeshError("too many modes for this mesh")
        length = xs[-1] - xs[0]
        h = np.diff(xs)
        w = np.zeros(n)
        w[:-1] += h / 2
        w[1:] += h / 2
        vecs, lams = [], []
        for i in range(n_modes):
            v = np.cos(i * np.pi * (xs - xs[0]) / length)
            v = v / np.sqrt(np.dot(w, v * v))
            vecs.append(v)
            lams.append((i * np.pi / length) ** 2)
        return cls(vectors=np.array(vecs), eigenvalues=np.array(lams),
                   weights=w)

    @property
    def n_modes(self) -> int:
        return self.eigenvalues.size

    def project(self, nodal: np.ndarray) -> np.ndarray:
        return self.vectors @ (self.weights * nodal)

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        return coeffs @ self.vectors

    def gram(self) -> np.ndarray:
        return np.einsum("in,n,jn->ij", self.vectors, self.weights,
                         self.vectors)
