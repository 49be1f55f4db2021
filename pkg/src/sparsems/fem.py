"""Fine-grid bilinear (Q1) assembly and solves on square cells.

Element matrices use the counterclockwise node order (0,0), (h,0),
(h,h), (0,h).  With cellwise-constant coefficients every integral is a
closed-form element matrix scaled by the cell value, so there is no
quadrature error anywhere.  Assembly is deterministic: identical inputs
produce bitwise-identical operators.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as spla

from .fields import Raster

# grad-grad and shape-shape integrals of the four bilinear shape
# functions; the stiffness matrix is size-independent in 2D, the mass
# matrix scales with the cell area.
STIFFNESS_ELEMENT = np.array([
    [4.0, -1.0, -2.0, -1.0],
    [-1.0, 4.0, -1.0, -2.0],
    [-2.0, -1.0, 4.0, -1.0],
    [-1.0, -2.0, -1.0, 4.0],
]) / 6.0

MASS_ELEMENT_UNIT = np.array([
    [4.0, 2.0, 1.0, 2.0],
    [2.0, 4.0, 2.0, 1.0],
    [1.0, 2.0, 4.0, 2.0],
    [2.0, 1.0, 2.0, 4.0],
]) / 36.0


def stiffness_element():
    """4x4 grad-grad element matrix on a square cell (any size)."""
    return STIFFNESS_ELEMENT.copy()


def mass_element(h):
    """4x4 shape-shape element matrix on a square cell of size h."""
    return (h * h) * MASS_ELEMENT_UNIT


@dataclass
class SparseOperator:
    """CSR matrix tagged with its scalar field ("real" | "complex")."""

    matrix: sparse.csr_matrix
    field: str = "real"

    @property
    def dim(self):
        return self.matrix.shape[0]

    def __matmul__(self, other):
        return self.matrix @ other


def _accumulate(conn, cell_values, element, n_nodes):
    """Sum cell_values[c] * element over cells into an n_nodes CSR matrix."""
    data = cell_values[:, None, None] * element[None, :, :]
    rows = np.broadcast_to(conn[:, :, None], data.shape)
    cols = np.broadcast_to(conn[:, None, :], data.shape)
    mat = sparse.coo_matrix(
        (data.ravel(), (rows.ravel(), cols.ravel())), shape=(n_nodes, n_nodes))
    return mat.tocsr()


def _conn_and_size(mesh, region, numbering):
    if region is not None:
        return region.cell_nodes_local, region.cell_ids, region.n_nodes
    if numbering == "continuous":
        return mesh.cell_nodes, None, mesh.n_nodes
    if numbering == "dg":
        return mesh.cell_nodes_dg, None, mesh.n_dg
    raise ValueError(f"unknown numbering {numbering!r}")


def assemble_diffusion(mesh, kappa: Raster, region=None, numbering="continuous"):
    """Stiffness of u,v -> integral of kappa grad(u).grad(v)."""
    conn, cells, n_nodes = _conn_and_size(mesh, region, numbering)
    vals = kappa.flat if cells is None else kappa.flat[cells]
    return SparseOperator(_accumulate(conn, vals, STIFFNESS_ELEMENT, n_nodes))


def assemble_weighted_mass(mesh, kappa: Raster, region=None, numbering="continuous"):
    """Mass of u,v -> integral of kappa u v (symmetric positive definite)."""
    conn, cells, n_nodes = _conn_and_size(mesh, region, numbering)
    vals = kappa.flat if cells is None else kappa.flat[cells]
    return SparseOperator(_accumulate(conn, vals, mass_element(mesh.h), n_nodes))


def assemble_helmholtz(mesh, kappa: Raster, n: Raster, omega: float,
                       region=None, numbering="continuous"):
    """Stiffness(kappa) - omega^2 * mass(n), stored complex.

    Entries are real; complex arithmetic enters through boundary data
    and solutions.
    """
    if omega <= 0.0:
        raise ValueError("frequency must be positive")
    k = assemble_diffusion(mesh, kappa, region, numbering).matrix
    m = assemble_weighted_mass(mesh, n, region, numbering).matrix
    return SparseOperator((k - (omega * omega) * m).astype(complex), "complex")


def interpolate_nodes(mesh, f, numbering="continuous"):
    """Nodal values of f (callable(x, y), scalar, or nodal array)."""
    size = mesh.n_nodes if numbering == "continuous" else mesh.n_dg
    if callable(f):
        coords = mesh.nodes if numbering == "continuous" \
            else mesh.nodes[mesh.dg_to_node]
        return np.asarray(f(coords[:, 0], coords[:, 1]))
    f = np.asarray(f)
    if f.ndim == 0:
        return np.full(size, complex(f) if np.iscomplexobj(f) else float(f))
    if f.shape != (size,):
        raise ValueError(f"nodal data of length {f.shape} does not match "
                         f"{numbering} dimension {size}")
    return f


def load_vector(mesh, f, numbering="continuous"):
    """(f, v) for all nodal test functions, with f interpolated at nodes."""
    fn = interpolate_nodes(mesh, f, numbering)
    ones = Raster.constant(mesh, 1.0)
    m = assemble_weighted_mass(mesh, ones, numbering=numbering).matrix
    return m @ fn


class LocalProblem:
    """Dirichlet diffusion problem on a region, factorized once.

    The interior/boundary split eliminates boundary DOFs exactly:
    A_II u_I = F_I - A_IB g.
    """

    def __init__(self, mesh, kappa: Raster, region):
        self.region = region
        self.kappa = kappa
        op = assemble_diffusion(mesh, kappa, region=region).matrix
        I, B = region.interior, region.boundary
        self.interior = I
        self.boundary = B
        self.A_II = op[I][:, I].tocsc()
        self.A_IB = op[I][:, B].tocsr()
        self._lu = None

    def factor(self):
        if self._lu is None:
            try:
                self._lu = spla.splu(self.A_II)
            except RuntimeError as err:
                raise RuntimeError(
                    f"singular interior operator on region {self.region.index} "
                    f"(check coefficient positivity / region interior): {err}"
                ) from err
        return self._lu

    def solve(self, g):
        return solve_local_dirichlet(self, g)


def solve_local_dirichlet(problem: LocalProblem, g):
    """Discrete harmonic extension: boundary values g, zero interior source."""
    g = np.asarray(g, dtype=float)
    if g.shape[0] != len(problem.boundary):
        raise ValueError(f"boundary data of length {g.shape[0]} does not match "
                         f"{len(problem.boundary)} boundary nodes")
    lu = problem.factor()
    single = g.ndim == 1
    gg = g[:, None] if single else g
    u = np.zeros((problem.region.n_nodes, gg.shape[1]))
    u[problem.boundary] = gg
    if len(problem.interior):
        u[problem.interior] = lu.solve(-(problem.A_IB @ gg))
    return u[:, 0] if single else u


def fine_reference_solve(mesh, kappa: Raster, f, g, n: Raster | None = None,
                         omega: float | None = None):
    """Direct fine-grid solve with strong Dirichlet data g.

    Diffusion when n/omega are omitted, complex Helmholtz otherwise.
    """
    if (n is None) != (omega is None):
        raise ValueError("provide both n and omega for a Helmholtz solve or neither")
    helm = n is not None
    op = (assemble_helmholtz(mesh, kappa, n, omega) if helm
          else assemble_diffusion(mesh, kappa)).matrix
    F = load_vector(mesh, f)

    bnd = mesh.boundary_nodes
    mask = np.zeros(mesh.n_nodes, dtype=bool)
    mask[bnd] = True
    interior = np.flatnonzero(~mask)

    if callable(g):
        xy = mesh.nodes[bnd]
        gb = np.asarray(g(xy[:, 0], xy[:, 1]))
    else:
        gb = np.asarray(g)
        gb = np.full(len(bnd), gb[()]) if gb.ndim == 0 else gb[bnd]

    dtype = complex if (helm or np.iscomplexobj(gb) or np.iscomplexobj(F)) else float
    u = np.zeros(mesh.n_nodes, dtype=dtype)
    u[bnd] = gb
    A_II = op[interior][:, interior].tocsc().astype(dtype)
    rhs = F[interior].astype(dtype) - op[interior][:, bnd].astype(dtype) @ u[bnd]
    try:
        u[interior] = spla.splu(A_II).solve(rhs)
    except RuntimeError as err:
        scale = abs(A_II).max()
        raise RuntimeError(
            f"fine factorization failed (matrix scale {scale:.3e}; for a "
            f"Helmholtz solve the frequency may sit on a discrete resonance): "
            f"{err}") from err
    return u


@dataclass
class ErrorReport:
    l2_pct: float
    h1_pct: float
    l2_abs: float
    h1_abs: float
    l2_ref: float
    h1_ref: float


def error_norms(mesh, u, v, kappa: Raster, numbering="continuous") -> ErrorReport:
    """Relative percent errors 100*|u-v|/|u| in L2 and the kappa-weighted
    (broken, for the DG numbering) H1 seminorm, by exact elementwise
    quadrature."""
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape != v.shape:
        raise ValueError("fields must share one numbering")
    ones = Raster.constant(mesh, 1.0)
    M = assemble_weighted_mass(mesh, ones, numbering=numbering).matrix
    A = assemble_diffusion(mesh, kappa, numbering=numbering).matrix

    def _norms(w):
        l2 = np.sqrt(max(np.real(np.conj(w) @ (M @ w)), 0.0))
        h1 = np.sqrt(max(np.real(np.conj(w) @ (A @ w)), 0.0))
        return l2, h1

    e_l2, e_h1 = _norms(u - v)
    r_l2, r_h1 = _norms(u)
    if r_l2 == 0.0 or r_h1 == 0.0:
        if e_l2 == 0.0 and e_h1 == 0.0:
            return ErrorReport(0.0, 0.0, 0.0, 0.0, r_l2, r_h1)
        raise ValueError("reference field has zero norm but fields differ")
    return ErrorReport(100.0 * e_l2 / r_l2, 100.0 * e_h1 / r_h1,
                       e_l2, e_h1, r_l2, r_h1)
