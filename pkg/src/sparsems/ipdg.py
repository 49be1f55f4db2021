"""Symmetric interior-penalty DG coupling on the coarse skeleton.

The bilinear form is the elementwise volume form (diffusion, or
diffusion minus omega^2 times the weighted mass for Helmholtz) plus, on
every coarse edge E,

    - int_E ( {kappa grad(u).n_E}[v] + {kappa grad(v).n_E}[u] )
    + (gamma/h) int_E kbar [u][v]

with h the FINE mesh size, [G] = G+ - G- and {G} = (G+ + G-)/2, the
fixed normal pointing from the lower-indexed block K+ to K-, and
kbar = (max_{K+} kappa + max_{K-} kappa)/2.  On boundary edges
{G} = [G] = G, kbar = max_K kappa and the normal points outward; strong
Dirichlet data g then moves to the right-hand side as
    - int_E kappa grad(v).n g + (gamma/h) int_E kbar g v.

All traces are bilinear along a fine facet, so the 2-point Gauss rule
per facet is exact for every edge integral.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sparse
import scipy.sparse.linalg as spla

from .fem import (SparseOperator, assemble_diffusion, assemble_weighted_mass,
                  load_vector)
from .fields import Raster
from .grid import coarse_edges
from .l1 import BasisPursuitProblem, bregman_solve

_GAUSS = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])


@dataclass
class DGForm:
    """Penalty weight and operator kind for the coupled form."""

    gamma: float
    kind: str = "diffusion"       # "diffusion" | "helmholtz"
    omega: float | None = None

    def __post_init__(self):
        if self.gamma <= 0.0:
            raise ValueError("penalty parameter must be positive")
        if self.kind not in ("diffusion", "helmholtz"):
            raise ValueError(f"unknown form kind {self.kind!r}")
        if self.kind == "helmholtz" and (self.omega is None or self.omega <= 0):
            raise ValueError("helmholtz form needs a positive frequency")


def _trace_pair(orientation):
    """Per-Gauss trace and normal-derivative weights for an interior edge.

    Returns lists over Gauss points of (trace_plus, trace_minus, dnormal),
    each a 4-vector over the counterclockwise cell nodes; dnormal carries
    the 1/h factor separately (scale at use).
    """
    out = []
    for s in _GAUSS:
        if orientation == "v":        # normal +x; plus left, minus right
            tp = np.array([0.0, 1.0 - s, s, 0.0])
            tm = np.array([1.0 - s, 0.0, 0.0, s])
            dn = np.array([-(1.0 - s), 1.0 - s, s, -s])
        else:                         # normal +y; plus below, minus above
            tp = np.array([0.0, 0.0, s, 1.0 - s])
            tm = np.array([1.0 - s, s, 0.0, 0.0])
            dn = np.array([-(1.0 - s), -s, s, 1.0 - s])
        out.append((tp, tm, dn))
    return out


def _boundary_trace(normal):
    """Per-Gauss (trace, outward normal derivative) on a boundary facet."""
    out = []
    for s in _GAUSS:
        if normal[0] < 0:             # left side, face x=0
            t = np.array([1.0 - s, 0.0, 0.0, s])
            d = -np.array([-(1.0 - s), 1.0 - s, s, -s])
        elif normal[0] > 0:           # right side, face x=1
            t = np.array([0.0, 1.0 - s, s, 0.0])
            d = np.array([-(1.0 - s), 1.0 - s, s, -s])
        elif normal[1] < 0:           # bottom, face y=0
            t = np.array([1.0 - s, s, 0.0, 0.0])
            d = -np.array([-(1.0 - s), -s, s, 1.0 - s])
        else:                         # top, face y=1
            t = np.array([0.0, 0.0, s, 1.0 - s])
            d = np.array([-(1.0 - s), -s, s, 1.0 - s])
        out.append((t, d))
    return out


def _edge_cells(mesh, edge):
    """(plus cells, minus cells) fine-cell ids along the edge; minus is
    None on the boundary."""
    t = np.arange(mesh.nf)
    if edge.orientation == "v":
        sy = edge.lo + t
        if edge.kind == "interior":
            return mesh.cell_id(edge.line - 1, sy), mesh.cell_id(edge.line, sy)
        cx = edge.line - 1 if edge.normal[0] > 0 else edge.line
        return mesh.cell_id(cx, sy), None
    sx = edge.lo + t
    if edge.kind == "interior":
        return mesh.cell_id(sx, edge.line - 1), mesh.cell_id(sx, edge.line)
    cy = edge.line - 1 if edge.normal[1] > 0 else edge.line
    return mesh.cell_id(sx, cy), None


def block_max(mesh, kappa: Raster):
    """max of kappa over each coarse block (the penalty weights kbar)."""
    vals = kappa.flat
    return np.array([vals[mesh.block_cells(j)].max() for j in range(mesh.n_blocks)])


def edge_penalty_weight(mesh, kappa: Raster, edge):
    kmax = block_max(mesh, kappa)
    if edge.kind == "interior":
        return 0.5 * (kmax[edge.k_plus] + kmax[edge.k_minus])
    return kmax[edge.k_plus]


def _edge_parts(mesh, kappa: Raster):
    """Edge matrices on the DG numbering, penalty scale gamma factored out:

        F1 = sum_E int_E {kappa grad(u).n}[v]   (consistency)
        P  = sum_E (kbar/h) int_E [u][v]

    so the assembled operator is  volume - F1 - F1' + gamma * P.
    """
    h, nf = mesh.h, mesh.nf
    w = h / 2.0                     # Gauss weight including facet length
    kvals = kappa.flat
    kmax = block_max(mesh, kappa)
    conn_dg = mesh.cell_nodes_dg

    # constant 8x8 templates per orientation (kappa factored out per side)
    tmpl = {}
    for o in ("v", "h"):
        t_jgp = np.zeros((8, 8))
        t_jgm = np.zeros((8, 8))
        t_jj = np.zeros((8, 8))
        for tp, tm, dn in _trace_pair(o):
            J = np.concatenate([tp, -tm])
            gp = np.concatenate([0.5 * dn / h, np.zeros(4)])
            gm = np.concatenate([np.zeros(4), 0.5 * dn / h])
            t_jgp += w * np.outer(J, gp)
            t_jgm += w * np.outer(J, gm)
            t_jj += w * np.outer(J, J)
        tmpl[o] = (t_jgp, t_jgm, t_jj)

    rows_f, cols_f, vals_f = [], [], []
    rows_p, cols_p, vals_p = [], [], []
    for edge in coarse_edges(mesh):
        plus, minus = _edge_cells(mesh, edge)
        if edge.kind == "interior":
            t_jgp, t_jgm, t_jj = tmpl[edge.orientation]
            conn = np.hstack([conn_dg[plus], conn_dg[minus]])     # (nf, 8)
            f_loc = (kvals[plus][:, None, None] * t_jgp
                     + kvals[minus][:, None, None] * t_jgm)
            kbar = 0.5 * (kmax[edge.k_plus] + kmax[edge.k_minus])
            p_loc = np.broadcast_to((kbar / h) * t_jj, f_loc.shape)
        else:
            t_bt = np.zeros((4, 4))
            t_tt = np.zeros((4, 4))
            for t, d in _boundary_trace(edge.normal):
                t_bt += w * np.outer(t, d / h)
                t_tt += w * np.outer(t, t)
            conn = conn_dg[plus]                                  # (nf, 4)
            f_loc = kvals[plus][:, None, None] * t_bt
            p_loc = np.broadcast_to((kmax[edge.k_plus] / h) * t_tt, f_loc.shape)
        r = np.broadcast_to(conn[:, :, None], f_loc.shape)
        c = np.broadcast_to(conn[:, None, :], f_loc.shape)
        rows_f.append(r.ravel()); cols_f.append(c.ravel()); vals_f.append(f_loc.ravel())
        rows_p.append(r.ravel()); cols_p.append(c.ravel()); vals_p.append(p_loc.ravel())

    shape = (mesh.n_dg, mesh.n_dg)
    F1 = sparse.coo_matrix((np.concatenate(vals_f),
                            (np.concatenate(rows_f), np.concatenate(cols_f))),
                           shape=shape).tocsr()
    P = sparse.coo_matrix((np.concatenate(vals_p),
                           (np.concatenate(rows_p), np.concatenate(cols_p))),
                          shape=shape).tocsr()
    return F1, P


def assemble_dg_operator(mesh, form: DGForm, kappa: Raster,
                         n: Raster | None = None) -> SparseOperator:
    """Fine-level coupled operator on the block-duplicated numbering."""
    vol = assemble_diffusion(mesh, kappa, numbering="dg").matrix
    if form.kind == "helmholtz":
        if n is None:
            raise ValueError("helmholtz form needs the refraction raster")
        vol = vol - form.omega ** 2 * assemble_weighted_mass(
            mesh, n, numbering="dg").matrix
    F1, P = _edge_parts(mesh, kappa)
    A = vol - F1 - F1.T + form.gamma * P
    if form.kind == "helmholtz":
        return SparseOperator(A.astype(complex).tocsr(), "complex")
    return SparseOperator(A.tocsr(), "real")


def weak_dirichlet_rhs(mesh, form: DGForm, kappa: Raster, g, f=0.0):
    """Load vector (f, v) plus the boundary-data terms of the weak form."""
    F = load_vector(mesh, f, numbering="dg")
    h, nf = mesh.h, mesh.nf
    w = h / 2.0
    kvals = kappa.flat
    kmax = block_max(mesh, kappa)
    conn_dg = mesh.cell_nodes_dg
    if callable(g):
        probe = np.asarray(g(np.array([0.0]), np.array([0.0])))
    else:
        probe = np.asarray(g)
    cdtype = complex if (np.iscomplexobj(F) or np.iscomplexobj(probe)) else float
    out = F.astype(cdtype)

    for edge in coarse_edges(mesh):
        if edge.kind != "boundary":
            continue
        cells, _ = _edge_cells(mesh, edge)
        kc = kvals[cells]
        kbar = kmax[edge.k_plus]
        conn = conn_dg[cells]
        t_along = (edge.lo + np.arange(nf)) * h
        c_const = edge.line * h
        for s, (t, d) in zip(_GAUSS, _boundary_trace(edge.normal)):
            pos = t_along + s * h
            if edge.orientation == "v":
                gv = g(np.full(nf, c_const), pos) if callable(g) else np.full(nf, g)
            else:
                gv = g(pos, np.full(nf, c_const)) if callable(g) else np.full(nf, g)
            contrib = w * gv[:, None] * (-kc[:, None] * (d / h)[None, :]
                                         + (form.gamma / h) * kbar * t[None, :])
            np.add.at(out, conn, contrib)
    return out


@dataclass
class DGSpace:
    """Block-supported trial/test columns as a prolongation to the DG
    numbering; r0 maps coarse coefficients to fine DG vectors."""

    mesh: object
    r0: sparse.csr_matrix
    block_dims: tuple

    @property
    def dim(self):
        return self.r0.shape[1]

    @classmethod
    def full(cls, mesh):
        """The whole fine DG space (identity prolongation)."""
        return cls(mesh, sparse.identity(mesh.n_dg, format="csr"),
                   tuple([(mesh.nf + 1) ** 2] * mesh.n_blocks))

    @classmethod
    def from_block_columns(cls, mesh, columns, normalize=False):
        """Stack per-block nodal columns (one array per block, rows are the
        (nf+1)^2 block-local nodes)."""
        if len(columns) != mesh.n_blocks:
            raise ValueError(f"need one column set per block "
                             f"({mesh.n_blocks}), got {len(columns)}")
        nloc = (mesh.nf + 1) ** 2
        rows, cols, vals = [], [], []
        offset = 0
        dims = []
        dtype = complex if any(np.iscomplexobj(c) for c in columns) else float
        for j, cj in enumerate(columns):
            cj = np.asarray(cj)
            if cj.shape[0] != nloc:
                raise ValueError(f"block {j}: columns have {cj.shape[0]} rows, "
                                 f"expected {nloc}")
            if normalize:
                nrm = np.linalg.norm(cj, axis=0)
                cj = cj / np.where(nrm > 0, nrm, 1.0)
            k = cj.shape[1]
            r = j * nloc + np.arange(nloc)
            rows.append(np.repeat(r, k))
            cols.append(np.tile(offset + np.arange(k), nloc))
            vals.append(cj.astype(dtype).ravel())
            offset += k
            dims.append(k)
        r0 = sparse.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(mesh.n_dg, offset)).tocsr()
        return cls(mesh, r0, tuple(dims))

    @classmethod
    def from_planewaves(cls, mesh, pw_sets):
        return cls.from_block_columns(mesh, [s.values for s in pw_sets])


class SingularSystemError(RuntimeError):
    def __init__(self, pivot):
        super().__init__(f"coarse system is numerically singular "
                         f"(smallest pivot {pivot:.3e})")
        self.pivot = pivot


def project_and_solve(space: DGSpace, operator: SparseOperator, rhs,
                      dense_cutoff=3500):
    """Galerkin-project onto the space, solve, and downscale.

    Returns (coarse coefficients, fine DG field).  Small systems go
    through a dense LU with an explicit smallest-pivot check; larger
    ones through a sparse LU.
    """
    R = space.r0
    A0 = (R.T @ operator.matrix @ R).tocsc()
    F0 = R.T @ rhs
    if space.dim <= dense_cutoff:
        lu, piv = la.lu_factor(A0.toarray())
        dmin = np.min(np.abs(np.diag(lu)))
        dmax = np.max(np.abs(np.diag(lu)))
        if dmax == 0.0 or dmin <= 1.0e-14 * dmax:
            raise SingularSystemError(dmin)
        U0 = la.lu_solve((lu, piv), F0)
    else:
        try:
            solver = spla.splu(A0)
        except RuntimeError as err:
            raise SingularSystemError(0.0) from err
        dU = np.abs(solver.U.diagonal())
        if dU.min() <= 1.0e-14 * dU.max():
            raise SingularSystemError(dU.min())
        U0 = solver.solve(F0)
    return U0, R @ U0


@dataclass
class CoarseSystem:
    """Rows test the weak form against the random test space, columns are
    the snapshot coefficients; rhs already carries the weak boundary data."""

    matrix: np.ndarray            # (n_test * blocks, n_dir * blocks)
    rhs: np.ndarray
    prolong: sparse.csr_matrix    # snapshot columns to fine DG
    n_test: int
    n_dir: int
    n_blocks: int

    def downscale(self, coeffs):
        return self.prolong @ coeffs


def assemble_rect_system(mesh, pw_sets, test, form: DGForm, kappa: Raster,
                         n: Raster, g, f=0.0) -> CoarseSystem:
    """Rectangular test-versus-trial Helmholtz system over plane waves."""
    if test.kind != "direction-mix":
        raise ValueError("rectangular systems need a direction-mix test space")
    n_dir = pw_sets[0].n_dir
    if test.mixing.shape[0] != n_dir:
        raise ValueError(f"test mixing rows {test.mixing.shape[0]} do not "
                         f"match {n_dir} directions")
    trial = DGSpace.from_planewaves(mesh, pw_sets)
    testsp = DGSpace.from_block_columns(
        mesh, [s.values @ test.mixing for s in pw_sets])
    A = assemble_dg_operator(mesh, form, kappa, n)
    bvec = weak_dirichlet_rhs(mesh, form, kappa, g, f)
    # plain (unconjugated) transpose: the coupled form is bilinear
    B = (testsp.r0.T @ (A.matrix @ trial.r0)).toarray()
    rhs = testsp.r0.T @ bvec
    return CoarseSystem(B, rhs, trial.r0, test.n_test, n_dir, mesh.n_blocks)


def sparse_global_solve(system: CoarseSystem, l1_options=None):
    """l1-minimal snapshot coefficients matching all test rows, plus the
    downscaled fine DG field."""
    if system.matrix.shape[0] > system.matrix.shape[1]:
        raise ValueError("test space is larger than the snapshot space")
    sol = bregman_solve(BasisPursuitProblem(system.matrix, system.rhs,
                                            **dict(l1_options or {})))
    return sol, system.downscale(sol.coeffs)
