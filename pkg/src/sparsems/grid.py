"""Two-level Cartesian partitions of the unit square.

The domain D = [0,1]^2 is split into nc x nc square coarse blocks, each
subdivided into nf x nf square fine cells (coarse size H = 1/nc, fine
size h = H/nf).  Everything downstream works with two numberings of the
fine lattice:

* continuous: one degree of freedom per lattice node, (nc*nf + 1)^2 total;
* block-duplicated (DG): every coarse block owns a private copy of its
  (nf+1)^2 nodes, nc^2 * (nf+1)^2 total.

Index conventions are row-major with x running fastest: fine node
(ix, iy) -> iy*(n+1) + ix, fine cell (cx, cy) -> cy*n + cx and coarse
block (bx, by) -> by*nc + bx, where n = nc*nf is the number of fine
cells per axis.  Meshes are immutable after construction; all cached
arrays are read-only views shared between callers.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


def build_mesh(nc: int, nf: int) -> "CartesianMesh":
    """Partition [0,1]^2 into nc x nc coarse blocks of nf x nf fine cells."""
    return CartesianMesh(nc, nf)


class CartesianMesh:
    def __init__(self, nc: int, nf: int):
        nc, nf = int(nc), int(nf)
        if nc < 2 or nf < 2:
            raise ValueError(
                f"mesh needs at least 2 coarse blocks and 2 fine cells per "
                f"block along each axis, got nc={nc}, nf={nf}"
            )
        self.nc = nc
        self.nf = nf
        self.n = nc * nf              # fine cells per axis
        self.H = 1.0 / nc
        self.h = 1.0 / self.n

    # sizes ------------------------------------------------------------
    @property
    def n_cells(self) -> int:
        return self.n * self.n

    @property
    def n_blocks(self) -> int:
        return self.nc * self.nc

    @property
    def n_nodes(self) -> int:
        """Continuous fine dimension (nc*nf + 1)^2."""
        return (self.n + 1) ** 2

    @property
    def n_dg(self) -> int:
        """Block-duplicated fine dimension nc^2 * (nf+1)^2."""
        return self.n_blocks * (self.nf + 1) ** 2

    # geometry ---------------------------------------------------------
    @cached_property
    def nodes(self):
        """Coordinates of the continuous fine nodes, shape (n_nodes, 2)."""
        axis = np.arange(self.n + 1) * self.h
        xx, yy = np.meshgrid(axis, axis, indexing="xy")
        out = np.column_stack([xx.ravel(), yy.ravel()])
        out.setflags(write=False)
        return out

    @cached_property
    def cell_centers(self):
        axis = (np.arange(self.n) + 0.5) * self.h
        xx, yy = np.meshgrid(axis, axis, indexing="xy")
        out = np.column_stack([xx.ravel(), yy.ravel()])
        out.setflags(write=False)
        return out

    def node_id(self, ix, iy):
        return iy * (self.n + 1) + ix

    def cell_id(self, cx, cy):
        return cy * self.n + cx

    def block_id(self, bx, by):
        return by * self.nc + bx

    def block_xy(self, j):
        return j % self.nc, j // self.nc

    # connectivity -----------------------------------------------------
    @cached_property
    def cell_nodes(self):
        """Continuous node ids of every fine cell, shape (n_cells, 4).

        Node order is counterclockwise from the lower-left corner:
        (cx,cy), (cx+1,cy), (cx+1,cy+1), (cx,cy+1).
        """
        cx, cy = np.meshgrid(np.arange(self.n), np.arange(self.n), indexing="xy")
        cx, cy = cx.ravel(), cy.ravel()
        conn = np.column_stack([
            self.node_id(cx, cy),
            self.node_id(cx + 1, cy),
            self.node_id(cx + 1, cy + 1),
            self.node_id(cx, cy + 1),
        ])
        conn.setflags(write=False)
        return conn

    @cached_property
    def cell_nodes_dg(self):
        """DG node ids of every fine cell, shape (n_cells, 4), same order."""
        nf = self.nf
        conn = np.empty((self.n_cells, 4), dtype=np.int64)
        for j in range(self.n_blocks):
            bx, by = self.block_xy(j)
            off = j * (nf + 1) ** 2
            lx, ly = np.meshgrid(np.arange(nf), np.arange(nf), indexing="xy")
            lx, ly = lx.ravel(), ly.ravel()
            local = np.column_stack([
                ly * (nf + 1) + lx,
                ly * (nf + 1) + lx + 1,
                (ly + 1) * (nf + 1) + lx + 1,
                (ly + 1) * (nf + 1) + lx,
            ])
            cids = self.cell_id(bx * nf + lx, by * nf + ly)
            conn[cids] = off + local
        conn.setflags(write=False)
        return conn

    @cached_property
    def dg_to_node(self):
        """Map DG index -> continuous node id (duplicated nodes collapse)."""
        nf = self.nf
        out = np.empty(self.n_dg, dtype=np.int64)
        lx, ly = np.meshgrid(np.arange(nf + 1), np.arange(nf + 1), indexing="xy")
        lx, ly = lx.ravel(), ly.ravel()
        for j in range(self.n_blocks):
            bx, by = self.block_xy(j)
            off = j * (nf + 1) ** 2
            out[off:off + (nf + 1) ** 2] = self.node_id(bx * nf + lx, by * nf + ly)
        out.setflags(write=False)
        return out

    @cached_property
    def boundary_nodes(self):
        """Continuous ids of the nodes on the domain boundary."""
        n = self.n
        ii = np.arange(n + 1)
        ids = np.concatenate([
            self.node_id(ii, 0),
            self.node_id(ii, n),
            self.node_id(0, ii[1:-1]),
            self.node_id(n, ii[1:-1]),
        ])
        ids = np.unique(ids)
        ids.setflags(write=False)
        return ids

    def block_cells(self, j):
        """Global fine-cell ids of block j, shape (nf*nf,)."""
        bx, by = self.block_xy(j)
        lx, ly = np.meshgrid(np.arange(self.nf), np.arange(self.nf), indexing="xy")
        return self.cell_id(bx * self.nf + lx.ravel(), by * self.nf + ly.ravel())

    def block_nodes(self, j):
        """Continuous node ids of block j's (nf+1)^2 lattice nodes."""
        bx, by = self.block_xy(j)
        lx, ly = np.meshgrid(np.arange(self.nf + 1), np.arange(self.nf + 1),
                             indexing="xy")
        return self.node_id(bx * self.nf + lx.ravel(), by * self.nf + ly.ravel())

    def coarse_element(self, j) -> "CoarseElement":
        return _build_element(self, j)

    def __repr__(self):
        return f"CartesianMesh(nc={self.nc}, nf={self.nf})"


def _rect_region(mesh, ix0, ix1, iy0, iy1):
    """Node/cell bookkeeping for the lattice rectangle [ix0..ix1]x[iy0..iy1]."""
    wx = ix1 - ix0 + 1
    wy = iy1 - iy0 + 1
    lx, ly = np.meshgrid(np.arange(wx), np.arange(wy), indexing="xy")
    lx, ly = lx.ravel(), ly.ravel()
    node_gids = mesh.node_id(ix0 + lx, iy0 + ly)
    boundary = np.flatnonzero((lx == 0) | (lx == wx - 1) | (ly == 0) | (ly == wy - 1))
    interior = np.flatnonzero((lx > 0) & (lx < wx - 1) & (ly > 0) & (ly < wy - 1))

    ccx, ccy = np.meshgrid(np.arange(wx - 1), np.arange(wy - 1), indexing="xy")
    ccx, ccy = ccx.ravel(), ccy.ravel()
    cell_ids = mesh.cell_id(ix0 + ccx, iy0 + ccy)
    cell_nodes_local = np.column_stack([
        ccy * wx + ccx,
        ccy * wx + ccx + 1,
        (ccy + 1) * wx + ccx + 1,
        (ccy + 1) * wx + ccx,
    ])
    return node_gids, boundary, interior, cell_ids, cell_nodes_local


@dataclass(frozen=True)
class CoarseElement:
    """One coarse block: its fine cells and nodes in a local numbering."""

    index: int
    node_gids: np.ndarray        # continuous ids, block-local lattice order
    boundary: np.ndarray         # local indices on the block boundary
    interior: np.ndarray
    cell_ids: np.ndarray         # global fine-cell ids
    cell_nodes_local: np.ndarray  # (nf*nf, 4) local connectivity

    @property
    def n_nodes(self):
        return len(self.node_gids)


def _build_element(mesh, j):
    if not 0 <= j < mesh.n_blocks:
        raise ValueError(f"block index {j} out of range [0, {mesh.n_blocks})")
    bx, by = mesh.block_xy(j)
    nf = mesh.nf
    gids, bnd, intr, cells, conn = _rect_region(
        mesh, bx * nf, (bx + 1) * nf, by * nf, (by + 1) * nf)
    return CoarseElement(j, gids, bnd, intr, cells, conn)


@dataclass(frozen=True)
class OversampledRegion:
    """A coarse block extended by a number of fine-cell layers, clipped at
    the domain boundary.  `restriction` holds the local indices of the
    target block's nodes, ordered by the block-local lattice, so that
    vector[restriction] restricts a region field to the block."""

    index: int                   # target block
    layers: int
    node_gids: np.ndarray
    boundary: np.ndarray
    interior: np.ndarray
    cell_ids: np.ndarray
    cell_nodes_local: np.ndarray
    restriction: np.ndarray

    @property
    def n_nodes(self):
        return len(self.node_gids)

    def restrict(self, values):
        """Restrict region-node values (vector or column stack) to the block."""
        return np.asarray(values)[self.restriction]

    def extend(self, block_values):
        """Zero-extend block-node values to the region."""
        block_values = np.asarray(block_values)
        out = np.zeros((self.n_nodes,) + block_values.shape[1:],
                       dtype=block_values.dtype)
        out[self.restriction] = block_values
        return out


def oversample(mesh: CartesianMesh, j: int, layers: int) -> OversampledRegion:
    """Extend block j by `layers` fine cells per side, clipped at [0,1]^2."""
    if not 0 <= j < mesh.n_blocks:
        raise ValueError(f"block index {j} out of range [0, {mesh.n_blocks})")
    if layers < 0:
        raise ValueError("layers must be non-negative")
    bx, by = mesh.block_xy(j)
    nf, n = mesh.nf, mesh.n
    ix0 = max(bx * nf - layers, 0)
    ix1 = min((bx + 1) * nf + layers, n)
    iy0 = max(by * nf - layers, 0)
    iy1 = min((by + 1) * nf + layers, n)
    gids, bnd, intr, cells, conn = _rect_region(mesh, ix0, ix1, iy0, iy1)

    wx = ix1 - ix0 + 1
    lx, ly = np.meshgrid(np.arange(nf + 1), np.arange(nf + 1), indexing="xy")
    lx, ly = lx.ravel(), ly.ravel()
    restriction = (by * nf + ly - iy0) * wx + (bx * nf + lx - ix0)
    return OversampledRegion(j, layers, gids, bnd, intr, cells, conn, restriction)


@dataclass(frozen=True)
class CoarseEdge:
    """A full side of a coarse block, made of nf collinear fine facets.

    For interior edges `k_plus` is the lower-indexed of the two adjacent
    blocks and the unit normal points from k_plus to k_minus (+x for
    vertical edges, +y for horizontal ones).  Boundary edges carry the
    outward normal and k_minus is None.
    """

    kind: str                    # "interior" | "boundary"
    orientation: str             # "v" (segment along y) | "h" (along x)
    k_plus: int
    k_minus: int | None
    line: int                    # fine lattice line of the constant axis
    lo: int                      # first fine index along the edge
    normal: tuple

    def endpoints(self, mesh):
        h, nf = mesh.h, mesh.nf
        c = self.line * h
        a, b = self.lo * h, (self.lo + nf) * h
        if self.orientation == "v":
            return (c, a), (c, b)
        return (a, c), (b, c)

    def quadrature(self, mesh):
        """Two-point Gauss nodes and weights on every fine facet.

        Exact for products of bilinear traces (cubics along the edge).
        Returns (points (2*nf, 2), weights (2*nf,)).
        """
        h, nf = mesh.h, mesh.nf
        offs = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])
        t = ((self.lo + np.arange(nf))[:, None] + offs[None, :]).ravel() * h
        c = np.full_like(t, self.line * h)
        pts = np.column_stack([c, t] if self.orientation == "v" else [t, c])
        w = np.full(2 * nf, h / 2.0)
        return pts, w


def coarse_edges(mesh: CartesianMesh) -> list:
    """All coarse edges: 2*nc*(nc-1) interior plus 4*nc boundary ones."""
    nc, nf = mesh.nc, mesh.nf
    edges = []
    for by in range(nc):
        for bx in range(nc - 1):
            edges.append(CoarseEdge("interior", "v", mesh.block_id(bx, by),
                                    mesh.block_id(bx + 1, by),
                                    (bx + 1) * nf, by * nf, (1.0, 0.0)))
    for by in range(nc - 1):
        for bx in range(nc):
            edges.append(CoarseEdge("interior", "h", mesh.block_id(bx, by),
                                    mesh.block_id(bx, by + 1),
                                    (by + 1) * nf, bx * nf, (0.0, 1.0)))
    for by in range(nc):
        edges.append(CoarseEdge("boundary", "v", mesh.block_id(0, by), None,
                                0, by * nf, (-1.0, 0.0)))
        edges.append(CoarseEdge("boundary", "v", mesh.block_id(nc - 1, by), None,
                                nc * nf, by * nf, (1.0, 0.0)))
    for bx in range(nc):
        edges.append(CoarseEdge("boundary", "h", mesh.block_id(bx, 0), None,
                                0, bx * nf, (0.0, -1.0)))
        edges.append(CoarseEdge("boundary", "h", mesh.block_id(bx, nc - 1), None,
                                nc * nf, bx * nf, (0.0, 1.0)))
    return edges


def neighborhood(mesh: CartesianMesh, i: int) -> set:
    """Blocks whose closure contains coarse node i (4/2/1 for interior,
    edge and corner nodes)."""
    nc = mesh.nc
    if not 0 <= i < (nc + 1) ** 2:
        raise ValueError(f"coarse node {i} out of range [0, {(nc + 1) ** 2})")
    vx, vy = i % (nc + 1), i // (nc + 1)
    blocks = set()
    for bx in (vx - 1, vx):
        for by in (vy - 1, vy):
            if 0 <= bx < nc and 0 <= by < nc:
                blocks.add(mesh.block_id(bx, by))
    return blocks
