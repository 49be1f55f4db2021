"""Snapshot families and their randomized test spaces.

Two families are built here:

* randomized harmonic snapshots: on an oversampled region, solve the
  local diffusion problem for each offline parameter with i.i.d. standard
  Gaussian boundary data, reusing the same boundary vectors across all
  parameter branches (that reuse is what makes an online solution sparse
  across branches);
* plane-wave snapshots: per coarse block, nodal samples of
  exp(i*omega*k_m.x) for unit directions k_m = (sin(pi*m/n_dir),
  cos(pi*m/n_dir)), m = 1..n_dir, zero outside the block.

Randomness is Box-Muller over Philox counter streams keyed by
(seed, tags...), so region builds are deterministic and order
independent.  Snapshot matrices are used as-is everywhere: nothing in
this module (or downstream) orthogonalizes them, since sparsity is
accounted in snapshot coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fem import LocalProblem, solve_local_dirichlet
from .grid import OversampledRegion, oversample


def derive_seed(master: int, *tags) -> int:
    """Stable per-region/per-purpose seed from a master seed."""
    ss = np.random.SeedSequence([int(master), *map(int, tags)])
    return int(ss.generate_state(1, np.uint64)[0])


def _uniforms(seed, count):
    gen = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))
    return gen.random(count)


def gaussian_vectors(seed: int, count: int, length: int):
    """(length, count) matrix whose columns are i.i.d. standard Gaussian
    vectors: Box-Muller over a Philox counter-based uniform stream."""
    if count < 1 or length < 1:
        raise ValueError("count and length must be at least 1")
    total = count * length
    half = (total + 1) // 2
    u = _uniforms(seed, 2 * half)
    r = np.sqrt(-2.0 * np.log(1.0 - u[:half]))   # 1-u in (0, 1]: log is finite
    ang = 2.0 * np.pi * u[half:]
    z = np.empty(2 * half)
    z[0::2] = r * np.cos(ang)
    z[1::2] = r * np.sin(ang)
    return z[:total].reshape(count, length).T.copy()


@dataclass
class RandomSnapshotSet:
    """Randomized harmonic snapshots on one oversampled region.

    `matrix` has one column per (branch j, draw l) pair, branch-major:
    column j*L + l solves the local problem at parameter mus[j] with
    boundary data boundary_vectors[:, l].  The same boundary draws serve
    every branch.
    """

    region: OversampledRegion
    mus: tuple
    L: int
    seed: int
    boundary_vectors: np.ndarray   # (n boundary nodes, L)
    matrix: np.ndarray             # (region nodes, L * len(mus))

    @property
    def n_columns(self):
        return self.matrix.shape[1]

    def column(self, l, j):
        return self.matrix[:, j * self.L + l]

    def branch_slice(self, j):
        return slice(j * self.L, (j + 1) * self.L)

    def restricted(self):
        """All columns restricted to the target block."""
        return self.region.restrict(self.matrix)


def build_offline_snapshots(mesh, field, region: OversampledRegion, mus, L: int,
                            seed: int, boundary_vectors=None) -> RandomSnapshotSet:
    """Solve L local Dirichlet problems per offline parameter on the region.

    `boundary_vectors` overrides the Gaussian draws (tests inject known
    data through it); columns are stacked branch-major.
    """
    mus = tuple(float(m) for m in mus)
    if L < 1:
        raise ValueError("need at least one boundary draw")
    n_bnd = len(region.boundary)
    if boundary_vectors is None:
        boundary_vectors = gaussian_vectors(seed, L, n_bnd)
    else:
        boundary_vectors = np.asarray(boundary_vectors, dtype=float)
        if boundary_vectors.shape != (n_bnd, L):
            raise ValueError(f"boundary vectors must be ({n_bnd}, {L})")

    cols = np.empty((region.n_nodes, L * len(mus)))
    for j, mu in enumerate(mus):
        kappa = field.sample(mesh, mu)
        try:
            prob = LocalProblem(mesh, kappa, region)
            cols[:, j * L:(j + 1) * L] = solve_local_dirichlet(prob, boundary_vectors)
        except RuntimeError as err:
            raise RuntimeError(
                f"snapshot solve failed on region {region.index}, branch "
                f"mu={mu}: {err}") from err
    return RandomSnapshotSet(region, mus, L, int(seed), boundary_vectors, cols)


def build_all_offline(mesh, field, mus, L, layers, master_seed):
    """Offline snapshots for every coarse block, seeded per region."""
    sets = []
    for j in range(mesh.n_blocks):
        region = oversample(mesh, j, layers)
        sets.append(build_offline_snapshots(
            mesh, field, region, mus, L, derive_seed(master_seed, j)))
    return sets


@dataclass
class PlaneWaveSet:
    """Plane-wave snapshots supported on one coarse block."""

    block: int
    omega: float
    directions: np.ndarray        # (n_dir, 2) unit vectors
    values: np.ndarray            # ((nf+1)^2, n_dir) complex nodal samples

    @property
    def n_dir(self):
        return self.directions.shape[0]


def planewave_directions(n_dir: int):
    """Unit directions (sin(pi*m/n_dir), cos(pi*m/n_dir)), m = 1..n_dir."""
    m = np.arange(1, n_dir + 1)
    ang = np.pi * m / n_dir
    return np.column_stack([np.sin(ang), np.cos(ang)])


def build_planewave_snapshots(mesh, omega: float, n_dir: int):
    """One PlaneWaveSet per coarse block (block-major global columns)."""
    if n_dir < 2:
        raise ValueError("need at least two propagating directions")
    dirs = planewave_directions(n_dir)
    sets = []
    for j in range(mesh.n_blocks):
        xy = mesh.nodes[mesh.block_nodes(j)]
        phase = 1j * omega * (xy @ dirs.T)
        sets.append(PlaneWaveSet(j, float(omega), dirs, np.exp(phase)))
    return sets


@dataclass
class TestSpace:
    """Low-dimensional random test space.

    kind "snapshot-mix": columns of one region's snapshot matrix mixed by
    a Gaussian (L*J, q) matrix.  kind "direction-mix": one Gaussian
    (n_dir, n_test) matrix shared by every block, mixing plane-wave
    directions.
    """

    kind: str
    mixing: np.ndarray
    seed: int
    columns: np.ndarray | None = None   # mixed nodal columns (snapshot-mix)

    @property
    def n_test(self):
        return self.mixing.shape[1]


def build_snapshot_test_space(snapshot_set: RandomSnapshotSet, q: int,
                              seed: int, mixing=None) -> TestSpace:
    n_cols = snapshot_set.n_columns
    if mixing is None:
        if not 1 <= q < n_cols:
            raise ValueError(f"test dimension q={q} must be in [1, {n_cols})")
        mixing = gaussian_vectors(seed, q, n_cols)
    else:
        mixing = np.asarray(mixing, dtype=float)
    return TestSpace("snapshot-mix", mixing, int(seed),
                     snapshot_set.matrix @ mixing)


def build_direction_test_space(n_dir: int, n_test: int, seed: int,
                               mixing=None) -> TestSpace:
    if mixing is None:
        if not 1 <= n_test <= n_dir:
            raise ValueError(f"n_test={n_test} must be in [1, {n_dir}]")
        mixing = gaussian_vectors(seed, n_test, n_dir)
    else:
        mixing = np.asarray(mixing, dtype=float)
    return TestSpace("direction-mix", mixing, int(seed))


# ----------------------------------------------------------------------
# plain-text bundles, so offline and online stages can run as separate
# invocations

def save_snapshot_bundle(path, sset: RandomSnapshotSet):
    region = sset.region
    with open(path, "w") as fh:
        fh.write(f"block {region.index}\n")
        fh.write(f"layers {region.layers}\n")
        fh.write("mus " + " ".join("%.17g" % m for m in sset.mus) + "\n")
        fh.write(f"L {sset.L}\n")
        fh.write(f"seed {sset.seed}\n")
        fh.write(f"shape {sset.matrix.shape[0]} {sset.matrix.shape[1]}\n")
        for row in sset.matrix:
            fh.write(" ".join("%.17g" % v for v in row))
            fh.write("\n")


def load_snapshot_bundle(path, mesh) -> RandomSnapshotSet:
    with open(path) as fh:
        head = {}
        for _ in range(6):
            key, _, rest = fh.readline().rstrip("\n").partition(" ")
            head[key] = rest
        rows, cols = (int(t) for t in head["shape"].split())
        matrix = np.loadtxt(fh, ndmin=2)
    if matrix.shape != (rows, cols):
        raise ValueError(f"{path}: truncated bundle")
    mus = tuple(float(t) for t in head["mus"].split())
    L = int(head["L"])
    region = oversample(mesh, int(head["block"]), int(head["layers"]))
    if matrix.shape != (region.n_nodes, L * len(mus)):
        raise ValueError(f"{path}: bundle does not match the mesh")
    boundary_vectors = matrix[region.boundary, :L].copy()
    return RandomSnapshotSet(region, mus, L, int(head["seed"]),
                             boundary_vectors, matrix)


def save_planewave_bundle(path, pwset: PlaneWaveSet):
    """Plane waves are analytic: the bundle records parameters only and
    the nodal columns are regenerated on load."""
    with open(path, "w") as fh:
        fh.write(f"block {pwset.block}\n")
        fh.write("omega %.17g\n" % pwset.omega)
        fh.write(f"directions {pwset.n_dir}\n")


def load_planewave_bundle(path, mesh) -> PlaneWaveSet:
    with open(path) as fh:
        head = dict(line.rstrip("\n").partition(" ")[::2] for line in fh)
    block = int(head["block"])
    omega = float(head["omega"])
    n_dir = int(head["directions"])
    dirs = planewave_directions(n_dir)
    xy = mesh.nodes[mesh.block_nodes(block)]
    return PlaneWaveSet(block, omega, dirs, np.exp(1j * omega * (xy @ dirs.T)))
