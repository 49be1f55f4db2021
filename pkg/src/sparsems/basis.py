"""Online stage for the parameter-dependent path.

Per region and online parameter mu:

1. each boundary draw l gets an online coefficient vector U_l over the
   offline snapshot columns, from the constrained l1 problem whose rows
   test the interior weak-form residual of the local Dirichlet problem
   against the random mixed test columns;
2. online columns restrict to the target block;
3. a small generalized eigenproblem  (Psi' A Psi) z = lambda (Psi' S Psi) z
   on the block picks the dominant low-energy modes, and the multiscale
   basis columns are the corresponding combinations of online columns.

The Dirichlet bookkeeping in step 1 makes the branch-j unit vector
exactly feasible whenever mu equals the offline parameter mu_j: with
interior/boundary split I/B the constraint rows are
t' (A_II Psi_I U + A_IB r_l) = 0, i.e. C = T' Psi_I' A_II Psi_I and
rhs = -T' Psi_I' A_IB r_l.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .fem import assemble_diffusion, assemble_weighted_mass
from .l1 import BasisPursuitProblem, bregman_solve, sparsity_count
from .snapshots import RandomSnapshotSet, TestSpace


def online_snapshot_coeffs(mesh, sset: RandomSnapshotSet, test: TestSpace,
                           field, mu: float, n_online=None, l1_options=None):
    """Sparse coefficient matrix U (snapshot columns x online draws)."""
    if test.kind != "snapshot-mix":
        raise ValueError("online coefficients need a snapshot-mix test space")
    region = sset.region
    L_on = sset.L if n_online is None else int(n_online)
    if not 1 <= L_on <= sset.L:
        raise ValueError(f"n_online={L_on} must be in [1, {sset.L}]")
    l1_options = dict(l1_options or {})

    kappa = field.sample(mesh, mu)
    op = assemble_diffusion(mesh, kappa, region=region).matrix
    I, B = region.interior, region.boundary
    A_II = op[I][:, I]
    A_IB = op[I][:, B]
    psi_i = sset.matrix[I]
    mixed_i = psi_i @ test.mixing                    # (n_I, q)
    C = mixed_i.T @ (A_II @ psi_i)                   # (q, L*J)
    rhs = -(mixed_i.T @ (A_IB @ sset.boundary_vectors[:, :L_on]))

    U = np.empty((sset.n_columns, L_on))
    failures = []
    for l in range(L_on):
        sol = bregman_solve(BasisPursuitProblem(C, rhs[:, l], **l1_options))
        U[:, l] = sol.coeffs
        if not sol.converged:
            failures.append((l, sol.residual))
    if failures:
        detail = ", ".join(f"l={l} residual={r:.3e}" for l, r in failures)
        raise RuntimeError(
            f"l1 solve did not converge on region {region.index}: {detail}")
    return U


def restrict_online(sset: RandomSnapshotSet, U):
    """Online snapshot columns on the target block: restrict(Psi @ U)."""
    return sset.region.restrict(sset.matrix @ U)


def local_eigensolve(psi_on, A_block, S_block, n_modes):
    """Smallest modes of the snapshot-projected pencil.

    Returns (eigenvalues ascending, z-vectors S-orthonormal, basis columns
    psi_on @ z[:, :n_modes]).  A rank-deficient projected mass matrix is
    regularized by a trace-scaled shift (warned); n_modes beyond the
    usable count is truncated (warned).
    """
    psi_on = np.asarray(psi_on)
    if psi_on.size == 0 or not np.any(psi_on):
        raise ValueError("online snapshot columns are all zero")
    k = psi_on.shape[1]
    A = psi_on.T @ (A_block @ psi_on)
    S = psi_on.T @ (S_block @ psi_on)
    A = 0.5 * (A + A.T)
    S = 0.5 * (S + S.T)
    try:
        w, z = la.eigh(A, S)
    except la.LinAlgError:
        shift = 1.0e-12 * np.trace(S) / k
        warnings.warn(f"projected mass matrix is rank deficient; "
                      f"shifting by {shift:.3e}")
        w, z = la.eigh(A, S + shift * np.eye(k))
    if n_modes > k:
        warnings.warn(f"requested {n_modes} modes from {k} online columns; "
                      f"truncating")
        n_modes = k
    return w, z, psi_on @ z[:, :n_modes]


@dataclass
class OnlineBasis:
    """Per-region online space: coefficients over the snapshot columns,
    online columns on the block, the eigenpairs, and the selected modes."""

    block: int
    mu: float
    coeffs: np.ndarray            # U, (L*J, L_on)
    online_columns: np.ndarray    # ((nf+1)^2, L_on) on the target block
    eigenvalues: np.ndarray
    eigvecs: np.ndarray           # (L_on, L_on), S-orthonormal
    n_modes: int

    def basis(self, n_modes=None):
        m = self.n_modes if n_modes is None else n_modes
        return self.online_columns @ self.eigvecs[:, :m]

    def composed_coeffs(self, n_modes=None):
        """Selected-mode coefficients over the offline snapshot columns."""
        m = self.n_modes if n_modes is None else n_modes
        return self.coeffs @ self.eigvecs[:, :m]

    def sparsity(self, n_modes=None, theta_rel=1.0e-8):
        comp = self.composed_coeffs(n_modes)
        theta = theta_rel * (np.max(np.abs(comp)) if comp.size else 0.0)
        return sparsity_count(comp, theta)


def build_online_basis(mesh, field, sset: RandomSnapshotSet, test: TestSpace,
                       mu: float, n_modes: int, n_online=None,
                       l1_options=None) -> OnlineBasis:
    """Full per-region online pipeline (coefficients, restriction, modes)."""
    U = online_snapshot_coeffs(mesh, sset, test, field, mu, n_online, l1_options)
    psi_on = restrict_online(sset, U)
    block = mesh.coarse_element(sset.region.index)
    kappa = field.sample(mesh, mu)
    A = assemble_diffusion(mesh, kappa, region=block).matrix
    S = assemble_weighted_mass(mesh, kappa, region=block).matrix
    w, z, _ = local_eigensolve(psi_on, A, S, n_modes)
    return OnlineBasis(sset.region.index, float(mu), U, psi_on, w, z,
                       min(n_modes, psi_on.shape[1]))
