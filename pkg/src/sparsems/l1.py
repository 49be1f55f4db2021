"""Equality-constrained basis pursuit:  min |U|_1  subject to  C U = f.

Solved by add-the-residual-back Bregman iteration.  The constraint rows
are first orthonormalized through an SVD of C — this changes neither the
feasible set nor the objective, so the minimizer is unchanged, but it
makes the least-squares term of the inner subproblem a projection and
removes the row conditioning of assembled constraint systems.  Each
outer step feeds the accumulated constraint residual back into the
right-hand side and solves the penalized subproblem
min |u|_1 + (nu/2)|Cu - b|^2 by shrinkage on gradient steps of the
least-squares term (FISTA).  With exact inner solves the outer loop
reaches the constrained minimizer in finitely many steps; a final
least-squares polish on the detected support is accepted only when it
improves both the residual and the l1 norm.

The solver keeps the best feasible iterate seen so far, so the reported
residual history is non-increasing.  Rank-deficient constraint matrices
are solved in the least-squares sense against their row space and
flagged; an inconsistent right-hand side then shows up as a
non-converged report, never silently.

Real and complex problems share one code path; the complex l1 norm is
the sum of moduli and shrinkage scales each entry's modulus.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class BasisPursuitProblem:
    C: np.ndarray
    f: np.ndarray
    nu: float = 10.0
    eps_constraint: float = 1.0e-8    # relative: |CU-f| <= eps*max(1, |f|)
    eps_stagnation: float = 1.0e-13
    max_iter: int = 10000             # outer Bregman cap
    inner_max: int = 150
    inner_tol: float = 1.0e-10
    theta_rel: float = 1.0e-8         # sparsity threshold: theta_rel*max|U|

    def __post_init__(self):
        self.C = np.atleast_2d(np.asarray(self.C))
        self.f = np.asarray(self.f).reshape(-1)
        if self.C.shape[0] != self.f.shape[0]:
            raise ValueError(f"C has {self.C.shape[0]} rows but f has "
                             f"{self.f.shape[0]} entries")
        if self.nu <= 0 or self.eps_constraint <= 0:
            raise ValueError("nu and eps_constraint must be positive")

    @property
    def underdetermined(self):
        return self.C.shape[0] < self.C.shape[1]


@dataclass
class SparseSolution:
    coeffs: np.ndarray
    residual: float               # |C U - f|_2, original scaling
    iterations: int
    converged: bool
    threshold: float
    nnz: int
    rank_deficient: bool = False
    residual_history: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def l1(self):
        return float(np.sum(np.abs(self.coeffs)))


def shrink(v, t):
    """Soft threshold: componentwise modulus shrink by t, phase kept."""
    if t < 0:
        raise ValueError("threshold must be non-negative")
    v = np.asarray(v)
    if np.iscomplexobj(v):
        a = np.abs(v)
        return v * (np.maximum(a - t, 0.0) / np.where(a > 0.0, a, 1.0))
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def sparsity_count(U, theta):
    """Number of entries with modulus above theta."""
    if theta < 0:
        raise ValueError("threshold must be non-negative")
    return int(np.count_nonzero(np.abs(np.asarray(U)) > theta))


def _fista(apply_g, Atb, u0, nu, tol, max_iter):
    """min |u|_1 + (nu/2)|Au - b|^2 for A with orthonormal rows.

    The stagnation test runs every fourth step only; the momentum update
    dominates the cost otherwise.
    """
    u = u0
    y = u0
    t = 1.0
    thr = 1.0 / nu
    for k in range(max_iter):
        u_next = shrink(y - (apply_g(y) - Atb), thr)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        y = u_next + ((t - 1.0) / t_next) * (u_next - u)
        stop = (k % 4 == 3 and np.max(np.abs(u_next - u))
                <= tol * max(1.0, np.max(np.abs(u_next))))
        u, t = u_next, t_next
        if stop:
            break
    return u


def bregman_solve(problem: BasisPursuitProblem) -> SparseSolution:
    """Solve the basis pursuit problem; non-convergence is always reported.

    The returned solution carries the original-scale constraint residual,
    the accepted-iterate residual history, and the count of entries above
    theta_rel * max|U|.
    """
    C, f = problem.C, problem.f
    m, n = C.shape
    complex_input = np.iscomplexobj(C) or np.iscomplexobj(f)
    dtype = complex if complex_input else float
    C = C.astype(dtype)
    f = f.astype(dtype)

    f_norm = float(np.linalg.norm(f))
    tol_orig = problem.eps_constraint * max(1.0, f_norm)
    if f_norm == 0.0:
        return SparseSolution(np.zeros(n, dtype=dtype), 0.0, 0, True, 0.0, 0)

    # orthonormalize the constraint rows: C = Uc diag(S) Vh, keep rank r
    Uc, S, Vh = np.linalg.svd(C, full_matrices=False)
    r = int(np.count_nonzero(S > max(m, n) * np.finfo(float).eps * S[0])) \
        if S.size else 0
    rank_def = r < min(m, n)
    if r == 0:
        return SparseSolution(np.zeros(n, dtype=dtype), f_norm, 0,
                              f_norm <= tol_orig, 0.0, 0, rank_deficient=True)
    A = Vh[:r]                              # orthonormal rows, |A|_2 = 1
    Sr = S[:r]
    proj = Uc[:, :r].conj().T @ f
    b0 = proj / Sr                          # A u = b0  <=>  C u = P_range f
    if r == m:
        f_perp2 = 0.0                       # rows span the whole row space
    else:
        f_perp2 = float(np.linalg.norm(f - Uc[:, :r] @ proj) ** 2)

    s_f = float(np.linalg.norm(b0))
    if s_f == 0.0:
        res = np.sqrt(f_perp2)
        return SparseSolution(np.zeros(n, dtype=dtype), res, 0,
                              res <= tol_orig, 0.0, 0, rank_def)
    b_target = b0 / s_f
    Ah = A.conj().T
    G = Ah @ A if n <= 2048 else None
    apply_g = (lambda y: G @ y) if G is not None else (lambda y: Ah @ (A @ y))

    def orig_residual(w):
        # w = A u/s_f - b_target in working units
        return float(np.sqrt((s_f ** 2) * np.linalg.norm(Sr * w) ** 2 + f_perp2))

    u = np.zeros(n, dtype=dtype)
    b = b_target.copy()
    best_u = u
    best_res = np.inf
    history = []
    stall = 0
    nu = problem.nu
    converged = False
    it = 0
    for it in range(1, problem.max_iter + 1):
        u = _fista(apply_g, Ah @ b, u, nu, problem.inner_tol, problem.inner_max)
        w = A @ u - b_target
        res = orig_residual(w)
        if res <= best_res:
            best_u, best_res = u, res
            history.append(res)
        if best_res <= tol_orig:
            converged = True
            break
        if res > best_res * (1.0 - problem.eps_stagnation):
            # the dual build-up speed is the working residual, which can be
            # tiny for ill-conditioned rows: escalate the penalty instead of
            # crawling (augmented-Lagrangian continuation)
            stall += 1
            if stall % 3 == 0 and nu < 1.0e14:
                nu *= 100.0
            if stall >= 40 or not np.isfinite(res):
                break                  # stagnating or diverging: infeasible rows
        else:
            stall = 0
        b = b - w                      # add the residual back

    U = best_u * s_f
    U, res = _polish(C, f, U, best_res, tol_orig, problem)
    if history and res < history[-1]:
        history.append(res)
    converged = converged or res <= tol_orig

    theta = problem.theta_rel * (float(np.max(np.abs(U))) if U.size else 0.0)
    return SparseSolution(U, res, it, converged, theta,
                          sparsity_count(U, theta), rank_def,
                          np.asarray(history))


def _polish(C, f, U, res, tol, problem):
    """Least-squares debias on candidate supports of decreasing threshold.

    A candidate is admissible when it stays within the constraint
    tolerance (or improves the residual) and does not grow the l1 norm
    beyond the solver's dominance slack (the iterate it replaces is
    slightly infeasible, so its l1 norm may legitimately undershoot the
    minimizer's).  Candidates within tolerance are ranked by l1 norm then
    residual, so approximation dust below the support thresholds is
    zeroed; otherwise the smallest residual wins.
    """
    umax = float(np.max(np.abs(U))) if U.size else 0.0
    if umax == 0.0:
        return U, res
    m = C.shape[0]
    l1_cap = float(np.sum(np.abs(U))) * (1.0 + 1.0e-6)

    def rank(res_c, l1_c, nnz_c):
        # candidates within tolerance are equivalent solutions at the
        # solver's accuracy: prefer the sparsest, then l1, then residual
        if res_c <= tol:
            return (0, nnz_c, l1_c, res_c)
        return (1, 0, 0.0, res_c)

    best_u, best_res = U, res
    best_key = rank(res, float(np.sum(np.abs(U))),
                    sparsity_count(U, problem.theta_rel * umax))
    seen = set()
    order = np.argsort(-np.abs(U), kind="stable")
    supports = [np.flatnonzero(np.abs(U) > thr * umax)
                for thr in (1.0e-1, 1.0e-2, 1.0e-4, problem.theta_rel)]
    supports.append(np.sort(order[:m]))
    for support in supports:
        if support.size == 0 or support.size > m:
            continue
        key = support.tobytes()
        if key in seen:
            continue
        seen.add(key)
        x, *_ = np.linalg.lstsq(C[:, support], f, rcond=None)
        cand = np.zeros_like(U)
        cand[support] = x
        res_c = float(np.linalg.norm(C @ cand - f))
        l1_c = float(np.sum(np.abs(cand)))
        if l1_c > l1_cap or (res_c > res and res_c > tol):
            continue
        cand_key = rank(res_c, l1_c, int(support.size))
        if cand_key < best_key:
            best_u, best_res, best_key = cand, res_c, cand_key
    return best_u, best_res


def solve_bp(C, f, **options) -> SparseSolution:
    return bregman_solve(BasisPursuitProblem(C, f, **options))
