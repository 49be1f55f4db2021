"""Sparse multiscale finite elements on structured grids.

Local snapshot spaces (randomized harmonic solves, or block-supported
plane waves) in which the solution is sparse, multiscale basis selection
by equality-constrained l1 minimization, and a symmetric interior-penalty
DG coarse coupling.
"""

__version__ = "0.1.0"

from .basis import OnlineBasis, build_online_basis, local_eigensolve, \
    online_snapshot_coeffs, restrict_online
from .config import ExperimentConfig, default_config, load_config, \
    parse_config, save_config
from .fem import ErrorReport, LocalProblem, SparseOperator, \
    assemble_diffusion, assemble_helmholtz, assemble_weighted_mass, \
    error_norms, fine_reference_solve, solve_local_dirichlet
from .fields import ParamField, Raster, SynthSpec, helmholtz_n, sample, \
    synth_heterogeneous
from .grid import CartesianMesh, CoarseEdge, CoarseElement, \
    OversampledRegion, build_mesh, coarse_edges, neighborhood, oversample
from .ipdg import CoarseSystem, DGForm, DGSpace, assemble_dg_operator, \
    assemble_rect_system, project_and_solve, sparse_global_solve, \
    weak_dirichlet_rhs
from .l1 import BasisPursuitProblem, SparseSolution, bregman_solve, \
    shrink, solve_bp, sparsity_count
from .runner import RunReport, RunRow, emit_table, run_offline, run_online
from .snapshots import PlaneWaveSet, RandomSnapshotSet, TestSpace, \
    build_direction_test_space, build_offline_snapshots, \
    build_planewave_snapshots, build_snapshot_test_space, gaussian_vectors
