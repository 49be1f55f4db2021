"""Experiment pipelines: offline snapshot construction, online sweeps,
and delimited reports.

The offline stage persists one plain-text bundle per coarse region so
the online stage can run as a separate invocation; rerunning either
stage with the same config and seed reproduces its outputs byte for
byte.  The online stage computes the fine reference solution once,
sweeps the coarse space dimension, and reports per-row relative errors,
snapshot-coordinate sparsity and the cost counters, closing with the
full-snapshot-space Galerkin row.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import __version__
from .basis import build_online_basis
from .config import ExperimentConfig, config_hash, config_text
from .fem import error_norms, fine_reference_solve
from .fields import ParamField, Raster, SynthSpec, helmholtz_n, \
    synth_heterogeneous, write_matrix_text
from .grid import build_mesh
from .ipdg import CoarseSystem, DGForm, DGSpace, assemble_dg_operator, \
    assemble_rect_system, project_and_solve, sparse_global_solve, \
    weak_dirichlet_rhs
from .l1 import sparsity_count
from .snapshots import build_direction_test_space, build_offline_snapshots, \
    build_planewave_snapshots, build_snapshot_test_space, derive_seed, \
    load_planewave_bundle, load_snapshot_bundle, save_planewave_bundle, \
    save_snapshot_bundle
from .grid import oversample


@dataclass
class RunRow:
    dim: int
    l2_pct: float
    h1_pct: float
    sparsity: int


@dataclass
class RunReport:
    experiment: str
    rows: list
    snapshot_row: RunRow
    meta: dict


class BundleMismatchError(RuntimeError):
    pass


# ----------------------------------------------------------------------
# field synthesis shared by both stages

def make_mesh(cfg: ExperimentConfig):
    return build_mesh(cfg.nc, cfg.nf)


def diffusion_field(cfg: ExperimentConfig, mesh) -> ParamField:
    if cfg.field_variant == "constant":
        return ParamField.constant(mesh, cfg.kappa_constant)
    spec1 = SynthSpec(seed=derive_seed(cfg.seed, 11), channels=cfg.channels,
                      channel_width=cfg.channel_width,
                      channel_contrast=cfg.contrast,
                      inclusions=cfg.inclusions,
                      inclusion_radius=cfg.inclusion_radius,
                      inclusion_contrast=cfg.contrast)
    k1 = synth_heterogeneous(spec1, mesh)
    if cfg.field_variant == "shifted":
        return ParamField.shifted(k1)
    spec2 = SynthSpec(seed=derive_seed(cfg.seed, 12), channels=cfg.channels,
                      channel_width=cfg.channel_width,
                      channel_contrast=cfg.contrast,
                      inclusions=cfg.inclusions,
                      inclusion_radius=cfg.inclusion_radius,
                      inclusion_contrast=cfg.contrast)
    return ParamField.affine(k1, synth_heterogeneous(spec2, mesh))


def refraction_raster(cfg: ExperimentConfig, mesh) -> Raster:
    spec = SynthSpec(seed=derive_seed(cfg.seed, 13),
                     inclusions=cfg.n_inclusions,
                     inclusion_radius=cfg.n_inclusion_radius,
                     inclusion_contrast=cfg.n_contrast)
    return helmholtz_n(spec, mesh)


def boundary_wave(cfg: ExperimentConfig):
    """Dirichlet data exp(-i*omega*k.x) with k at angle pi*bc_angle_pi."""
    ang = np.pi * cfg.bc_angle_pi
    kx, ky = np.sin(ang), np.cos(ang)
    omega = cfg.omega

    def g(x, y):
        return np.exp(-1j * omega * (kx * x + ky * y))

    return g


def dg_to_grid(mesh, vec):
    """Average a block-duplicated field onto the continuous lattice,
    returned as an (n+1, n+1) array for dumps and figures."""
    acc = np.zeros(mesh.n_nodes, dtype=np.asarray(vec).dtype)
    cnt = np.zeros(mesh.n_nodes)
    np.add.at(acc, mesh.dg_to_node, vec)
    np.add.at(cnt, mesh.dg_to_node, 1.0)
    return (acc / cnt).reshape(mesh.n + 1, mesh.n + 1)


# ----------------------------------------------------------------------
# offline stage

def run_offline(cfg: ExperimentConfig, out_dir):
    """Build and persist the snapshot bundles; returns the bundle dir."""
    bundle_dir = os.path.join(out_dir, "bundles")
    os.makedirs(bundle_dir, exist_ok=True)
    mesh = make_mesh(cfg)
    if cfg.is_helmholtz:
        sets = build_planewave_snapshots(mesh, cfg.omega, cfg.directions)
        for s in sets:
            save_planewave_bundle(
                os.path.join(bundle_dir, f"region_{s.block:04d}.txt"), s)
        solves = 0
    else:
        field = diffusion_field(cfg, mesh)
        for j in range(mesh.n_blocks):
            region = oversample(mesh, j, cfg.layers)
            sset = build_offline_snapshots(mesh, field, region, cfg.offline_mus,
                                           cfg.snapshots, derive_seed(cfg.seed, j))
            save_snapshot_bundle(
                os.path.join(bundle_dir, f"region_{j:04d}.txt"), sset)
        solves = mesh.n_blocks * len(cfg.offline_mus) * cfg.snapshots
    _write_manifest(cfg, out_dir, {"offline_local_solves": solves})
    return bundle_dir


def load_bundles(cfg: ExperimentConfig, mesh, bundle_dir):
    """Load and validate the per-region bundles against the config."""
    sets = []
    for j in range(mesh.n_blocks):
        path = os.path.join(bundle_dir, f"region_{j:04d}.txt")
        if not os.path.exists(path):
            raise BundleMismatchError(f"missing bundle {path}")
        if cfg.is_helmholtz:
            s = load_planewave_bundle(path, mesh)
            if s.omega != cfg.omega or s.n_dir != cfg.directions:
                raise BundleMismatchError(
                    f"{path}: bundle (omega={s.omega}, n_dir={s.n_dir}) does "
                    f"not match the config")
        else:
            s = load_snapshot_bundle(path, mesh)
            if (s.mus != cfg.offline_mus or s.L != cfg.snapshots
                    or s.region.layers != cfg.layers
                    or s.seed != derive_seed(cfg.seed, j)):
                raise BundleMismatchError(
                    f"{path}: bundle provenance does not match the config")
        sets.append(s)
    return sets


# ----------------------------------------------------------------------
# online stage

def run_online(cfg: ExperimentConfig, out_dir, bundle_dir=None,
               figures=True) -> RunReport:
    os.makedirs(out_dir, exist_ok=True)
    if bundle_dir is None:
        bundle_dir = os.path.join(out_dir, "bundles")
    mesh = make_mesh(cfg)
    sets = load_bundles(cfg, mesh, bundle_dir)
    if cfg.is_helmholtz:
        report, dumps = _online_helmholtz(cfg, mesh, sets)
    else:
        report, dumps = _online_diffusion(cfg, mesh, sets)

    with open(os.path.join(out_dir, "report.csv"), "w") as fh:
        fh.write(emit_table(report))
    save_report(report, os.path.join(out_dir, "report.txt"))
    field_dir = os.path.join(out_dir, "fields")
    os.makedirs(field_dir, exist_ok=True)
    for name, grid in dumps.items():
        write_matrix_text(os.path.join(field_dir, name + ".txt"), grid)
    _write_manifest(cfg, out_dir, report.meta)
    if figures:
        from .figures import render_field_figure, render_report_figures
        fig_dir = os.path.join(out_dir, "figures")
        render_report_figures(report, fig_dir)
        for name, grid in dumps.items():
            render_field_figure(grid, os.path.join(fig_dir, name + ".png"), name)
    return report


def _online_diffusion(cfg, mesh, sets):
    field = diffusion_field(cfg, mesh)
    kappa = field.sample(mesh, cfg.online_mu)
    u_ref = fine_reference_solve(mesh, kappa, cfg.source, 0.0)
    u_ref_dg = u_ref[mesh.dg_to_node]

    form = DGForm(cfg.gamma)
    A = assemble_dg_operator(mesh, form, kappa)
    F = weak_dirichlet_rhs(mesh, form, kappa, 0.0, cfg.source)

    n_modes = min(max(cfg.sweep), cfg.online_snapshots)
    bases = []
    for sset in sets:
        test = build_snapshot_test_space(
            sset, cfg.test_columns, derive_seed(cfg.seed, sset.region.index, 1))
        bases.append(build_online_basis(
            mesh, field, sset, test, cfg.online_mu, n_modes,
            n_online=cfg.online_snapshots, l1_options=cfg.l1_options()))

    rows = []
    u_dg = None
    for m in cfg.sweep:
        m_eff = min(m, cfg.online_snapshots)
        space = DGSpace.from_block_columns(mesh, [b.basis(m_eff) for b in bases])
        _, u_dg = project_and_solve(space, A, F)
        err = error_norms(mesh, u_ref_dg, u_dg, kappa, numbering="dg")
        spars = sum(b.sparsity(m_eff, cfg.theta_rel) for b in bases)
        rows.append(RunRow(space.dim, err.l2_pct, err.h1_pct, spars))

    snap_space = DGSpace.from_block_columns(
        mesh, [s.restricted() for s in sets], normalize=True)
    U0, u_snap = project_and_solve(snap_space, A, F)
    err = error_norms(mesh, u_ref_dg, u_snap, kappa, numbering="dg")
    theta = cfg.theta_rel * np.max(np.abs(U0))
    snapshot_row = RunRow(snap_space.dim, err.l2_pct, err.h1_pct,
                          sparsity_count(U0, theta))

    meta = _base_meta(cfg, mesh)
    meta["snapshot_dim"] = snap_space.dim
    meta["offline_local_solves"] = mesh.n_blocks * len(cfg.offline_mus) * cfg.snapshots
    meta["online_l1_solves"] = mesh.n_blocks * cfg.online_snapshots
    dumps = {
        "kappa_online": kappa.values,
        "reference": u_ref.reshape(mesh.n + 1, mesh.n + 1),
        "solution": dg_to_grid(mesh, u_dg),
    }
    return RunReport(cfg.experiment, rows, snapshot_row, meta), dumps


def _online_helmholtz(cfg, mesh, sets):
    kappa = Raster.constant(mesh, cfg.kappa_constant)
    nrast = refraction_raster(cfg, mesh)
    ones = Raster.constant(mesh, 1.0)
    g = boundary_wave(cfg)
    u_ref = fine_reference_solve(mesh, kappa, cfg.source, g,
                                 n=nrast, omega=cfg.omega)
    u_ref_dg = u_ref[mesh.dg_to_node]

    form = DGForm(cfg.gamma, "helmholtz", cfg.omega)
    nt_max = max(cfg.sweep)
    test = build_direction_test_space(cfg.directions, nt_max,
                                      derive_seed(cfg.seed, 7))
    system = assemble_rect_system(mesh, sets, test, form, kappa, nrast, g,
                                  cfg.source)

    rows = []
    u_dg = None
    for nt in cfg.sweep:
        pick = (np.arange(mesh.n_blocks)[:, None] * nt_max
                + np.arange(nt)[None, :]).ravel()
        sub = CoarseSystem(system.matrix[pick], system.rhs[pick],
                           system.prolong, nt, system.n_dir, system.n_blocks)
        sol, u_dg = sparse_global_solve(sub, cfg.l1_options())
        err = error_norms(mesh, u_ref_dg, u_dg, ones, numbering="dg")
        rows.append(RunRow(2 * nt * mesh.n_blocks, err.l2_pct, err.h1_pct,
                           sol.nnz))

    A = assemble_dg_operator(mesh, form, kappa, nrast)
    bvec = weak_dirichlet_rhs(mesh, form, kappa, g, cfg.source)
    snap_space = DGSpace.from_planewaves(mesh, sets)
    U0, u_snap = project_and_solve(snap_space, A, bvec)
    err = error_norms(mesh, u_ref_dg, u_snap, ones, numbering="dg")
    theta = cfg.theta_rel * np.max(np.abs(U0))
    snapshot_row = RunRow(snap_space.dim, err.l2_pct, err.h1_pct,
                          sparsity_count(U0, theta))

    meta = _base_meta(cfg, mesh)
    meta["snapshot_dim"] = snap_space.dim
    meta["offline_local_solves"] = 0
    meta["online_l1_solves"] = len(cfg.sweep)
    sol_grid = dg_to_grid(mesh, u_dg)
    dumps = {
        "refraction": nrast.values,
        "reference_re": u_ref.real.reshape(mesh.n + 1, mesh.n + 1),
        "reference_im": u_ref.imag.reshape(mesh.n + 1, mesh.n + 1),
        "solution_re": sol_grid.real,
        "solution_im": sol_grid.imag,
    }
    return RunReport(cfg.experiment, rows, snapshot_row, meta), dumps


def _base_meta(cfg, mesh):
    return {
        "config_hash": config_hash(cfg),
        "fine_dim_continuous": mesh.n_nodes,
        "fine_dim_dg": mesh.n_dg,
        "blocks": mesh.n_blocks,
    }


# ----------------------------------------------------------------------
# reports

def emit_table(report: RunReport) -> str:
    """CSV with one row per sweep point plus the snapshot-space row."""
    lines = ["dim,l2_err_pct,h1_err_pct,sparsity"]
    for row in list(report.rows) + [report.snapshot_row]:
        if row is None:
            continue
        lines.append("%d,%.6g,%.6g,%d"
                     % (row.dim, row.l2_pct, row.h1_pct, row.sparsity))
    return "\n".join(lines) + "\n"


def parse_table(text: str):
    lines = [ln for ln in text.strip().splitlines() if ln]
    header, rows = lines[0], lines[1:]
    if header != "dim,l2_err_pct,h1_err_pct,sparsity":
        raise ValueError(f"unexpected table header {header!r}")
    out = []
    for ln in rows:
        d, l2, h1, sp = ln.split(",")
        out.append(RunRow(int(d), float(l2), float(h1), int(sp)))
    return out


def save_report(report: RunReport, path):
    with open(path, "w") as fh:
        fh.write(f"experiment {report.experiment}\n")
        for key, value in report.meta.items():
            fh.write(f"meta {key} {value}\n")
        for row in report.rows:
            fh.write("row %d %.17g %.17g %d\n"
                     % (row.dim, row.l2_pct, row.h1_pct, row.sparsity))
        row = report.snapshot_row
        fh.write("snapshot %d %.17g %.17g %d\n"
                 % (row.dim, row.l2_pct, row.h1_pct, row.sparsity))


def load_report(path) -> RunReport:
    rows = []
    snapshot = None
    meta = {}
    experiment = "custom"
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "experiment":
                experiment = parts[1]
            elif parts[0] == "meta":
                meta[parts[1]] = " ".join(parts[2:])
            elif parts[0] in ("row", "snapshot"):
                row = RunRow(int(parts[1]), float(parts[2]), float(parts[3]),
                             int(parts[4]))
                if parts[0] == "row":
                    rows.append(row)
                else:
                    snapshot = row
    return RunReport(experiment, rows, snapshot, meta)


def _write_manifest(cfg, out_dir, counters):
    import numpy
    import scipy
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "manifest.txt"), "w") as fh:
        fh.write(f"config_hash {config_hash(cfg)}\n")
        fh.write(f"package_version {__version__}\n")
        fh.write(f"numpy_version {numpy.__version__}\n")
        fh.write(f"scipy_version {scipy.__version__}\n")
        for key, value in counters.items():
            fh.write(f"{key} {value}\n")
    with open(os.path.join(out_dir, "config.txt"), "w") as fh:
        fh.write(config_text(cfg))
