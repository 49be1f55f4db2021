"""Figure rendering for run reports and field dumps (Agg backend)."""

from __future__ import annotations

import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def render_report_figures(report, out_dir):
    """Convergence and sparsity plots next to the CSV output."""
    os.makedirs(out_dir, exist_ok=True)
    rows = list(report.rows)
    if not rows:
        return []
    dims = [r.dim for r in rows]
    written = []

    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    ax.semilogy(dims, [max(r.l2_pct, 1e-16) for r in rows], "o-", label="L2")
    ax.semilogy(dims, [max(r.h1_pct, 1e-16) for r in rows], "s-", label="H1")
    if report.snapshot_row is not None:
        ax.axhline(max(report.snapshot_row.l2_pct, 1e-16), color="gray",
                   linestyle="--", linewidth=1,
                   label="snapshot space (L2)")
    ax.set_xlabel("coarse dimension")
    ax.set_ylabel("relative error (%)")
    ax.set_title(f"{report.experiment}: convergence")
    ax.legend()
    fig.tight_layout()
    path = os.path.join(out_dir, "convergence.png")
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    ax.bar(range(len(rows)), [r.sparsity for r in rows], color="steelblue")
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels([str(d) for d in dims])
    ax.set_xlabel("coarse dimension")
    ax.set_ylabel("nonzero snapshot coefficients")
    ax.set_title(f"{report.experiment}: sparsity")
    fig.tight_layout()
    path = os.path.join(out_dir, "sparsity.png")
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)
    return written


def render_field_figure(grid, path, title=None):
    """Heatmap of a nodal or cellwise field on [0,1]^2."""
    grid = np.asarray(grid)
    if np.iscomplexobj(grid):
        grid = grid.real
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    fig, ax = plt.subplots(figsize=(4.4, 4.0))
    im = ax.imshow(grid, origin="lower", extent=(0, 1, 0, 1), cmap="viridis")
    fig.colorbar(im, ax=ax, shrink=0.85)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
