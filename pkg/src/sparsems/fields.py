"""Coefficient fields sampled cellwise on the fine grid.

A Raster holds one positive value per fine cell (the value at the cell
center); element integrals downstream are then exact per cell.  The
parametrized diffusion coefficient comes in three variants: a constant,
an affine blend (1-mu)*k1 + mu*k2 of two rasters, and a horizontal shift
k1(x+mu, y) with coordinates clamped to the unit square.  Heterogeneous
rasters (background plus high-contrast channels and circular inclusions)
are synthesized deterministically from a seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class Raster:
    """Per-fine-cell positive values on a CartesianMesh."""

    def __init__(self, mesh, values):
        values = np.asarray(values, dtype=float)
        if values.size == mesh.n_cells:
            values = values.reshape(mesh.n, mesh.n)
        if values.shape != (mesh.n, mesh.n):
            raise ValueError(
                f"raster shape {values.shape} does not match mesh with "
                f"{mesh.n} cells per axis")
        if not np.all(np.isfinite(values)):
            raise ValueError("raster values must be finite")
        if np.any(values <= 0.0):
            raise ValueError("raster values must be strictly positive")
        self.mesh = mesh
        self.values = values          # [cy, cx]
        self.values.setflags(write=False)

    @property
    def flat(self):
        """Values by fine-cell id (cy*n + cx)."""
        return self.values.reshape(-1)

    @classmethod
    def constant(cls, mesh, value):
        return cls(mesh, np.full((mesh.n, mesh.n), float(value)))

    def save(self, path):
        write_matrix_text(path, self.values)

    @classmethod
    def load(cls, mesh, path):
        return cls(mesh, read_matrix_text(path))


def write_matrix_text(path, values):
    """Plain-text matrix dump: header line "rows cols", then row-major
    whitespace-separated values (round-trip exact via %.17g)."""
    values = np.asarray(values)
    with open(path, "w") as fh:
        fh.write(f"{values.shape[0]} {values.shape[1]}\n")
        for row in values:
            fh.write(" ".join("%.17g" % v for v in row))
            fh.write("\n")


def read_matrix_text(path):
    with open(path) as fh:
        rows, cols = (int(t) for t in fh.readline().split())
        data = np.loadtxt(fh, ndmin=2)
    if data.shape != (rows, cols):
        raise ValueError(f"{path}: header says {rows}x{cols}, "
                         f"found {data.shape[0]}x{data.shape[1]}")
    return data


def shift_raster(raster: Raster, dx: float) -> Raster:
    """Evaluate a raster at cell centers translated by (dx, 0), with the
    lookup coordinate clamped to the unit square."""
    mesh = raster.mesh
    n, h = mesh.n, mesh.h
    xc = (np.arange(n) + 0.5) * h + dx
    xc = np.clip(xc, 0.0, 1.0)
    ix = np.clip(np.floor(xc / h).astype(int), 0, n - 1)
    return Raster(mesh, raster.values[:, ix])


class ParamField:
    """kappa(x; mu) evaluator producing a Raster for each parameter value."""

    def __init__(self, variant, rasters, mu_range=(0.0, 1.0)):
        if variant not in ("constant", "affine", "shifted"):
            raise ValueError(f"unknown field variant {variant!r}")
        self.variant = variant
        self.rasters = tuple(rasters)
        self.mu_range = (float(mu_range[0]), float(mu_range[1]))

    @classmethod
    def constant(cls, mesh, value, mu_range=(0.0, 1.0)):
        return cls("constant", [Raster.constant(mesh, value)], mu_range)

    @classmethod
    def affine(cls, k1: Raster, k2: Raster):
        return cls("affine", [k1, k2], (0.0, 1.0))

    @classmethod
    def shifted(cls, k1: Raster, mu_range=(0.0, 1.0)):
        return cls("shifted", [k1], mu_range)

    def sample(self, mesh, mu: float) -> Raster:
        lo, hi = self.mu_range
        if not lo <= mu <= hi:
            raise ValueError(f"mu={mu} outside configured range [{lo}, {hi}]")
        if self.variant == "constant":
            return self.rasters[0]
        if self.variant == "affine":
            k1, k2 = self.rasters
            return Raster(mesh, (1.0 - mu) * k1.values + mu * k2.values)
        return shift_raster(self.rasters[0], mu)


def sample(field: ParamField, mesh, mu: float) -> Raster:
    return field.sample(mesh, mu)


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for a synthetic heterogeneous raster.

    Channels are horizontal strips of the given width spanning the whole
    domain; inclusions are disks.  Both carry background*contrast.  All
    placement is drawn from the seeded generator, so equal specs give
    identical rasters.
    """

    seed: int = 0
    background: float = 1.0
    channels: int = 0
    channel_width: float = 0.02
    channel_contrast: float = 1.0e4
    inclusions: int = 0
    inclusion_radius: float = 0.05
    inclusion_contrast: float = 1.0e4

    def __post_init__(self):
        if self.background <= 0:
            raise ValueError("background must be positive")
        if self.channel_contrast < 1.0 or self.inclusion_contrast < 1.0:
            raise ValueError("contrast must be >= 1")
        if self.channels > 0 and not 0.0 < self.channel_width <= 1.0:
            raise ValueError("channel width must fit in the unit square")
        if self.inclusions > 0 and not 0.0 < self.inclusion_radius < 0.5:
            raise ValueError("inclusion radius must fit in the unit square")


def _synth_rng(seed):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def synth_heterogeneous(spec: SynthSpec, mesh) -> Raster:
    """Background raster with high-contrast channels and inclusions."""
    rng = _synth_rng(spec.seed)
    n, h = mesh.n, mesh.h
    vals = np.full((n, n), spec.background)
    yc = (np.arange(n) + 0.5) * h

    half = spec.channel_width / 2.0
    for _ in range(spec.channels):
        # snap the channel center line to the fine lattice so the strip
        # covers whole cell rows
        line = rng.uniform(half, 1.0 - half)
        line = np.clip(round(line / h), np.ceil(half / h), n - np.ceil(half / h)) * h
        rows = np.abs(yc - line) < half
        vals[rows, :] = spec.background * spec.channel_contrast

    centers = _disjoint_centers(rng, spec.inclusions, spec.inclusion_radius)
    xx, yy = np.meshgrid(yc, yc, indexing="xy")
    for cx, cy in centers:
        inside = (xx - cx) ** 2 + (yy - cy) ** 2 < spec.inclusion_radius ** 2
        vals[inside] = spec.background * spec.inclusion_contrast
    return Raster(mesh, vals)


def helmholtz_n(spec: SynthSpec, mesh) -> Raster:
    """Refraction raster: unit background with disk inclusions only."""
    rng = _synth_rng(spec.seed)
    n, h = mesh.n, mesh.h
    vals = np.ones((n, n))
    yc = (np.arange(n) + 0.5) * h
    xx, yy = np.meshgrid(yc, yc, indexing="xy")
    for cx, cy in _disjoint_centers(rng, spec.inclusions, spec.inclusion_radius):
        inside = (xx - cx) ** 2 + (yy - cy) ** 2 < spec.inclusion_radius ** 2
        vals[inside] = spec.inclusion_contrast
    return Raster(mesh, vals)


def _disjoint_centers(rng, count, radius, max_tries=1000):
    """Sequentially sample pairwise-disjoint disk centers inside the domain."""
    centers = []
    for _ in range(count):
        for _ in range(max_tries):
            c = rng.uniform(radius, 1.0 - radius, size=2)
            if all((c[0] - p[0]) ** 2 + (c[1] - p[1]) ** 2 >= (2 * radius) ** 2
                   for p in centers):
                centers.append(tuple(c))
                break
        else:
            raise ValueError(
                f"could not place {count} disjoint inclusions of radius {radius}")
    return centers
