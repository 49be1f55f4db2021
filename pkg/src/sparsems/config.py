"""Experiment configuration: a flat key-value text format.

One line per key, values space separated for lists, floats written with
full precision so a config round-trips through its text form losslessly.
`sweep` holds per-block mode counts for the parameter-dependent
experiments (A1/A2) and per-block test-function counts for the Helmholtz
experiments (B1/B2).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields as dc_fields, replace

_KNOWN_EXPERIMENTS = ("A1", "A2", "B1", "B2", "custom")


@dataclass
class ExperimentConfig:
    experiment: str = "custom"
    nc: int = 10
    nf: int = 10
    layers: int = 10              # oversampling width in fine layers
    seed: int = 2024
    gamma: float = 4.0
    sweep: tuple = (4, 6, 8, 10)
    source: float = 1.0

    # parameter-dependent diffusion (A experiments)
    field_variant: str = "affine"     # affine | shifted | constant
    kappa_constant: float = 1.0
    offline_mus: tuple = (0.2, 0.4, 0.6, 0.8)
    online_mu: float = 0.5
    snapshots: int = 24           # boundary draws L per branch
    online_snapshots: int = 24    # L_on
    test_columns: int = 48        # q
    channels: int = 2
    channel_width: float = 0.04
    inclusions: int = 6
    inclusion_radius: float = 0.06
    contrast: float = 1.0e4

    # Helmholtz (B experiments)
    omega: float = 2.0
    directions: int = 20          # plane-wave directions per block
    bc_angle_pi: float = 0.25     # boundary wave vector angle / pi
    n_inclusions: int = 2
    n_inclusion_radius: float = 0.12
    n_contrast: float = 2.0

    # l1 solver and sparsity accounting
    l1_nu: float = 10.0
    l1_eps: float = 1.0e-8
    l1_max_iter: int = 10000
    theta_rel: float = 1.0e-8

    def __post_init__(self):
        if self.experiment not in _KNOWN_EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        self.sweep = tuple(int(s) for s in self.sweep)
        self.offline_mus = tuple(float(m) for m in self.offline_mus)
        if any(b <= a for a, b in zip(self.sweep, self.sweep[1:])):
            raise ValueError("sweep values must be strictly ascending")
        for name in ("nc", "nf", "seed", "snapshots", "online_snapshots",
                     "test_columns", "directions"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.layers < 0:
            raise ValueError("layers must be non-negative")

    @property
    def is_helmholtz(self):
        return self.experiment in ("B1", "B2") or (
            self.experiment == "custom" and self.field_variant == "helmholtz")

    def l1_options(self):
        return dict(nu=self.l1_nu, eps_constraint=self.l1_eps,
                    max_iter=self.l1_max_iter, theta_rel=self.theta_rel)

    def with_overrides(self, pairs):
        """Apply KEY=VALUE override strings."""
        updates = {}
        types = {f.name: f for f in dc_fields(self)}
        for pair in pairs:
            key, sep, raw = pair.partition("=")
            if not sep:
                raise ValueError(f"override {pair!r} is not KEY=VALUE")
            if key not in types:
                raise ValueError(f"unknown config key {key!r}")
            updates[key] = _parse_value(key, raw, getattr(self, key))
        return replace(self, **updates)


def _parse_value(key, raw, current):
    if isinstance(current, tuple):
        parts = raw.replace(",", " ").split()
        caster = int if key == "sweep" else float
        return tuple(caster(p) for p in parts)
    if isinstance(current, bool):
        return raw.lower() in ("1", "true", "yes")
    if isinstance(current, int):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    return raw


def config_text(cfg: ExperimentConfig) -> str:
    lines = []
    for f in dc_fields(cfg):
        value = getattr(cfg, f.name)
        if isinstance(value, tuple):
            text = " ".join(repr(v) if isinstance(v, float) else str(v)
                            for v in value)
        elif isinstance(value, float):
            text = repr(value)
        else:
            text = str(value)
        lines.append(f"{f.name} {text}")
    return "\n".join(lines) + "\n"


def parse_config(text: str) -> ExperimentConfig:
    base = ExperimentConfig()
    values = {}
    types = {f.name: f for f in dc_fields(base)}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, raw = line.partition(" ")
        if key not in types:
            raise ValueError(f"line {lineno}: unknown config key {key!r}")
        values[key] = _parse_value(key, raw.strip(), getattr(base, key))
    return replace(base, **values)


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def save_config(cfg: ExperimentConfig, path):
    with open(path, "w") as fh:
        fh.write(config_text(cfg))


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(config_text(cfg).encode()).hexdigest()


def default_config(experiment: str) -> ExperimentConfig:
    """The canonical setup for each experiment id."""
    if experiment == "A1":
        return ExperimentConfig(experiment="A1")
    if experiment == "A2":
        return ExperimentConfig(
            experiment="A2", field_variant="shifted",
            offline_mus=(0.0, 0.15, 0.3, 0.45), online_mu=0.14,
            sweep=(8, 10, 12, 14))
    if experiment == "B1":
        return ExperimentConfig(
            experiment="B1", nc=8, nf=16, layers=0, gamma=20.0,
            sweep=(1, 2, 3, 4), source=0.0, omega=2.0,
            field_variant="constant")
    if experiment == "B2":
        return ExperimentConfig(
            experiment="B2", nc=16, nf=16, layers=0, gamma=80.0,
            sweep=(1, 2, 3, 4, 5), source=0.0, omega=8.0,
            field_variant="constant")
    if experiment == "custom":
        return ExperimentConfig()
    raise ValueError(f"unknown experiment {experiment!r}")
