"""Scenario configuration files (TOML).

One file describes one dynamics: geometry, topological factor, potential,
initial wave and numerics.  Loading is strict: unknown keys are errors, and
physics-bearing keys (grid, beta, alpha, axis) have no defaults.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .algebra import PAULI, AlgebraError, UnitaryRep, presentation_by_name, su2_factor
from .evolution import (
    CoveringWave,
    InadmissibleError,
    PotentialField,
    assemble_hamiltonian,
    spectrum,
    twist_matrix,
    wave_packet,
)
from .geometry import Geometry, GeometryError, GridSpec, Kind, build_grid

SCENARIO_PACKAGE = "topobohm.scenarios"


class ConfigError(ValueError):
    pass


def _complex_matrix(rows, where: str) -> np.ndarray:
    try:
        m = np.array([[complex(re, im) for re, im in row] for row in rows], dtype=complex)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: expected rows of [re, im] pairs") from exc
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ConfigError(f"{where}: matrix must be square")
    return m


@dataclass
class GeometryBlock:
    kind: str
    grid: list[int]
    radius: float = 1.0
    r_in: float | None = None
    r_out: float | None = None
    mass: float = 1.0


@dataclass
class FactorBlock:
    kind: str = "character"
    beta: float | None = None
    alpha: float | None = None
    axis: list[float] | None = None
    matrices: dict[str, list] | None = None


@dataclass
class PotentialBlock:
    kind: str = "none"  # none | radial
    coeffs: list[float] = field(default_factory=list)
    field: list[float] | None = None
    mu: float = 1.0


@dataclass
class InitialBlock:
    kind: str = "packet"  # packet | eigenstate
    index: int = 0
    theta0: float = 1.0
    width: float = 1.0
    momentum: float = 0.0
    r0: float | None = None
    width_r: float | None = None
    spinor: list | None = None


@dataclass
class NumericsBlock:
    dt: float = 1e-3
    t_final: float = 1.0
    times: list[float] = field(default_factory=lambda: [0.0, 1.0, 2.0])
    n: int = 10000
    solver: str = "direct"
    tol: float = 1e-12
    maxiter: int = 1000
    record_every: int = 100
    spectrum_count: int = 6


@dataclass
class AlgebraBlock:
    checks: list[str] = field(default_factory=list)
    groups: list[str] = field(default_factory=list)
    particles: list[int] = field(default_factory=lambda: [2, 3])
    fiber_dims: list[int] = field(default_factory=lambda: [1, 2])
    pairs: int = 1000
    samples: int = 32
    spin_dim: int = 2


@dataclass
class ScenarioConfig:
    name: str
    geometry: GeometryBlock | None
    factor: FactorBlock | None
    potential: PotentialBlock
    initial: InitialBlock
    numerics: NumericsBlock
    algebra: AlgebraBlock | None
    seed: int = 0
    raw: dict = field(default_factory=dict, repr=False)

    # -- builders -----------------------------------------------------------

    def build_geometry(self) -> Geometry:
        gb = self.geometry
        try:
            return Geometry(Kind(gb.kind), tuple(gb.grid), gb.radius, gb.r_in, gb.r_out, gb.mass)
        except (GeometryError, ValueError) as exc:
            raise ConfigError(f"geometry: {exc}") from exc

    def build_grid(self) -> GridSpec:
        return build_grid(self.build_geometry())

    def gamma(self, geometry: Geometry) -> np.ndarray:
        fb = self.factor
        f = geometry.fiber_dim
        try:
            if fb.kind == "character":
                return np.exp(1j * fb.beta) * np.eye(f, dtype=complex)
            if fb.kind == "su2":
                m = su2_factor(fb.alpha, fb.axis)
                if f != 2:
                    raise ConfigError(f"su2 factor needs a 2-dimensional fiber, {geometry.kind.value} has {f}")
                return m
            mats = {g: _complex_matrix(rows, f"factor.matrices.{g}") for g, rows in fb.matrices.items()}
            rep = UnitaryRep(next(iter(mats.values())).shape[0], mats)
            return twist_matrix(rep, geometry)
        except AlgebraError as exc:
            raise ConfigError(f"factor: {exc}") from exc
        except ValueError as exc:
            raise ConfigError(f"factor: {exc}") from exc

    def potential_field(self, grid: GridSpec) -> PotentialField:
        pb = self.potential
        g = grid.geometry
        rr, _ = grid.mesh()
        scalar = np.zeros(grid.shape)
        for k, c in enumerate(pb.coeffs):
            scalar = scalar + c * rr**k
        values = scalar[..., None, None] * np.eye(g.fiber_dim)
        if pb.field is not None:
            if g.fiber_dim != 2:
                raise ConfigError("potential.field needs a spin fiber (spin_annulus)")
            zeeman = -pb.mu * sum(b * s for b, s in zip(pb.field, PAULI))
            values = values + zeeman
        return PotentialField(values)

    def hamiltonian(self, grid: GridSpec | None = None):
        grid = grid or self.build_grid()
        return assemble_hamiltonian(grid, self.potential_field(grid), self.gamma(grid.geometry))

    def initial_wave(self, h) -> CoveringWave:
        ib = self.initial
        if ib.kind == "eigenstate":
            return spectrum(h, ib.index + 1)[ib.index][1]
        spinor = None if ib.spinor is None else [complex(re, im) for re, im in ib.spinor]
        return wave_packet(h.grid, h.gamma, ib.theta0, ib.width, ib.momentum, spinor, ib.r0, ib.width_r)

    def echo(self) -> dict:
        return self.raw


_BLOCKS = {
    "geometry": GeometryBlock,
    "factor": FactorBlock,
    "potential": PotentialBlock,
    "initial": InitialBlock,
    "numerics": NumericsBlock,
    "algebra": AlgebraBlock,
}


def _block(cls, data: Any, prefix: str):
    if not isinstance(data, dict):
        raise ConfigError(f"[{prefix}] must be a table")
    names = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in names:
            raise ConfigError(f"unknown key '{prefix}.{key}'")
    required = [
        f.name
        for f in dataclasses.fields(cls)
        if f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING
    ]
    for key in required:
        if key not in data:
            raise ConfigError(f"missing required key '{prefix}.{key}'")
    return cls(**data)


def _validate(cfg: ScenarioConfig) -> None:
    if cfg.geometry is None and cfg.algebra is None:
        raise ConfigError("config needs a [geometry] or an [algebra] block")
    if cfg.geometry is not None:
        if cfg.factor is None:
            raise ConfigError("missing [factor] block")
        fb = cfg.factor
        if fb.kind == "character":
            if fb.beta is None:
                raise ConfigError("missing required key 'factor.beta'")
        elif fb.kind == "su2":
            for key in ("alpha", "axis"):
                if getattr(fb, key) is None:
                    raise ConfigError(f"missing required key 'factor.{key}'")
        elif fb.kind == "rep":
            if not fb.matrices:
                raise ConfigError("missing required key 'factor.matrices'")
        else:
            raise ConfigError(f"factor.kind must be character|su2|rep, got {fb.kind!r}")
        if cfg.potential.kind not in ("none", "radial"):
            raise ConfigError(f"potential.kind must be none|radial, got {cfg.potential.kind!r}")
        if cfg.potential.kind == "none" and (cfg.potential.coeffs or cfg.potential.field):
            raise ConfigError("potential.kind = 'none' but coefficients or field given")
        if cfg.initial.kind not in ("packet", "eigenstate"):
            raise ConfigError(f"initial.kind must be packet|eigenstate, got {cfg.initial.kind!r}")
        nb = cfg.numerics
        if not nb.dt > 0:
            raise ConfigError("numerics.dt must be positive")
        if nb.solver not in ("direct", "bicgstab"):
            raise ConfigError(f"numerics.solver must be direct|bicgstab, got {nb.solver!r}")
        _validate_numerics(nb)
        grid = cfg.build_grid()
        gamma = cfg.gamma(grid.geometry)
        pot = cfg.potential_field(grid)
        norm = pot.commutator_norm(gamma)
        if norm > 1e-12 * max(1.0, float(np.abs(pot.values).max(initial=0.0))):
            raise ConfigError(str(InadmissibleError(norm)))


def _validate_numerics(nb: NumericsBlock) -> None:
    if not nb.t_final > 0:
        raise ConfigError("numerics.t_final must be positive")
    if len(nb.times) < 1 or min(nb.times) < 0:
        raise ConfigError("numerics.times must be a non-empty list of non-negative times")
    if nb.n < 1 or nb.record_every < 1 or nb.spectrum_count < 1:
        raise ConfigError("numerics.n, numerics.record_every and numerics.spectrum_count must be >= 1")


def _validate_algebra(ab: AlgebraBlock) -> None:
    from .checks import KNOWN_CHECKS

    for check in ab.checks:
        if check not in KNOWN_CHECKS:
            raise ConfigError(f"algebra.checks: unknown check {check!r} (known: {', '.join(KNOWN_CHECKS)})")
    if not ab.checks:
        raise ConfigError("algebra.checks is empty")
    if "characters" in ab.checks and not ab.groups:
        raise ConfigError("algebra.groups is required for the characters check")
    for g in ab.groups:
        try:
            presentation_by_name(g)
        except AlgebraError as exc:
            raise ConfigError(f"algebra.groups: {exc}") from exc


def parse_config(text: str, name: str = "<string>") -> ScenarioConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{name}: parse error: {exc}") from exc
    blocks = {}
    seed = 0
    for key, value in data.items():
        if key == "seed":
            seed = int(value)
        elif key in _BLOCKS:
            blocks[key] = _block(_BLOCKS[key], value, key)
        else:
            raise ConfigError(f"unknown key '{key}'")
    cfg = ScenarioConfig(
        name=name,
        geometry=blocks.get("geometry"),
        factor=blocks.get("factor"),
        potential=blocks.get("potential", PotentialBlock()),
        initial=blocks.get("initial", InitialBlock()),
        numerics=blocks.get("numerics", NumericsBlock()),
        algebra=blocks.get("algebra"),
        seed=seed,
        raw=data,
    )
    _validate(cfg)
    if cfg.algebra is not None:
        _validate_algebra(cfg.algebra)
    return cfg


def shipped_scenarios() -> list[str]:
    files = resources.files(SCENARIO_PACKAGE).iterdir()
    return sorted(p.name[:-5] for p in files if p.name.endswith(".toml"))


def load_config(path: str | Path) -> ScenarioConfig:
    """Load a config file, or a shipped scenario by name."""
    p = Path(path)
    if p.is_file():
        return parse_config(p.read_text(), p.stem)
    name = str(path)
    if name in shipped_scenarios():
        text = resources.files(SCENARIO_PACKAGE).joinpath(name + ".toml").read_text()
        return parse_config(text, name)
    raise ConfigError(f"no config file or shipped scenario named {name!r}")


def describe_factor(cfg: ScenarioConfig) -> str:
    fb = cfg.factor
    if fb is None:
        return "none"
    if fb.kind == "character":
        return f"character beta={fb.beta!r}"
    if fb.kind == "su2":
        return f"su2 alpha={fb.alpha!r} axis={list(fb.axis)}"
    return "rep " + ",".join(sorted(fb.matrices))


