"""Statistical check that Bohmian ensembles stay |psi_t|^2 distributed.

Initial configurations are drawn from the quadrature-weighted grid density
(node cells of width dtheta x dr, jittered uniformly in the cell measure),
propagated with the Bohmian flow, and compared against the grid density of
the evolved wave: a one-sample KS test of the angular marginal on the ring,
and a chi-square test over merged (r, theta) blocks on the annular
geometries.

The random stream is numpy's PCG64 seeded through ``SeedSequence(seed)``;
the draws do not depend on the number of worker threads.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.stats

from .bohm import Status, integrate_ensemble
from .evolution import CoveringWave, Hamiltonian, evolve
from .geometry import GridSpec, Kind

ALPHA = 0.01
DROP_BUDGET = 0.01
MIN_EXPECTED = 5.0
MIN_SAMPLES = 100


class DegenerateDensity(ValueError):
    pass


class ExcessiveDrops(RuntimeError):
    def __init__(self, comparison: "DistributionComparison"):
        super().__init__(
            f"{comparison.dropped} of {comparison.n_samples} trajectories dropped "
            f"({comparison.drop_reasons}); budget is {DROP_BUDGET:.0%}"
        )
        self.comparison = comparison


def rng_for(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def cell_masses(psi: CoveringWave) -> np.ndarray:
    """Probability of each node cell (zero off the active nodes)."""
    mass = psi.density() * psi.grid.weights
    mass = np.where(psi.grid.active, mass, 0.0)
    total = mass.sum()
    if not np.isfinite(total) or total <= 0:
        raise DegenerateDensity("density has no positive finite mass")
    return mass / total


def sample_initial(psi0: CoveringWave, n: int, seed: int) -> np.ndarray:
    """n i.i.d. configurations from |psi0|^2, shape (n, ndim)."""
    grid = psi0.grid
    g = grid.geometry
    mass = cell_masses(psi0).reshape(-1)
    cdf = np.cumsum(mass)
    cdf /= cdf[-1]
    rng = rng_for(seed)
    u = rng.random(n)
    jitter = rng.random((n, g.ndim))
    flat = np.minimum(np.searchsorted(cdf, u, side="right"), cdf.size - 1)
    # never land on a zero-mass cell because of rounding at the cdf plateaus
    while np.any(mass[flat] == 0):
        bad = mass[flat] == 0
        flat[bad] = np.minimum(flat[bad] + 1, cdf.size - 1)
    idx = np.unravel_index(flat, grid.shape)
    theta = (grid.theta[idx[-1]] + (jitter[:, -1] - 0.5) * grid.dtheta) % g.period
    if g.kind is Kind.RING:
        return theta[:, None]
    r_node = grid.r[idx[0]]
    a = np.maximum(r_node - grid.dr / 2, g.r_in)
    b = np.minimum(r_node + grid.dr / 2, g.r_out)
    # uniform in the area element r dr on the cell
    r = np.sqrt(a**2 + jitter[:, 0] * (b**2 - a**2))
    return np.column_stack([r, theta])


# -- statistics -----------------------------------------------------------------------


def ks_critical(n: int, alpha: float = ALPHA) -> float:
    return float(scipy.stats.kstwobign.ppf(1 - alpha) / math.sqrt(n))


def ring_marginal_cdf(psi: CoveringWave):
    """CDF of the angle, piecewise linear over node cells.

    Works in the shifted angle u = (theta + dtheta/2) mod period, in which
    cell j is [j dtheta, (j+1) dtheta).
    """
    grid = psi.grid
    mass = cell_masses(psi)
    if mass.ndim == 2:
        mass = mass.sum(axis=0)
    edges = np.concatenate([[0.0], np.cumsum(mass)])
    knots = np.arange(mass.size + 1) * grid.dtheta

    def cdf(u):
        return np.interp(u, knots, edges)

    return cdf


def shifted_angle(grid: GridSpec, theta: np.ndarray) -> np.ndarray:
    return (theta + grid.dtheta / 2) % grid.geometry.period


def ks_statistic(psi: CoveringWave, theta: np.ndarray) -> float:
    u = shifted_angle(psi.grid, np.asarray(theta))
    return float(scipy.stats.kstest(u, ring_marginal_cdf(psi)).statistic)


def _cell_index(grid: GridSpec, positions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    g = grid.geometry
    j = np.floor(shifted_angle(grid, positions[:, -1]) / grid.dtheta).astype(np.int64) % g.n_theta
    i = np.clip(np.rint((positions[:, 0] - g.r_in) / grid.dr).astype(np.int64), 1, g.grid[0] - 2)
    return i, j


def block_layout(grid: GridSpec, blocks: tuple[int, int] = (8, 16)) -> np.ndarray:
    """Block id of each node cell: active radial rows and all angles split evenly."""
    g = grid.geometry
    n_r, n_t = g.grid
    rows = np.full(n_r, -1)
    rows[1:-1] = np.arange(n_r - 2) * blocks[0] // (n_r - 2)
    cols = np.arange(n_t) * blocks[1] // n_t
    ids = rows[:, None] * blocks[1] + cols[None, :]
    return np.where(rows[:, None] >= 0, ids, -1)


def merge_bins(expected: np.ndarray, minimum: float = MIN_EXPECTED) -> np.ndarray:
    """Group consecutive bins until each group expects at least ``minimum``.

    Returns the group label of every bin; a short tail joins the last group.
    """
    labels = np.zeros(expected.size, dtype=np.int64)
    group, acc = 0, 0.0
    for k, e in enumerate(expected):
        labels[k] = group
        acc += e
        if acc >= minimum:
            group += 1
            acc = 0.0
    if acc < minimum and group > 0:
        labels[labels == group] = group - 1
    return labels


def chi_square(psi: CoveringWave, positions: np.ndarray, blocks: tuple[int, int] = (8, 16)):
    """(statistic, dof, bin table) of binned positions against the grid density."""
    grid = psi.grid
    layout = block_layout(grid, blocks)
    nb = blocks[0] * blocks[1]
    mass = cell_masses(psi)
    p_block = np.bincount(layout[layout >= 0], weights=mass[layout >= 0], minlength=nb)
    n = positions.shape[0]
    i, j = _cell_index(grid, positions)
    observed = np.bincount(layout[i, j], minlength=nb).astype(float)
    expected = n * p_block
    labels = merge_bins(expected)
    obs_m = np.bincount(labels, weights=observed)
    exp_m = np.bincount(labels, weights=expected)
    dof = obs_m.size - 1
    if dof < 1:
        return float("nan"), 0, (observed, expected)
    stat = float(np.sum((obs_m - exp_m) ** 2 / exp_m))
    return stat, dof, (observed, expected)


def ring_histogram(psi: CoveringWave, theta: np.ndarray, bins: int = 64) -> tuple[np.ndarray, np.ndarray]:
    grid = psi.grid
    n_t = grid.geometry.n_theta
    mass = cell_masses(psi)
    if mass.ndim == 2:
        mass = mass.sum(axis=0)
    group = np.arange(n_t) * bins // n_t
    target = np.bincount(group, weights=mass, minlength=bins)
    cells = np.floor(shifted_angle(grid, theta) / grid.dtheta).astype(np.int64) % n_t
    emp = np.bincount(group[cells], minlength=bins) / max(len(theta), 1)
    return emp, target


# -- the experiment ------------------------------------------------------------------------


@dataclass
class DistributionComparison:
    kind: str  # "ks" or "chi2"
    times: list[float]
    statistics: list[float]
    thresholds: list[float]
    passed: list[bool]
    n_samples: int
    dropped: int
    drop_reasons: dict[str, int]
    dofs: list[int] = field(default_factory=list)
    histograms: list[tuple[float, int, float, float]] = field(default_factory=list, repr=False)
    warnings: list[str] = field(default_factory=list)
    # final ensemble, kept for writing per-trajectory output
    ensemble: object = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return all(self.passed) and self.dropped <= DROP_BUDGET * self.n_samples

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n_samples": self.n_samples,
            "dropped": self.dropped,
            "drop_reasons": self.drop_reasons,
            "warnings": self.warnings,
            "results": [
                {"time": t, "statistic": s, "threshold": c, "pass": p, **({"dof": d} if self.kind == "chi2" else {})}
                for t, s, c, p, d in zip(self.times, self.statistics, self.thresholds, self.passed, self.dofs or [None] * len(self.times))
            ],
            "pass": self.ok,
        }


def _tee(waves, times: list[float], store: dict):
    pending = sorted(times)
    for w in waves:
        while pending and w.time >= pending[0] - 1e-9:
            store[pending.pop(0)] = w
        yield w


def equivariance_test(
    psi0: CoveringWave,
    h: Hamiltonian,
    dt: float,
    n: int,
    times: list[float],
    seed: int,
    velocity_scale: float = 1.0,
    threads: int = 1,
    alpha: float = ALPHA,
    blocks: tuple[int, int] = (8, 16),
    raise_on_drops: bool = True,
) -> DistributionComparison:
    times = sorted(float(t) for t in times)
    notes = []
    if n < MIN_SAMPLES:
        msg = f"n={n} is below {MIN_SAMPLES}; asymptotic thresholds are unreliable"
        warnings.warn(msg, stacklevel=2)
        notes.append(msg)
    q0 = sample_initial(psi0, n, seed)
    steps = int(round(times[-1] / dt))
    snapshots: dict[float, CoveringWave] = {}
    waves = _tee(evolve(psi0, h, dt, steps), times, snapshots)
    state, records = integrate_ensemble(q0, waves, times[-1], times, velocity_scale, threads=threads)

    codes = state.status
    reasons = {Status(c).label: int(np.sum(codes == c)) for c in (Status.NODAL, Status.LEFT) if np.any(codes == c)}
    dropped = int(sum(reasons.values()))
    ring = psi0.geometry.kind is Kind.RING
    comp = DistributionComparison("ks" if ring else "chi2", [], [], [], [], n, dropped, reasons, warnings=notes, ensemble=state)
    for t in times:
        pos, _, alive = records[t]
        # statistics over trajectories that survive the whole run
        keep = codes == Status.FINISHED
        pos = pos[keep]
        wave = snapshots[t]
        if ring:
            stat = ks_statistic(wave, pos[:, 0])
            crit = ks_critical(len(pos), alpha)
            comp.dofs.append(0)
            emp, target = ring_histogram(wave, pos[:, 0])
            comp.histograms += [(t, b, float(e), float(p)) for b, (e, p) in enumerate(zip(emp, target))]
        else:
            stat, dof, (obs, expct) = chi_square(wave, pos, blocks)
            crit = float(scipy.stats.chi2.ppf(1 - alpha, dof)) if dof else float("nan")
            comp.dofs.append(dof)
            m = max(len(pos), 1)
            comp.histograms += [(t, b, float(o) / m, float(e) / m) for b, (o, e) in enumerate(zip(obs, expct))]
        comp.times.append(t)
        comp.statistics.append(stat)
        comp.thresholds.append(crit)
        comp.passed.append(bool(stat < crit))
    if raise_on_drops and dropped > DROP_BUDGET * n:
        raise ExcessiveDrops(comp)
    return comp
