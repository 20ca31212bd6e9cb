"""Bohmian velocity fields and trajectory integration.

Velocities are returned in grid coordinates: d(theta)/dt on the ring, and
(dr/dt, d(theta)/dt) on the annular geometries.  Trajectories live on the
base space; the cover is tracked by an integer winding that changes by one
generator whenever the angle crosses the seam of the fundamental domain.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator

import numpy as np

from .evolution import CoveringWave
from .geometry import Geometry, GridSpec, Kind

NODE_FLOOR = 1e-12
WALL_CELLS = 2


class Status(enum.IntEnum):
    RUNNING = 0
    FINISHED = 1
    NODAL = 2
    LEFT = 3

    @property
    def label(self) -> str:
        return ("Running", "Finished", "HitNodalRegion", "LeftDomain")[self]


@dataclass(frozen=True)
class VelocityField:
    grid: GridSpec
    vectors: np.ndarray  # grid shape + (ndim,)
    density: np.ndarray
    flagged: np.ndarray
    time: float
    floor: float


def _theta_neighbours(values: np.ndarray, gamma: np.ndarray, axis: int) -> tuple[np.ndarray, np.ndarray]:
    nxt = np.roll(values, -1, axis=axis)
    prv = np.roll(values, 1, axis=axis)
    idx_last = [slice(None)] * values.ndim
    idx_first = [slice(None)] * values.ndim
    idx_last[axis] = -1
    idx_first[axis] = 0
    nxt[tuple(idx_last)] = values[tuple(idx_first)] @ gamma.T
    prv[tuple(idx_first)] = values[tuple(idx_last)] @ gamma.conj()
    return nxt, prv


def _current(psi: np.ndarray, dpsi: np.ndarray) -> np.ndarray:
    return np.sum(psi.conj() * dpsi, axis=-1).imag


def velocity_field(psi: CoveringWave, node_floor: float = NODE_FLOOR) -> VelocityField:
    g = psi.geometry
    grid = psi.grid
    vals = psi.values
    scale = g.hbar / g.mass
    rho = psi.density()
    floor = node_floor * float(rho.max())
    flagged = rho <= floor
    safe = np.where(flagged, 1.0, rho)
    axis = g.ndim - 1
    nxt, prv = _theta_neighbours(vals, psi.gamma, axis)
    j_theta = _current(vals, (nxt - prv) / (2 * grid.dtheta))
    if g.kind is Kind.RING:
        vec = (scale / g.radius**2 * j_theta / safe)[:, None]
    else:
        dpsi_r = np.zeros_like(vals)
        dpsi_r[1:-1] = (vals[2:] - vals[:-2]) / (2 * grid.dr)
        r = grid.r[:, None]
        vec = np.stack([scale * _current(vals, dpsi_r) / safe, scale * j_theta / (r**2 * safe)], axis=-1)
        flagged = flagged.copy()
        flagged[0] = flagged[-1] = True
    vec = np.where(flagged[..., None], 0.0, vec)
    return VelocityField(grid, vec, rho, flagged, psi.time, floor)


def check_projectability(psi: CoveringWave, glue: np.ndarray | None = None) -> float:
    """Max |v(sigma q) - sigma_* v(q)| using a two-sheet cover as oracle.

    The two sheets are glued with ``glue`` (default: the wave's own factor)
    and differentiated with plain central differences, never touching the
    factor.  Every interior node of the doubled domain is compared with the
    single-domain field at its projection.
    """
    g = psi.geometry
    gamma = psi.gamma if glue is None else np.asarray(glue, dtype=complex)
    axis = g.ndim - 1
    doubled = np.concatenate([psi.values, psi.values @ gamma.T], axis=axis)
    n = g.n_theta
    scale = g.hbar / g.mass
    single = velocity_field(psi)
    grid = psi.grid
    if g.kind is Kind.RING:
        d = doubled
        j = _current(d[1:-1], (d[2:] - d[:-2]) / (2 * grid.dtheta))
        v = scale / g.radius**2 * j / np.sum(np.abs(d[1:-1]) ** 2, axis=-1)
        proj = np.arange(1, 2 * n - 1) % n
        ok = ~single.flagged[proj]
        return float(np.abs(v - single.vectors[proj, 0])[ok].max(initial=0.0))
    d = doubled
    core = d[1:-1, 1:-1]
    rho = np.sum(np.abs(core) ** 2, axis=-1)
    r = grid.r[1:-1, None]
    vr = scale * _current(core, (d[2:, 1:-1] - d[:-2, 1:-1]) / (2 * grid.dr))
    vt = scale * _current(core, (d[1:-1, 2:] - d[1:-1, :-2]) / (2 * grid.dtheta)) / r**2
    proj = np.arange(1, 2 * n - 1) % n
    ref = single.vectors[1:-1][:, proj]
    ok = ~single.flagged[1:-1][:, proj]
    with np.errstate(divide="ignore", invalid="ignore"):
        diff = np.maximum(np.abs(vr / rho - ref[..., 0]), np.abs(vt / rho - ref[..., 1]))
    return float(diff[ok].max(initial=0.0))


# -- interpolation --------------------------------------------------------------------


class _Interpolant:
    """Bilinear (linear on the ring) interpolation, periodic in theta."""

    def __init__(self, grid: GridSpec):
        self.grid = grid
        self.g = grid.geometry

    def _stencil(self, pos: np.ndarray):
        g, grid = self.g, self.grid
        n = g.n_theta
        u = pos[:, -1] / grid.dtheta
        fu = np.floor(u)
        j0 = fu.astype(np.int64) % n
        j1 = (j0 + 1) % n
        tj = u - fu
        if g.kind is Kind.RING:
            return [(j0, 1 - tj), (j1, tj)]
        s = (pos[:, 0] - g.r_in) / grid.dr
        i0 = np.clip(np.floor(s).astype(np.int64), 0, g.grid[0] - 2)
        ti = np.clip(s - i0, 0.0, 1.0)
        return [
            ((i0, j0), (1 - ti) * (1 - tj)),
            ((i0 + 1, j0), ti * (1 - tj)),
            ((i0, j1), (1 - ti) * tj),
            ((i0 + 1, j1), ti * tj),
        ]

    def __call__(self, field_values: np.ndarray, pos: np.ndarray) -> np.ndarray:
        out = None
        for idx, w in self._stencil(pos):
            term = field_values[idx] * (w if field_values.ndim == self.g.ndim else w[:, None])
            out = term if out is None else out + term
        return out


def rk4_step(f: Callable[[float, np.ndarray], np.ndarray], t: float, y: np.ndarray, dt: float) -> np.ndarray:
    k1 = f(t, y)
    k2 = f(t + dt / 2, y + dt / 2 * k1)
    k3 = f(t + dt / 2, y + dt / 2 * k2)
    k4 = f(t + dt, y + dt * k3)
    return y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate_flow(f: Callable[[float, np.ndarray], np.ndarray], y0, t0: float, t_final: float, dt: float) -> np.ndarray:
    """Classical RK4 for dy/dt = f(t, y) with a fixed step."""
    steps = int(round((t_final - t0) / dt))
    y = np.array(y0, dtype=float)
    for k in range(steps):
        y = rk4_step(f, t0 + k * dt, y, dt)
    return y


# -- trajectories ------------------------------------------------------------------------


@dataclass
class Trajectory:
    samples: list[tuple[float, tuple[float, ...], int]] = field(default_factory=list)
    status: Status = Status.RUNNING


@dataclass
class EnsembleState:
    positions: np.ndarray  # (M, ndim) base coordinates
    windings: np.ndarray
    status: np.ndarray  # int8 Status codes
    stop_time: np.ndarray
    time: float


def _guard(geo: Geometry, grid: GridSpec, state: EnsembleState, vf: VelocityField, interp: _Interpolant, mask: np.ndarray) -> None:
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return
    pos = state.positions[idx]
    if geo.kind is not Kind.RING:
        lo = geo.r_in + WALL_CELLS * grid.dr
        hi = geo.r_out - WALL_CELLS * grid.dr
        out = (pos[:, 0] < lo) | (pos[:, 0] > hi)
        state.status[idx[out]] = Status.LEFT
        state.stop_time[idx[out]] = state.time
        idx, pos = idx[~out], pos[~out]
    rho = interp(vf.density, pos)
    nodal = rho <= vf.floor
    state.status[idx[nodal]] = Status.NODAL
    state.stop_time[idx[nodal]] = state.time


def _wrap(geo: Geometry, state: EnsembleState, idx: np.ndarray) -> None:
    theta = state.positions[idx, -1]
    turns = np.floor(theta / geo.period)
    state.windings[idx] += turns.astype(np.int64)
    theta = theta - turns * geo.period
    theta[theta >= geo.period] -= geo.period  # rounding at the seam
    state.positions[idx, -1] = theta


def start_ensemble(geo: Geometry, q0: np.ndarray, windings0=None, t0: float = 0.0) -> EnsembleState:
    q0 = np.array(q0, dtype=float).reshape(-1, geo.ndim)
    m = q0.shape[0]
    if not np.all((q0[:, -1] >= 0) & (q0[:, -1] < geo.period)):
        raise ValueError("initial angles must lie in the fundamental domain")
    if geo.ndim == 2 and not np.all((q0[:, 0] >= geo.r_in) & (q0[:, 0] <= geo.r_out)):
        raise ValueError("initial radii must lie in [r_in, r_out]")
    w = np.zeros(m, dtype=np.int64) if windings0 is None else np.array(windings0, dtype=np.int64).reshape(m)
    status = np.full(m, Status.RUNNING, dtype=np.int8)
    return EnsembleState(q0, w, status, np.full(m, np.nan), t0)


def iter_ensemble(
    q0,
    waves: Iterable[CoveringWave],
    t_final: float,
    velocity_scale: float = 1.0,
    windings0=None,
    threads: int = 1,
) -> Iterator[EnsembleState]:
    """Advance an ensemble through consecutive wave snapshots.

    Yields the (mutable) state after every snapshot interval, starting with
    the initial state.  Each interval is one RK4 step with the velocity
    interpolated linearly in time between the two snapshots.
    """
    waves = iter(waves)
    first = next(waves)
    geo = first.geometry
    grid = first.grid
    interp = _Interpolant(grid)
    state = start_ensemble(geo, q0, windings0, first.time)
    vf0 = velocity_field(first)
    _guard(geo, grid, state, vf0, interp, state.status == Status.RUNNING)
    yield state
    chunks = max(1, int(threads))
    pool = ThreadPoolExecutor(chunks) if chunks > 1 else None
    try:
        while state.time < t_final - 1e-12:
            wave = next(waves, None)
            if wave is None:
                break
            vf1 = velocity_field(wave)
            t0, dt = state.time, wave.time - state.time
            v0, v1 = vf0.vectors * velocity_scale, vf1.vectors * velocity_scale

            def f(t, y, v0=v0, v1=v1, t0=t0, dt=dt):
                lam = (t - t0) / dt
                return (1 - lam) * interp(v0, y) + lam * interp(v1, y)

            running = np.flatnonzero(state.status == Status.RUNNING)
            parts = np.array_split(running, chunks) if pool else [running]

            def advance(idx):
                if idx.size:
                    state.positions[idx] = rk4_step(f, t0, state.positions[idx], dt)

            if pool:
                list(pool.map(advance, parts))
            else:
                advance(running)
            _wrap(geo, state, running)
            state.time = wave.time
            mask = np.zeros(state.status.shape, dtype=bool)
            mask[running] = True
            _guard(geo, grid, state, vf1, interp, mask)
            vf0 = vf1
            yield state
    finally:
        if pool:
            pool.shutdown()
    state.status[state.status == Status.RUNNING] = Status.FINISHED


def integrate_ensemble(q0, waves, t_final, record_times=None, velocity_scale: float = 1.0, windings0=None, threads: int = 1):
    """Run an ensemble to ``t_final``; returns (final state, {t: (positions, windings, alive)})."""
    records = {}
    pending = sorted(record_times or [])
    state = None
    for state in iter_ensemble(q0, waves, t_final, velocity_scale, windings0, threads):
        while pending and state.time >= pending[0] - 1e-9:
            t = pending.pop(0)
            alive = state.status == Status.RUNNING
            records[t] = (state.positions.copy(), state.windings.copy(), alive.copy())
    state.status[state.status == Status.RUNNING] = Status.FINISHED
    return state, records


def integrate_trajectory(q0, waves: Iterable[CoveringWave], t_final: float, winding0: int = 0, every: int = 1) -> Trajectory:
    traj = Trajectory()
    state = None
    for k, state in enumerate(iter_ensemble([q0], waves, t_final, windings0=[winding0])):
        status = Status(state.status[0])
        if k % every == 0 or status is not Status.RUNNING:
            traj.samples.append((state.time, tuple(state.positions[0]), int(state.windings[0])))
        if status is not Status.RUNNING:
            traj.status = status
            return traj
    if traj.samples[-1][0] != state.time:
        traj.samples.append((state.time, tuple(state.positions[0]), int(state.windings[0])))
    traj.status = Status.FINISHED
    return traj


def unwrapped_angle(geo: Geometry, positions: np.ndarray, windings: np.ndarray) -> np.ndarray:
    return positions[..., -1] + windings * geo.period


def ring_velocity_closed_form(beta: float, k: int, geo: Geometry) -> float:
    """d(theta)/dt of the twisted plane wave with quantum number k."""
    kappa = (2 * math.pi * k + beta) / geo.period
    return geo.hbar * kappa / (geo.mass * geo.radius**2)
