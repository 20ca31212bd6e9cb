"""Twisted finite-difference Hamiltonians and Crank-Nicolson evolution.

Wave values are stored on one fundamental domain.  The periodicity
condition psi(theta + period) = Gamma psi(theta) enters only through the
angular stencil: the wraparound neighbour of the last column is Gamma times
column 0, and (by self-adjointness) the wraparound neighbour of column 0 is
Gamma^dagger times the last column.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .algebra import Character, PeriodicitySection, UnitaryRep
from .geometry import Geometry, GridSpec, Kind, build_grid
from .words import Word

COMMUTE_TOL = 1e-12
SOLVER_TOL = 1e-12


class InadmissibleError(ValueError):
    """Potential and topological factor do not commute."""

    def __init__(self, norm: float):
        super().__init__(f"potential does not commute with the topological factor: max ||[V, Gamma]|| = {norm:.3e}")
        self.norm = norm


class SolverError(RuntimeError):
    pass


def twist_matrix(factor, geometry: Geometry) -> np.ndarray:
    """Generator matrix of a topological factor on this geometry's fiber."""
    f = geometry.fiber_dim
    gen = Word.gen(geometry.generator)
    if isinstance(factor, Character):
        from .algebra import char_eval

        return char_eval(factor, gen) * np.eye(f, dtype=complex)
    if isinstance(factor, UnitaryRep):
        m = factor.evaluate(gen)
    elif isinstance(factor, PeriodicitySection):
        m = factor.matrix(gen)
    elif np.isscalar(factor):
        m = complex(factor) * np.eye(f)
    else:
        m = np.asarray(factor, dtype=complex)
    m = np.atleast_2d(np.asarray(m, dtype=complex))
    if m.shape != (f, f):
        raise ValueError(f"factor of shape {m.shape} does not fit fiber dimension {f}")
    if np.abs(m.conj().T @ m - np.eye(f)).max() > 1e-12:
        raise ValueError("topological factor must be unitary")
    return m


def matrix_power(g: np.ndarray, n: int) -> np.ndarray:
    if n < 0:
        return np.linalg.matrix_power(g.conj().T, -n)
    return np.linalg.matrix_power(g, n)


def ring_levels(beta: float, count: int, radius: float = 1.0, mass: float = 1.0, hbar: float = 1.0) -> np.ndarray:
    """Lowest continuum levels hbar^2 (k + beta/2pi)^2 / (2 m R^2), ascending."""
    ks = np.arange(-count - 2, count + 3)
    e = hbar**2 * (ks + beta / (2 * math.pi)) ** 2 / (2 * mass * radius**2)
    return np.sort(e)[:count]


# -- waves and potentials -------------------------------------------------------


@dataclass(frozen=True)
class PotentialField:
    values: np.ndarray  # grid shape + (fiber, fiber)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if np.abs(v - np.swapaxes(v, -1, -2).conj()).max(initial=0.0) > 1e-12:
            raise ValueError("potential is not Hermitian at every node")
        object.__setattr__(self, "values", v)

    @classmethod
    def zero(cls, grid: GridSpec) -> "PotentialField":
        f = grid.geometry.fiber_dim
        return cls(np.zeros(grid.shape + (f, f), dtype=complex))

    @classmethod
    def scalar(cls, grid: GridSpec, values: np.ndarray) -> "PotentialField":
        f = grid.geometry.fiber_dim
        values = np.broadcast_to(np.asarray(values, dtype=float), grid.shape)
        return cls(values[..., None, None] * np.eye(f))

    def tiled(self, sheets: int) -> "PotentialField":
        return PotentialField(np.concatenate([self.values] * sheets, axis=len(self.values.shape) - 3))

    def commutator_norm(self, gamma: np.ndarray) -> float:
        v = self.values
        return float(np.abs(v @ gamma - gamma @ v).max(initial=0.0))


@dataclass(frozen=True)
class CoveringWave:
    grid: GridSpec
    values: np.ndarray  # grid shape + (fiber,)
    gamma: np.ndarray
    time: float = 0.0

    @property
    def geometry(self) -> Geometry:
        return self.grid.geometry

    def density(self) -> np.ndarray:
        return np.sum(np.abs(self.values) ** 2, axis=-1)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.grid.weights * self.density())))

    def normalized(self) -> "CoveringWave":
        return replace(self, values=self.values / self.norm())

    def inner(self, other: "CoveringWave") -> complex:
        return complex(np.sum(self.grid.weights[..., None] * self.values.conj() * other.values))

    def active_vector(self) -> np.ndarray:
        return self.values[self.grid.active].reshape(-1)

    def with_active(self, vec: np.ndarray, time: float | None = None) -> "CoveringWave":
        values = np.zeros_like(self.values)
        values[self.grid.active] = vec.reshape(-1, self.values.shape[-1])
        return replace(self, values=values, time=self.time if time is None else time)

    def apply_gamma(self, power: int = 1) -> np.ndarray:
        return self.values @ matrix_power(self.gamma, power).T

    def lift(self, sheets: int) -> "CoveringWave":
        """The same wave on the cover gluing ``sheets`` fundamental domains."""
        geo = self.geometry.covering(sheets)
        parts = [self.apply_gamma(m) for m in range(sheets)]
        axis = self.geometry.ndim - 1
        return CoveringWave(build_grid(geo), np.concatenate(parts, axis=axis), matrix_power(self.gamma, sheets), self.time)


# -- Hamiltonian ------------------------------------------------------------------------


def _angular_operator(n: int, dtheta: float, gamma: np.ndarray) -> sp.csr_matrix:
    """(2 - S - S^dagger) / dtheta^2 with the twisted shift S."""
    f = gamma.shape[0]
    shift = sp.kron(sp.diags([np.ones(n - 1)], [1], shape=(n, n)), sp.identity(f))
    corner = sp.coo_matrix(([1.0], ([n - 1], [0])), shape=(n, n))
    shift = (shift + sp.kron(corner, sp.csr_matrix(gamma))).tocsr()
    eye = sp.identity(n * f, dtype=complex, format="csr")
    return ((2 * eye - shift - shift.conj().T) / dtheta**2).tocsr()


@dataclass
class Hamiltonian:
    grid: GridSpec
    matrix: sp.csr_matrix
    gamma: np.ndarray
    potential: PotentialField
    weights: np.ndarray = field(repr=False)  # quadrature weights per unknown
    _propagators: dict = field(default_factory=dict, repr=False)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def symmetrized(self) -> sp.csr_matrix:
        s = sp.diags(np.sqrt(self.weights))
        si = sp.diags(1 / np.sqrt(self.weights))
        return (s @ self.matrix @ si).tocsr()

    def hermiticity_residual(self) -> float:
        wh = (sp.diags(self.weights) @ self.matrix).tocsr()
        diff = wh - wh.conj().T
        scale = abs(wh).max()
        return float(abs(diff).max() / scale) if scale else 0.0

    def propagator(self, dt: float, solver: str = "direct", tol: float = SOLVER_TOL, maxiter: int = 1000) -> "CrankNicolson":
        key = (dt, solver, tol, maxiter)
        if key not in self._propagators:
            self._propagators[key] = CrankNicolson(self, dt, solver, tol, maxiter)
        return self._propagators[key]


def assemble_hamiltonian(grid: GridSpec, potential: PotentialField | None, factor) -> Hamiltonian:
    g = grid.geometry
    gamma = twist_matrix(factor, g)
    if potential is None:
        potential = PotentialField.zero(grid)
    cnorm = potential.commutator_norm(gamma)
    if cnorm > COMMUTE_TOL * max(1.0, float(np.abs(potential.values).max(initial=0.0))):
        raise InadmissibleError(cnorm)

    f = g.fiber_dim
    c = g.hbar**2 / (2 * g.mass)
    n_theta = g.n_theta
    angular = _angular_operator(n_theta, grid.dtheta, gamma)
    v_active = potential.values[grid.active]
    v_block = sp.block_diag(list(v_active), format="csr") if f > 1 else sp.diags(v_active[:, 0, 0])

    if g.kind is Kind.RING:
        h = (c / g.radius**2) * angular + v_block
    else:
        r = grid.r[1:-1]
        dr = grid.dr
        n_a = r.size
        upper = -(r[:-1] + dr / 2) / (r[:-1] * dr**2)
        lower = -(r[1:] - dr / 2) / (r[1:] * dr**2)
        radial = sp.diags([lower, np.full(n_a, 2 / dr**2), upper], [-1, 0, 1])
        block = sp.identity(n_theta * f)
        h = c * sp.kron(radial, block) + sp.kron(sp.diags(c / r**2), angular) + v_block
    weights = np.repeat(grid.weights[grid.active], f)
    return Hamiltonian(grid, sp.csr_matrix(h, dtype=complex), gamma, potential, weights)


def ring_peierls_hamiltonian(grid: GridSpec, beta: float) -> sp.csr_matrix:
    """Untwisted ring with the flux moved into the hopping phases.

    Equivalent to the twisted operator under psi -> exp(-i beta theta / period) psi.
    """
    g = grid.geometry
    n = g.n_theta
    c = g.hbar**2 / (2 * g.mass * g.radius**2)
    phase = np.exp(1j * beta * grid.dtheta / g.period)
    shift = sp.diags([np.full(n - 1, phase)], [1], shape=(n, n)).tolil()
    shift[n - 1, 0] = phase
    shift = shift.tocsr()
    return (c * (2 * sp.identity(n) - shift - shift.conj().T) / grid.dtheta**2).tocsr()


# -- time evolution -----------------------------------------------------------------------


class CrankNicolson:
    """(I + i dt H / 2 hbar) psi' = (I - i dt H / 2 hbar) psi."""

    def __init__(self, h: Hamiltonian, dt: float, solver: str = "direct", tol: float = SOLVER_TOL, maxiter: int = 1000):
        if not dt > 0:
            raise ValueError("dt must be positive")
        hbar = h.grid.geometry.hbar
        eye = sp.identity(h.size, dtype=complex, format="csc")
        self.lhs = (eye + 0.5j * dt / hbar * h.matrix).tocsc()
        self.rhs = (eye - 0.5j * dt / hbar * h.matrix).tocsr()
        self._lhs_norm = float(abs(self.lhs).sum(axis=1).max())
        self.dt = dt
        self.solver = solver
        self.tol = tol
        self.maxiter = maxiter
        if solver == "direct":
            self._lu = spla.splu(self.lhs)
        elif solver != "bicgstab":
            raise ValueError(f"unknown solver {solver!r}")

    def apply(self, vec: np.ndarray) -> np.ndarray:
        b = self.rhs @ vec
        if self.solver == "direct":
            x = self._lu.solve(b)
        else:
            x, info = spla.bicgstab(self.lhs, b, x0=vec, rtol=self.tol, atol=0.0, maxiter=self.maxiter)
            if info != 0:
                raise SolverError(f"BiCGStab did not converge (info={info})")
        resid = self.backward_error(x, b)
        if resid > max(self.tol, 1e-12):
            raise SolverError(f"linear solve residual {resid:.2e} above tolerance {self.tol:.0e}")
        return x

    def backward_error(self, x: np.ndarray, b: np.ndarray) -> float:
        """Normwise backward error |Ax - b| / (|A| |x| + |b|) in the max norm.

        Unlike |Ax - b| / |b| it does not grow with the conditioning of A, so one
        tolerance serves coarse and fine grids alike.
        """
        scale = self._lhs_norm * np.abs(x).max() + np.abs(b).max()
        return float(np.abs(self.lhs @ x - b).max() / scale) if scale else 0.0

    def step(self, psi: CoveringWave) -> CoveringWave:
        return psi.with_active(self.apply(psi.active_vector()), psi.time + self.dt)


def evolve_step(psi: CoveringWave, h: Hamiltonian, dt: float, **solver_opts) -> CoveringWave:
    return h.propagator(dt, **solver_opts).step(psi)


def evolve(psi: CoveringWave, h: Hamiltonian, dt: float, steps: int, **solver_opts):
    """Yield psi and its ``steps`` successors."""
    prop = h.propagator(dt, **solver_opts)
    vec = psi.active_vector()
    yield psi
    for k in range(1, steps + 1):
        vec = prop.apply(vec)
        yield psi.with_active(vec, psi.time + k * dt)


def spectrum(h: Hamiltonian, k: int, dense_limit: int = 3000) -> list[tuple[float, CoveringWave]]:
    """The k lowest eigenpairs, eigenvectors normalized in the quadrature norm."""
    if not 0 < k <= h.size:
        raise ValueError(f"need 0 < k <= {h.size}")
    hs = h.symmetrized()
    if h.size <= dense_limit:
        e, vecs = scipy.linalg.eigh(hs.toarray(), subset_by_index=(0, k - 1))
    else:
        lower = float((hs.diagonal().real - abs(hs).sum(axis=1).A1 + abs(hs.diagonal())).min())
        # fixed start vector: ARPACK otherwise draws a random one per call
        v0 = np.random.Generator(np.random.PCG64(0)).standard_normal(hs.shape[0])
        e, vecs = spla.eigsh(hs, k=k, sigma=lower - 1.0, which="LM", v0=v0)
        order = np.argsort(e)
        e, vecs = e[order], vecs[:, order]
    template = CoveringWave(h.grid, np.zeros(h.grid.shape + (h.grid.geometry.fiber_dim,), dtype=complex), h.gamma)
    out = []
    for j in range(k):
        psi = template.with_active(vecs[:, j] / np.sqrt(h.weights))
        out.append((float(e[j]), psi.normalized()))
    return out


def check_periodicity_preserved(psi_t: CoveringWave, psi_0: CoveringWave, potential: PotentialField | None, dt: float, steps: int) -> float:
    """Max deviation between psi_t and an evolution on the two-sheet cover.

    The oracle glues psi_0 and Gamma psi_0 into one domain, evolves it with
    factor Gamma^2 for ``steps`` steps and compares both sheets with psi_t
    and Gamma psi_t.
    """
    doubled = psi_0.lift(2)
    pot = None if potential is None else potential.tiled(2)
    h2 = assemble_hamiltonian(doubled.grid, pot, doubled.gamma)
    for w in evolve(doubled, h2, dt, steps):
        final = w
    expected = psi_t.lift(2).values
    return float(np.abs(final.values - expected).max())


# -- initial waves -------------------------------------------------------------------------


def wave_packet(
    grid: GridSpec,
    gamma: np.ndarray,
    theta0: float,
    width: float,
    momentum: float = 0.0,
    spinor: Sequence[complex] | None = None,
    r0: float | None = None,
    width_r: float | None = None,
) -> CoveringWave:
    """Gaussian packet made periodic by summing its deck images.

    psi(theta) = sum_m Gamma^m phi(theta - m*period) chi satisfies the
    periodicity condition exactly.  On annuli the radial profile is the
    lowest Dirichlet mode unless ``r0``/``width_r`` are given.
    """
    g = grid.geometry
    f = g.fiber_dim
    chi = np.ones(f, dtype=complex) if spinor is None else np.asarray(spinor, dtype=complex)
    chi = chi / np.linalg.norm(chi)
    images = int(math.ceil(8 * width / g.period)) + 2
    ang = np.zeros((g.n_theta, f), dtype=complex)
    for m in range(-images, images + 1):
        x = grid.theta - m * g.period
        phi = np.exp(-((x - theta0) ** 2) / (2 * width**2) + 1j * momentum * x)
        ang += phi[:, None] * (matrix_power(gamma, m) @ chi)[None, :]
    if g.kind is Kind.RING:
        values = ang
    else:
        r = grid.r
        if r0 is None:
            radial = np.sin(math.pi * (r - g.r_in) / (g.r_out - g.r_in))
        else:
            radial = np.exp(-((r - r0) ** 2) / (2 * width_r**2))
        radial[0] = radial[-1] = 0.0
        values = radial[:, None, None] * ang[None, :, :]
    return CoveringWave(grid, values, gamma).normalized()


def plane_wave(grid: GridSpec, gamma: np.ndarray, k: int) -> CoveringWave:
    """Twisted plane wave exp(i kappa theta), kappa = (2 pi k + beta) / period."""
    g = grid.geometry
    beta = float(np.angle(gamma[0, 0]))
    kappa = (2 * math.pi * k + beta) / g.period
    values = np.exp(1j * kappa * grid.theta)[:, None]
    return CoveringWave(grid, values, gamma).normalized()
