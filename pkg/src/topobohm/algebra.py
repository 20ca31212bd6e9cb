"""Algebra of topological factors.

Characters and unitary representations of finitely presented groups,
periodicity sections with their holonomy-twisted composition law, the
semidirect deck group of N identical particles, the N-fermion factor, the
Aharonov-Casher SU(2) factor and the commutant test behind character
rigidity under Pauli potentials.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg

from .words import IDENTITY, Word

UNIT_TOL = 1e-12

PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


class AlgebraError(ValueError):
    pass


class PresentationError(AlgebraError):
    pass


class MissingHolonomy(KeyError):
    pass


class InsufficientSamples(AlgebraError):
    pass


def is_unitary(u: np.ndarray, tol: float = UNIT_TOL) -> bool:
    u = np.asarray(u)
    return bool(np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0]), ord=2) < tol)


def spin_matrices(spin_dim: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Spin matrices scaled so that spin 1/2 gives the Pauli matrices (2J)."""
    if spin_dim == 2:
        return PAULI
    s = (spin_dim - 1) / 2
    m = s - np.arange(spin_dim)
    jp = np.zeros((spin_dim, spin_dim), dtype=complex)
    for k in range(1, spin_dim):
        jp[k - 1, k] = math.sqrt(s * (s + 1) - m[k] * (m[k] + 1))
    jx = (jp + jp.conj().T) / 2
    jy = (jp - jp.conj().T) / 2j
    jz = np.diag(m).astype(complex)
    return 2 * jx, 2 * jy, 2 * jz


# -- presentations -----------------------------------------------------------


@dataclass(frozen=True)
class GroupPresentation:
    name: str
    generators: tuple[str, ...]
    relators: tuple[Word, ...] = ()

    def __post_init__(self):
        known = set(self.generators)
        for rel in self.relators:
            unknown = rel.generators() - known
            if unknown:
                raise PresentationError(f"relator {rel} of {self.name} uses unknown generators {sorted(unknown)}")


def symmetric_group(n: int) -> GroupPresentation:
    """Coxeter presentation of S_n on adjacent transpositions s1..s(n-1)."""
    if n < 2:
        raise PresentationError("S_n needs n >= 2")
    gens = tuple(f"s{i}" for i in range(1, n))
    s = [Word.gen(g) for g in gens]
    rels = [x**2 for x in s]
    rels += [(s[i] * s[i + 1]) ** 3 for i in range(n - 2)]
    rels += [(s[i] * s[j]) ** 2 for i in range(n - 1) for j in range(i + 2, n - 1)]
    return GroupPresentation(f"S{n}", gens, tuple(rels))


def braid_group(n: int) -> GroupPresentation:
    """Artin presentation of B_n: braid relations plus distant commutation."""
    if n < 2:
        raise PresentationError("B_n needs n >= 2")
    gens = tuple(f"s{i}" for i in range(1, n))
    s = [Word.gen(g) for g in gens]
    rels = [s[i] * s[i + 1] * s[i] * (s[i + 1] * s[i] * s[i + 1]).inverse() for i in range(n - 2)]
    rels += [s[i] * s[j] * (s[j] * s[i]).inverse() for i in range(n - 1) for j in range(i + 2, n - 1)]
    return GroupPresentation(f"B{n}", gens, tuple(rels))


def free_group(gens: Sequence[str]) -> GroupPresentation:
    return GroupPresentation("F" + str(len(gens)), tuple(gens), ())


def presentation_by_name(name: str) -> GroupPresentation:
    name = name.strip()
    if name in ("Z", "ring"):
        return free_group(["a"])
    kind, digits = name[0].upper(), name[1:]
    if not digits.isdigit():
        raise PresentationError(f"unknown group {name!r}")
    n = int(digits)
    if kind == "S":
        return symmetric_group(n)
    if kind == "B":
        return braid_group(n)
    if kind == "F":
        return free_group([f"a{i}" for i in range(1, n + 1)])
    raise PresentationError(f"unknown group {name!r}")


# -- characters ----------------------------------------------------------------


@dataclass(frozen=True)
class Character:
    phases: Mapping[str, complex]

    def __post_init__(self):
        for g, z in self.phases.items():
            if abs(abs(z) - 1) > UNIT_TOL:
                raise AlgebraError(f"phase of {g} has modulus {abs(z)}, not 1")

    @classmethod
    def from_angles(cls, angles: Mapping[str, float]) -> "Character":
        return cls({g: complex(np.exp(1j * a)) for g, a in angles.items()})

    @classmethod
    def trivial(cls, gens: Sequence[str]) -> "Character":
        return cls({g: 1 + 0j for g in gens})


def char_eval(gamma: Character, sigma: Word) -> complex:
    """Value of the character on a group element.

    The target group is abelian, so only exponent sums matter; evaluating
    that way makes relators with zero exponent sums exactly 1.
    """
    value = 1 + 0j
    for g, e in sorted(sigma.exponent_sums().items()):
        if g not in gamma.phases:
            raise AlgebraError(f"character has no phase for generator {g!r}")
        value *= complex(gamma.phases[g]) ** e
    return value


def smith_normal_form(m: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Integer Smith form: returns (U, D, V) with U @ m @ V == D, U and V unimodular."""
    a = np.array(m, dtype=object)
    rows, cols = a.shape
    u = np.eye(rows, dtype=object)
    v = np.eye(cols, dtype=object)
    for t in range(min(rows, cols)):
        nonzero = [(abs(a[i, j]), i, j) for i in range(t, rows) for j in range(t, cols) if a[i, j] != 0]
        if not nonzero:
            break
        _, i, j = min(nonzero)
        a[[t, i]] = a[[i, t]]
        u[[t, i]] = u[[i, t]]
        a[:, [t, j]] = a[:, [j, t]]
        v[:, [t, j]] = v[:, [j, t]]
        while True:
            done = True
            for i in range(t + 1, rows):
                q = a[i, t] // a[t, t]
                a[i] -= q * a[t]
                u[i] -= q * u[t]
                if a[i, t] != 0:
                    done = False
            for j in range(t + 1, cols):
                q = a[t, j] // a[t, t]
                a[:, j] -= q * a[:, t]
                v[:, j] -= q * v[:, t]
                if a[t, j] != 0:
                    done = False
            if not done:
                # bring the smallest remaining entry of row/col t to the pivot
                cand = [(abs(a[i, t]), i, t) for i in range(t, rows) if a[i, t] != 0]
                cand += [(abs(a[t, j]), t, j) for j in range(t, cols) if a[t, j] != 0]
                _, i, j = min(cand)
                a[[t, i]] = a[[i, t]]
                u[[t, i]] = u[[i, t]]
                a[:, [t, j]] = a[:, [j, t]]
                v[:, [t, j]] = v[:, [j, t]]
                continue
            # divisibility of the rest of the block
            bad = [(i, j) for i in range(t + 1, rows) for j in range(t + 1, cols) if a[i, j] % a[t, t] != 0]
            if not bad:
                break
            i, _ = bad[0]
            a[t] += a[i]
            u[t] += u[i]
        if a[t, t] < 0:
            a[t] = -a[t]
            u[t] = -u[t]
    return u, a, v


@dataclass(frozen=True)
class CharacterVariety:
    """All characters of a presented group.

    A character is theta = V @ phi (angles in turns) where phi_i ranges over
    multiples of 1/d_i for each nonzero invariant factor d_i and is free
    otherwise.
    """

    generators: tuple[str, ...]
    torsion: tuple[tuple[Fraction, ...], ...]
    free_directions: np.ndarray = field(repr=False)

    @property
    def free_rank(self) -> int:
        return self.free_directions.shape[1]

    def is_finite(self) -> bool:
        return self.free_rank == 0

    def character(self, free_angles: Sequence[float] = (), torsion_index: int = 0) -> Character:
        free_angles = np.asarray(free_angles, dtype=float).reshape(-1)
        if free_angles.size != self.free_rank:
            raise AlgebraError(f"variety has {self.free_rank} free angles, got {free_angles.size}")
        turns = np.array([float(x) for x in self.torsion[torsion_index]])
        angles = 2 * math.pi * turns + self.free_directions @ free_angles
        return Character.from_angles(dict(zip(self.generators, angles)))

    def characters(self) -> list[Character]:
        if not self.is_finite():
            raise AlgebraError("character variety has free parameters; use character(angles)")
        return [self.character((), k) for k in range(len(self.torsion))]

    def all_generators_equal(self) -> bool:
        """True iff the variety is {every generator -> e^{i beta}}, beta free."""
        if self.free_rank != 1 or len(self.torsion) != 1:
            return False
        col = self.free_directions[:, 0]
        return bool(np.all(col == col[0]) and abs(col[0]) == 1)


def classify_characters(presentation: GroupPresentation) -> CharacterVariety:
    gens = presentation.generators
    if not gens:
        raise PresentationError("presentation has no generators")
    m = np.array(
        [[rel.exponent_sums().get(g, 0) for g in gens] for rel in presentation.relators],
        dtype=object,
    ).reshape(len(presentation.relators), len(gens))
    _, d, v = smith_normal_form(m)
    options: list[list[Fraction]] = []
    free = []
    for i in range(len(gens)):
        di = d[i, i] if i < min(d.shape) else 0
        if di == 0:
            free.append(i)
            options.append([Fraction(0)])
        else:
            options.append([Fraction(k, abs(di)) for k in range(abs(di))])
    vmat = np.array(v, dtype=object)
    torsion = []
    for phi in itertools.product(*options):
        theta = [sum((vmat[g, i] * phi[i] for i in range(len(gens))), Fraction(0)) % 1 for g in range(len(gens))]
        torsion.append(tuple(theta))
    directions = np.array(vmat[:, free], dtype=float).reshape(len(gens), len(free))
    # present free directions with positive leading entries
    for k in range(directions.shape[1]):
        nz = np.flatnonzero(directions[:, k])
        if nz.size and directions[nz[0], k] < 0:
            directions[:, k] *= -1
    return CharacterVariety(tuple(gens), tuple(torsion), directions)


def brute_force_sign_characters(presentation: GroupPresentation) -> list[dict[str, int]]:
    """Every {+1,-1} generator assignment satisfying the relators literally."""
    found = []
    for signs in itertools.product((1, -1), repeat=len(presentation.generators)):
        assign = dict(zip(presentation.generators, signs))
        ok = True
        for rel in presentation.relators:
            value = 1
            for g, e in rel.letters():
                value *= assign[g] ** e
            ok &= value == 1
        if ok:
            found.append(assign)
    return found


# -- matrix representations -------------------------------------------------------


def _letter_matrix(mats: Mapping[str, np.ndarray], g: str, e: int) -> np.ndarray:
    if g not in mats:
        raise AlgebraError(f"no matrix assigned to generator {g!r}")
    u = mats[g]
    return u if e > 0 else u.conj().T


@dataclass(frozen=True)
class UnitaryRep:
    dim: int
    matrices: Mapping[str, np.ndarray]

    def __post_init__(self):
        for g, u in self.matrices.items():
            u = np.asarray(u, dtype=complex)
            if u.shape != (self.dim, self.dim):
                raise AlgebraError(f"matrix for {g} has shape {u.shape}, expected {(self.dim, self.dim)}")
            if not is_unitary(u):
                raise AlgebraError(f"matrix for {g} is not unitary")

    def evaluate(self, sigma: Word) -> np.ndarray:
        out = np.eye(self.dim, dtype=complex)
        for g, e in sigma.letters():
            out = out @ _letter_matrix(self.matrices, g, e)
        return out

    def relation_residual(self, presentation: GroupPresentation) -> float:
        eye = np.eye(self.dim)
        return max((float(np.abs(self.evaluate(r) - eye).max()) for r in presentation.relators), default=0.0)


@dataclass(frozen=True)
class PeriodicitySection:
    """Periodicity section on a bundle, stored at one base fiber.

    ``base_matrices`` holds Gamma_g for the deck generators; ``holonomy``
    holds h_g, the holonomy of the loop class of each generator.  Values on
    arbitrary words follow from the twisted composition law
    Gamma_{s1 s2} = h_{s2} Gamma_{s1} h_{s2}^-1 Gamma_{s2}.
    """

    dim: int
    base_matrices: Mapping[str, np.ndarray]
    holonomy: Mapping[str, np.ndarray]

    @classmethod
    def from_rep(cls, rep: UnitaryRep) -> "PeriodicitySection":
        eye = np.eye(rep.dim, dtype=complex)
        return cls(rep.dim, dict(rep.matrices), {g: eye for g in rep.matrices})

    @classmethod
    def from_character(cls, gamma: Character, dim: int) -> "PeriodicitySection":
        eye = np.eye(dim, dtype=complex)
        return cls(dim, {g: z * eye for g, z in gamma.phases.items()}, {g: eye for g in gamma.phases})

    def holonomy_of(self, sigma: Word) -> np.ndarray:
        # concatenating loops composes parallel transports in reverse order
        out = np.eye(self.dim, dtype=complex)
        for g, e in sigma.letters():
            if g not in self.holonomy:
                raise MissingHolonomy(f"no holonomy for loop class of generator {g!r}")
            out = _letter_matrix(self.holonomy, g, e) @ out
        return out

    def _letter(self, g: str, e: int) -> np.ndarray:
        gam = _letter_matrix(self.base_matrices, g, 1)
        if e > 0:
            return gam
        h = self.holonomy_of(Word.gen(g))
        return h.conj().T @ gam.conj().T @ h

    def matrix(self, sigma: Word) -> np.ndarray:
        gam = np.eye(self.dim, dtype=complex)
        suffix = IDENTITY
        for g, e in reversed(sigma.letters()):
            h = self.holonomy_of(suffix)
            gam = h @ self._letter(g, e) @ h.conj().T @ gam
            suffix = Word.gen(g, e) * suffix
        return gam


def compose_section(section, sigma1, sigma2) -> np.ndarray:
    """Gamma_{sigma1 sigma2} from the twisted law with the stored holonomy.

    Works for any section exposing ``matrix(sigma)`` and ``holonomy_of(sigma)``.
    """
    h = section.holonomy_of(sigma2)
    return h @ section.matrix(sigma1) @ np.linalg.inv(h) @ section.matrix(sigma2)


def check_parallel_constancy(samples: Sequence[Mapping[str, np.ndarray]], tol: float = UNIT_TOL) -> bool:
    """True iff a section given at several base points is position independent."""
    samples = list(samples)
    if not samples:
        return True
    ref = samples[0]
    for other in samples[1:]:
        if set(other) != set(ref):
            return False
        for g, u in ref.items():
            if np.abs(np.asarray(other[g]) - np.asarray(u)).max() > tol:
                return False
    return True


# -- N identical particles ---------------------------------------------------------


Perm = tuple[int, ...]


def perm_compose(p: Perm, q: Perm) -> Perm:
    """(p q)(j) = p(q(j)), one-line notation, 0-based."""
    return tuple(p[q[j]] for j in range(len(p)))


def perm_inverse(p: Perm) -> Perm:
    out = [0] * len(p)
    for j, pj in enumerate(p):
        out[pj] = j
    return tuple(out)


def perm_sign(p: Perm) -> int:
    seen = [False] * len(p)
    sign = 1
    for start in range(len(p)):
        if seen[start]:
            continue
        length = 0
        j = start
        while not seen[j]:
            seen[j] = True
            j = p[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


@dataclass(frozen=True)
class SemidirectElement:
    """sigma = p * (sigma^(1), ..., sigma^(N)) in S_N x| Cov(M^, M)^N."""

    perm: Perm
    tilde: tuple[Word, ...]

    def __post_init__(self):
        object.__setattr__(self, "perm", tuple(int(x) for x in self.perm))
        object.__setattr__(self, "tilde", tuple(w if isinstance(w, Word) else Word.gen("a", int(w)) for w in self.tilde))
        if sorted(self.perm) != list(range(len(self.perm))):
            raise AlgebraError(f"{self.perm} is not a permutation")
        if len(self.tilde) != len(self.perm):
            raise AlgebraError("permutation and deck tuple differ in length")

    @property
    def n(self) -> int:
        return len(self.perm)

    @classmethod
    def identity(cls, n: int) -> "SemidirectElement":
        return cls(tuple(range(n)), (IDENTITY,) * n)

    def conjugate_tilde(self, p: Perm) -> tuple[Word, ...]:
        """p^-1 sigma~ p, i.e. the tuple j -> sigma^(p(j))."""
        return tuple(self.tilde[p[j]] for j in range(self.n))

    def inverse(self) -> "SemidirectElement":
        pinv = perm_inverse(self.perm)
        # p sigma~^-1 p^-1 : j -> (sigma^(p^-1(j)))^-1
        return SemidirectElement(pinv, tuple(self.tilde[pinv[j]].inverse() for j in range(self.n)))

    def act(self, qhat: Sequence[tuple[tuple[float, ...], Word]]) -> list[tuple[tuple[float, ...], Word]]:
        """Action on a configuration of single-particle cover points.

        A single-particle cover point is (base coords, deck word) with the
        deck group acting by left multiplication on the word.
        """
        pinv = perm_inverse(self.perm)
        out = []
        for i in range(self.n):
            src = pinv[i]
            base, w = qhat[src]
            out.append((base, self.tilde[src] * w))
        return out


def semidirect_mul(a: SemidirectElement, b: SemidirectElement) -> SemidirectElement:
    if a.n != b.n:
        raise AlgebraError("elements act on different particle numbers")
    conj = a.conjugate_tilde(b.perm)
    return SemidirectElement(perm_compose(a.perm, b.perm), tuple(x * y for x, y in zip(conj, b.tilde)))


def permutation_operator(p: Perm, dim: int) -> np.ndarray:
    """P_p on W^{(x)N}: w_1 (x) ... (x) w_N -> w_{p(1)} (x) ... (x) w_{p(N)}."""
    n = len(p)
    total = dim**n
    basis = np.eye(total, dtype=complex).reshape((total,) + (dim,) * n)
    return np.transpose(basis, (0,) + tuple(1 + k for k in p)).reshape(total, total).T


def fermion_factor(sigma: SemidirectElement, single_rep: UnitaryRep, qhat=None) -> np.ndarray:
    """sgn(p) times the tensor product of one-particle factors, slot j <- sigma^(j)."""
    if qhat is not None:
        bases = [tuple(np.round(np.asarray(b, dtype=float), 12)) for b, _ in qhat]
        if len(set(bases)) != len(bases):
            raise AlgebraError("configuration lies on the extended diagonal")
    out = np.ones((1, 1), dtype=complex)
    for w in sigma.tilde:
        out = np.kron(out, single_rep.evaluate(w))
    return perm_sign(sigma.perm) * out


@dataclass(frozen=True)
class FermionSection:
    """Periodicity section of N fermions; holonomy acts by permuting tensor slots."""

    n: int
    single_rep: UnitaryRep

    @property
    def dim(self) -> int:
        return self.single_rep.dim**self.n

    def matrix(self, sigma: SemidirectElement) -> np.ndarray:
        return fermion_factor(sigma, self.single_rep)

    def holonomy_of(self, sigma: SemidirectElement) -> np.ndarray:
        return permutation_operator(sigma.perm, self.single_rep.dim)


# -- SU(2) factors -------------------------------------------------------------------


def su2_factor(alpha: float, axis: Sequence[float]) -> np.ndarray:
    """exp(-i alpha e.sigma) for a unit axis e."""
    e = np.asarray(axis, dtype=float)
    if e.shape != (3,) or abs(np.linalg.norm(e) - 1) > UNIT_TOL:
        raise AlgebraError(f"axis {list(e)} is not a unit 3-vector")
    gen = sum(c * s for c, s in zip(e, PAULI))
    return scipy.linalg.expm(-1j * alpha * gen)


def aharonov_casher_factor(mu_lambda_over_hbar: float, axis: Sequence[float]) -> np.ndarray:
    return su2_factor(4 * math.pi * mu_lambda_over_hbar, axis)


# -- Pauli potentials and the commutant ------------------------------------------------


@dataclass(frozen=True)
class PauliPotential:
    """Samples of V(q) = -mu sum_k B(q_k).sigma_k on the N-particle spin fiber."""

    n: int
    spin_dim: int
    field_samples: tuple[np.ndarray, ...]
    mu: float = 1.0

    @property
    def dim(self) -> int:
        return self.spin_dim**self.n

    def matrices(self) -> list[np.ndarray]:
        spins = spin_matrices(self.spin_dim)
        eye = np.eye(self.spin_dim)
        out = []
        for fields in self.field_samples:
            fields = np.asarray(fields, dtype=float).reshape(self.n, 3)
            v = np.zeros((self.dim, self.dim), dtype=complex)
            for k in range(self.n):
                local = sum(b * s for b, s in zip(fields[k], spins))
                term = np.ones((1, 1))
                for j in range(self.n):
                    term = np.kron(term, local if j == k else eye)
                v -= self.mu * term
            out.append(v)
        return out


def random_pauli_potential(n: int, spin_dim: int, samples: int, rng: np.random.Generator, mu: float = 1.0) -> PauliPotential:
    fields = tuple(rng.standard_normal((n, 3)) for _ in range(samples))
    return PauliPotential(n, spin_dim, fields, mu)


@dataclass(frozen=True)
class CommutantResult:
    is_scalar: bool
    dimension: int
    witness: np.ndarray | None
    basis: tuple[np.ndarray, ...] = field(repr=False, default=())


def commutant(mats: Sequence[np.ndarray], rel_tol: float = 1e-8) -> list[np.ndarray]:
    """Basis of {X : [V, X] = 0 for all V in mats}."""
    mats = [np.asarray(v, dtype=complex) for v in mats]
    if not mats:
        raise InsufficientSamples("no potential samples to decide the commutant")
    d = mats[0].shape[0]
    eye = np.eye(d)
    # row-major vec: vec(VX - XV) = (V (x) I - I (x) V^T) vec(X)
    a = np.vstack([np.kron(v, eye) - np.kron(eye, v.T) for v in mats])
    _, s, vh = np.linalg.svd(a)
    smax = s[0] if s.size else 0.0
    rank = int(np.sum(s > rel_tol * smax)) if smax > 0 else 0
    return [vh[k].conj().reshape(d, d) for k in range(rank, d * d)]


def commutant_is_scalar(pot: PauliPotential | Sequence[np.ndarray], rel_tol: float = 1e-8) -> CommutantResult:
    mats = pot.matrices() if isinstance(pot, PauliPotential) else list(pot)
    basis = commutant(mats, rel_tol)
    d = np.asarray(mats[0]).shape[0]
    if len(basis) <= 1:
        return CommutantResult(True, len(basis), None, tuple(basis))
    eye = np.eye(d)
    best = None
    for x in basis:
        # the commutant of Hermitian matrices is closed under adjoints
        for y in ((x + x.conj().T) / 2, (x - x.conj().T) / 2j):
            y = y - np.trace(y) / d * eye
            if best is None or np.linalg.norm(y) > np.linalg.norm(best):
                best = y
    k = np.unravel_index(np.argmax(np.abs(best)), best.shape)
    witness = best / best[k]
    return CommutantResult(False, len(basis), witness, tuple(basis))


def project_onto_commutant(x: np.ndarray, basis: Sequence[np.ndarray]) -> np.ndarray:
    b = np.array([m.reshape(-1) for m in basis])
    q, _ = np.linalg.qr(b.T)
    return (q @ (q.conj().T @ x.reshape(-1))).reshape(x.shape)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))
