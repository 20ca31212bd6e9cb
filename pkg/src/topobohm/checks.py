"""Named algebra checks with residuals and thresholds.

Each check returns rows ``{name, value, pass, residual, threshold}``; a
``pass`` of None marks a row that is reported but not asserted.
"""

from __future__ import annotations

import math

import numpy as np

from .algebra import (
    PAULI,
    Character,
    FermionSection,
    PauliPotential,
    SemidirectElement,
    UnitaryRep,
    brute_force_sign_characters,
    char_eval,
    check_parallel_constancy,
    classify_characters,
    commutant_is_scalar,
    compose_section,
    presentation_by_name,
    project_onto_commutant,
    random_pauli_potential,
    random_unitary,
    semidirect_mul,
    su2_factor,
)
from .words import Word

EXACT_TOL = 1e-12


def _row(name, value, passed, residual=0.0, threshold=0.0) -> dict:
    passed = None if passed is None else bool(passed)
    return {"name": name, "value": value, "pass": passed, "residual": float(residual), "threshold": float(threshold)}


def random_word(gens, rng: np.random.Generator, max_len: int = 8) -> Word:
    letters = [(gens[rng.integers(len(gens))], int(rng.choice([-1, 1]))) for _ in range(rng.integers(0, max_len + 1))]
    return Word(tuple(letters))


def random_semidirect(n: int, rng: np.random.Generator, spread: int = 3) -> SemidirectElement:
    perm = tuple(int(x) for x in rng.permutation(n))
    return SemidirectElement(perm, tuple(int(x) for x in rng.integers(-spread, spread + 1, size=n)))


# -- characters ----------------------------------------------------------------------


def character_checks(group: str, rng: np.random.Generator, pairs: int = 1000) -> list[dict]:
    pres = presentation_by_name(group)
    variety = classify_characters(pres)
    rows = []
    if pres.name.startswith("B"):
        beta = float(rng.uniform(0, 2 * math.pi))
        chi = variety.character([beta]) if variety.free_rank == 1 else None
        resid = 0.0
        if chi is not None:
            resid = max((abs(char_eval(chi, r) - 1) for r in pres.relators), default=0.0)
        ok = variety.all_generators_equal() and resid <= EXACT_TOL
        rows.append(_row(f"{pres.name}.free_phases", variety.free_rank, ok, resid, EXACT_TOL))
        rows.append(_row(f"{pres.name}.all_generators_equal", variety.all_generators_equal(), variety.all_generators_equal()))
        chars = [chi] if chi is not None else []
    else:
        chars = variety.characters() if variety.is_finite() else []
        brute = brute_force_sign_characters(pres)
        resid = max((abs(char_eval(c, r) - 1) for c in chars for r in pres.relators), default=0.0)
        ok = variety.is_finite() and len(chars) == 2 and resid <= EXACT_TOL
        rows.append(_row(f"{pres.name}.character_count", len(chars), ok, resid, EXACT_TOL))
        as_signs = sorted(tuple(int(round(c.phases[g].real)) for g in pres.generators) for c in chars)
        found = sorted(tuple(b[g] for g in pres.generators) for b in brute)
        rows.append(_row(f"{pres.name}.brute_force_agrees", len(found), as_signs == found))
    # homomorphism law on random word pairs
    worst = 0.0
    for chi in chars or [Character.from_angles({g: float(rng.uniform(0, 2 * math.pi)) for g in pres.generators})]:
        for _ in range(pairs):
            a, b = random_word(pres.generators, rng), random_word(pres.generators, rng)
            worst = max(worst, abs(char_eval(chi, a * b) - char_eval(chi, a) * char_eval(chi, b)))
    rows.append(_row(f"{pres.name}.homomorphism", pairs, worst <= EXACT_TOL, worst, EXACT_TOL))
    return rows


# -- N fermions --------------------------------------------------------------------


def single_particle_rep(dim: int, rng: np.random.Generator) -> UnitaryRep:
    if dim == 1:
        u = np.array([[np.exp(1j * rng.uniform(0, 2 * math.pi))]])
    else:
        u = random_unitary(dim, rng)
    return UnitaryRep(dim, {"a": u})


def twisted_law_residual(n: int, dim: int, pairs: int, rng: np.random.Generator) -> float:
    """max |Gamma_{s1 s2} - P_{p2} Gamma_{s1} P_{p2}^-1 Gamma_{s2}| over random pairs."""
    section = FermionSection(n, single_particle_rep(dim, rng))
    worst = 0.0
    for _ in range(pairs):
        a, b = random_semidirect(n, rng), random_semidirect(n, rng)
        lhs = section.matrix(semidirect_mul(a, b))
        rhs = compose_section(section, a, b)
        worst = max(worst, float(np.abs(lhs - rhs).max()))
    return worst


def random_configuration(n: int, rng: np.random.Generator):
    angles = rng.permutation(np.linspace(0, 2 * math.pi, 4 * n, endpoint=False))[:n]
    return [((float(t),), Word.gen("a", int(rng.integers(-3, 4)))) for t in angles]


def semidirect_action_residual(n: int, points: int, rng: np.random.Generator) -> int:
    """Number of random points where (ab).q differs from a.(b.q)."""
    bad = 0
    for _ in range(points):
        a, b = random_semidirect(n, rng), random_semidirect(n, rng)
        q = random_configuration(n, rng)
        bad += semidirect_mul(a, b).act(q) != a.act(b.act(q))
    return bad


def fermion_checks(particles, fiber_dims, rng: np.random.Generator, pairs: int = 1000) -> list[dict]:
    rows = []
    for n in particles:
        for dim in fiber_dims:
            r = twisted_law_residual(n, dim, pairs, rng)
            rows.append(_row(f"fermion_twisted_law.N{n}.W{dim}", pairs, r <= EXACT_TOL, r, EXACT_TOL))
        bad = semidirect_action_residual(n, pairs, rng)
        rows.append(_row(f"semidirect_action.N{n}", pairs, bad == 0, bad, 0))
        sign = FermionSection(n, single_particle_rep(1, rng)).matrix(SemidirectElement(_swap(n), (0,) * n))
        rows.append(_row(f"fermion_swap_sign.N{n}", f"{sign[0, 0].real:+.0f}", abs(sign[0, 0] + 1) <= EXACT_TOL, abs(sign[0, 0] + 1), EXACT_TOL))
    return rows


def _swap(n: int) -> tuple[int, ...]:
    return (1, 0) + tuple(range(2, n))


# -- SU(2) factor ------------------------------------------------------------------------


def su2_closed_form(alpha: float, axis) -> np.ndarray:
    e = np.asarray(axis, dtype=float)
    return math.cos(alpha) * np.eye(2) - 1j * math.sin(alpha) * sum(c * s for c, s in zip(e, PAULI))


def random_axis(rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(3)
    return v / np.linalg.norm(v)


def ac_checks(rng: np.random.Generator, samples: int = 100) -> list[dict]:
    worst_form, worst_det, worst_unit = 0.0, 0.0, 0.0
    for _ in range(samples):
        alpha = float(rng.uniform(-2 * math.pi, 2 * math.pi))
        axis = random_axis(rng)
        u = su2_factor(alpha, axis)
        worst_form = max(worst_form, float(np.abs(u - su2_closed_form(alpha, axis)).max()))
        worst_det = max(worst_det, abs(np.linalg.det(u) - 1))
        worst_unit = max(worst_unit, float(np.abs(u.conj().T @ u - np.eye(2)).max()))
    return [
        _row("ac_closed_form", samples, worst_form <= 1e-13, worst_form, 1e-13),
        _row("ac_determinant", samples, worst_det <= 1e-12, worst_det, 1e-12),
        _row("ac_unitary", samples, worst_unit <= 1e-12, worst_unit, 1e-12),
    ]


# -- commutant --------------------------------------------------------------------------


def scalar_distance(x: np.ndarray) -> float:
    d = x.shape[0]
    return float(np.abs(x - np.trace(x) / d * np.eye(d)).max() / max(np.abs(x).max(), 1e-300))


def commutant_checks(rng: np.random.Generator, samples: int = 32, spin_dim: int = 2) -> list[dict]:
    rows = []
    pot = random_pauli_potential(2, spin_dim, samples, rng)
    res = commutant_is_scalar(pot)
    worst = max((scalar_distance(b) for b in res.basis), default=0.0)
    rows.append(_row("commutant_random_fields.N2", res.dimension, res.is_scalar and worst <= 1e-10, worst, 1e-10))
    # a random unitary projected onto the commutant is a scalar multiple of Id
    u = random_unitary(pot.dim, rng)
    proj = project_onto_commutant(u, res.basis)
    rigid = scalar_distance(proj)
    rows.append(_row("character_rigidity.N2", samples, rigid <= 1e-10, rigid, 1e-10))

    zero = commutant_is_scalar(PauliPotential(2, spin_dim, (np.zeros((2, 3)),)))
    rows.append(_row("commutant_zero_field", zero.dimension, not zero.is_scalar))
    par = commutant_is_scalar(PauliPotential(1, 2, tuple(np.array([[0, 0, b]]) for b in rng.standard_normal(samples))))
    dev = float(np.abs(np.abs(par.witness) - np.abs(PAULI[2])).max()) if par.witness is not None else float("inf")
    rows.append(_row("commutant_parallel_z.N1", par.dimension, (not par.is_scalar) and dev <= 1e-10, dev, 1e-10))
    # one Hermitian matrix always commutes with its own polynomials
    single = commutant_is_scalar(random_pauli_potential(2, spin_dim, 1, rng))
    rows.append(_row("commutant_single_sample.N2", single.dimension, (not single.is_scalar) and single.witness is not None))
    # one fixed, non-parallel field seen at many configurations: reported only
    one = commutant_is_scalar(PauliPotential(2, spin_dim, tuple(np.array([wire_field(x) for x in rng.standard_normal((2, 3))]) for _ in range(samples))))
    rows.append(_row("commutant_one_nonparallel_field.N2", one.dimension, None))
    return rows


def wire_field(x: np.ndarray) -> np.ndarray:
    """Field of a straight wire along z plus a uniform z component."""
    rho2 = x[0] ** 2 + x[1] ** 2
    return np.array([-x[1] / rho2, x[0] / rho2, 0.5])


def parallel_checks(rng: np.random.Generator) -> list[dict]:
    u = random_unitary(2, rng)
    const = check_parallel_constancy([{"a": u}, {"a": u.copy()}, {"a": u.copy()}])
    moved = check_parallel_constancy([{"a": u}, {"a": u * np.exp(1e-9j)}])
    chi = Character.from_angles({"a": 0.7})
    induced = check_parallel_constancy([{"a": chi.phases["a"] * np.eye(2)}] * 3)
    return [
        _row("parallel_constant_section", True, const),
        _row("parallel_moved_section", moved, not moved),
        _row("parallel_character_section", True, induced),
    ]


def run_algebra_checks(block, seed: int) -> list[dict]:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    rows = []
    for check in block.checks:
        if check == "characters":
            for g in block.groups:
                rows += character_checks(g, rng, block.pairs)
        elif check == "fermion":
            rows += fermion_checks(block.particles, block.fiber_dims, rng, block.pairs)
        elif check == "ac_factor":
            rows += ac_checks(rng)
        elif check == "commutant":
            rows += commutant_checks(rng, block.samples, block.spin_dim)
        elif check == "parallel":
            rows += parallel_checks(rng)
        else:
            raise ValueError(f"unknown algebra check {check!r}")
    return rows


KNOWN_CHECKS = ("characters", "fermion", "ac_factor", "commutant", "parallel")
