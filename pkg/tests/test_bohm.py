import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from topobohm.bohm import (
    NODE_FLOOR,
    Status,
    check_projectability,
    integrate_ensemble,
    integrate_flow,
    integrate_trajectory,
    ring_velocity_closed_form,
    start_ensemble,
    unwrapped_angle,
    velocity_field,
)
from topobohm.evolution import CoveringWave, assemble_hamiltonian, evolve, plane_wave, spectrum, wave_packet
from topobohm.geometry import Geometry, build_grid

from oracles import two_wave_field


def ring(n):
    return build_grid(Geometry("ring", (n,)))


def random_ring_wave(grid, gamma, rng, modes=4):
    """Sum of twisted plane waves with random complex amplitudes."""
    beta = float(np.angle(gamma))
    vals = np.zeros((grid.geometry.n_theta, 1), dtype=complex)
    for k in range(-modes, modes + 1):
        amp = rng.standard_normal() + 1j * rng.standard_normal()
        vals[:, 0] += amp * np.exp(1j * (k + beta / (2 * math.pi)) * grid.theta)
    return CoveringWave(grid, vals, np.array([[gamma]])).normalized()


def static(psi, t_final, dt):
    steps = int(round(t_final / dt))
    return (psi.__class__(psi.grid, psi.values, psi.gamma, k * dt) for k in range(steps + 1))


def test_real_wave_has_zero_velocity(annulus_small):
    h = assemble_hamiltonian(annulus_small, None, 1.0)
    _, psi = spectrum(h, 1)[0]
    vf = velocity_field(psi)
    assert np.abs(vf.vectors).max() < 1e-12


@pytest.mark.parametrize("k, beta", [(0, 0.5 * math.pi), (1, math.pi / 3), (-2, math.pi)])
def test_plane_wave_velocity(k, beta):
    g = ring(2048)
    psi = plane_wave(g, np.array([[np.exp(1j * beta)]]), k)
    v = velocity_field(psi).vectors[:, 0]
    kappa = k + beta / (2 * math.pi)
    # central differences see sin(kappa h) / h exactly
    np.testing.assert_allclose(v, math.sin(kappa * g.dtheta) / g.dtheta, atol=1e-10)
    np.testing.assert_allclose(v, kappa, rtol=1e-5)
    assert ring_velocity_closed_form(beta, k, g.geometry) == pytest.approx(kappa)


def test_spin_up_reduces_to_scalar(annulus_small, spin_small):
    alpha = math.pi / 2
    gam = np.diag([np.exp(-1j * alpha), np.exp(1j * alpha)])
    scalar = wave_packet(annulus_small, np.array([[np.exp(-1j * alpha)]]), 1.0, 0.6, 2.0)
    spin = CoveringWave(spin_small, np.concatenate([scalar.values, np.zeros_like(scalar.values)], axis=-1), gam)
    np.testing.assert_allclose(velocity_field(spin).vectors, velocity_field(scalar).vectors, atol=1e-13)


def test_global_phase_leaves_velocity(annulus_small, rng):
    psi = wave_packet(annulus_small, np.array([[np.exp(1.7j)]]), 2.0, 0.8, 3.0)
    rotated = CoveringWave(psi.grid, psi.values * np.exp(2.1j), psi.gamma)
    assert np.abs(velocity_field(psi).vectors - velocity_field(rotated).vectors).max() < 1e-12


def test_flagging_nodes():
    g = ring(64)
    vals = np.cos(g.theta)[:, None].astype(complex)
    vals[16] = 0.0  # exactly on the node at pi/2
    vf = velocity_field(CoveringWave(g, vals, np.eye(1)))
    assert vf.flagged[16] and vf.vectors[16, 0] == 0
    assert vf.floor == pytest.approx(NODE_FLOOR * vf.density.max())


@given(st.floats(-math.pi, math.pi), st.integers(0, 2**32 - 1))
def test_projectability_random_waves(beta, seed):
    rng = np.random.default_rng(seed)
    psi = random_ring_wave(ring(128), np.exp(1j * beta), rng)
    assert check_projectability(psi) < 1e-10


def test_projectability_negative_control(rng):
    psi = random_ring_wave(ring(128), np.exp(1j * 0.9), rng)
    assert check_projectability(psi, glue=np.array([[np.exp(1j * 1.4)]])) > 1e-3


def test_projectability_constant_wave():
    g = ring(32)
    psi = CoveringWave(g, np.ones((32, 1), dtype=complex), np.eye(1)).normalized()
    assert check_projectability(psi) == pytest.approx(0.0, abs=1e-15)


def test_projectability_annular(spin_small, anyon_small):
    gam = np.diag([np.exp(-0.5j), np.exp(0.5j)])
    psi = wave_packet(spin_small, gam, 1.0, 0.7, 3.0, spinor=[1, 0.3j])
    assert check_projectability(psi) < 1e-10
    assert check_projectability(psi, glue=np.eye(2)) > 1e-3
    psi2 = wave_packet(anyon_small, np.array([[1j]]), 0.5, 0.4, 2.0)
    assert check_projectability(psi2) < 1e-10


def test_fixed_point_when_velocity_vanishes(annulus_small):
    h = assemble_hamiltonian(annulus_small, None, 1.0)
    _, psi = spectrum(h, 1)[0]
    traj = integrate_trajectory((1.5, 2.0), static(psi, 1.0, 0.01), 1.0)
    assert traj.status is Status.FINISHED
    assert all(s[1] == (1.5, 2.0) and s[2] == 0 for s in traj.samples)


def test_constant_velocity_and_winding():
    g = ring(1024)
    beta = 2 * math.pi * 0.25
    h = assemble_hamiltonian(g, None, np.exp(1j * beta))
    psi = plane_wave(g, h.gamma, 3)
    v = math.sin((3.25) * g.dtheta) / g.dtheta
    traj = integrate_trajectory((1.0,), evolve(psi, h, 1e-2, 300), 3.0, every=10)
    t, (theta,), w = traj.samples[-1]
    assert t == pytest.approx(3.0)
    assert theta + 2 * math.pi * w == pytest.approx(1.0 + v * 3.0, abs=1e-9)
    assert w == math.floor((1.0 + v * 3.0) / (2 * math.pi))
    times = [s[0] for s in traj.samples]
    assert all(b > a for a, b in zip(times, times[1:]))
    steps = [b[2] - a[2] for a, b in zip(traj.samples, traj.samples[1:])]
    assert set(steps) <= {0, 1}


def test_no_crossing_on_the_ring(rng):
    g = ring(256)
    h = assemble_hamiltonian(g, None, np.exp(1j * math.pi / 3))
    psi = wave_packet(g, h.gamma, 1.0, 0.8, 2.0)
    q0 = np.sort(rng.uniform(0.2, 2 * math.pi - 0.2, 100))
    waves = list(evolve(psi, h, 1e-3, 1000))
    times = [0.25 * k for k in range(1, 5)]
    state, records = integrate_ensemble(q0[:, None], iter(waves), 1.0, times)
    assert (state.status == Status.FINISHED).all()
    pairs = rng.choice(100, size=(50, 2), replace=True)
    for t in times:
        pos, wind, _ = records[t]
        unrolled = unwrapped_angle(g.geometry, pos, wind)
        gaps = unrolled[pairs[:, 1]] - unrolled[pairs[:, 0]]
        start = q0[pairs[:, 1]] - q0[pairs[:, 0]]
        same = pairs[:, 0] == pairs[:, 1]
        assert np.all(np.sign(gaps[~same]) == np.sign(start[~same]))
        assert np.abs(gaps[~same]).min() > 0


def test_lift_independence_shifted_winding(rng):
    g = ring(256)
    h = assemble_hamiltonian(g, None, np.exp(1.1j))
    psi = wave_packet(g, h.gamma, 2.0, 0.7, 4.0)
    waves = list(evolve(psi, h, 1e-3, 500))
    q0 = rng.uniform(0, 2 * math.pi, (20, 1))
    a, _ = integrate_ensemble(q0, iter(waves), 0.5)
    b, _ = integrate_ensemble(q0, iter(waves), 0.5, windings0=np.full(20, 7))
    np.testing.assert_array_equal(a.positions, b.positions)
    np.testing.assert_array_equal(a.windings + 7, b.windings)


def test_left_domain_and_nodal_termination(annulus_small):
    h = assemble_hamiltonian(annulus_small, None, 1.0)
    psi = wave_packet(annulus_small, h.gamma, 1.0, 0.5, 1.0)
    g = annulus_small.geometry
    near_wall = (g.r_in + annulus_small.dr, 1.0)
    traj = integrate_trajectory(near_wall, static(psi, 0.1, 0.01), 0.1)
    assert traj.status is Status.LEFT and traj.status.label == "LeftDomain"
    rg = ring(64)
    vals = np.cos(rg.theta)[:, None].astype(complex)
    psi_node = CoveringWave(rg, vals, np.eye(1))
    traj = integrate_trajectory((rg.theta[16],), static(psi_node, 0.1, 0.01), 0.1)
    assert traj.status is Status.NODAL and traj.status.label == "HitNodalRegion"


def test_invalid_start_rejected(annulus_small):
    with pytest.raises(ValueError):
        start_ensemble(annulus_small.geometry, [[0.5, 1.0]])
    with pytest.raises(ValueError):
        start_ensemble(ring(16).geometry, [[7.0]])


def test_rk4_fourth_order():
    f = two_wave_field(math.pi / 3, 0, 3, 0.5)
    y0 = np.array([0.3, 1.0, 2.5])
    ref = integrate_flow(f, y0, 0.0, 2.0, 1e-4)
    dts = [4e-3, 2e-3, 1e-3]
    errs = [np.abs(integrate_flow(f, y0, 0.0, 2.0, dt) - ref).max() for dt in dts]
    slope = np.polyfit(np.log(dts), np.log(errs), 1)[0]
    assert abs(slope - 4) < 0.3


def test_threads_do_not_change_results(annulus_small, rng):
    h = assemble_hamiltonian(annulus_small, None, np.exp(1.7j))
    psi = wave_packet(annulus_small, h.gamma, 1.0, 0.7, 3.0)
    waves = list(evolve(psi, h, 1e-3, 100))
    q0 = np.column_stack([rng.uniform(1.3, 1.7, 64), rng.uniform(0, 2 * math.pi, 64)])
    a, _ = integrate_ensemble(q0, iter(waves), 0.1, threads=1)
    b, _ = integrate_ensemble(q0, iter(waves), 0.1, threads=8)
    assert a.positions.tobytes() == b.positions.tobytes()
    assert a.windings.tobytes() == b.windings.tobytes()
