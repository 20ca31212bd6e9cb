"""Convergence tables: ring spectrum error vs n, and RK4 error vs dt.

    python3 scripts/convergence.py
"""

import math

import numpy as np

from topobohm.bohm import integrate_flow
from topobohm.evolution import assemble_hamiltonian, ring_levels, spectrum
from topobohm.geometry import Geometry, build_grid


def ring_error(beta, n, k=6):
    h = assemble_hamiltonian(build_grid(Geometry("ring", (n,))), None, np.exp(1j * beta))
    exact = ring_levels(beta, k)
    return max(abs(e - x) / x for (e, _), x in zip(spectrum(h, k), exact) if x > 0)


def two_wave_velocity(beta, k1, k2, b):
    c1, c2 = k1 + beta / (2 * math.pi), k2 + beta / (2 * math.pi)

    def f(t, y):
        p1 = np.exp(1j * (c1 * y - c1**2 / 2 * t))
        p2 = b * np.exp(1j * (c2 * y - c2**2 / 2 * t))
        return (np.conj(p1 + p2) * 1j * (c1 * p1 + c2 * p2)).imag / np.abs(p1 + p2) ** 2

    return f


def main():
    ns = [64, 128, 256, 512, 1024]
    print("ring spectrum: max relative error of the 6 lowest nonzero levels")
    for beta in (0.0, math.pi / 3, math.pi):
        errs = [ring_error(beta, n) for n in ns]
        slope = -np.polyfit(np.log(ns), np.log(errs), 1)[0]
        print(f"  beta={beta:.4f} " + " ".join(f"{e:.2e}" for e in errs) + f"  slope={slope:.3f}")

    f = two_wave_velocity(math.pi / 3, 0, 3, 0.5)
    y0 = np.array([0.3, 1.0, 2.5])
    ref = integrate_flow(f, y0, 0.0, 2.0, 1e-4)
    dts = [8e-3, 4e-3, 2e-3, 1e-3]
    errs = [np.abs(integrate_flow(f, y0, 0.0, 2.0, dt) - ref).max() for dt in dts]
    slope = np.polyfit(np.log(dts), np.log(errs), 1)[0]
    print("RK4 on the exact two-wave ring velocity: " + " ".join(f"{e:.2e}" for e in errs) + f"  slope={slope:.3f}")


if __name__ == "__main__":
    main()
