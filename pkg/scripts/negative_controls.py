"""Controls that must fail: scaled velocity and a mismatched gluing factor.

    python3 scripts/negative_controls.py
"""

import warnings

import numpy as np

from topobohm.bohm import check_projectability
from topobohm.config import load_config
from topobohm.equivariance import equivariance_test


def main():
    for name in ("ring_beta0", "annulus_beta1_7"):
        cfg = load_config(name)
        h = cfg.hamiltonian()
        psi = cfg.initial_wave(h)
        nb = cfg.numerics
        for scale in (1.0, 1.5):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                comp = equivariance_test(psi, h, nb.dt, nb.n, nb.times, cfg.seed, velocity_scale=scale, raise_on_drops=False)
            stats = " ".join(f"{s:.3g}/{c:.3g}" for s, c in zip(comp.statistics, comp.thresholds))
            print(f"{name:18s} scale={scale} {comp.kind} {stats} dropped={comp.dropped} pass={comp.ok}")
        wrong = h.gamma * np.exp(0.5j)
        print(f"{name:18s} projectability true={check_projectability(psi):.1e} mismatched={check_projectability(psi, glue=wrong):.2e}")


if __name__ == "__main__":
    main()
