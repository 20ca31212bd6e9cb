"""Closed-form references shared by several test modules."""

import math

import numpy as np


def two_wave_field(beta, k1, k2, b):
    """Exact Bohmian velocity of a superposition of two twisted plane waves on the unit ring."""
    c1, c2 = k1 + beta / (2 * math.pi), k2 + beta / (2 * math.pi)
    e1, e2 = c1**2 / 2, c2**2 / 2

    def f(t, y):
        p1, p2 = np.exp(1j * (c1 * y - e1 * t)), b * np.exp(1j * (c2 * y - e2 * t))
        return (np.conj(p1 + p2) * (1j * c1 * p1 + 1j * c2 * p2)).imag / np.abs(p1 + p2) ** 2

    return f


def ring_level(beta, k):
    """k-th level (k = 0, 1, ...) of the free twisted ring in ascending order."""
    ms = sorted(range(-k - 2, k + 3), key=lambda m: (abs(m + beta / (2 * math.pi)), m))
    return (ms[k] + beta / (2 * math.pi)) ** 2 / 2
