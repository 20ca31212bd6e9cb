"""Bohmian dynamics on multiply-connected configuration spaces.

Wave functions live on the universal cover and obey a periodicity
condition psi(sigma q) = Gamma_sigma psi(q); trajectories are driven by the
projected velocity field on the base space.
"""

__version__ = "0.1.0"
