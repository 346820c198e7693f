"""Averaging-based attractor estimates for fast-advected dissipative PDEs.

Spectral Galerkin models of the forced viscous Burgers equation and the 2D
Navier-Stokes equations on the torus, an integrating-factor integrator,
closed-form constants for the averaging and trapping estimates, and
scenario drivers that compare the estimates with simulations.
"""
__version__ = "0.1.0"
