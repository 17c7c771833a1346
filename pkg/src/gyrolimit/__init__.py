"""Particle laboratory for the gyrokinetic limit of the 2D magnetized
Vlasov-Poisson system and its 2D Euler (vortex) limit."""

import os

# TBB in the base image is too old for numba; OpenMP is deterministic here
# because every parallel loop writes disjoint outputs.
os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")

__version__ = "0.1.0"
