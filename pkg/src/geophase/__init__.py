"""Geometric phases, holonomies and holonomic gates for finite-dimensional Hamiltonians."""
