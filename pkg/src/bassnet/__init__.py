"""Simulation and exact analysis of the heterogeneous discrete Bass model on networks."""

__version__ = "0.1.0"
