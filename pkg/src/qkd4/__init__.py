"""Simulation and analysis of four-dimensional entanglement-based QKD."""
