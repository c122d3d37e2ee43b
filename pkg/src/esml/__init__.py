"""Simulation and numerical analysis of the (1, lambda) evolution strategy
with resampling on a linear function under a linear constraint."""

__version__ = "0.1.0"
