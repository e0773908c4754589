"""Simulation and analysis of mu-limit behaviour of one-dimensional cellular automata."""

__version__ = "0.1.0"
