"""Simulation-backed 4D FMCW MIMO radar point-cloud pipeline."""
__version__ = "0.1.0"
