"""Adaptive muscle lattice-worm: rod physics, RL training, and experiment tooling."""

__version__ = "0.1.0"
