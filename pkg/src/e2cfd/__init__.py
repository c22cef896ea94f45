"""Evolutionary cost-function design workbench for safe RL."""

__version__ = "0.1.0"
