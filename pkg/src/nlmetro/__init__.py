"""Nonlinear phase metrology with NOON, entangled coherent and approximate ECS probes."""

__version__ = "0.1.0"
