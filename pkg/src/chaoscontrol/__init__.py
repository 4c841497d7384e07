"""Weak-disorder quantum control of the kicked rotor on a torus."""

__version__ = "0.1.0"
