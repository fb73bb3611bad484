"""Certified finite-horizon estimates of metric mean dimension for symbolic
systems, factor maps and random dynamical systems."""

__version__ = "0.1.0"
