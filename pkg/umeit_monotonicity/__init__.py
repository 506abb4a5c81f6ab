"""Shunt-electrode EIT simulation and the ultrasound-modulated monotonicity test."""

__version__ = "0.1.0"
