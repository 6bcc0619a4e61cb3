"""Photodynamics and calibration toolkit for cavity-coupled diamond NV centers."""

__version__ = "0.1.0"
