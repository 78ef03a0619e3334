"""Workspace generation for serial-link manipulators via Jacobian estimation."""

__version__ = "0.1.0"
