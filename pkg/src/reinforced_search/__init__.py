"""Reinforced quantum search: layered dynamics with state feedback under noise."""

__version__ = "0.1.0"
