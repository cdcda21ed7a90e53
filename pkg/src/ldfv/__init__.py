"""Learned-discretization finite-volume solver."""
