"""Residual-based fault detection and segmentation for condition-monitoring data."""

__version__ = "0.1.0"
