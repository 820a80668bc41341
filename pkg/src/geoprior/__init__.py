"""Geo-spatiotemporal priors for fine-grained species classification."""

__version__ = "0.1.0"
