"""Seedable simulator of agent ecosystems evolving over a habitat network."""

__version__ = "0.1.0"
