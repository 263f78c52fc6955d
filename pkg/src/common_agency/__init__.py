"""Exact equilibrium engine for finite common-agency games with non-delegated contracts."""

__version__ = "0.1.0"
