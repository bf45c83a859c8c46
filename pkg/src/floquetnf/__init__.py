"""Rigorous Floquet normal forms of linear periodic systems."""
__version__ = "0.1.0"
