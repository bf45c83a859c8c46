"""Shipped orbit and coefficient fixtures."""
import os

DATA_DIR = os.path.dirname(os.path.abspath(__file__))


def path(name: str) -> str:
    """Absolute path of a fixture file, e.g. ``path("lorenz_sol4.json")``."""
    p = os.path.join(DATA_DIR, name)
    if not os.path.exists(p):
        raise FileNotFoundError(f"no fixture named {name!r}")
    return p
