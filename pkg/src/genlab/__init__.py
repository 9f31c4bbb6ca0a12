"""Generalization-bound laboratory for box-constrained two-layer networks."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .kernels import BACKEND  # noqa: F401
