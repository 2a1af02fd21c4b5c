"""Personalized federated learning simulator with a rank-one Fisher personalization step."""

from .numkit import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
