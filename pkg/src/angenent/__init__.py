"""Closed geodesics of the weighted half-plane r^(2(lam-1)) exp(-(r^2+x^2)/2) (dr^2 + dx^2)."""
from .geometry import MetricContext, DomainError

__version__ = "0.1.0"
__all__ = ["MetricContext", "DomainError", "__version__"]
