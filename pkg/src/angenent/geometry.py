"""Pointwise geometry of the weighted half-plane.

The metric is ``g = alpha**2 * (dr**2 + dx**2)`` with
``alpha = r**(lam - 1) * exp(-(r**2 + x**2) / 4)`` on ``r > 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import integrate


class DomainError(ValueError):
    """Raised when a point lies outside the open half-plane r > 0."""


class HalfPlanePoint(NamedTuple):
    r: float
    x: float


@dataclass(frozen=True)
class MetricContext:
    """Weight exponent ``lam`` plus the derived model-geodesic constants."""

    lam: float
    r_cyl: float = field(init=False)
    len_cylinder: float = field(init=False)
    len_halfline: float = field(init=False)

    def __post_init__(self):
        if not (self.lam > 1.0) or not math.isfinite(self.lam):
            raise DomainError(f"weight exponent must satisfy lambda > 1, got {self.lam!r}")
        object.__setattr__(self, "r_cyl", math.sqrt(2.0 * (self.lam - 1.0)))
        object.__setattr__(self, "len_cylinder", length_cylinder(self.lam))
        object.__setattr__(self, "len_halfline", length_halfline(self.lam))


def _lam(ctx) -> float:
    return ctx.lam if isinstance(ctx, MetricContext) else float(ctx)


def _check_r(r):
    r = np.asarray(r, dtype=float)
    if np.any(~(r > 0.0)):
        raise DomainError("points must satisfy r > 0")
    return r


def log_conformal_factor(ctx, r, x=0.0):
    """``log(alpha)``; safe for large lambda or r far from 1."""
    r = _check_r(r)
    out = (_lam(ctx) - 1.0) * np.log(r) - 0.25 * (r * r + np.asarray(x, dtype=float) ** 2)
    return out if out.ndim else float(out)


def conformal_factor(ctx, r, x=0.0):
    """alpha(r, x) = r^(lam-1) e^{-(r^2+x^2)/4}, evaluated through its logarithm.

    Accepts scalars or arrays; pass a point as ``conformal_factor(ctx, *p)``.
    """
    value = np.exp(log_conformal_factor(ctx, r, x))
    if np.any(value == 0.0) or not np.all(np.isfinite(value)):
        raise DomainError("conformal factor under/overflowed at the requested point")
    return value if np.ndim(value) else float(value)


def gauss_curvature(ctx, r, x=0.0):
    """K_g = alpha^-2 (1 + (lam-1)/r^2)."""
    r = _check_r(r)
    value = np.exp(-2.0 * log_conformal_factor(ctx, r, x)) * (1.0 + (_lam(ctx) - 1.0) / (r * r))
    return value if np.ndim(value) else float(value)


def line_geodesic_curvature(ctx, r0: float, x: float = 0.0) -> float:
    """Geodesic curvature of the upward-oriented vertical line r = r0 at height x.

    Positive means the curvature vector points toward larger r.
    """
    if not r0 > 0:
        raise DomainError("r0 must be positive")
    lam = _lam(ctx)
    return (0.5 * r0 - (lam - 1.0) / r0) / conformal_factor(ctx, r0, x)


def line_euclidean_velocity(ctx, r0):
    """Euclidean speed (in +r) of the vertical line r = r0 under V_g = k_g / K_g."""
    r0 = _check_r(r0)
    lam = _lam(ctx)
    v = r0 * (r0 * r0 - 2.0 * (lam - 1.0)) / (2.0 * (r0 * r0 + lam - 1.0))
    return v if np.ndim(v) else float(v)


def effective_diffusivity(ctx, r):
    """D(r) = r^2 / (r^2 + lam - 1), the coefficient of k_E in the Euclidean normal speed."""
    r = np.asarray(r, dtype=float)
    return r * r / (r * r + _lam(ctx) - 1.0)


def length_cylinder(lam) -> float:
    """Closed-form g-length of the vertical geodesic r = r_lam."""
    lam = _lam(lam)
    if not lam > 1.0:
        raise DomainError("lambda must exceed 1")
    return 2.0 * math.sqrt(math.pi) * math.exp(0.5 * (lam - 1.0) * (math.log(2.0 * (lam - 1.0)) - 1.0))


def length_halfline(lam) -> float:
    """Closed-form g-length 2^(lam-1) Gamma(lam/2) of the half-line x = 0."""
    lam = _lam(lam)
    if not lam > 1.0:
        raise DomainError("lambda must exceed 1")
    return math.exp((lam - 1.0) * math.log(2.0) + math.lgamma(0.5 * lam))


def _gaussian_cutoff(center: float, width: float, ratio: float = 1e-18) -> float:
    # |u - center| beyond which exp(-(u-center)^2/(4 width)) < ratio
    return center + 2.0 * math.sqrt(width * -math.log(ratio))


def length_cylinder_quad(lam) -> float:
    """Adaptive quadrature of the cylinder length integral (oracle for the closed form)."""
    lam = _lam(lam)
    r2 = 2.0 * (lam - 1.0)
    pref = math.exp(0.5 * (lam - 1.0) * math.log(r2) - 0.25 * r2)
    cut = _gaussian_cutoff(0.0, 1.0)
    val, _ = integrate.quad(lambda u: math.exp(-0.25 * u * u), 0.0, cut, epsabs=1e-14, epsrel=1e-13, limit=200)
    return 2.0 * pref * val


def length_halfline_quad(lam) -> float:
    """Adaptive quadrature of int_0^inf u^(lam-1) e^(-u^2/4) du."""
    lam = _lam(lam)
    peak = math.sqrt(2.0 * (lam - 1.0))
    log_peak = (lam - 1.0) * math.log(peak) - 0.25 * peak * peak if peak > 0 else 0.0

    def integrand(u):
        if u <= 0.0:
            return 0.0
        return math.exp((lam - 1.0) * math.log(u) - 0.25 * u * u - log_peak)

    hi = peak + 20.0 + 4.0 * math.sqrt(lam)
    pts = [peak] if 0.0 < peak < hi else None
    val, _ = integrate.quad(integrand, 0.0, hi, points=pts, epsabs=1e-14, epsrel=1e-13, limit=400)
    return val * math.exp(log_peak)
