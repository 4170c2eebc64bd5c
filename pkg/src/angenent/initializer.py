"""Rounded rectangles of Gauss area 2*pi: the initial curves for the flow."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize, special

from .curve import ClosedCurve, curve_length, gauss_area, symmetrize_indexwise
from .geometry import MetricContext

TWO_PI = 2.0 * math.pi


class GeometryError(ValueError):
    pass


class InfeasibleError(ValueError):
    pass


def gaussian_mass(c: float) -> float:
    """M(c) = int_0^c exp(-x^2/4) dx."""
    return math.sqrt(math.pi) * math.erf(0.5 * c)


def c0_ratio(c: float) -> float:
    return math.exp(-0.25 * c * c) / gaussian_mass(c)


def solve_c0() -> float:
    """Positive root of exp(-c^2/4) / M(c) = 2."""
    return optimize.brentq(lambda c: c0_ratio(c) - 2.0, 0.1, 1.0, xtol=1e-16, rtol=4 * np.finfo(float).eps)


@dataclass(frozen=True)
class InitializerConstants:
    c0: float = field(default_factory=solve_c0)
    corner_fraction: float = 0.25

    @property
    def M(self) -> float:
        return gaussian_mass(self.c0)

    @property
    def c0_residual(self) -> float:
        return c0_ratio(self.c0) - 2.0

    def corner_radius(self, a: float, b: float) -> float:
        return self.corner_fraction * min(self.c0, 0.5 * (b - a))


def perimeter(ctx: MetricContext, a: float, b: float, c: float) -> float:
    """g-perimeter of the sharp rectangle [a, b] x [-c, c]."""
    if not (0.0 < a < b) or not c > 0.0:
        raise GeometryError("need 0 < a < b and c > 0")
    lam = ctx.lam

    def side(r):
        return math.exp((lam - 1.0) * math.log(r) - 0.25 * r * r)

    vert, _ = integrate.quad(lambda x: math.exp(-0.25 * x * x), 0.0, c, epsabs=1e-14, epsrel=1e-13)
    horiz, _ = integrate.quad(side, a, b, epsabs=1e-14, epsrel=1e-13, limit=200)
    return 2.0 * (side(a) + side(b)) * vert + 2.0 * math.exp(-0.25 * c * c) * horiz


def rectangle_gauss_area(ctx: MetricContext, a: float, b: float, c: float) -> float:
    return 2.0 * c * ((b - a) + (ctx.lam - 1.0) * (1.0 / a - 1.0 / b))


def rounded_gauss_area_quad(ctx: MetricContext, a: float, b: float, c: float, rho: float) -> float:
    """Gauss area of the exact rounded rectangle: sharp area minus the four corner cut-offs."""
    w = lambda r: 1.0 + (ctx.lam - 1.0) / (r * r)

    def cut(r, center):
        u = r - center
        return rho - math.sqrt(max(rho * rho - u * u, 0.0))

    left, _ = integrate.quad(lambda r: w(r) * cut(r, a + rho), a, a + rho, epsabs=1e-15, epsrel=1e-13)
    right, _ = integrate.quad(lambda r: w(r) * cut(r, b - rho), b - rho, b, epsabs=1e-15, epsrel=1e-13)
    return rectangle_gauss_area(ctx, a, b, c) - 2.0 * (left + right)


def sample_rounded_rectangle(a: float, b: float, c: float, rho: float, n: int) -> np.ndarray:
    """``n`` points at uniform Euclidean arclength, counterclockwise from (b, 0).

    rho = 0 gives the sharp rectangle.
    """
    hv, hh = c - rho, 0.5 * (b - a) - rho
    if hv < 0 or hh < 0 or rho < 0:
        raise GeometryError("corner radius too large for the rectangle")
    q = 0.5 * math.pi * rho
    # piece lengths, starting at (b, 0) going up
    pieces = [hv, q, 2 * hh, q, 2 * hv, q, 2 * hh, q, hv]
    bounds = np.concatenate([[0.0], np.cumsum(pieces)])
    total = bounds[-1]
    s = np.arange(n) * (total / n)
    out = np.empty((n, 2))
    for k, sk in enumerate(s):
        j = min(np.searchsorted(bounds, sk, side="right") - 1, len(pieces) - 1)
        u = sk - bounds[j]
        if j == 0:
            out[k] = (b, u)
        elif j == 1:
            th = u / rho
            out[k] = (b - rho + rho * math.cos(th), hv + rho * math.sin(th))
        elif j == 2:
            out[k] = (b - rho - u, c)
        elif j == 3:
            th = 0.5 * math.pi + u / rho
            out[k] = (a + rho + rho * math.cos(th), hv + rho * math.sin(th))
        elif j == 4:
            out[k] = (a, hv - u)
        elif j == 5:
            th = math.pi + u / rho
            out[k] = (a + rho + rho * math.cos(th), -hv + rho * math.sin(th))
        elif j == 6:
            out[k] = (a + rho + u, -c)
        elif j == 7:
            th = 1.5 * math.pi + u / rho
            out[k] = (b - rho + rho * math.cos(th), -hv + rho * math.sin(th))
        else:
            out[k] = (b, -hv + u)
    if n % 2 == 0:
        out = symmetrize_indexwise(out)
    return out


@dataclass(frozen=True)
class RoundedRectangle:
    a: float
    b: float
    c: float
    corner_radius: float
    curve: ClosedCurve

    def metadata(self) -> dict:
        return {
            "a": self.a,
            "b": self.b,
            "c": self.c,
            "corner_radius": self.corner_radius,
            "rounding": "quarter-circle Euclidean arcs",
            "n_vertices": len(self.curve),
        }


def build_rounded_rectangle(ctx: MetricContext, consts: InitializerConstants, a: float, b: float,
                            n_vertices: int = 1024, corner_radius: float | None = None) -> RoundedRectangle:
    if not 0.0 < a < b:
        raise GeometryError("need 0 < a < b")
    c = consts.c0
    rho = consts.corner_radius(a, b) if corner_radius is None else corner_radius
    if not 0.0 < rho <= 0.5 * min(c, 0.5 * (b - a)):
        raise GeometryError(f"corner radius {rho:g} does not fit [{a:g}, {b:g}] x [-{c:g}, {c:g}]")
    curve = ClosedCurve(sample_rounded_rectangle(a, b, c, rho, n_vertices))
    sharp = perimeter(ctx, a, b, c)
    if curve_length(ctx, curve) > sharp * (1.0 + 1e-12):
        raise GeometryError("rounding increased the perimeter")
    return RoundedRectangle(a, b, c, rho, curve)


def sharp_rectangle(a: float, b: float, c: float, n: int) -> ClosedCurve:
    return ClosedCurve(sample_rounded_rectangle(a, b, c, 0.0, n))


def solve_phi(ctx: MetricContext, consts: InitializerConstants, a: float, n_vertices: int = 1024,
              b_max: float = 50.0, target: float = TWO_PI) -> RoundedRectangle:
    """Find b = phi(a) so the sampled rounded rectangle encloses Gauss area ``target``.

    The root is taken on the polyline that will actually be flowed.
    """
    if not a > 0.0:
        raise GeometryError("a must be positive")

    def excess(b):
        return gauss_area(ctx, build_rounded_rectangle(ctx, consts, a, b, n_vertices).curve) - target

    lo = a * 1.01
    f_lo = excess(lo)
    if f_lo > 0.0:
        raise InfeasibleError(f"Gauss area already {f_lo + target:.6g} > target at b = {lo:.6g}")
    hi = lo
    while True:
        hi = a + 2.0 * (hi - a)
        if hi > b_max:
            raise InfeasibleError(
                f"no b in ({a:g}, {b_max:g}] reaches Gauss area {target:.6g}; "
                f"achievable range [{f_lo + target:.6g}, {excess(b_max) + target:.6g}]")
        f_hi = excess(hi)
        if f_hi >= 0.0:
            break
        lo, f_lo = hi, f_hi
    b = optimize.brentq(excess, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    rect = build_rounded_rectangle(ctx, consts, a, b, n_vertices)
    ga = gauss_area(ctx, rect.curve)
    if abs(ga - target) > 1e-10:
        raise InfeasibleError(f"Gauss-area root residual {ga - target:.3e} exceeds 1e-10")
    length = curve_length(ctx, rect.curve)
    if not length < 2.0 * ctx.len_halfline:
        raise GeometryError(f"initial length {length:.6g} is not below 2 L_g(P) = {2 * ctx.len_halfline:.6g}")
    return rect


def f_lambda(lam: float, a: float, M: float) -> float:
    """Left-side part of the perimeter split, up to an a-independent constant."""
    val, _ = integrate.quad(lambda r: r ** (lam - 1.0) * math.exp(-0.25 * r * r), 0.0, a, epsabs=1e-15, epsrel=1e-13)
    return 2.0 * a ** (lam - 1.0) * math.exp(-0.25 * a * a) * M - 4.0 * M * val


def g_lambda(lam: float, b: float, M: float) -> float:
    val, _ = integrate.quad(lambda r: r ** (lam - 1.0) * math.exp(-0.25 * r * r), 0.0, b, epsabs=1e-15, epsrel=1e-13)
    return 2.0 * b ** (lam - 1.0) * math.exp(-0.25 * b * b) * M + 4.0 * M * val


def f_lambda_prime(lam: float, a: float, M: float) -> float:
    return -a ** (lam - 2.0) * math.exp(-0.25 * a * a) * M * (a * a + 4.0 * a - 2.0 * (lam - 1.0))


def g_lambda_prime(lam: float, b: float, M: float) -> float:
    return -b ** (lam - 2.0) * math.exp(-0.25 * b * b) * M * (b * b - 4.0 * b - 2.0 * (lam - 1.0))


def provenance(ctx: MetricContext, consts: InitializerConstants, rect: RoundedRectangle) -> dict:
    length = curve_length(ctx, rect.curve)
    return {
        "lambda": ctx.lam,
        "c0": consts.c0,
        "c0_residual": consts.c0_residual,
        "gauss_area_residual": gauss_area(ctx, rect.curve) - TWO_PI,
        "length": length,
        "perimeter_margin": 2.0 * ctx.len_halfline - length,
        "sharp_perimeter": perimeter(ctx, rect.a, rect.b, rect.c),
        **rect.metadata(),
    }
