"""Grid checks of the length inequalities behind the initial-rectangle estimate.

Every check returns :class:`VerificationReport` rows with ``margin = rhs - lhs``
and ``passed = margin > 0``. This is grid evaluation, not interval arithmetic.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import integrate

from .geometry import length_cylinder, length_halfline
from .initializer import InitializerConstants, f_lambda, f_lambda_prime, g_lambda, g_lambda_prime

LAMBDA0 = (28.0 + 11.0 * math.sqrt(7.0)) / 9.0
_EPS = 1e-16
_TINY = 1e-300


@dataclass
class VerificationReport:
    suite: str
    lam: float
    quantity: str
    lhs: float
    rhs: float
    margin: float
    passed: bool
    t: float | None = None

    @classmethod
    def make(cls, suite, lam, quantity, lhs, rhs, t=None):
        m = float(rhs - lhs)
        return cls(suite, float(lam), quantity, float(lhs), float(rhs), m, bool(m > 0.0), t)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        d["pass"] = d.pop("passed")
        if d["t"] is None:
            del d["t"]
        return d


# --- incomplete gamma --------------------------------------------------------

def _lower_series(u, v):
    # gamma(u, v) = v^u e^-v sum v^n / (u (u+1) ... (u+n))
    term = 1.0 / u
    total = term
    ap = u
    for _ in range(10000):
        ap += 1.0
        term *= v / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(u * math.log(v) - v)


def _upper_cf(u, v):
    # modified Lentz on the continued fraction for Gamma(u, v)
    b = v + 1.0 - u
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, 10000):
        an = -i * (i - u)
        b += 2.0
        d = an * d + b
        d = _TINY if abs(d) < _TINY else d
        c = b + an / c
        c = _TINY if abs(c) < _TINY else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.exp(u * math.log(v) - v) * h


def incomplete_gamma(u: float, v: float) -> float:
    """Upper incomplete gamma Gamma(u, v) = int_v^inf x^(u-1) e^-x dx."""
    if not u > 0:
        raise ValueError("u must be positive")
    if v < 0:
        raise ValueError("v must be non-negative")
    if v == 0.0:
        return math.gamma(u)
    if v < u + 1.0:
        return math.gamma(u) - _lower_series(u, v)
    return _upper_cf(u, v)


def lower_incomplete_gamma(u: float, v: float) -> float:
    if v == 0.0:
        return 0.0
    if v < u + 1.0:
        return _lower_series(u, v)
    return math.gamma(u) - _upper_cf(u, v)


# --- model lengths -----------------------------------------------------------

def stirling_bound(lam: float) -> float:
    """sqrt(2 pi) (2(lam-1)/e)^((lam-1)/2), the middle term of the P < C chain."""
    return math.sqrt(2.0 * math.pi) * math.exp(0.5 * (lam - 1.0) * (math.log(2.0 * (lam - 1.0)) - 1.0))


def default_pc_grid():
    return np.round(1.0 + 0.05 * np.arange(1, 381), 12)


def verify_P_less_C(grid=None) -> list[VerificationReport]:
    out = []
    for lam in default_pc_grid() if grid is None else grid:
        lp, lc, bb = length_halfline(lam), length_cylinder(lam), stirling_bound(lam)
        out.append(VerificationReport.make("P_less_C", lam, "L_g(P) < L_g(C)", lp, lc))
        out.append(VerificationReport.make("P_less_C", lam, "2^(lam-1) Gamma(lam/2) <= Stirling-type bound", lp, bb))
        out.append(VerificationReport.make("P_less_C", lam, "Stirling-type bound < L_g(C)", bb, lc))
    return out


def critical_points(lam: float) -> tuple[float, float]:
    s = math.sqrt(2.0 * (1.0 + lam))
    return -2.0 + s, 2.0 + s


def critical_point_residuals(lam: float, M: float = 1.0) -> tuple[float, float]:
    a, b = critical_points(lam)
    return f_lambda_prime(lam, a, M), g_lambda_prime(lam, b, M)


# --- base case -----------------------------------------------------------------

def _pow_exp(y: float, p: float) -> float:
    # y^p e^-y with 0^0 = 1
    if y == 0.0:
        return 1.0 if p == 0.0 else 0.0
    return math.exp(p * math.log(y) - y)


def base_case_lhs(lam: float) -> float:
    a, b = critical_points(lam)
    p = 0.5 * (lam - 1.0)
    return math.fsum([_pow_exp(0.25 * a * a, p), _pow_exp(0.25 * b * b, p)])


def base_case_rhs(lam: float) -> float:
    a, b = critical_points(lam)
    u = 0.5 * lam
    return 2.0 * math.fsum([math.gamma(u), -incomplete_gamma(u, 0.25 * a * a), incomplete_gamma(u, 0.25 * b * b)])


def default_base_grid():
    return np.round(1.0 + 0.05 * np.arange(0, 121), 12)


def verify_base_case(grid=None) -> list[VerificationReport]:
    out = []
    for lam in default_base_grid() if grid is None else grid:
        if not 1.0 <= lam <= 7.0:
            raise ValueError(f"base-case grid must lie in [1, 7], got {lam}")
        out.append(VerificationReport.make("base_case", lam, "base-case left side < 1", base_case_lhs(lam), 1.0))
        out.append(VerificationReport.make("base_case", lam, "base-case right side > 1", 1.0, base_case_rhs(lam)))
    return out


def _moment(lam: float) -> float:
    # int_0^inf r^(lam-1) e^(-r^2/4) dr
    return length_halfline(lam)


def verify_target_direct(grid=None, consts: InitializerConstants | None = None) -> list[VerificationReport]:
    """f_lam(a_lam) + g_lam(b_lam) < 2 int_0^inf r^(lam-1) e^(-r^2/4) dr, evaluated directly with M = M(c0)."""
    M = (consts or InitializerConstants()).M
    out = []
    for lam in default_base_grid()[1:] if grid is None else grid:
        a, b = critical_points(lam)
        lhs = f_lambda(lam, a, M) + g_lambda(lam, b, M)
        out.append(VerificationReport.make("target_direct", lam, "f(a_lam) + g(b_lam) < 2 L_g(P)", lhs,
                                           2.0 * _moment(lam)))
    return out


# --- pointwise inequality --------------------------------------------------------

def r_index(mu):
    """r_mu = sqrt(2 (mu - 1))."""
    return math.sqrt(2.0 * (mu - 1.0))


def log_h(lam: float, s: float) -> float:
    if s <= 0.0:
        return -math.inf
    return lam * math.log(s) - 0.25 * s * s


def log_H(lam: float, s: float) -> float:
    return float(np.logaddexp(log_h(lam, s - 2.0), log_h(lam, s + 2.0)))


def pointwise_sides_log(lam: float, t: float) -> tuple[float, float]:
    r4, r2 = r_index(lam + 4), r_index(lam + 2)
    lhs = math.log(2.0 * r4 - t) + log_H(lam, r4 - t)
    rhs = math.log(2.0 * lam) + math.log(2.0 * r2 + t) + log_H(lam - 2.0, r2 + t)
    return lhs, rhs


def default_pointwise_grid():
    return [LAMBDA0 + 0.01, 7.0, 8.0, 10.0, 15.0, 25.0, 50.0]


def verify_pointwise(grid=None, n_t: int = 101) -> list[VerificationReport]:
    """The pointwise inequality on t in [0, r_{lam+4} - r_{lam+3}], and the two t = 0 reductions.

    lhs/rhs are logarithms of the two sides, so the margin is a log ratio.
    """
    out = []
    for lam in default_pointwise_grid() if grid is None else grid:
        if not lam > LAMBDA0:
            raise ValueError(f"pointwise check needs lambda > {LAMBDA0:.4f}")
        T = r_index(lam + 4) - r_index(lam + 3)
        l0, r0 = pointwise_sides_log(lam, 0.0)
        for t in np.linspace(0.0, T, n_t):
            lhs, rhs = pointwise_sides_log(lam, float(t))
            out.append(VerificationReport.make("pointwise", lam, "log pointwise", lhs, rhs, float(t)))
            if t > 0:
                out.append(VerificationReport.make("pointwise", lam, "left side decreasing", lhs, l0 + 1e-15,
                                                   float(t)))
                out.append(VerificationReport.make("pointwise", lam, "right side increasing", r0, rhs + 1e-15,
                                                   float(t)))
    return out


# --- Q ---------------------------------------------------------------------------

def q_value(lam: float) -> float:
    r = r_index(lam + 3)
    return math.exp(-2.0 * r + lam * math.log((r + 2.0) / (r - 2.0)))


def q_from_derivatives(lam: float) -> float:
    """-h'(r+2)/h'(r-2) with h'(s) = e^(-s^2/4) s^(lam-1) (lam - s^2/2)."""
    r = r_index(lam + 3)

    def hp(s):
        return math.exp(-0.25 * s * s) * s ** (lam - 1.0) * (lam - 0.5 * s * s)
    return -hp(r + 2.0) / hp(r - 2.0)


def default_q_grid():
    return np.round(1.0 + 0.05 * np.arange(1, 981), 12)


def verify_Q(grid=None) -> list[VerificationReport]:
    return [VerificationReport.make("Q", lam, "Q_lam < 1", q_value(lam), 1.0)
            for lam in (default_q_grid() if grid is None else grid)]


# --- supporting identities ---------------------------------------------------------

def ibp_identity_defect(lam: float) -> float:
    """Relative defect of int r^(lam+1) e^(-r^2/4) = 2 lam int r^(lam-1) e^(-r^2/4), by quadrature."""
    def mom(p):
        peak = math.sqrt(2.0 * p) if p > 0 else 0.0
        lp = p * math.log(peak) - 0.25 * peak * peak if peak > 0 else 0.0
        val, _ = integrate.quad(lambda r: math.exp(p * math.log(r) - 0.25 * r * r - lp) if r > 0 else 0.0,
                                0.0, math.inf, epsabs=0.0, epsrel=1e-13, limit=400)
        return val * math.exp(lp)
    left, right = mom(lam + 1.0), 2.0 * lam * mom(lam - 1.0)
    return abs(left - right) / abs(right)


def concavity_window(lam: float) -> tuple[bool, bool]:
    q = math.sqrt(8.0 * lam + 1.0)
    s0, s1 = math.sqrt(2.0 * lam + 1.0 - q), math.sqrt(2.0 * lam + 1.0 + q)
    return s0 > math.sqrt(2.0 * (lam + 4.0)) - 2.0, s1 < math.sqrt(2.0 * (lam + 2.0)) + 2.0


def H_second_difference_min(lam: float, n: int = 200) -> float:
    """Smallest sampled second difference of H_lam / H_lam(r_{lam+3}) on (r_{lam+3}, r_{lam+4})."""
    a, b = r_index(lam + 3), r_index(lam + 4)
    s = np.linspace(a, b, n)
    ref = log_H(lam, a)
    H = np.array([math.exp(log_H(lam, v) - ref) for v in s])
    return float(np.min(H[:-2] - 2.0 * H[1:-1] + H[2:]))


def r_gap_concave(lam: float) -> bool:
    return r_index(lam + 4) - r_index(lam + 3) < r_index(lam + 3) - r_index(lam + 2)


# --- driver ---------------------------------------------------------------------------

SUITES = {
    "P_less_C": verify_P_less_C,
    "base_case": verify_base_case,
    "pointwise": verify_pointwise,
    "Q": verify_Q,
}


def run_all(include_diagnostics: bool = True) -> dict:
    """All four suites plus the direct target-inequality diagnostic; ``passed`` covers the four suites only."""
    suites = {name: fn() for name, fn in SUITES.items()}
    summary = {name: {"n": len(rows), "failures": sum(not r.passed for r in rows),
                      "min_margin": min(r.margin for r in rows)} for name, rows in suites.items()}
    out = {"passed": all(s["failures"] == 0 for s in summary.values()), "summary": summary,
           "note": "grid evaluation in double precision; no interval arithmetic",
           "rows": [r.as_dict() for name in sorted(suites) for r in suites[name]]}
    if include_diagnostics:
        diag = verify_target_direct()
        out["diagnostics"] = {"target_direct": [r.as_dict() for r in diag]}
    return out


def dump_json(report: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(report, fh, indent=1, sort_keys=True)
        fh.write("\n")
