"""Bisection over the rounded-rectangle family parameter ``a``.

Probes with ``a`` too small fall to the left of the cylinder r = r_lam, probes
with ``a`` too large escape to the right; in between there is an ``a0`` whose
flow keeps meeting the cylinder. Near ``a0`` the flow lingers next to a
closed geodesic, which is what the search is after.
"""
from __future__ import annotations

import enum
import json
import logging
import math
from dataclasses import dataclass, field

from .curve import ClosedCurve
from .flow import FlowConfig, FlowResult, Outcome, run, upsample
from .geometry import MetricContext
from .initializer import InitializerConstants, solve_phi

log = logging.getLogger(__name__)


class Side(str, enum.Enum):
    LEFT = "Left"
    RIGHT = "Right"
    INTERSECTING = "Intersecting"


class BracketError(RuntimeError):
    pass


def classify(ctx: MetricContext, c: ClosedCurve, eps: float = 1e-9) -> Side:
    if c.r.max() < ctx.r_cyl - eps:
        return Side.LEFT
    if c.r.min() > ctx.r_cyl + eps:
        return Side.RIGHT
    return Side.INTERSECTING


@dataclass
class SearchRecord:
    a: float
    b: float
    outcome: Outcome
    exit_time: float
    max_time: float
    final: dict
    max_rel_length_increase: float = -math.inf

    def to_json(self) -> str:
        return json.dumps({"a": self.a, "b": self.b, "outcome": self.outcome.value, "exit_time": self.exit_time,
                           "max_time": self.max_time, "final": self.final,
                           "max_rel_length_increase": self.max_rel_length_increase}, sort_keys=True)


@dataclass
class SearchResult:
    a0: float
    outcome: Outcome
    flow: FlowResult
    trace: list[SearchRecord]
    bracket: tuple[float, float]
    note: str = "The bisection finds one bracket; other values of a0 may exist."


@dataclass
class Prober:
    """Runs the flow from the rounded rectangle R[a, phi(a), c0]."""

    ctx: MetricContext
    cfg: FlowConfig
    consts: InitializerConstants = field(default_factory=InitializerConstants)
    max_horizon_doublings: int = 3
    trace: list[SearchRecord] = field(default_factory=list)

    def __call__(self, a: float, max_time: float | None = None) -> FlowResult:
        horizon = self.cfg.max_time if max_time is None else max_time
        rect = solve_phi(self.ctx, self.consts, a, self.cfg.n_vertices)
        for _ in range(self.max_horizon_doublings + 1):
            res = run(self.ctx, rect.curve, self.cfg.with_(max_time=horizon))
            self.trace.append(SearchRecord(a, rect.b, res.outcome, res.state.time, horizon, res.state.row(),
                                           res.stats.max_rel_length_increase))
            log.info("probe a=%.15g -> %s at t=%.4g", a, res.outcome.value, res.state.time)
            if res.outcome is not Outcome.TIMED_OUT:
                break
            horizon *= 2.0
        return res


def bisect(ctx: MetricContext, cfg: FlowConfig, a_lo: float, a_hi: float, tol_a: float = 1e-12,
           consts: InitializerConstants | None = None, final_time_factor: float = 2.0,
           max_iter: int = 200) -> SearchResult:
    """Bisection on the flow outcome; lo must fall left, hi must escape right.

    Returns as soon as a probe converges. Otherwise the midpoint of the final
    bracket is re-run with ``final_time_factor`` times the horizon.
    """
    probe = Prober(ctx, cfg, consts or InitializerConstants())
    res_lo = probe(a_lo)
    if res_lo.outcome is Outcome.CONVERGED:
        return SearchResult(a_lo, res_lo.outcome, res_lo, probe.trace, (a_lo, a_hi))
    res_hi = probe(a_hi)
    if res_hi.outcome is Outcome.CONVERGED:
        return SearchResult(a_hi, res_hi.outcome, res_hi, probe.trace, (a_lo, a_hi))
    if res_lo.outcome is not Outcome.FELL_LEFT or res_hi.outcome is not Outcome.ESCAPED_RIGHT:
        raise BracketError(f"bracket endpoints gave {res_lo.outcome.value} at a={a_lo:g} and "
                           f"{res_hi.outcome.value} at a={a_hi:g}; need FellLeft / EscapedRight")
    lo, hi = a_lo, a_hi
    for _ in range(max_iter):
        if hi - lo < tol_a:
            break
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        res = probe(mid)
        if res.outcome is Outcome.FELL_LEFT:
            lo = mid
        elif res.outcome is Outcome.ESCAPED_RIGHT:
            hi = mid
        else:
            return SearchResult(mid, res.outcome, res, probe.trace, (lo, hi))
    a0 = 0.5 * (lo + hi)
    res = probe(a0, max_time=final_time_factor * cfg.max_time)
    return SearchResult(a0, res.outcome, res, probe.trace, (lo, hi))


def refine(ctx: MetricContext, flow: FlowResult, n_final: int = 1024, cfg: FlowConfig | None = None,
           ) -> list[FlowResult]:
    """Carry a converged limit up to ``n_final`` vertices by doubling.

    At each level the curve is upsampled (Gauss area restored to 2*pi) and
    flowed again until the stopping rule holds. Near the limit the discrete
    geodesics of neighbouring resolutions differ by O(h^2), so each level
    needs only a short run; a failure to converge is returned, not raised.
    """
    cfg = cfg or FlowConfig(max_time=10.0, check_every=50, record_every=10 ** 9)
    out = []
    c = flow.state.curve
    n = len(c)
    while n < n_final:
        n = min(2 * n, n_final)
        res = run(ctx, upsample(ctx, c, n), cfg.with_(n_vertices=n))
        out.append(res)
        log.info("refined to N=%d: %s at t=%.4g, max|k_g|=%.3g", n, res.outcome.value, res.state.time,
                 res.state.max_abs_kg)
        if res.outcome is not Outcome.CONVERGED:
            break
        c = res.state.curve
    return out


def write_trace_jsonl(path, trace: list[SearchRecord]) -> None:
    with open(path, "w") as fh:
        for rec in trace:
            fh.write(rec.to_json() + "\n")


def survival_times(trace: list[SearchRecord]) -> list[tuple[float, float]]:
    """(a, exit time) of every probe that left through one side, sorted by a."""
    return sorted((r.a, r.exit_time) for r in trace
                  if r.outcome in (Outcome.FELL_LEFT, Outcome.ESCAPED_RIGHT))
