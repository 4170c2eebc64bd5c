"""Geodesics of the weighted half-plane by direct ODE integration.

The geodesic equation is integrated in Euclidean arclength with the tangent
angle as state, ``(r', x') = (cos th, sin th)`` and
``th' = -[((lam-1)/r - r/2) sin th + x cos th / 2]``. Closed geodesics
symmetric in x are found by launching perpendicular to the r-axis and tuning
the launch point until the return to the axis is perpendicular too.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp, trapezoid
from scipy.optimize import brentq

from .curve import ClosedCurve, axis_crossings, is_simple, max_asymmetry, spectral_geodesic_curvature
from .geometry import DomainError, MetricContext

HALF_PI = 0.5 * math.pi


class ShootingError(RuntimeError):
    pass


class NoBracketError(ShootingError):
    def __init__(self, msg, table):
        super().__init__(msg)
        self.table = table


class Terminal(str, enum.Enum):
    AXIS_RETURN = "AxisReturn"
    LEFT_EXIT = "LeftExit"
    RIGHT_EXIT = "RightExit"
    STEP_LIMIT = "StepLimit"


def _rhs(lam):
    def f(s, y):
        r, x, th = y
        c, sn = math.cos(th), math.sin(th)
        return [c, sn, -(((lam - 1.0) / r - 0.5 * r) * sn + 0.5 * x * c)]
    return f


@dataclass
class ShotTrajectory:
    s: np.ndarray
    r: np.ndarray
    x: np.ndarray
    theta: np.ndarray
    launch_r: float
    terminal: Terminal
    return_angle: float | None  # angle with the +r direction, in [0, pi]
    sol: object = field(repr=False)
    message: str = ""

    @property
    def length_E(self) -> float:
        return float(self.s[-1])

    def rows(self):
        return np.column_stack([self.s, self.r, self.x, self.theta])


def integrate_geodesic(ctx: MetricContext, launch_r: float, direction: int = 1, theta0: float | None = None,
                       x0: float = 0.0, s_max: float = 60.0, r_floor: float = 1e-3, r_ceiling: float | None = None,
                       rtol: float = 1e-10, atol: float = 1e-12, n_samples: int = 2001) -> ShotTrajectory:
    """Shoot from ``(launch_r, x0)``; default launch is perpendicular to the axis, upward if ``direction > 0``."""
    if not launch_r > 0:
        raise DomainError("launch_r must be positive")
    if theta0 is None:
        theta0 = HALF_PI if direction > 0 else -HALF_PI
    if r_ceiling is None:
        r_ceiling = ctx.r_cyl + 12.0

    def axis(s, y):
        return y[1]
    axis.terminal = True
    axis.direction = -1.0 if math.sin(theta0) > 0 else 1.0

    def left(s, y):
        return y[0] - r_floor
    left.terminal = True
    left.direction = -1.0

    def right(s, y):
        return y[0] - r_ceiling
    right.terminal = True
    right.direction = 1.0

    events = [left, right]
    if x0 == 0.0 and abs(math.sin(theta0)) > 1e-12:
        events.insert(0, axis)
    sol = solve_ivp(_rhs(ctx.lam), (0.0, s_max), [launch_r, x0, theta0], method="DOP853", rtol=rtol, atol=atol,
                    events=events, dense_output=True)
    s_end = float(sol.t[-1])
    message = sol.message
    names = [e.__name__ for e in events]
    terminal, angle = Terminal.STEP_LIMIT, None
    if sol.status == 1:
        hit = next(i for i, te in enumerate(sol.t_events) if len(te))
        s_end = float(sol.t_events[hit][0])
        if names[hit] == "axis":
            terminal = Terminal.AXIS_RETURN
            th = float(sol.y_events[hit][0][2])
            angle = math.acos(max(-1.0, min(1.0, math.cos(th))))
        elif names[hit] == "left":
            terminal = Terminal.LEFT_EXIT
        else:
            terminal = Terminal.RIGHT_EXIT
    elif sol.status == -1:
        # integrator failure; near r = 0 this is the stiff approach to the boundary
        if sol.y[0, -1] < 10.0 * r_floor:
            terminal = Terminal.LEFT_EXIT
        else:
            raise ShootingError(f"integration failed at s={s_end:.6g}: {message}")
    ss = np.linspace(0.0, s_end, n_samples)
    y = sol.sol(ss)
    if terminal is Terminal.AXIS_RETURN:
        y[1, -1] = 0.0
    return ShotTrajectory(ss, y[0], y[1], y[2], float(launch_r), terminal, angle, sol.sol, message)


def _fd4(f, s, h):
    """Fourth-order central first and second derivatives of a vector function."""
    fm2, fm1, f0, fp1, fp2 = (f(s + k * h) for k in (-2, -1, 0, 1, 2))
    d1 = (-fp2 + 8.0 * fp1 - 8.0 * fm1 + fm2) / (12.0 * h)
    d2 = (-fp2 + 16.0 * fp1 - 30.0 * f0 + 16.0 * fm1 - fm2) / (12.0 * h * h)
    return f0, d1, d2


def trajectory_kg_residual(ctx: MetricContext, traj: ShotTrajectory, h: float = 1e-3, n: int = 400) -> float:
    """max |k_g| along the sampled path, with th' from finite differences of the angle samples."""
    lam = ctx.lam
    s = np.linspace(2 * h, traj.s[-1] - 2 * h, n)
    y, d1, _ = _fd4(traj.sol, s, h)
    r, x, th = y
    res = d1[2] + ((lam - 1.0) / r - 0.5 * r) * np.sin(th) + 0.5 * x * np.cos(th)
    log_alpha = (lam - 1.0) * np.log(r) - 0.25 * (r * r + x * x)
    return float(np.max(np.abs(res * np.exp(-log_alpha))))


def position_kg_residual(ctx: MetricContext, traj: ShotTrajectory, h: float = 2e-3, n: int = 400) -> float:
    """Same as :func:`trajectory_kg_residual` but from positions only (second differences)."""
    lam = ctx.lam
    s = np.linspace(2 * h, traj.s[-1] - 2 * h, n)

    def pos(t):
        return traj.sol(t)[:2]
    p, d1, d2 = _fd4(pos, s, h)
    r, x = p
    rp, xp = d1
    rpp, xpp = d2
    q = rp * rp + xp * xp
    grad = ((lam - 1.0) / r - 0.5 * r) * xp + 0.5 * x * rp
    bracket = ((xp * rpp - xpp * rp) / q - grad) / np.sqrt(q)
    log_alpha = (lam - 1.0) * np.log(r) - 0.25 * (r * r + x * x)
    return float(np.max(np.abs(bracket * np.exp(-log_alpha))))


def tangent_defect(traj: ShotTrajectory, h: float = 1e-3, n: int = 400) -> float:
    """max |(r', x') - (cos th, sin th)| along the trajectory."""
    s = np.linspace(2 * h, traj.s[-1] - 2 * h, n)
    y, d1, _ = _fd4(traj.sol, s, h)
    return float(np.max(np.hypot(d1[0] - np.cos(y[2]), d1[1] - np.sin(y[2]))))


@dataclass
class SweepRow:
    launch_r: float
    terminal: Terminal
    return_angle: float | None
    return_r: float | None

    def as_dict(self) -> dict:
        return {"launch_r": self.launch_r, "terminal": self.terminal.value,
                "return_angle": self.return_angle, "return_r": self.return_r}


def sweep(ctx: MetricContext, launch: np.ndarray, **kw) -> list[SweepRow]:
    out = []
    for rho in launch:
        t = integrate_geodesic(ctx, float(rho), n_samples=2, **kw)
        out.append(SweepRow(float(rho), t.terminal, t.return_angle,
                            float(t.r[-1]) if t.terminal is Terminal.AXIS_RETURN else None))
    return out


@dataclass
class ClosedGeodesic:
    curve: ClosedCurve
    launch_r: float
    return_r: float
    return_angle: float
    trajectory: ShotTrajectory
    table: list[SweepRow]
    max_abs_kg: float

    @property
    def crossings(self) -> tuple[float, float]:
        return self.launch_r, self.return_r


def _mirror_curve(traj: ShotTrajectory, n_vertices: int) -> ClosedCurve:
    # the half-trajectory runs from the left crossing over the top to the right one;
    # read it backwards for the upper half of a counterclockwise loop
    S = traj.length_E
    if n_vertices % 2:
        raise ValueError("n_vertices must be even")
    half = n_vertices // 2
    sig = np.arange(n_vertices) * (2.0 * S / n_vertices)
    pts = np.empty((n_vertices, 2))
    up = traj.sol(S - sig[: half + 1])
    pts[: half + 1, 0], pts[: half + 1, 1] = up[0], up[1]
    lo = traj.sol(sig[half + 1:] - S)
    pts[half + 1:, 0], pts[half + 1:, 1] = lo[0], -lo[1]
    pts[0, 1] = 0.0
    pts[half, 1] = 0.0
    # exact index symmetry: vertex i and N - i are mirror images
    pts[half + 1:] = pts[1:half][::-1] * [1.0, -1.0]
    return ClosedCurve(pts)


def find_closed_geodesic(ctx: MetricContext, n_vertices: int = 1024, n_sweep: int = 48, lo_frac: float = 0.02,
                         angle_tol: float = 1e-9, kg_tol: float = 1e-6, rtol: float = 1e-12,
                         atol: float = 1e-13) -> ClosedGeodesic:
    """Perpendicular-return shooting from the left part (0, r_lam) of the axis."""
    launch = np.linspace(lo_frac * ctx.r_cyl, ctx.r_cyl, n_sweep + 1)[:-1]
    table = sweep(ctx, launch, rtol=rtol, atol=atol)

    def g(rho):
        t = integrate_geodesic(ctx, rho, n_samples=2, rtol=rtol, atol=atol)
        if t.terminal is not Terminal.AXIS_RETURN:
            raise ShootingError(f"launch {rho:.12g} did not return to the axis ({t.terminal.value})")
        return t.return_angle - HALF_PI

    bracket = None
    for u, v in zip(table, table[1:]):
        if u.return_angle is None or v.return_angle is None:
            continue
        if (u.return_angle - HALF_PI) * (v.return_angle - HALF_PI) <= 0.0:
            bracket = (u.launch_r, v.launch_r)
            break
    if bracket is None:
        raise NoBracketError("no sign change of the return angle in the launch sweep",
                             [row.as_dict() for row in table])
    rho = brentq(g, *bracket, xtol=1e-15, rtol=1e-15, maxiter=200)
    traj = integrate_geodesic(ctx, rho, rtol=rtol, atol=atol)
    if abs(traj.return_angle - HALF_PI) >= angle_tol:
        raise ShootingError(f"perpendicular return missed: |angle - pi/2| = {abs(traj.return_angle - HALF_PI):.3e}")
    curve = _mirror_curve(traj, n_vertices)
    kg = float(np.max(np.abs(spectral_geodesic_curvature(ctx, curve))))
    if kg >= kg_tol:
        raise ShootingError(f"closed geodesic check failed: max|k_g| = {kg:.3e}")
    return ClosedGeodesic(curve, rho, float(traj.r[-1]), traj.return_angle, traj, table, kg)


def write_trajectory_csv(path, traj: ShotTrajectory) -> None:
    with open(path, "w") as fh:
        fh.write("s,r,x,theta\n")
        for row in traj.rows():
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


# --- graph form ------------------------------------------------------------

class End(str, enum.Enum):
    ZERO = "Zero"
    VERTICAL = "Vertical"
    FLOOR = "Floor"
    CEILING = "Ceiling"
    FAILURE = "Failure"


@dataclass
class GraphSolution:
    lam: float
    r: np.ndarray
    f: np.ndarray
    fp: np.ndarray
    a_dom: float
    b_dom: float
    left_end: End
    right_end: End

    @property
    def fpp(self) -> np.ndarray:
        return graph_fpp(self.lam, self.r, self.f, self.fp)

    @property
    def positive(self) -> bool:
        return bool(np.all(self.f > 0.0))

    def gauss_area(self) -> float:
        return float(trapezoid(self.f * (1.0 + (self.lam - 1.0) / self.r ** 2), self.r))


def graph_fpp(lam, r, f, fp):
    return (1.0 + fp * fp) * ((0.5 * r - (lam - 1.0) / r) * fp - 0.5 * f)


def _graph_half(lam, r0, y0, r_stop, stop_at_zero, slope_max, rtol, atol, n):
    def rhs(r, y):
        return [y[1], graph_fpp(lam, r, y[0], y[1])]

    def zero(r, y):
        return y[0]
    zero.terminal = True

    def steep(r, y):
        return abs(y[1]) - slope_max
    steep.terminal = True

    events = [steep] + ([zero] if stop_at_zero and y0[0] > 0 else [])
    sol = solve_ivp(rhs, (r0, r_stop), y0, method="DOP853", rtol=rtol, atol=atol, events=events,
                    dense_output=True)
    r_end = float(sol.t[-1])
    if sol.status == 1:
        hit = next(i for i, te in enumerate(sol.t_events) if len(te))
        r_end = float(sol.t_events[hit][0])
        end = End.VERTICAL if hit == 0 else End.ZERO
    elif sol.status == -1:
        end = End.FAILURE
    else:
        end = End.FLOOR if r_stop < r0 else End.CEILING
    rr = np.linspace(r0, r_end, n)
    y = sol.sol(rr) if r_end != r0 else np.array(y0, float)[:, None] * np.ones(n)
    if end is End.ZERO:
        y[0, -1] = 0.0
    return rr, y, r_end, end


def integrate_graph(ctx: MetricContext, r0: float, f0: float, fp0: float, r_floor: float = 1e-3,
                    r_ceiling: float | None = None, stop_at_zero: bool = True, slope_max: float = 1e4,
                    rtol: float = 1e-10, atol: float = 1e-12, n: int = 1001) -> GraphSolution:
    """Extend a solution of the graph geodesic equation both ways from ``r0``.

    Each side stops where f reaches 0 (if ``stop_at_zero``), where the slope
    exceeds ``slope_max`` (graph turning vertical), or at the r bounds.
    """
    if not r0 > 0:
        raise DomainError("r0 must be positive")
    lam = ctx.lam
    if r_ceiling is None:
        r_ceiling = ctx.r_cyl + 12.0
    if f0 == 0.0 and fp0 == 0.0:
        rr = np.linspace(r_floor, r_ceiling, n)
        z = np.zeros(n)
        return GraphSolution(lam, rr, z, z.copy(), r_floor, r_ceiling, End.FLOOR, End.CEILING)
    y0 = [f0, fp0]
    rl, yl, a, el = _graph_half(lam, r0, y0, r_floor, stop_at_zero, slope_max, rtol, atol, n)
    rr, yr, b, er = _graph_half(lam, r0, y0, r_ceiling, stop_at_zero, slope_max, rtol, atol, n)
    r = np.concatenate([rl[::-1], rr[1:]])
    f = np.concatenate([yl[0][::-1], yr[0][1:]])
    fp = np.concatenate([yl[1][::-1], yr[1][1:]])
    return GraphSolution(lam, r, f, fp, a, b, el, er)


# --- property checks ---------------------------------------------------------

@dataclass
class PropertyCheck:
    name: str
    applicable: bool
    passed: bool
    detail: str = ""


def _interior(sol: GraphSolution):
    # drop the endpoints where f = 0 or the slope is capped
    return slice(1, len(sol.r) - 1)


def check_no_interior_min(sol: GraphSolution) -> PropertyCheck:
    sl = _interior(sol)
    f, fp = sol.f[sl], sol.fp[sl]
    if not np.all(f > 0):
        return PropertyCheck("no_interior_min", False, True, "not positive")
    up = np.flatnonzero((fp[:-1] < 0.0) & (fp[1:] > 0.0))
    return PropertyCheck("no_interior_min", True, up.size == 0, f"{up.size} interior minima")


def check_concave_left(sol: GraphSolution, r_cyl: float) -> PropertyCheck:
    sl = _interior(sol)
    r, fp, fpp = sol.r[sl], sol.fp[sl], sol.fpp[sl]
    cand = np.flatnonzero((r < r_cyl) & (fp >= 0.0))
    if cand.size == 0:
        return PropertyCheck("concave_left", False, True, "no rho0 < r_lam with f' >= 0")
    rho0 = r[cand[0]]
    win = (r > rho0) & (r < r_cyl)
    bad = int(np.sum(fpp[win] >= 0.0))
    return PropertyCheck("concave_left", True, bad == 0, f"rho0={rho0:.6g}, {bad} samples with f''>=0")


def check_concave_right(sol: GraphSolution, r_cyl: float) -> PropertyCheck:
    sl = _interior(sol)
    r, fp, fpp = sol.r[sl], sol.fp[sl], sol.fpp[sl]
    cand = np.flatnonzero((r > r_cyl) & (fp <= 0.0))
    if cand.size == 0:
        return PropertyCheck("concave_right", False, True, "no rho0 > r_lam with f' <= 0")
    rho0 = r[cand[-1]]
    win = (r > r_cyl) & (r < rho0)
    bad = int(np.sum(fpp[win] >= 0.0))
    return PropertyCheck("concave_right", True, bad == 0, f"rho0={rho0:.6g}, {bad} samples with f''>=0")


def check_straddles(sol: GraphSolution, r_cyl: float) -> PropertyCheck:
    ok = sol.a_dom < r_cyl < sol.b_dom
    return PropertyCheck("straddles_cylinder", True, ok, f"domain ({sol.a_dom:.6g}, {sol.b_dom:.6g}) "
                      f"ends {sol.left_end.value}/{sol.right_end.value}")


def check_height_bounds(sol: GraphSolution, r_cyl: float) -> PropertyCheck:
    sl = _interior(sol)
    r, f = sol.r[sl], sol.f[sl]
    if not (np.all(f > 0) and r[0] < r_cyl < r[-1]):
        return PropertyCheck("height_bounds", False, True, "positive part does not contain r_lam")
    ga = float(trapezoid(f * (1.0 + (sol.lam - 1.0) / r ** 2), r))
    if ga > math.pi:
        return PropertyCheck("height_bounds", False, True, f"Gauss area {ga:.4g} > pi")
    eps0, R0 = r[0], r[-1]
    m1 = max(f[0], 2 * math.pi / (r_cyl - eps0))
    m2 = max(f[-1], 2 * math.pi / (R0 - r_cyl))
    left = r <= r_cyl
    ok = bool(np.all(f[left] <= m1) and np.all(f[~left] <= m2))
    return PropertyCheck("height_bounds", True, ok, f"GA={ga:.4g}, max f={f.max():.4g}, M1={m1:.4g}, M2={m2:.4g}")


def random_graph_checks(ctx: MetricContext, n: int = 50, seed: int = 0) -> list[list[PropertyCheck]]:
    """Property checks on ``n`` random initial data; one list of checks per sample."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        r0 = float(rng.uniform(0.3, 2.0) * ctx.r_cyl)
        f0 = float(rng.uniform(0.05, 2.0))
        fp0 = float(rng.uniform(-2.0, 2.0))
        pos = integrate_graph(ctx, r0, f0, fp0)
        full = integrate_graph(ctx, r0, f0, fp0, stop_at_zero=False)
        out.append([check_no_interior_min(pos), check_concave_left(pos, ctx.r_cyl),
                    check_concave_right(pos, ctx.r_cyl), check_straddles(full, ctx.r_cyl),
                    check_height_bounds(pos, ctx.r_cyl)])
    return out


def closed_geodesic_report(ctx: MetricContext, geo: ClosedGeodesic) -> dict:
    cr = axis_crossings(geo.curve.points)
    return {"lambda": ctx.lam, "launch_r": geo.launch_r, "return_r": geo.return_r,
            "axis_crossings": [float(v) for v in cr], "max_abs_kg": geo.max_abs_kg,
            "simple": is_simple(geo.curve), "asymmetry": max_asymmetry(geo.curve),
            "straddles": bool(geo.launch_r < ctx.r_cyl < geo.return_r)}
