"""Discrete closed curves in the half-plane and their weighted geometry.

Vertices are stored counterclockwise in the (r, x) plane, r horizontal.
Geodesic curvature is measured against the right-hand normal
``nu = (x', -r') / |gamma'|``, which points *outward* on a counterclockwise
curve. With this sign a small convex loop has ``k_g < 0`` and the discrete
Gauss-Bonnet identity reads ``sum(k_g ds) = GA - 2*pi``. The vector
``k_g * nu`` is the usual (inward-pointing) geodesic curvature vector.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np
from scipy.interpolate import CubicSpline

from .geometry import DomainError, MetricContext, log_conformal_factor

MIN_VERTICES = 16


class CurveError(ValueError):
    pass


class DegenerateSpacingError(CurveError):
    pass


class OrientationError(CurveError):
    pass


class SymmetryLossError(CurveError):
    pass


@dataclass(frozen=True, eq=False)
class ClosedCurve:
    """Cyclic polyline; ``points[i] = (r_i, x_i)``, last vertex joins the first."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise CurveError("points must have shape (N, 2)")
        if pts.shape[0] < MIN_VERTICES:
            raise CurveError(f"need at least {MIN_VERTICES} vertices, got {pts.shape[0]}")
        if not np.all(np.isfinite(pts)):
            raise CurveError("non-finite vertex coordinates")
        if np.any(pts[:, 0] <= 0.0):
            raise DomainError("all vertices must satisfy r > 0")
        edge = np.roll(pts, -1, axis=0) - pts
        if np.min(np.hypot(edge[:, 0], edge[:, 1])) <= 1e-14:
            raise DegenerateSpacingError("consecutive vertices coincide")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_rx(cls, r, x) -> "ClosedCurve":
        return cls(np.column_stack([np.asarray(r, float), np.asarray(x, float)]))

    @property
    def r(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def x(self) -> np.ndarray:
        return self.points[:, 1]

    def __len__(self):
        return self.points.shape[0]

    def roll(self, k: int) -> "ClosedCurve":
        return ClosedCurve(np.roll(self.points, -k, axis=0))

    def reflected(self) -> "ClosedCurve":
        """Mirror image under x -> -x, reversed to stay counterclockwise."""
        pts = self.points[::-1].copy()
        pts[:, 1] *= -1.0
        return ClosedCurve(pts)

    def diameter(self) -> float:
        lo, hi = self.points.min(axis=0), self.points.max(axis=0)
        return float(np.hypot(*(hi - lo)))


@dataclass(frozen=True)
class FrameSample:
    speed_g: float
    tangent: np.ndarray  # Euclidean components of the g-unit tangent
    normal: np.ndarray  # Euclidean components of the g-unit normal (right-hand)
    k_g: float
    k_E: float


@dataclass(frozen=True)
class Frames:
    """Vectorized per-vertex frame data from centered differences in the vertex index."""

    dr: np.ndarray
    dx: np.ndarray
    speed_E: np.ndarray
    log_alpha: np.ndarray
    k_E: np.ndarray
    bracket: np.ndarray  # bracketed term of the k_g formula, divided by |gamma'|

    @property
    def speed_g(self):
        return np.exp(self.log_alpha) * self.speed_E

    @property
    def k_g(self):
        return self.bracket * np.exp(-self.log_alpha)

    @property
    def normal_E(self):
        return np.column_stack([self.dx, -self.dr]) / self.speed_E[:, None]


def frames_from_arrays(lam: float, r: np.ndarray, x: np.ndarray) -> Frames:
    rp, rm = np.roll(r, -1), np.roll(r, 1)
    xp, xm = np.roll(x, -1), np.roll(x, 1)
    dr = 0.5 * (rp - rm)
    dx = 0.5 * (xp - xm)
    d2r = rp - 2.0 * r + rm
    d2x = xp - 2.0 * x + xm
    q = dr * dr + dx * dx
    if np.min(q) <= 1e-28:
        raise DegenerateSpacingError("adjacent vertices coincide within 1e-14")
    speed = np.sqrt(q)
    kE_par = (dx * d2r - d2x * dr) / q
    grad = ((lam - 1.0) / r - 0.5 * r) * dx + 0.5 * x * dr
    bracket = (kE_par - grad) / speed
    log_alpha = (lam - 1.0) * np.log(r) - 0.25 * (r * r + x * x)
    return Frames(dr, dx, speed, log_alpha, kE_par / speed, bracket)


def frames(ctx: MetricContext, c: ClosedCurve) -> Frames:
    return frames_from_arrays(ctx.lam, c.r, c.x)


def discrete_frame(ctx: MetricContext, c: ClosedCurve, i: int) -> FrameSample:
    """Frame, k_g and k_E at vertex ``i`` from centered differences."""
    n = len(c)
    idx = [(i - 1) % n, i % n, (i + 1) % n]
    f = frames_from_arrays(ctx.lam, c.r[idx], c.x[idx])
    # only the middle entry has valid neighbours
    alpha = math.exp(f.log_alpha[1])
    v = alpha * f.speed_E[1]
    t = np.array([f.dr[1], f.dx[1]]) / v
    nrm = np.array([f.dx[1], -f.dr[1]]) / v
    return FrameSample(float(v), t, nrm, float(f.bracket[1] / alpha), float(f.k_E[1]))


def geodesic_curvature(ctx: MetricContext, c: ClosedCurve) -> np.ndarray:
    return frames(ctx, c).k_g


def curve_length_arrays(lam: float, r: np.ndarray, x: np.ndarray) -> float:
    rn, xn = np.roll(r, -1), np.roll(x, -1)
    rm, xm = 0.5 * (r + rn), 0.5 * (x + xn)

    def alpha(rr, xx):
        return np.exp((lam - 1.0) * np.log(rr) - 0.25 * (rr * rr + xx * xx))

    a0 = alpha(r, x)
    w = (a0 + 4.0 * alpha(rm, xm) + np.roll(a0, -1)) / 6.0
    return float(np.sum(np.hypot(rn - r, xn - x) * w))


def curve_length(ctx: MetricContext, c: ClosedCurve) -> float:
    """g-length of the polyline: Simpson's rule for alpha along every chord."""
    return curve_length_arrays(ctx.lam, c.r, c.x)


def gauss_area_signed(lam: float, r: np.ndarray, x: np.ndarray) -> float:
    """Signed line integral of (r - (lam-1)/r) dx, per-edge Simpson."""
    rn = np.roll(r, -1)
    rm = 0.5 * (r + rn)
    F0 = r - (lam - 1.0) / r
    Fm = rm - (lam - 1.0) / rm
    F = (F0 + 4.0 * Fm + np.roll(F0, -1)) / 6.0
    return float(np.sum(F * (np.roll(x, -1) - x)))


def gauss_area(ctx: MetricContext, c: ClosedCurve) -> float:
    """Enclosed Gauss area via Green's theorem with antiderivative r - (lam-1)/r."""
    ga = gauss_area_signed(ctx.lam, c.r, c.x)
    if ga < 0.0:
        raise OrientationError("negative enclosed area: curve is clockwise")
    return ga


def euclidean_area(c: ClosedCurve) -> float:
    r, x = c.r, c.x
    return 0.5 * float(np.sum(r * np.roll(x, -1) - np.roll(r, -1) * x))


# --- embeddedness ---------------------------------------------------------

@numba.njit(cache=True)
def _orient(ax, ay, bx, by, cx, cy):
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


@numba.njit(cache=True)
def _segments_cross(p0, p1, q0, q1):
    d1 = _orient(q0[0], q0[1], q1[0], q1[1], p0[0], p0[1])
    d2 = _orient(q0[0], q0[1], q1[0], q1[1], p1[0], p1[1])
    d3 = _orient(p0[0], p0[1], p1[0], p1[1], q0[0], q0[1])
    d4 = _orient(p0[0], p0[1], p1[0], p1[1], q1[0], q1[1])
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and ((d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)):
        return True
    # collinear / touching cases count as intersections
    if d1 == 0 and _on_segment(q0, q1, p0):
        return True
    if d2 == 0 and _on_segment(q0, q1, p1):
        return True
    if d3 == 0 and _on_segment(p0, p1, q0):
        return True
    if d4 == 0 and _on_segment(p0, p1, q1):
        return True
    return False


@numba.njit(cache=True)
def _on_segment(a, b, p):
    return (min(a[0], b[0]) <= p[0] <= max(a[0], b[0])) and (min(a[1], b[1]) <= p[1] <= max(a[1], b[1]))


@numba.njit(cache=True)
def _count_crossings_sweep(pts, stop_at_first):
    n = pts.shape[0]
    lo = np.empty(n)
    hi = np.empty(n)
    for i in range(n):
        j = (i + 1) % n
        lo[i] = min(pts[i, 0], pts[j, 0])
        hi[i] = max(pts[i, 0], pts[j, 0])
    order = np.argsort(lo)
    count = 0
    for a in range(n):
        i = order[a]
        i1 = (i + 1) % n
        ylo_i = min(pts[i, 1], pts[i1, 1])
        yhi_i = max(pts[i, 1], pts[i1, 1])
        for b in range(a + 1, n):
            k = order[b]
            if lo[k] > hi[i]:
                break
            if k == i1 or i == (k + 1) % n:
                continue
            k1 = (k + 1) % n
            if min(pts[k, 1], pts[k1, 1]) > yhi_i or max(pts[k, 1], pts[k1, 1]) < ylo_i:
                continue
            if _segments_cross(pts[i], pts[i1], pts[k], pts[k1]):
                count += 1
                if stop_at_first:
                    return count
    return count


def count_crossings_bruteforce(points: np.ndarray) -> int:
    """All-pairs test over non-adjacent edges; reference for :func:`is_simple`."""
    pts = np.asarray(points, float)
    n = len(pts)
    count = 0
    for i in range(n):
        for k in range(i + 1, n):
            if k == (i + 1) % n or i == (k + 1) % n:
                continue
            if _segments_cross(pts[i], pts[(i + 1) % n], pts[k], pts[(k + 1) % n]):
                count += 1
    return count


def is_simple(c) -> bool:
    """True iff no two non-adjacent edges meet (sort-and-sweep on r-extent)."""
    pts = c.points if isinstance(c, ClosedCurve) else np.ascontiguousarray(c, dtype=float)
    return _count_crossings_sweep(pts, True) == 0


def _fft_derivatives(f):
    n = len(f)
    k = np.fft.fftfreq(n, d=1.0 / n) * (2.0 * np.pi / n)
    fh = np.fft.fft(f)
    k1 = 1j * k
    if n % 2 == 0:
        k1[n // 2] = 0.0
    return np.fft.ifft(k1 * fh).real, np.fft.ifft(-(k * k) * fh).real


def spectral_geodesic_curvature(ctx: MetricContext, c: ClosedCurve) -> np.ndarray:
    """k_g with Fourier derivatives in the vertex index.

    Only meaningful for smooth curves with a smooth vertex distribution,
    where it is accurate far beyond the centered-difference version.
    """
    lam = ctx.lam
    r, x = c.r, c.x
    dr, d2r = _fft_derivatives(r)
    dx, d2x = _fft_derivatives(x)
    q = dr * dr + dx * dx
    speed = np.sqrt(q)
    grad = ((lam - 1.0) / r - 0.5 * r) * dx + 0.5 * x * dr
    bracket = ((dx * d2r - d2x * dr) / q - grad) / speed
    return bracket * np.exp(-log_conformal_factor(lam, r, x))


# --- resampling and symmetry ----------------------------------------------

def _closed_chord_param(pts):
    closed = np.vstack([pts, pts[:1]])
    seg = np.hypot(*np.diff(closed, axis=0).T)
    return closed, np.concatenate([[0.0], np.cumsum(seg)])


def resample_uniform(points: np.ndarray, n: int, method: str = "spline", oversample: int = 8) -> np.ndarray:
    """Resample a closed polyline to ``n`` points at uniform Euclidean arclength.

    The first output point coincides with the first input point. ``spline``
    uses a periodic cubic spline in chord length; ``linear`` stays on the polyline.
    """
    pts = np.asarray(points, float)
    closed, t = _closed_chord_param(pts)
    if method == "linear":
        s_target = np.arange(n) * (t[-1] / n)
        return np.column_stack([np.interp(s_target, t, closed[:, 0]), np.interp(s_target, t, closed[:, 1])])
    if method != "spline":
        raise ValueError(f"unknown resampling method {method!r}")
    spline = CubicSpline(t, closed, bc_type="periodic")
    tt = np.linspace(0.0, t[-1], oversample * len(pts) + 1)
    fine = spline(tt)
    s = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(fine, axis=0).T))])
    t_target = np.interp(np.arange(n) * (s[-1] / n), s, tt)
    out = spline(t_target)
    out[0] = pts[0]
    return out


def axis_crossings(points: np.ndarray) -> np.ndarray:
    """r-coordinates where the polyline meets x = 0, by linear interpolation, sorted."""
    pts = np.asarray(points, float)
    x0, x1 = pts[:, 1], np.roll(pts[:, 1], -1)
    r0, r1 = pts[:, 0], np.roll(pts[:, 0], -1)
    out = list(r0[x0 == 0.0])
    mask = (x0 * x1 < 0.0)
    t = x0[mask] / (x0[mask] - x1[mask])
    out.extend(r0[mask] + t * (r1[mask] - r0[mask]))
    return np.unique(np.asarray(out, float))


def start_at_right_axis_crossing(points: np.ndarray) -> np.ndarray:
    """Rotate the vertex list so it starts at the rightmost crossing of x = 0.

    The crossing point is inserted as vertex 0 when it is not already a vertex.
    """
    pts = np.asarray(points, float)
    x0, x1 = pts[:, 1], np.roll(pts[:, 1], -1)
    best_r, best = -np.inf, None
    for i in np.flatnonzero(x0 == 0.0):
        if pts[i, 0] > best_r:
            best_r, best = pts[i, 0], (i, None)
    for i in np.flatnonzero(x0 * x1 < 0.0):
        t = x0[i] / (x0[i] - x1[i])
        rc = pts[i, 0] + t * (pts[(i + 1) % len(pts), 0] - pts[i, 0])
        if rc > best_r:
            best_r, best = rc, (i, t)
    if best is None:
        raise SymmetryLossError("curve does not cross the r-axis")
    i, t = best
    if t is None:
        return np.roll(pts, -i, axis=0)
    head = np.array([[best_r, 0.0]])
    rest = np.roll(pts, -(i + 1), axis=0)
    return np.vstack([head, rest])


def symmetry_defect(points: np.ndarray) -> float:
    """Max vertex mismatch between the curve and its reflection, assuming vertex 0 on the axis."""
    pts = np.asarray(points, float)
    mirror = np.roll(pts[::-1], 1, axis=0)  # mirror[i] = pts[-i]
    return float(np.max(np.abs(pts - mirror * [1.0, -1.0])))


def symmetrize_indexwise(points: np.ndarray) -> np.ndarray:
    """Average vertex i with the reflection of vertex N-i (vertex 0 on the axis)."""
    pts = np.asarray(points, float)
    mirror = np.roll(pts[::-1], 1, axis=0)
    out = np.empty_like(pts)
    out[:, 0] = 0.5 * (pts[:, 0] + mirror[:, 0])
    out[:, 1] = 0.5 * (pts[:, 1] - mirror[:, 1])
    return out


def enforce_symmetry(c: ClosedCurve, threshold: float = 1e-3, method: str = "spline") -> ClosedCurve:
    """Average the curve with its mirror image across the r-axis.

    A curve that is already vertex-wise symmetric (vertex 0 on the axis) is
    averaged in place; otherwise it is first resampled from its rightmost
    axis crossing. Raises :class:`SymmetryLossError` when the asymmetry
    exceeds ``threshold`` times the curve diameter.
    """
    pts = c.points
    n = len(pts)
    if not (n % 2 == 0 and pts[0, 1] == 0.0 and symmetry_defect(pts) <= 1e-9 * max(1.0, c.diameter())):
        pts = resample_uniform(start_at_right_axis_crossing(pts), n + (n % 2), method=method)
    defect = 0.5 * symmetry_defect(pts)
    if defect > threshold * c.diameter():
        raise SymmetryLossError(f"asymmetry {defect:.3e} exceeds {threshold:g} x diameter")
    return ClosedCurve(symmetrize_indexwise(pts))


def max_asymmetry(c: ClosedCurve) -> float:
    """Vertex-wise asymmetry of a curve whose vertex 0 lies on the axis."""
    return symmetry_defect(c.points)


def densify(points: np.ndarray, refine: int) -> np.ndarray:
    """Insert ``refine - 1`` equally spaced points on every edge of the closed polyline."""
    pts = np.asarray(points, float)
    nxt = np.roll(pts, -1, axis=0)
    w = (np.arange(refine) / refine)[None, :, None]
    return (pts[:, None, :] * (1.0 - w) + nxt[:, None, :] * w).reshape(-1, 2)


def point_polyline_distance(p: np.ndarray, poly: np.ndarray, chunk: int = 512) -> np.ndarray:
    """Distance from each point in ``p`` to the closed polyline ``poly``."""
    a = np.asarray(poly, float)
    d = np.roll(a, -1, axis=0) - a
    dd = np.maximum(np.einsum("ij,ij->i", d, d), 1e-300)
    out = np.empty(len(p))
    for k in range(0, len(p), chunk):
        q = p[k:k + chunk, None, :] - a[None, :, :]
        t = np.clip(np.einsum("kij,ij->ki", q, d) / dd, 0.0, 1.0)
        diff = q - t[:, :, None] * d[None, :, :]
        out[k:k + chunk] = np.sqrt(np.min(np.einsum("kij,kij->ki", diff, diff), axis=1))
    return out


def hausdorff(a: ClosedCurve, b: ClosedCurve, refine: int = 8) -> float:
    """Symmetric Hausdorff distance between two closed polylines.

    Each polyline is sampled ``refine`` times per edge and distances are taken
    to the other polyline's segments, so the result is exact up to the
    sampling of the first argument in each direction.
    """
    pa, pb = densify(a.points, refine), densify(b.points, refine)
    return float(max(point_polyline_distance(pa, b.points).max(), point_polyline_distance(pb, a.points).max()))


# --- CSV ------------------------------------------------------------------

def write_curve_csv(path, c: ClosedCurve) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["r", "x"])
        for r, x in c.points:
            w.writerow([f"{r:.17g}", f"{x:.17g}"])


def read_curve_csv(path) -> ClosedCurve:
    with open(Path(path), newline="") as fh:
        rows = list(csv.DictReader(fh))
    return ClosedCurve(np.array([[float(row["r"]), float(row["x"])] for row in rows]))
