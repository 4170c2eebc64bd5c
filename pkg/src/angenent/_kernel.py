"""Compiled inner loops for the flow. Arrays are (r, x) vertex coordinates, cyclic."""
from __future__ import annotations

import math

import numba
import numpy as np

from .curve import _count_crossings_sweep

# status codes returned by advance_block
RUNNING = 0
FELL_LEFT = 1
ESCAPED_RIGHT = 2
BELOW_FLOOR = 3
REJECTED = 4


@numba.njit(cache=True)
def velocity(lam, r, x, v, nr, nx, ds):
    """Euclidean normal speed V_E = D(r) (k_E + grad-log-alpha term) along the right-hand normal."""
    n = r.shape[0]
    for i in range(n):
        ip = i + 1 if i + 1 < n else 0
        im = i - 1 if i > 0 else n - 1
        dr = 0.5 * (r[ip] - r[im])
        dx = 0.5 * (x[ip] - x[im])
        d2r = r[ip] - 2.0 * r[i] + r[im]
        d2x = x[ip] - 2.0 * x[i] + x[im]
        q = dr * dr + dx * dx
        s = math.sqrt(q)
        ri = r[i]
        bracket = ((dx * d2r - d2x * dr) / q - ((lam - 1.0) / ri - 0.5 * ri) * dx - 0.5 * x[i] * dr) / s
        v[i] = bracket * ri * ri / (ri * ri + lam - 1.0)
        nr[i] = dx / s
        nx[i] = -dr / s
        ds[i] = s


@numba.njit(cache=True)
def gauss_area(lam, r, x):
    n = r.shape[0]
    total = 0.0
    for i in range(n):
        j = i + 1 if i + 1 < n else 0
        rm = 0.5 * (r[i] + r[j])
        f = (r[i] - (lam - 1.0) / r[i]) + 4.0 * (rm - (lam - 1.0) / rm) + (r[j] - (lam - 1.0) / r[j])
        total += f * (x[j] - x[i]) / 6.0
    return total


@numba.njit(cache=True)
def length(lam, r, x):
    n = r.shape[0]
    total = 0.0
    a0 = math.exp((lam - 1.0) * math.log(r[0]) - 0.25 * (r[0] * r[0] + x[0] * x[0]))
    ai = a0
    for i in range(n):
        j = i + 1 if i + 1 < n else 0
        aj = a0 if j == 0 else math.exp((lam - 1.0) * math.log(r[j]) - 0.25 * (r[j] * r[j] + x[j] * x[j]))
        rm = 0.5 * (r[i] + r[j])
        xm = 0.5 * (x[i] + x[j])
        am = math.exp((lam - 1.0) * math.log(rm) - 0.25 * (rm * rm + xm * xm))
        total += math.hypot(r[j] - r[i], x[j] - x[i]) * (ai + 4.0 * am + aj) / 6.0
        ai = aj
    return total


@numba.njit(cache=True)
def correct_area(lam, r, x, nr, nx, ds, target, current):
    """Uniform Euclidean normal offset restoring the Gauss area to ``target``; returns the offset.

    One Newton step: the residual is second order in the (tiny) offset.
    """
    n = r.shape[0]
    wsum = 0.0
    for i in range(n):
        wsum += (1.0 + (lam - 1.0) / (r[i] * r[i])) * ds[i]
    delta = (target - current) / wsum
    for i in range(n):
        r[i] += delta * nr[i]
        x[i] += delta * nx[i]
    return delta


@numba.njit(cache=True)
def symmetrize(r, x):
    """Average vertex i with the mirror of vertex N-i; vertex 0 lands on x = 0."""
    n = r.shape[0]
    x[0] = 0.0
    for i in range(1, n // 2 + 1):
        j = n - i
        rr = 0.5 * (r[i] + r[j])
        xx = 0.5 * (x[i] - x[j])
        r[i] = rr
        r[j] = rr
        x[i] = xx
        x[j] = -xx
    if n % 2 == 0:
        x[n // 2] = 0.0


@numba.njit(cache=True)
def stable_dt(lam, r, x, cfl):
    n = r.shape[0]
    h2 = np.inf
    dmax = 0.0
    for i in range(n):
        j = i + 1 if i + 1 < n else 0
        e = (r[j] - r[i]) ** 2 + (x[j] - x[i]) ** 2
        if e < h2:
            h2 = e
        d = r[i] * r[i] / (r[i] * r[i] + lam - 1.0)
        if d > dmax:
            dmax = d
    return cfl * h2 / dmax


@numba.njit(cache=True)
def advance_block(lam, r, x, nsteps, cfl, ga_target, area_correction, do_symmetry, symmetry_every,
                  check_simple_every, step0, max_halvings, length_tol, r_cyl, r_floor, t_max, t0, stats):
    """Take up to ``nsteps`` accepted Euler steps in place.

    ``stats`` accumulates: [0] max relative length increase, [1] rejected trials,
    [2] sum |raw Gauss-area change|, [3] max |raw Gauss-area change|, [4] sum |area offsets|.
    Returns (steps_taken, time, status).
    """
    n = r.shape[0]
    v = np.empty(n)
    nr = np.empty(n)
    nx = np.empty(n)
    ds = np.empty(n)
    rn = np.empty(n)
    xn = np.empty(n)
    pts = np.empty((n, 2))
    t = t0
    length0 = length(lam, r, x)
    ga0 = gauss_area(lam, r, x)
    for k in range(nsteps):
        if t >= t_max:
            return k, t, RUNNING
        velocity(lam, r, x, v, nr, nx, ds)
        dt = stable_dt(lam, r, x, cfl)
        if t + dt > t_max:
            dt = t_max - t
        accepted = False
        for _ in range(max_halvings + 1):
            for i in range(n):
                rn[i] = r[i] + dt * v[i] * nr[i]
                xn[i] = x[i] + dt * v[i] * nx[i]
            ok = True
            for i in range(n):
                if rn[i] <= 0.0:
                    ok = False
                    break
            if ok:
                ga1 = gauss_area(lam, rn, xn)
                raw = ga1 - ga0
                offset = 0.0
                if area_correction:
                    offset = correct_area(lam, rn, xn, nr, nx, ds, ga_target, ga1)
                    ga1 = ga_target
                length1 = length(lam, rn, xn)
                rel = (length1 - length0) / length0
                if rel > length_tol:
                    ok = False
                elif (step0 + k) % check_simple_every == 0:
                    for i in range(n):
                        pts[i, 0] = rn[i]
                        pts[i, 1] = xn[i]
                    if _count_crossings_sweep(pts, True) > 0:
                        ok = False
            if ok:
                accepted = True
                break
            stats[1] += 1.0
            dt *= 0.5
        if not accepted:
            return k, t, REJECTED
        if rel > stats[0]:
            stats[0] = rel
        stats[2] += abs(raw)
        if abs(raw) > stats[3]:
            stats[3] = abs(raw)
        stats[4] += abs(offset)
        for i in range(n):
            r[i] = rn[i]
            x[i] = xn[i]
        if do_symmetry and (step0 + k + 1) % symmetry_every == 0:
            symmetrize(r, x)
        t += dt
        # symmetrizing an exactly symmetric update changes neither quantity beyond rounding
        length0 = length1
        ga0 = ga1
        rmin = r[0]
        rmax = r[0]
        for i in range(n):
            if r[i] < rmin:
                rmin = r[i]
            if r[i] > rmax:
                rmax = r[i]
        if rmin < r_floor:
            return k + 1, t, BELOW_FLOOR
        if rmax < r_cyl:
            return k + 1, t, FELL_LEFT
        if rmin > r_cyl:
            return k + 1, t, ESCAPED_RIGHT
    return nsteps, t, RUNNING
