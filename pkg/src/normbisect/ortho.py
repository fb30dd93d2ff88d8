"""Convex analysis along lines: minimization, boundary crossings, orthogonality.

All scans come in a batched form (``scan_lines``, ``boundary_roots``) working on
``k`` lines at once, plus the scalar wrappers used interactively.  Batching is
what makes mesh-wide classification affordable: each iteration evaluates the
gauge on one ``(k, n)`` array.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .body import BodyError, ConvexBody

__all__ = [
    "ConvexityError",
    "LineScan",
    "min_along_line",
    "scan_lines",
    "line_boundary_roots",
    "boundary_roots",
    "birkhoff_orthogonal",
    "birkhoff_mask",
    "isosceles_orthogonal",
    "directional_derivative",
    "EPS_T",
    "EPS_FLAT",
    "EPS_B",
]

EPS_T = 1e-10
EPS_FLAT = 1e-9
EPS_B = 1e-9
_INVGOLD = (np.sqrt(5.0) - 1.0) / 2.0


class ConvexityError(BodyError):
    """A line scan saw a midpoint-convexity violation; the body data is broken."""


@dataclass(frozen=True)
class LineScan:
    """Minimizer data of ``t -> gauge(base + t * direction)``.

    ``[t_lo, t_hi]`` is the set where the minimum is attained: a genuine
    interval when the line runs along a flat piece of a level set, a single
    point otherwise.
    """

    base: np.ndarray
    direction: np.ndarray
    t_lo: float
    t_hi: float
    min_value: float

    @property
    def width(self) -> float:
        return self.t_hi - self.t_lo

    @property
    def t_min(self) -> float:
        return 0.5 * (self.t_lo + self.t_hi)


def _line_gauge(body: ConvexBody, P: np.ndarray, D: np.ndarray):
    def g(t, idx=None):
        if idx is None:
            return body.gauge(P + t[:, None] * D)
        return body.gauge(P[idx] + t[:, None] * D[idx])
    return g


def _bisect(pred, lo, hi, rtol, max_iter=200):
    """Shrink ``[lo, hi]`` keeping ``pred(lo)`` true and ``pred(hi)`` false (elementwise)."""
    lo = lo.copy()
    hi = hi.copy()
    for _ in range(max_iter):
        active = np.abs(hi - lo) > rtol * (1.0 + np.maximum(np.abs(lo), np.abs(hi)))
        if not active.any():
            break
        idx = np.flatnonzero(active)
        mid = 0.5 * (lo[idx] + hi[idx])
        ok = pred(mid, idx)
        lo[idx[ok]] = mid[ok]
        hi[idx[~ok]] = mid[~ok]
    return lo, hi


def _expand(pred_inside, start, step0, sign, max_iter=80):
    """Walk from ``start`` by doubling steps until ``pred_inside`` fails.

    Returns the last inside point and the first outside point.
    """
    inner = start.copy()
    step = step0.copy()
    outer = start + sign * step
    pending = np.ones(len(start), dtype=bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(pending)
        if idx.size == 0:
            break
        inside = pred_inside(outer[idx], idx)
        moved = idx[inside]
        inner[moved] = outer[moved]
        step[moved] *= 2.0
        outer[moved] = inner[moved] + sign * step[moved]
        pending[idx[~inside]] = False
    if pending.any():
        raise ConvexityError("line scan failed to leave a sublevel set; gauge not coercive")
    return inner, outer


def scan_lines(body: ConvexBody, P, D, eps_t: float = EPS_T, eps_flat: float = EPS_FLAT,
               guard: bool = True):
    """Batched ``min_along_line``; returns ``(t_lo, t_hi, min_value)`` arrays."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    D = np.atleast_2d(np.asarray(D, dtype=float))
    P, D = np.broadcast_arrays(P, D)
    k = len(P)
    if np.any(np.all(D == 0.0, axis=1)):
        raise ValueError("line direction must be nonzero")
    g = _line_gauge(body, P, D)

    # bracket: g(a) >= g(m) <= g(b), doubling outward from {-1, 0, 1}
    a, m, b = -np.ones(k), np.zeros(k), np.ones(k)
    ga, gm, gb = g(a), g(m), g(b)
    for _ in range(200):
        left = ga < gm
        right = (gb < gm) & ~left
        if not (left.any() or right.any()):
            break
        i = np.flatnonzero(left)
        if i.size:
            b[i], gb[i] = m[i], gm[i]
            m[i], gm[i] = a[i], ga[i]
            a[i] = m[i] - 2.0 * (b[i] - m[i])
            ga[i] = g(a[i], i)
        i = np.flatnonzero(right)
        if i.size:
            a[i], ga[i] = m[i], gm[i]
            m[i], gm[i] = b[i], gb[i]
            b[i] = m[i] + 2.0 * (m[i] - a[i])
            gb[i] = g(b[i], i)
    else:
        raise ConvexityError("failed to bracket a line minimum")

    if guard:
        mid = 0.5 * (a + b)
        scale = np.maximum(1.0, np.maximum(ga, gb))
        if np.any(g(mid) > 0.5 * (ga + gb) + body.gauge_tol * scale):
            raise ConvexityError("midpoint convexity violated along a line scan")

    # golden section on [a, b]
    x1 = b - _INVGOLD * (b - a)
    x2 = a + _INVGOLD * (b - a)
    f1, f2 = g(x1), g(x2)
    for _ in range(200):
        active = (b - a) > eps_t * (1.0 + np.abs(m))
        if not active.any():
            break
        i = np.flatnonzero(active)
        go_left = f1[i] <= f2[i]
        j = i[go_left]
        if j.size:
            b[j] = x2[j]
            x2[j], f2[j] = x1[j], f1[j]
            x1[j] = b[j] - _INVGOLD * (b[j] - a[j])
            f1[j] = g(x1[j], j)
        j = i[~go_left]
        if j.size:
            a[j] = x1[j]
            x1[j], f1[j] = x2[j], f2[j]
            x2[j] = a[j] + _INVGOLD * (b[j] - a[j])
            f2[j] = g(x2[j], j)
    t_star = np.where(f1 <= f2, x1, x2)
    g_star = np.minimum(f1, f2)
    # the bracket interior point may still be the best sample seen
    better = gm < g_star
    t_star = np.where(better, m, t_star)
    g_star = np.where(better, gm, g_star)

    # sublevel interval {g <= min + eps_flat} around the minimizer
    tol = eps_flat * np.maximum(1.0, g_star)

    def inside(t, idx):
        return g(t, idx) <= g_star[idx] + tol[idx]

    step0 = 1e-6 * (1.0 + np.abs(t_star))
    lin, lout = _expand(inside, t_star, step0, -1.0)
    rin, rout = _expand(inside, t_star, step0, +1.0)
    _, lo = _bisect(lambda t, idx: ~inside(t, idx), lout, lin, 1e-14)
    hi, _ = _bisect(inside, rin, rout, 1e-14)

    # a genuine flat has the minimum value at interior points; a curved
    # minimum only dips below min + eps_flat near its vertex
    w = hi - lo
    q1, q3 = lo + 0.25 * w, hi - 0.25 * w
    flat_tol = 1e-3 * tol
    genuine = (w > 0) & (g(q1) <= g_star + flat_tol) & (g(q3) <= g_star + flat_tol)
    centre = 0.5 * (lo + hi)
    t_lo = np.where(genuine, lo, centre)
    t_hi = np.where(genuine, hi, centre)
    g_c = g(centre)
    min_value = np.where(genuine, g_star, np.minimum(g_star, g_c))
    return t_lo, t_hi, min_value


def min_along_line(body: ConvexBody, p, d, eps_t: float = EPS_T,
                   eps_flat: float = EPS_FLAT) -> LineScan:
    """Global minimizer data of the convex function ``t -> gauge(p + t d)``."""
    p = body._coerce(p)
    d = body._coerce(d)
    if not np.any(d):
        raise ValueError("line direction must be nonzero")
    lo, hi, mv = scan_lines(body, p[None], d[None], eps_t, eps_flat)
    return LineScan(p.copy(), d.copy(), float(lo[0]), float(hi[0]), float(mv[0]))


def boundary_roots(body: ConvexBody, P, D, eps_g: float | None = None,
                   rtol: float = 1e-12):
    """Batched boundary crossings of the lines ``P + t D``.

    Returns ``(status, t_minus, t_plus)`` where status is 0 (line misses the
    body), 1 (tangency: ``[t_minus, t_plus]`` is the contact interval) or 2
    (two transversal crossings).
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    D = np.atleast_2d(np.asarray(D, dtype=float))
    P, D = np.broadcast_arrays(P, D)
    k = len(P)
    eps_g = body.gauge_tol if eps_g is None else eps_g
    t_lo, t_hi, mv = scan_lines(body, P, D)
    status = np.where(mv > 1.0 + eps_g, 0, np.where(np.abs(mv - 1.0) <= eps_g, 1, 2))
    t_minus = np.full(k, np.nan)
    t_plus = np.full(k, np.nan)
    t_minus[status == 1] = t_lo[status == 1]
    t_plus[status == 1] = t_hi[status == 1]
    idx = np.flatnonzero(status == 2)
    if idx.size:
        g = _line_gauge(body, P[idx], D[idx])

        def inside(t, j):
            return g(t, j) <= 1.0

        ones = np.ones(idx.size)
        lin, lout = _expand(inside, t_lo[idx], ones, -1.0)
        rin, rout = _expand(inside, t_hi[idx], ones, +1.0)
        lo_in, _ = _bisect(inside, lin, lout, rtol)
        hi_in, _ = _bisect(inside, rin, rout, rtol)
        t_minus[idx] = lo_in
        t_plus[idx] = hi_in
    return status, t_minus, t_plus


def line_boundary_roots(body: ConvexBody, p, d) -> list[tuple[float, float]]:
    """Points (or a contact interval) where ``gauge(p + t d) = 1``.

    Returns ``[]`` when the line misses the body, ``[(lo, hi)]`` for a tangency
    and ``[(t-, t-), (t+, t+)]`` for a transversal chord.
    """
    p = body._coerce(p)
    d = body._coerce(d)
    if not np.any(d):
        raise ValueError("line direction must be nonzero")
    status, tm, tp = boundary_roots(body, p[None], d[None])
    s = int(status[0])
    if s == 0:
        return []
    if s == 1:
        return [(float(tm[0]), float(tp[0]))]
    return [(float(tm[0]), float(tm[0])), (float(tp[0]), float(tp[0]))]


def birkhoff_mask(body: ConvexBody, X, Y, eps_b: float = EPS_B) -> np.ndarray:
    """Batched Birkhoff test ``min_t gauge(x + t y) >= gauge(x)`` (relative tolerance)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    X, Y = np.broadcast_arrays(X, Y)
    _, _, mv = scan_lines(body, X, Y)
    gx = body.gauge(X)
    return mv >= gx * (1.0 - eps_b)


def birkhoff_orthogonal(body: ConvexBody, x, y, eps_b: float = EPS_B) -> bool:
    """``x`` is Birkhoff orthogonal to ``y``: ``||x + t y|| >= ||x||`` for all real t.

    The tolerance is relative to ``gauge(x)`` so the verdict is invariant under
    positive rescaling of either argument.
    """
    x = body._coerce(x)
    y = body._coerce(y)
    if not np.any(x):
        raise ValueError("x must be nonzero")
    if not np.any(y):
        return True
    return bool(birkhoff_mask(body, x[None], y[None], eps_b)[0])


def isosceles_orthogonal(body: ConvexBody, x, y, eps_b: float = EPS_B) -> bool:
    """``||x + y|| = ||x - y||`` up to ``eps_b * max(1, ||x + y||)``."""
    x = body._coerce(x)
    y = body._coerce(y)
    a = float(body.gauge(x + y))
    b = float(body.gauge(x - y))
    return abs(a - b) <= eps_b * max(1.0, a)


def directional_derivative(body: ConvexBody, y, x, side: int = +1, step: float = 1e-6):
    """One-sided derivative of the gauge at ``y`` in direction ``side * x``.

    Forward difference at ``step`` with one Richardson extrapolation against
    ``step / 2``.  Works on batches of ``y``.
    """
    y = body._coerce(y)
    x = body._coerce(x)
    sgn = 1.0 if side >= 0 else -1.0
    g0 = body.gauge(y)
    d1 = (body.gauge(y + sgn * step * x) - g0) / step
    h = 0.5 * step
    d2 = (body.gauge(y + sgn * h * x) - g0) / h
    out = 2.0 * d2 - d1
    return float(out) if np.ndim(out) == 0 else out
