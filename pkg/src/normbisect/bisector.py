"""Rays against the bisector B(-x, x): classification, sampling and the map Phi.

For a unit direction ``y`` the signed difference
``f(t) = gauge(t y + x) - gauge(t y - x)`` decides everything: ``y`` is a
bisector direction if ``f`` vanishes for some ``t > 0``, LEFT if ``f < 0`` on
the whole ray and RIGHT if ``f > 0``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .body import ConvexBody, boundary_point
from .ortho import EPS_B, _bisect, _expand, scan_lines

__all__ = [
    "Label",
    "ClassifyParams",
    "RayClassification",
    "BisectorPoint",
    "BisectorCloud",
    "ResolutionError",
    "delta",
    "classify_direction",
    "classify_directions",
    "bisector_points",
    "phi",
    "bisector_from_chord",
    "sample_bisector",
    "bisector_on_lines",
    "radial_offsets",
]


_WITNESS_STEPS = (-1.0, -1e-2, -1e-4, -1e-6, 1e-6, 1e-4, 1e-2, 1.0)


class Label(enum.IntEnum):
    LEFT = -1
    BISECTOR = 0
    RIGHT = 1
    UNRESOLVED = 9

    def mirror(self) -> "Label":
        if self in (Label.LEFT, Label.RIGHT):
            return Label(-int(self))
        return self


class ResolutionError(RuntimeError):
    """Classification could not be certified at the configured resolution."""


@dataclass(frozen=True)
class ClassifyParams:
    t0: float = 1e-3
    ratio: float = 1.25
    t_max: float = 1e4
    eps_f: float = 1e-9
    eps_asym: float = 1e-6
    eps_t: float = 1e-10
    eps_b: float = EPS_B
    # |t| below which t = 0 counts as an end of the contact interval
    eps_edge: float = 1e-8

    def grid(self) -> np.ndarray:
        k = int(np.ceil(np.log(self.t_max / self.t0) / np.log(self.ratio)))
        t = self.t0 * self.ratio ** np.arange(k + 1)
        t[-1] = self.t_max
        return t


@dataclass(frozen=True)
class RayClassification:
    direction: np.ndarray
    label: Label
    intervals: tuple[tuple[float, float], ...] = ()
    ideal_limit: bool = False
    asymptote: float = float("nan")
    note: str = ""

    @property
    def root_count(self) -> int:
        return len(self.intervals)


@dataclass(frozen=True)
class BisectorPoint:
    kind: str  # "ORDINARY" | "IDEAL"
    z: np.ndarray | None = None
    t_z: float | None = None
    direction: np.ndarray | None = None

    @classmethod
    def ordinary(cls, z, t_z: float) -> "BisectorPoint":
        return cls("ORDINARY", z=np.asarray(z, dtype=float), t_z=float(t_z))

    @classmethod
    def ideal(cls, y) -> "BisectorPoint":
        return cls("IDEAL", direction=np.asarray(y, dtype=float))


@dataclass
class BisectorCloud:
    """Batch of bisector points: ordinary ``z`` with ``t_z`` plus ideal directions."""

    n: int
    z: np.ndarray = None
    t_z: np.ndarray = None
    ideal: np.ndarray = None
    source: np.ndarray = None  # index of the generating direction/offset per ordinary point
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.z is None:
            self.z = np.empty((0, self.n))
        if self.t_z is None:
            self.t_z = np.empty(0)
        if self.ideal is None:
            self.ideal = np.empty((0, self.n))
        if self.source is None:
            self.source = np.full(len(self.z), -1)

    def __len__(self) -> int:
        return len(self.z) + len(self.ideal)

    def extend(self, other: "BisectorCloud") -> "BisectorCloud":
        return BisectorCloud(
            self.n,
            np.vstack([self.z, other.z]),
            np.concatenate([self.t_z, other.t_z]),
            np.vstack([self.ideal, other.ideal]),
            np.concatenate([self.source, other.source]),
        )

    def points(self) -> list[BisectorPoint]:
        out = [BisectorPoint.ordinary(z, t) for z, t in zip(self.z, self.t_z)]
        out += [BisectorPoint.ideal(y) for y in self.ideal]
        return out

    def phi(self, body: ConvexBody) -> np.ndarray:
        """Images under Phi, ordinary points first."""
        ords = self.z / self.t_z[:, None] if len(self.z) else self.z
        ideals = boundary_point(body, self.ideal) if len(self.ideal) else self.ideal
        return np.vstack([ords, ideals])


def delta(body: ConvexBody, x, y, t):
    """``f(t) = gauge(t y + x) - gauge(t y - x)``; broadcasts over ``t`` and ``y``."""
    x = body._coerce(x)
    y = body._coerce(y)
    t = np.asarray(t, dtype=float)[..., None]
    out = body.gauge(t * y + x) - body.gauge(t * y - x)
    return float(out) if np.ndim(out) == 0 else out


def _delta_rows(body, x, Y, T):
    """f for row-wise pairs ``(Y[i], T[i])``."""
    return body.gauge(T[:, None] * Y + x) - body.gauge(T[:, None] * Y - x)


def _polytope_gap_samples(body: ConvexBody, x, Y, T, F, Ap, Am, params: ClassifyParams,
                          max_rounds: int = 64):
    """Extra samples of ``f`` inside grid gaps that might hide a sign excursion.

    Both terms of ``f`` are 1-Lipschitz in ``t`` (``gauge(y) = 1``), so a gap whose
    end values share a sign and satisfy ``|f_a| + |f_b| > 2 (b - a)`` holds no root.
    For polytopes a gap is also safe when the same facet attains both gauges at
    its ends, since ``f`` is then affine across it.  Remaining gaps are bisected.
    ``Ap``, ``Am`` are the active facets of ``t y + x`` and ``t y - x`` on the grid.
    Returns ``(rows, t, f)``, or ``None`` when no gap needed a sample.
    """
    eps_f = params.eps_f
    S = np.where(np.abs(F) <= eps_f, 0, np.sign(F))

    def open_gaps(fa, fb, sa, sb, pa, pb, ma, mb, a, b):
        return ((sa == sb) & (sa != 0) & ((pa != pb) | (ma != mb))
                & (np.abs(fa) + np.abs(fb) <= 2.0 * (b - a) + 2.0 * eps_f)
                & (b - a > params.eps_t * (1.0 + b)))

    i, k = np.nonzero(open_gaps(F[:, :-1], F[:, 1:], S[:, :-1], S[:, 1:], Ap[:, :-1],
                                Ap[:, 1:], Am[:, :-1], Am[:, 1:], T[:-1], T[1:]))
    row, a, b = i, T[k], T[k + 1]
    fa, fb, sg = F[i, k], F[i, k + 1], S[i, k]
    pa, pb, ma, mb = Ap[i, k], Ap[i, k + 1], Am[i, k], Am[i, k + 1]
    rows, ts, fs = [], [], []
    for _ in range(max_rounds):
        if row.size == 0:
            break
        m = 0.5 * (a + b)
        P = m[:, None] * Y[row]
        g1, pm = body.gauge_facet(P + x)
        g2, mm = body.gauge_facet(P - x)
        fm = g1 - g2
        rows.append(row)
        ts.append(m)
        fs.append(fm)
        sm = np.where(np.abs(fm) <= eps_f, 0, np.sign(fm))
        go = sm == sg  # a zero or a sign flip is left to the bracketing stage
        left = go & open_gaps(fa, fm, sg, sm, pa, pm, ma, mm, a, m)
        right = go & open_gaps(fm, fb, sm, sg, pm, pb, mm, mb, m, b)
        row = np.concatenate([row[left], row[right]])
        a, b = np.concatenate([a[left], m[right]]), np.concatenate([m[left], b[right]])
        fa, fb = np.concatenate([fa[left], fm[right]]), np.concatenate([fm[left], fb[right]])
        sg = np.concatenate([sg[left], sg[right]])
        pa, pb = np.concatenate([pa[left], pm[right]]), np.concatenate([pm[left], pb[right]])
        ma, mb = np.concatenate([ma[left], mm[right]]), np.concatenate([mm[left], mb[right]])
    if not rows:
        return None
    return np.concatenate(rows), np.concatenate(ts), np.concatenate(fs)


def _merge_samples(T, F, extra):
    """Per-row sorted sample grid; rows are padded by repeating the last sample."""
    N, K = F.shape
    if extra is None:
        return np.broadcast_to(T, (N, K)), F
    rows, ts, fs = extra
    per_row = np.bincount(rows, minlength=N)
    K2 = K + int(per_row.max())
    TT = np.empty((N, K2))
    FF = np.empty((N, K2))
    TT[:, :K] = T
    FF[:, :K] = F
    TT[:, K:] = T[-1]
    FF[:, K:] = F[:, -1:]
    order = np.argsort(rows, kind="stable")
    rows, ts, fs = rows[order], ts[order], fs[order]
    slot = np.arange(len(rows)) - np.repeat(np.cumsum(per_row) - per_row, per_row)
    TT[rows, K + slot] = ts
    FF[rows, K + slot] = fs
    idx = np.argsort(TT, axis=1, kind="stable")
    return np.take_along_axis(TT, idx, axis=1), np.take_along_axis(FF, idx, axis=1)


def classify_directions(body: ConvexBody, x, Y, params: ClassifyParams | None = None
                        ) -> list[RayClassification]:
    """Classify many unit directions ``Y`` (shape ``(N, n)``) at once."""
    params = params or ClassifyParams()
    x = body._coerce(x)
    Y = np.atleast_2d(body._coerce(Y))
    N = len(Y)
    T = params.grid()
    K = len(T)
    R = T[None, :, None] * Y[:, None, :]
    gp, Ap = body.gauge_facet(R + x)
    gm, Am = body.gauge_facet(R - x)
    F = (gp - gm).reshape(N, K)
    if Ap is not None and N:
        T, F = _merge_samples(T, F, _polytope_gap_samples(body, x, Y, T, F, Ap, Am, params))
    else:
        T = np.broadcast_to(T, (N, K))
    K = T.shape[1]
    Z = np.abs(F) <= params.eps_f
    S = np.where(Z, 0, np.sign(F)).astype(int)

    def f_at(t, rows):
        return _delta_rows(body, x, Y[rows], t)

    # transversal roots between neighbouring nonzero samples of opposite sign
    ri, rk = np.nonzero(S[:, :-1] * S[:, 1:] < 0)
    roots = np.empty(0)
    if ri.size:
        s_lo = S[ri, rk]

        def same_as_lo(t, j):
            return f_at(t, ri[j]) * s_lo[j] > 0

        lo, hi = _bisect(same_as_lo, T[ri, rk], T[ri, rk + 1], params.eps_t)
        roots = 0.5 * (lo + hi)

    # maximal runs of |f| <= eps_f, refined at both ends
    pad = np.zeros((N, 1), dtype=bool)
    edges = np.diff(np.hstack([pad, Z, pad]).astype(np.int8), axis=1)
    si, sk = np.nonzero(edges == 1)   # run starts at sk
    ei, ek = np.nonzero(edges == -1)  # run ends at ek - 1
    run_lo = np.where(sk == 0, 0.0, T[si, sk])
    run_hi = np.where(ek == K, np.inf, T[ei, np.minimum(ek - 1, K - 1)])
    inner = np.flatnonzero(sk > 0)
    if inner.size:
        rows = si[inner]

        def off_zero(t, j):
            return np.abs(f_at(t, rows[j])) > params.eps_f

        _, b = _bisect(off_zero, T[rows, sk[inner] - 1], T[rows, sk[inner]], params.eps_t)
        run_lo[inner] = b
    inner = np.flatnonzero(ek < K)
    if inner.size:
        rows = ei[inner]

        def on_zero(t, j):
            return np.abs(f_at(t, rows[j])) <= params.eps_f

        a, _ = _bisect(on_zero, T[rows, ek[inner] - 1], T[rows, ek[inner]], params.eps_t)
        run_hi[inner] = a

    intervals: list[list[tuple[float, float]]] = [[] for _ in range(N)]
    for i, r in zip(ri, roots):
        intervals[i].append((float(r), float(r)))
    for i, a, b in zip(si, run_lo, run_hi):
        intervals[i].append((float(a), float(b)))
    for iv in intervals:
        iv.sort()

    has_sol = np.array([bool(iv) for iv in intervals], dtype=bool)
    tail = F[:, -1] if K else np.zeros(N)
    asym = np.abs(tail) <= params.eps_asym

    # ideal points: directions with no ordinary root that are Birkhoff
    # orthogonal to x and sit at an end of their contact segment
    ideal = np.zeros(N, dtype=bool)
    unresolved = np.zeros(N, dtype=bool)
    cand = np.flatnonzero(~has_sol)
    if cand.size:
        # a point of the line below the threshold is a witness against y _|_B x
        gy = body.gauge(Y[cand])
        pre = np.ones(cand.size, dtype=bool)
        for step in _WITNESS_STEPS:
            g_s = body.gauge(Y[cand] + step * x)
            pre &= g_s >= gy * (1.0 - params.eps_b)
        check = cand[pre | asym[cand]]
        if check.size:
            t_lo, t_hi, mv = scan_lines(body, Y[check], np.broadcast_to(x, Y[check].shape))
            gy = body.gauge(Y[check])
            birk = mv >= gy * (1.0 - params.eps_b)
            e = params.eps_edge
            at_end = (np.abs(t_lo) <= e) | (np.abs(t_hi) <= e)
            # y must sit in its own contact set: near smooth points the value test
            # passes at O(s^2) while the minimizer is O(s) away from y
            contact = (t_lo <= e) & (t_hi >= -e)
            a = asym[check]
            ideal[check[birk & (at_end | (a & contact))]] = True
            unresolved[check[a & ~birk]] = True

    out = []
    for i in range(N):
        y = Y[i]
        if has_sol[i]:
            rc = RayClassification(y, Label.BISECTOR, tuple(intervals[i]), False, float(tail[i]))
        elif ideal[i]:
            rc = RayClassification(y, Label.BISECTOR, (), True, float(tail[i]))
        elif unresolved[i]:
            rc = RayClassification(y, Label.UNRESOLVED, (), False, float(tail[i]),
                                   note="f(t_max) ~ 0 but y is not Birkhoff orthogonal to x")
        else:
            signs = S[i][S[i] != 0]
            if signs.size and np.any(signs != signs[0]):
                rc = RayClassification(y, Label.UNRESOLVED, (), False, float(tail[i]),
                                       note="sign change without a refinable bracket")
            else:
                s = signs[0] if signs.size else np.sign(tail[i])
                rc = RayClassification(y, Label.RIGHT if s > 0 else Label.LEFT, (), False,
                                       float(tail[i]))
        out.append(rc)
    return out


def classify_direction(body: ConvexBody, x, y, params: ClassifyParams | None = None
                       ) -> RayClassification:
    """Label one unit direction ``y`` as BISECTOR, LEFT, RIGHT (or UNRESOLVED)."""
    return classify_directions(body, x, np.asarray(y, dtype=float)[None], params)[0]


def _interval_samples(lo: float, hi: float, k: int) -> np.ndarray:
    # uniform in u = t / (1 + t), which keeps unbounded intervals finite
    u_lo = lo / (1.0 + lo)
    u_hi = 1.0 if np.isinf(hi) else hi / (1.0 + hi)
    u = u_lo + (np.arange(k) + 0.5) * (u_hi - u_lo) / k
    return u / (1.0 - u)


def _ray_parameters(rc: RayClassification, k: int) -> np.ndarray:
    points = [a for a, b in rc.intervals if a == b]
    spans = [(a, b) for a, b in rc.intervals if a != b]
    ts = list(points)
    if spans:
        per = max(1, (k - len(points)) // len(spans)) if k > len(points) else 1
        for a, b in spans:
            ts.extend(_interval_samples(a, b, per))
    ts = np.asarray(ts, dtype=float)
    return ts[ts > 0]


def bisector_points(body: ConvexBody, x, rc: RayClassification, k: int = 3
                    ) -> list[BisectorPoint]:
    """Up to ``k`` bisector points on the ray of a BISECTOR-labelled direction."""
    if rc.label != Label.BISECTOR:
        raise ValueError(f"direction is labelled {rc.label.name}, not BISECTOR")
    if rc.ideal_limit:
        return [BisectorPoint.ideal(rc.direction)]
    x = body._coerce(x)
    ts = _ray_parameters(rc, k)
    zs = ts[:, None] * rc.direction
    tz = body.gauge(zs - x)
    return [BisectorPoint.ordinary(z, t) for z, t in zip(zs, tz)]


def phi(body: ConvexBody, x, p: BisectorPoint) -> np.ndarray:
    """Bounded representation of one bisector point: ``z / gauge(z - x)`` or the ideal direction."""
    if p.kind == "IDEAL":
        return boundary_point(body, p.direction)
    x = body._coerce(x)
    return p.z / float(body.gauge(p.z - x))


def bisector_from_chord(chord, x) -> BisectorPoint:
    """Inverse of Phi on chord midpoints: ``z = m / s`` with ``t_z = 1 / s``."""
    s = float(chord.half_length)
    if s <= 0.0:
        raise ValueError("tangency chord (zero half-length) has no ordinary preimage")
    return BisectorPoint.ordinary(np.asarray(chord.midpoint) / s, 1.0 / s)


def sample_bisector(body: ConvexBody, x, mesh, k: int = 3) -> BisectorCloud:
    """Bisector points on all BISECTOR-labelled rays of a classified mesh."""
    x = body._coerce(x)
    zs, srcs, ideals = [], [], []
    for i, rc in enumerate(mesh.records):
        if rc is None or rc.label != Label.BISECTOR:
            continue
        if rc.ideal_limit:
            ideals.append(rc.direction)
            continue
        ts = _ray_parameters(rc, k)
        zs.append(ts[:, None] * rc.direction)
        srcs.append(np.full(len(ts), i))
    z = np.vstack(zs) if zs else np.empty((0, body.n))
    tz = body.gauge(z - x) if len(z) else np.empty(0)
    ideal = np.array(ideals).reshape(-1, body.n)
    src = np.concatenate(srcs) if srcs else np.empty(0, dtype=int)
    return BisectorCloud(body.n, z, tz, ideal, src)


def radial_offsets(basis: np.ndarray, spacing: float) -> np.ndarray:
    """Offsets in span(basis) on rays ``r * w``, with ``r = u / (1 - u)`` and ``u`` on a grid.

    The angular step and the step in ``u`` both equal ``spacing``; ``u`` stops
    one step short of 1, so the farthest offsets sit at radius ~ 1 / spacing.
    """
    m = basis.shape[0]
    u = np.arange(0.0, 1.0 - spacing / 2, spacing)
    r = u / (1.0 - u)
    if m == 1:
        dirs = np.array([[1.0], [-1.0]])
    elif m == 2:
        k = max(8, int(np.ceil(2 * np.pi / spacing)))
        ang = 2 * np.pi * np.arange(k) / k
        dirs = np.column_stack([np.cos(ang), np.sin(ang)])
    else:
        rng = np.random.default_rng(0)
        k = max(16, int(np.ceil((2 / spacing) ** (m - 1))))
        dirs = rng.normal(size=(k, m))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    coords = (r[1:, None, None] * dirs[None]).reshape(-1, m)
    coords = np.vstack([np.zeros((1, m)), coords])
    return coords @ basis


def bisector_on_lines(body: ConvexBody, x, offsets, k: int = 3,
                      eps: float = 1e-12) -> BisectorCloud:
    """Bisector points on the lines ``h + s x`` through the given offsets.

    Along such a line ``s -> gauge(h + (s-1)x) - gauge(h + (s+1)x)`` is
    nonincreasing, running from ``2`` to ``-2``, so its zero set is a nonempty
    interval; both ends are located by bisection and ``k`` points are taken
    across it (its ends included when it is a genuine interval).
    """
    x = body._coerce(x)
    H = np.atleast_2d(body._coerce(offsets))
    m = len(H)

    def phi_s(s, j):
        base = H[j] + s[:, None] * x
        return body.gauge(base - x) - body.gauge(base + x)

    zero = np.zeros(m)
    one = np.ones(m)
    # outer points with phi > eps on the left and phi < -eps on the right
    _, left_out = _expand(lambda s, j: phi_s(s, j) <= eps, zero, one, -1.0)
    _, right_out = _expand(lambda s, j: phi_s(s, j) >= -eps, zero, one, +1.0)
    _, s_lo = _bisect(lambda s, j: phi_s(s, j) > eps, left_out, right_out, 1e-14)
    s_hi, _ = _bisect(lambda s, j: phi_s(s, j) >= -eps, left_out, right_out, 1e-14)
    s_hi = np.maximum(s_hi, s_lo)
    zs, srcs = [], []
    for j in range(m):
        if s_hi[j] - s_lo[j] <= 1e-9 * (1.0 + abs(s_lo[j])):
            ss = np.array([0.5 * (s_lo[j] + s_hi[j])])
        else:
            ss = np.linspace(s_lo[j], s_hi[j], max(2, k))
        zs.append(H[j] + ss[:, None] * x)
        srcs.append(np.full(len(ss), j))
    z = np.vstack(zs) if zs else np.empty((0, body.n))
    return BisectorCloud(body.n, z, body.gauge(z - x), None,
                         np.concatenate(srcs) if srcs else None)
