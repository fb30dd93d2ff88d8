"""Shadow boundary, sharp points and chords parallel to ``x``.

The bounded representation of the bisector is the union of the shadow
boundary of K in direction ``x`` with the midpoints of the chords of K parallel
to ``x``.  Offsets of chords live in the Euclidean orthogonal complement H of
``x``; this auxiliary inner product only parameterizes lines and never enters
a membership verdict.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import null_space

from .bisector import ClassifyParams, Label, classify_directions
from .body import ConvexBody, boundary_point
from .ortho import EPS_B, birkhoff_mask, birkhoff_orthogonal, boundary_roots, scan_lines

__all__ = [
    "Chord",
    "ChordField",
    "BoundedRepresentation",
    "complement_basis",
    "shadow_boundary_test",
    "sharp_point_test",
    "shadow_mask",
    "chord_field",
    "chord_arrays",
    "offset_grid",
    "rim_sweep",
    "bounded_representation",
    "radial_crosscheck",
    "EPS_SHARP",
]

EPS_SHARP = 1e-7
MIDPOINT = "MIDPOINT"
SHADOW = "SHADOW"


@dataclass(frozen=True)
class Chord:
    offset: np.ndarray
    t_minus: float
    t_plus: float
    midpoint: np.ndarray

    @property
    def half_length(self) -> float:
        return 0.5 * (self.t_plus - self.t_minus)

    @property
    def tangent(self) -> bool:
        return self.half_length == 0.0


@dataclass
class ChordField:
    """Array form of a family of chords; ``s == 0`` marks tangency."""

    offsets: np.ndarray
    t_minus: np.ndarray
    t_plus: np.ndarray
    midpoints: np.ndarray

    @property
    def half_lengths(self) -> np.ndarray:
        return 0.5 * (self.t_plus - self.t_minus)

    def __len__(self) -> int:
        return len(self.offsets)

    def chords(self) -> list[Chord]:
        return [Chord(h, float(a), float(b), m) for h, a, b, m in
                zip(self.offsets, self.t_minus, self.t_plus, self.midpoints)]


@dataclass
class BoundedRepresentation:
    midpoints: np.ndarray
    shadow: np.ndarray
    chords: ChordField
    spacing: float

    @property
    def points(self) -> np.ndarray:
        return np.vstack([self.midpoints, self.shadow])

    @property
    def tags(self) -> np.ndarray:
        return np.array([MIDPOINT] * len(self.midpoints) + [SHADOW] * len(self.shadow))


def complement_basis(x) -> np.ndarray:
    """Orthonormal basis (rows) of the Euclidean complement of ``x``."""
    x = np.asarray(x, dtype=float)
    basis = null_space(x[None]).T
    # fix orientation so the basis is reproducible across LAPACK builds
    for i, b in enumerate(basis):
        j = np.argmax(np.abs(b))
        if b[j] < 0:
            basis[i] = -b
    return basis


def _require_boundary(body: ConvexBody, p: np.ndarray):
    g = float(body.gauge(p))
    if abs(g - 1.0) > max(body.gauge_tol, 1e-9):
        raise ValueError(f"point is not on the boundary: gauge = {g!r}")


def shadow_boundary_test(body: ConvexBody, x, p, eps_b: float = EPS_B) -> bool:
    """Boundary point ``p`` lies on a supporting line of direction ``x``."""
    p = body._coerce(p)
    _require_boundary(body, p)
    return birkhoff_orthogonal(body, p, x, eps_b)


def shadow_mask(body: ConvexBody, x, P, eps_b: float = EPS_B) -> np.ndarray:
    """Batched :func:`shadow_boundary_test` for boundary points ``P``."""
    x = body._coerce(x)
    P = np.atleast_2d(body._coerce(P))
    return birkhoff_mask(body, P, np.broadcast_to(x, P.shape), eps_b)


def sharp_point_test(body: ConvexBody, x, p, eps_sharp: float = EPS_SHARP) -> bool:
    """Shadow point that is the only contact of its supporting line along ``x``."""
    p = body._coerce(p)
    x = body._coerce(x)
    if not shadow_boundary_test(body, x, p):
        raise ValueError("point is not on the shadow boundary")
    lo, hi, _ = scan_lines(body, p[None], x[None])
    return bool(hi[0] - lo[0] <= eps_sharp)


def offset_grid(body: ConvexBody, x, spacing: float, basis: np.ndarray | None = None
                ) -> np.ndarray:
    """Uniform grid of offsets in H, symmetric about 0, clipped to the support box."""
    basis = complement_basis(x) if basis is None else basis
    ext = body.support(basis)
    axes = [spacing * np.arange(-np.floor(e / spacing), np.floor(e / spacing) + 1) for e in ext]
    coords = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))
    return coords @ basis


def chord_arrays(body: ConvexBody, x, offsets) -> ChordField:
    """Chords of K along ``x`` through each offset; misses are dropped."""
    x = body._coerce(x)
    H = np.atleast_2d(body._coerce(offsets))
    status, tm, tp = boundary_roots(body, H, np.broadcast_to(x, H.shape))
    keep = status > 0
    # tangency chords collapse to the centre of the contact interval
    tang = status == 1
    c = 0.5 * (tm + tp)
    tm = np.where(tang, c, tm)
    tp = np.where(tang, c, tp)
    H, tm, tp = H[keep], tm[keep], tp[keep]
    mid = H + (0.5 * (tm + tp))[:, None] * x
    return ChordField(H, tm, tp, mid)


def chord_field(body: ConvexBody, x, spacing: float = 0.02,
                offsets: np.ndarray | None = None) -> list[Chord]:
    """Chords parallel to ``x`` over a uniform offset grid (or given offsets)."""
    if offsets is None:
        offsets = offset_grid(body, x, spacing)
    return chord_arrays(body, x, offsets).chords()


def _sphere_directions(m: int, spacing: float) -> np.ndarray:
    if m == 1:
        return np.array([[1.0], [-1.0]])
    if m == 2:
        k = max(8, int(np.ceil(2 * np.pi / spacing)))
        a = 2 * np.pi * np.arange(k) / k
        return np.column_stack([np.cos(a), np.sin(a)])
    # m >= 3: seeded Gaussian directions, closed under negation
    rng = np.random.default_rng(0)
    k = max(32, int(np.ceil(4 * np.pi / spacing ** 2)))
    w = rng.normal(size=(k, m))
    w /= np.linalg.norm(w, axis=1, keepdims=True)
    return np.vstack([w, -w])


def rim_sweep(body: ConvexBody, x, spacing: float, basis: np.ndarray | None = None
              ) -> np.ndarray:
    """Shadow-boundary points found from the rim of the projection of K onto H.

    For each unit ``w`` in H the line ``w + t x`` is scaled down until it
    supports K; its contact set (a point or a segment) is sampled at ``spacing``.
    """
    x = body._coerce(x)
    basis = complement_basis(x) if basis is None else basis
    W = _sphere_directions(basis.shape[0], spacing) @ basis
    lo, hi, mv = scan_lines(body, W, np.broadcast_to(x, W.shape))
    out = []
    for w, a, b, v in zip(W, lo, hi, mv):
        # contact points are (w + t x) / v; their spacing along x is dt / v
        # the scanned interval overshoots the true contact set by ~eps_flat
        eta = 3e-9 * max(1.0, abs(a), abs(b))
        if b - a > 4 * eta:
            a, b = a + eta, b - eta
        k = int(np.ceil((b - a) / (v * spacing))) if b > a else 0
        ts = np.linspace(a, b, k + 1) if k else np.array([0.5 * (a + b)])
        out.append((w + ts[:, None] * x) / v)
    return np.vstack(out)


def bounded_representation(body: ConvexBody, x, spacing: float = 0.02, mesh=None,
                           rim: bool = True, eps_b: float = EPS_B) -> BoundedRepresentation:
    """Midpoints of the chords parallel to ``x`` together with the shadow boundary.

    The shadow cloud collects tangency chords, the contact sets swept from the
    rim of the projection, and (if a mesh is given) the boundary points of
    mesh directions that pass the shadow-boundary test.
    """
    x = body._coerce(x)
    basis = complement_basis(x)
    field = chord_arrays(body, x, offset_grid(body, x, spacing, basis))
    s = field.half_lengths
    mids = field.midpoints[s > 0]
    parts = [field.midpoints[s == 0]]
    if rim:
        parts.append(rim_sweep(body, x, spacing, basis))
    if mesh is not None:
        P = boundary_point(body, mesh.vertices)
        parts.append(P[shadow_mask(body, x, P, eps_b)])
    shadow = np.vstack(parts)
    return BoundedRepresentation(mids, shadow, field, spacing)


def radial_crosscheck(body: ConvexBody, x, points, params: ClassifyParams | None = None,
                      tol: float = 1e-12) -> np.ndarray:
    """Labels of the radial directions of nonzero cloud points (all should be BISECTOR)."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    P = P[body.gauge(P) > tol]
    rcs = classify_directions(body, x, boundary_point(body, P), params)
    return np.array([rc.label for rc in rcs], dtype=int) if rcs else np.empty(0, int)


def bisector_label_fraction(labels: np.ndarray) -> float:
    return float(np.mean(labels == Label.BISECTOR)) if len(labels) else 1.0
