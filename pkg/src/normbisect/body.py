"""Centrally symmetric convex bodies: gauge (Minkowski functional) and support.

Every body evaluates its gauge on arrays of shape ``(..., n)`` so that the
higher-level scans can work on whole batches of points at once.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, HalfspaceIntersection, cKDTree

__all__ = [
    "BodyError",
    "ConvexBody",
    "LpBall",
    "PolytopeH",
    "PolytopeV",
    "HalfDiskHull",
    "ValidationReport",
    "gauge",
    "support",
    "support_contacts",
    "boundary_point",
    "validate",
    "load_body",
    "save_body",
    "cube",
    "cross_polytope",
    "cube_vertices",
    "cross_polytope_vertices",
    "regular_polygon",
]

_CHUNK = 1 << 12


class BodyError(ValueError):
    """Malformed, degenerate or dimensionally inconsistent body data."""


@dataclass
class ValidationReport:
    ok: bool
    failures: list[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.ok


class ConvexBody:
    """Base class. Subclasses are immutable after construction."""

    kind = ""

    def __init__(self, n: int, gauge_tol: float) -> None:
        if n < 2:
            raise BodyError(f"dimension must be >= 2, got {n}")
        self.n = int(n)
        self.gauge_tol = float(gauge_tol)

    def _coerce(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape[-1:] != (self.n,):
            raise BodyError(f"expected vectors of dimension {self.n}, got shape {v.shape}")
        return v

    def gauge(self, v) -> np.ndarray:
        raise NotImplementedError

    def support(self, u) -> np.ndarray:
        raise NotImplementedError

    def active_facet(self, v) -> np.ndarray | None:
        """Index of a facet attaining the gauge at ``v``; ``None`` for non-polyhedral gauges.

        Along a line the gauge of a polytope is a maximum of affine functions, so
        when one facet attains it at both ends of an interval the gauge is affine
        in between.
        """
        return self.gauge_facet(v)[1]

    def gauge_facet(self, v) -> tuple[np.ndarray, np.ndarray | None]:
        """``(gauge(v), active_facet(v))`` from one evaluation."""
        return self.gauge(v), None

    def _check_symmetry(self) -> list[str]:
        return []

    def _check_interior(self) -> list[str]:
        return []

    def _check_payload(self) -> list[str]:
        return []

    def validate(self) -> ValidationReport:
        failures = self._check_payload()
        if not failures:
            failures += self._check_symmetry()
            failures += self._check_interior()
        return ValidationReport(not failures, failures)

    def to_spec(self) -> dict:
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"{type(self).__name__}(n={self.n})"


class LpBall(ConvexBody):
    """Unit ball of the l_p norm, p in [1, inf]."""

    kind = "lp"

    def __init__(self, n: int, p: float, gauge_tol: float = 1e-10, check: bool = True) -> None:
        super().__init__(n, gauge_tol)
        self.p = float(p)
        if check:
            _raise_if_invalid(self)

    def _check_payload(self) -> list[str]:
        if not (self.p >= 1.0):  # also rejects nan
            return [f"p must lie in [1, inf], got {self.p}"]
        return []

    @property
    def dual_exponent(self) -> float:
        if self.p == 1.0:
            return math.inf
        if math.isinf(self.p):
            return 1.0
        return self.p / (self.p - 1.0)

    def gauge(self, v) -> np.ndarray:
        v = self._coerce(v)
        return np.linalg.norm(v, ord=self.p, axis=-1)

    def support(self, u) -> np.ndarray:
        u = self._coerce(u)
        return np.linalg.norm(u, ord=self.dual_exponent, axis=-1)

    def to_spec(self) -> dict:
        p = "inf" if math.isinf(self.p) else self.p
        return {"type": "lp", "n": self.n, "p": p, "tolerances": {"gauge": self.gauge_tol}}


class PolytopeH(ConvexBody):
    """Polytope ``{v : <u_i, v> <= c_i}``; the gauge is ``max_i <u_i, v> / c_i``."""

    kind = "polytope-h"

    def __init__(self, normals, offsets, gauge_tol: float = 1e-10, check: bool = True) -> None:
        normals = np.atleast_2d(np.asarray(normals, dtype=float))
        offsets = np.asarray(offsets, dtype=float).reshape(-1)
        if normals.shape[0] != offsets.shape[0]:
            raise BodyError("normals and offsets have different lengths")
        super().__init__(normals.shape[1], gauge_tol)
        self.normals = normals
        self.offsets = offsets
        self.normals.setflags(write=False)
        self.offsets.setflags(write=False)
        self._scaled = None
        self._vertices = None
        if check:
            _raise_if_invalid(self)

    @property
    def scaled_normals(self) -> np.ndarray:
        if self._scaled is None:
            with np.errstate(divide="ignore", invalid="ignore"):
                a = self.normals / self.offsets[:, None]
            a.setflags(write=False)
            self._scaled = a
        return self._scaled

    def gauge(self, v) -> np.ndarray:
        v = self._coerce(v)
        flat = v.reshape(-1, self.n)
        a = self.scaled_normals
        out = np.empty(flat.shape[0])
        for i in range(0, flat.shape[0], _CHUNK):
            out[i:i + _CHUNK] = np.max(flat[i:i + _CHUNK] @ a.T, axis=1)
        return np.maximum(out, 0.0).reshape(v.shape[:-1])

    def gauge_facet(self, v) -> tuple[np.ndarray, np.ndarray]:
        v = self._coerce(v)
        flat = v.reshape(-1, self.n)
        a = self.scaled_normals
        g = np.empty(flat.shape[0])
        idx = np.empty(flat.shape[0], dtype=np.intp)
        for i in range(0, flat.shape[0], _CHUNK):
            prod = flat[i:i + _CHUNK] @ a.T
            j = np.argmax(prod, axis=1)
            idx[i:i + _CHUNK] = j
            g[i:i + _CHUNK] = prod[np.arange(len(j)), j]
        return np.maximum(g, 0.0).reshape(v.shape[:-1]), idx.reshape(v.shape[:-1])

    @property
    def vertices(self) -> np.ndarray:
        if self._vertices is None:
            hs = np.hstack([self.normals, -self.offsets[:, None]])
            verts = HalfspaceIntersection(hs, np.zeros(self.n)).intersections
            self._vertices = _unique_rows(verts)
        return self._vertices

    def support(self, u) -> np.ndarray:
        u = self._coerce(u)
        return np.max(u @ self.vertices.T, axis=-1)

    def _check_payload(self) -> list[str]:
        if not (np.all(np.isfinite(self.normals)) and np.all(np.isfinite(self.offsets))):
            return ["non-finite facet data"]
        return []

    def _check_interior(self) -> list[str]:
        if np.any(self.offsets <= 0.0):
            return ["origin not interior: some offset c_i <= 0"]
        if np.linalg.matrix_rank(self.normals) < self.n:
            return ["origin not interior: facet normals do not span the space (unbounded body)"]
        return []

    def _check_symmetry(self) -> list[str]:
        rows = np.hstack([self.normals, self.offsets[:, None]])
        rows = rows / np.linalg.norm(rows, axis=1, keepdims=True)
        mirrored = np.hstack([-rows[:, :-1], rows[:, -1:]])
        if not _has_all(rows, mirrored):
            return ["not centrally symmetric: facet set not closed under u -> -u"]
        return []

    def to_spec(self) -> dict:
        return {
            "type": "polytope-h",
            "normals": self.normals.tolist(),
            "offsets": self.offsets.tolist(),
            "tolerances": {"gauge": self.gauge_tol},
        }


class PolytopeV(ConvexBody):
    """Convex hull of a vertex set closed under ``v -> -v``.

    In dimension <= 3 the hull is converted once to facet form and gauges are
    evaluated from the facets; in higher dimension each gauge is a small LP.
    """

    kind = "polytope-v"

    def __init__(self, vertices, gauge_tol: float | None = None, check: bool = True) -> None:
        vertices = np.atleast_2d(np.asarray(vertices, dtype=float))
        n = vertices.shape[1]
        if gauge_tol is None:
            gauge_tol = 1e-10 if n <= 3 else 1e-8
        super().__init__(n, gauge_tol)
        self.vertices = vertices
        self.vertices.setflags(write=False)
        self._facets = None
        if check:
            _raise_if_invalid(self)

    @property
    def uses_lp(self) -> bool:
        return self.n > 3

    @property
    def facets(self) -> PolytopeH:
        """Facet form of the hull, symmetrized so that gauge(-v) == gauge(v) bitwise."""
        if self._facets is None:
            hull = ConvexHull(self.vertices)
            normals = hull.equations[:, :-1]
            offsets = -hull.equations[:, -1]
            scaled = normals / offsets[:, None]
            scaled = _unique_rows(np.round(scaled, 12))
            scaled = _unique_rows(np.vstack([scaled, -scaled]))
            self._facets = PolytopeH(scaled, np.ones(len(scaled)), self.gauge_tol, check=False)
        return self._facets

    def gauge(self, v) -> np.ndarray:
        v = self._coerce(v)
        if not self.uses_lp:
            return self.facets.gauge(v)
        return self.gauge_lp(v)

    def gauge_facet(self, v) -> tuple[np.ndarray, np.ndarray | None]:
        if self.uses_lp:
            return self.gauge_lp(self._coerce(v)), None
        return self.facets.gauge_facet(v)

    def gauge_lp(self, v) -> np.ndarray:
        """Gauge as ``min sum(mu)`` s.t. ``sum(mu_j v_j) = v, mu >= 0`` (any dimension)."""
        v = self._coerce(v)
        flat = v.reshape(-1, self.n)
        out = np.empty(flat.shape[0])
        cost = np.ones(len(self.vertices))
        for i, w in enumerate(flat):
            if not np.any(w):
                out[i] = 0.0
                continue
            res = linprog(cost, A_eq=self.vertices.T, b_eq=w, bounds=(0, None), method="highs")
            if res.status != 0:
                raise BodyError(f"gauge LP failed ({res.message}); is the origin interior?")
            out[i] = res.fun
        return out.reshape(v.shape[:-1])

    def support(self, u) -> np.ndarray:
        u = self._coerce(u)
        return np.max(u @ self.vertices.T, axis=-1)

    def _check_payload(self) -> list[str]:
        if not np.all(np.isfinite(self.vertices)):
            return ["non-finite vertex data"]
        return []

    def _check_symmetry(self) -> list[str]:
        if not _has_all(self.vertices, -self.vertices):
            return ["not centrally symmetric: vertex set not closed under v -> -v"]
        return []

    def _check_interior(self) -> list[str]:
        if np.linalg.matrix_rank(self.vertices) < self.n:
            return ["origin not interior: vertices do not span the space"]
        # the origin must be a strictly positive convex combination of the vertices
        res = linprog(np.zeros(len(self.vertices)),
                      A_eq=np.vstack([self.vertices.T, np.ones(len(self.vertices))]),
                      b_eq=np.r_[np.zeros(self.n), 1.0],
                      bounds=(1e-9, None), method="highs")
        if res.status != 0:
            return ["origin not interior"]
        return []

    def to_spec(self) -> dict:
        return {"type": "polytope-v", "vertices": self.vertices.tolist(),
                "tolerances": {"gauge": self.gauge_tol}}


class HalfDiskHull(PolytopeV):
    """Convex hull of the half circles ``C+ = {(1, cos a, sin a) : |a| <= pi/2}`` and ``C- = -C+``.

    Gauges use the polytope through ``m + 1`` samples per arc (diameter endpoints
    and the arc apex ``a = 0`` always included); ``support`` is the exact value
    for the smooth arcs.
    """

    kind = "halfdisk-hull"

    def __init__(self, m: int = 256, gauge_tol: float = 1e-10, check: bool = True) -> None:
        self.m = int(m)
        if self.m < 8:
            raise BodyError(f"arc resolution m must be >= 8, got {m}")
        angles = np.union1d(np.linspace(-np.pi / 2, np.pi / 2, self.m + 1), [0.0])
        arc = np.column_stack([np.ones_like(angles), np.cos(angles), np.sin(angles)])
        arc[0, 1] = arc[-1, 1] = 0.0  # exact diameter endpoints (1, 0, -1), (1, 0, 1)
        arc[0, 2], arc[-1, 2] = -1.0, 1.0
        super().__init__(np.vstack([arc, -arc]), gauge_tol=gauge_tol, check=check)

    @staticmethod
    def _arc_max(a, b):
        # max of a cos(s) + b sin(s) over s in [-pi/2, pi/2]
        return np.where(a >= 0.0, np.hypot(a, b), np.abs(b))

    def support(self, u) -> np.ndarray:
        u = self._coerce(u)
        plus = u[..., 0] + self._arc_max(u[..., 1], u[..., 2])
        minus = -u[..., 0] + self._arc_max(-u[..., 1], -u[..., 2])
        return np.maximum(plus, minus)

    def to_spec(self) -> dict:
        return {"type": "halfdisk-hull", "m": self.m, "tolerances": {"gauge": self.gauge_tol}}


def _raise_if_invalid(body: ConvexBody) -> None:
    report = body.validate()
    if not report.ok:
        raise BodyError("; ".join(report.failures))


def _unique_rows(a: np.ndarray) -> np.ndarray:
    return np.unique(a, axis=0)


def _has_all(rows: np.ndarray, wanted: np.ndarray, tol: float = 1e-9) -> bool:
    """True if every row of ``wanted`` matches some row of ``rows``."""
    dist, _ = cKDTree(rows).query(wanted)
    scale = max(1.0, float(np.max(np.abs(rows))))
    return bool(np.all(dist <= tol * scale))


# -- module-level operations -------------------------------------------------

def gauge(body: ConvexBody, v) -> np.ndarray | float:
    """Minkowski functional ``min{t >= 0 : v in tK}``."""
    out = body.gauge(v)
    return float(out) if np.ndim(out) == 0 else out


def support(body: ConvexBody, u) -> np.ndarray | float:
    """Support function ``max{<u, k> : k in K}``; ``u`` must be nonzero."""
    u = body._coerce(u)
    if np.any(np.all(u == 0.0, axis=-1)):
        raise BodyError("support direction must be nonzero")
    out = body.support(u)
    return float(out) if np.ndim(out) == 0 else out


def support_contacts(body: PolytopeV, u, tol: float = 1e-9) -> np.ndarray:
    """Vertices of a V-polytope at which the support value for ``u`` is attained."""
    u = body._coerce(u)
    values = body.vertices @ u
    top = values.max()
    return body.vertices[values >= top - tol * max(1.0, abs(top))]


def boundary_point(body: ConvexBody, v) -> np.ndarray:
    """Radial projection ``v / gauge(v)`` onto the unit sphere of the body."""
    v = body._coerce(v)
    g = body.gauge(v)
    if np.any(g == 0.0):
        raise BodyError("cannot project the zero vector to the boundary")
    return v / np.asarray(g)[..., None]


def validate(body: ConvexBody) -> ValidationReport:
    return body.validate()


def cube_vertices(n: int) -> np.ndarray:
    grid = np.array(np.meshgrid(*[[-1.0, 1.0]] * n, indexing="ij"))
    return grid.reshape(n, -1).T


def cross_polytope_vertices(n: int) -> np.ndarray:
    eye = np.eye(n)
    return np.vstack([eye, -eye])


def cube(n: int = 3, form: str = "h") -> ConvexBody:
    """The cube ``[-1, 1]^n`` in facet (``"h"``) or vertex (``"v"``) form."""
    if form == "h":
        eye = np.eye(n)
        return PolytopeH(np.vstack([eye, -eye]), np.ones(2 * n))
    return PolytopeV(cube_vertices(n))


def cross_polytope(n: int = 3, form: str = "v") -> ConvexBody:
    """The l_1 unit ball in vertex (``"v"``) or facet (``"h"``) form."""
    if form == "v":
        return PolytopeV(cross_polytope_vertices(n))
    return PolytopeH(cube_vertices(n), np.ones(2 ** n))


def regular_polygon(k: int = 6) -> PolytopeV:
    """Regular polygon with ``k`` vertices (``k`` even) inscribed in the unit circle."""
    if k % 2:
        raise BodyError("a centrally symmetric polygon needs an even vertex count")
    half = np.linspace(0.0, np.pi, k // 2, endpoint=False)
    pts = np.column_stack([np.cos(half), np.sin(half)])
    return PolytopeV(np.vstack([pts, -pts]))


# -- BodySpec documents ------------------------------------------------------

def _parse_p(p) -> float:
    if isinstance(p, str):
        if p.strip().lower() in ("inf", "infinity", "+inf"):
            return math.inf
        return float(p)
    if p is None:
        return math.inf
    return float(p)


def load_body(spec) -> ConvexBody:
    """Build a body from a BodySpec mapping, a JSON string, or a path to a JSON file."""
    if isinstance(spec, (str, Path)):
        text = str(spec)
        if isinstance(spec, Path) or not text.lstrip().startswith("{"):
            text = Path(spec).read_text(encoding="utf-8")
        try:
            spec = json.loads(text)
        except json.JSONDecodeError as exc:
            raise BodyError(f"malformed body document: {exc}") from exc
    if not isinstance(spec, dict) or "type" not in spec:
        raise BodyError("body document must be an object with a 'type' key")
    tol = (spec.get("tolerances") or {}).get("gauge")
    kw = {} if tol is None else {"gauge_tol": float(tol)}
    kind = spec["type"]
    try:
        if kind == "lp":
            return LpBall(int(spec["n"]), _parse_p(spec["p"]), **kw)
        if kind == "polytope-h":
            return PolytopeH(spec["normals"], spec["offsets"], **kw)
        if kind == "polytope-v":
            return PolytopeV(spec["vertices"], **kw)
        if kind == "halfdisk-hull":
            return HalfDiskHull(int(spec.get("m", 256)), **kw)
    except KeyError as exc:
        raise BodyError(f"body document of type {kind!r} is missing key {exc}") from exc
    raise BodyError(f"unknown body type {kind!r}")


def save_body(body: ConvexBody, path: str | Path | None = None) -> dict:
    """Return the BodySpec mapping of ``body``; also write it as JSON if ``path`` is given."""
    spec = body.to_spec()
    if path is not None:
        Path(path).write_text(json.dumps(spec, indent=2) + "\n", encoding="utf-8")
    return spec
