"""Sphere meshes labeled by the three-set decomposition and their graph probes.

A :class:`LabeledMesh` stores Euclidean unit directions with an edge list and
an antipode involution.  Labels come from :func:`classify_sphere`; thin parts
of the bisector that fall between vertices are recovered by
:func:`refine_interface`, which splits every LEFT-RIGHT edge at a BISECTOR
direction found by bisection.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components as _cc
from scipy.sparse.csgraph import dijkstra
from scipy.spatial import cKDTree

from .bisector import ClassifyParams, Label, RayClassification, classify_directions
from .body import ConvexBody, boundary_point

__all__ = [
    "LabeledMesh",
    "InsufficientSamples",
    "sphere_mesh",
    "icosphere",
    "classify_sphere",
    "refine_interface",
    "connected_components",
    "separation_check",
    "closedness_check",
    "frontier",
    "Contour",
    "boundary_crossings",
    "local_branch_count",
    "hausdorff",
    "hyperplane_flatness",
]


class InsufficientSamples(ValueError):
    """Too few samples in a probe annulus."""


@dataclass
class LabeledMesh:
    directions: np.ndarray  # Euclidean unit vectors
    edges: np.ndarray  # (E, 2), i < j
    antipode: np.ndarray
    faces: np.ndarray | None = None
    level: int = 0
    labels: np.ndarray | None = None
    records: list | None = None
    vertices: np.ndarray | None = None  # gauge-normalized when a body is attached
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.directions)

    @property
    def n(self) -> int:
        return self.directions.shape[1]

    @property
    def spacing(self) -> float:
        """Largest angular edge length."""
        a, b = self.directions[self.edges[:, 0]], self.directions[self.edges[:, 1]]
        return float(np.max(np.arccos(np.clip(np.sum(a * b, axis=1), -1.0, 1.0))))

    def adjacency(self, mask: np.ndarray | None = None):
        e = self.edges
        if mask is not None:
            e = e[mask[e[:, 0]] & mask[e[:, 1]]]
        N = len(self)
        A = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(N, N))
        return (A + A.T).tocsr()

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=len(self))

    def count(self, label: Label) -> int:
        return int(np.sum(self.labels == label))


def _sym_fix(V: np.ndarray) -> np.ndarray:
    """Antipode map of an (approximately) symmetric set; rewrites V so -v is exact."""
    tree = cKDTree(V)
    d, anti = tree.query(-V)
    if np.any(d > 1e-9) or np.any(anti == np.arange(len(V))):
        raise ValueError("vertex set is not antipodally symmetric")
    if np.any(anti[anti] != np.arange(len(V))):
        raise ValueError("antipode map is not an involution")
    lo = np.arange(len(V)) < anti
    V[anti[lo]] = -V[lo]
    return anti


def _edges_from_faces(F: np.ndarray) -> np.ndarray:
    e = np.vstack([F[:, [0, 1]], F[:, [1, 2]], F[:, [2, 0]]])
    e.sort(axis=1)
    return np.unique(e, axis=0)


def icosphere(level: int) -> tuple[np.ndarray, np.ndarray]:
    """Vertices and faces of the ``level``-times subdivided icosahedron."""
    p = (1.0 + np.sqrt(5.0)) / 2.0
    V = [(-1, p, 0), (1, p, 0), (-1, -p, 0), (1, -p, 0), (0, -1, p), (0, 1, p),
         (0, -1, -p), (0, 1, -p), (p, 0, -1), (p, 0, 1), (-p, 0, -1), (-p, 0, 1)]
    F = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11), (1, 5, 9), (5, 11, 4),
         (11, 10, 2), (10, 7, 6), (7, 1, 8), (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8),
         (3, 8, 9), (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    V = [np.array(v, dtype=float) / np.linalg.norm(v) for v in V]
    F = np.array(F)
    for _ in range(level):
        cache: dict[tuple[int, int], int] = {}

        def mid(a, b):
            key = (a, b) if a < b else (b, a)
            if key not in cache:
                m = V[a] + V[b]
                V.append(m / np.linalg.norm(m))
                cache[key] = len(V) - 1
            return cache[key]

        nf = []
        for a, b, c in F:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            nf += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        F = np.array(nf)
    return np.array(V), F


def sphere_mesh(n: int, level: int, seed: int = 0, k: int = 8) -> LabeledMesh:
    """Unlabeled antipodally symmetric mesh of the unit sphere in R^n (n = 2, 3, 4)."""
    if n == 2:
        N = 2 ** level
        if N < 4:
            raise ValueError("level must be at least 2 for n = 2")
        a = 2 * np.pi * np.arange(N // 2) / N
        half = np.column_stack([np.cos(a), np.sin(a)])
        D = np.vstack([half, -half])
        i = np.arange(N)
        E = np.sort(np.column_stack([i, (i + 1) % N]), axis=1)
        anti = (i + N // 2) % N
        return LabeledMesh(D, E, anti, None, level)
    if n == 3:
        V, F = icosphere(level)
        anti = _sym_fix(V)
        return LabeledMesh(V, _edges_from_faces(F), anti, F, level)
    if n == 4:
        rng = np.random.default_rng(seed)
        half = rng.normal(size=(100 * 2 ** level, 4))
        half /= np.linalg.norm(half, axis=1, keepdims=True)
        D = np.vstack([half, -half])
        N = len(D)
        _, nb = cKDTree(D).query(D, k + 1)
        E = np.column_stack([np.repeat(np.arange(N), k), nb[:, 1:].ravel()])
        E = np.unique(np.sort(E, axis=1), axis=0)
        anti = (np.arange(N) + N // 2) % N
        return LabeledMesh(D, E, anti, None, level, meta={"advisory": True})
    raise ValueError(f"unsupported dimension n={n}; expected 2, 3 or 4")


def _classify(body, x, Y, params, workers, chunk=2048):
    if not workers or workers <= 1 or len(Y) <= chunk:
        return classify_directions(body, x, Y, params)
    parts = [Y[i:i + chunk] for i in range(0, len(Y), chunk)]
    with ThreadPoolExecutor(workers) as ex:
        res = list(ex.map(lambda P: classify_directions(body, x, P, params), parts))
    return [r for part in res for r in part]


def classify_sphere(body: ConvexBody, x, mesh: LabeledMesh, params: ClassifyParams | None = None,
                    workers: int | None = None) -> LabeledMesh:
    """Label every mesh direction LEFT, RIGHT or BISECTOR (UNRESOLVED kept distinct)."""
    Y = boundary_point(body, mesh.directions)
    recs = _classify(body, x, Y, params, workers)
    labels = np.array([r.label for r in recs], dtype=int)
    return replace(mesh, labels=labels, records=recs, vertices=Y)


def refine_interface(body: ConvexBody, x, mesh: LabeledMesh, params: ClassifyParams | None = None,
                     max_iter: int = 48) -> LabeledMesh:
    """Split each LEFT-RIGHT edge at a BISECTOR direction found by bisection.

    Bisection halves the chord between the current LEFT and RIGHT endpoints and
    renormalizes, so the construction commutes with ``v -> -v``.  Inserted
    points are joined to each other and to BISECTOR vertices sharing a face.
    Edges where no BISECTOR direction turns up are kept, so a failure shows in
    :func:`closedness_check` instead of being hidden.
    """
    if mesh.labels is None:
        raise ValueError("mesh is not labeled")
    L = mesh.labels
    e = mesh.edges
    mixed = np.flatnonzero(L[e[:, 0]] * L[e[:, 1]] == int(Label.LEFT) * int(Label.RIGHT))
    if mixed.size == 0:
        return mesh
    left = np.where(L[e[mixed, 0]] == Label.LEFT, e[mixed, 0], e[mixed, 1])
    right = np.where(L[e[mixed, 0]] == Label.LEFT, e[mixed, 1], e[mixed, 0])
    a = mesh.directions[left].copy()
    b = mesh.directions[right].copy()
    found: list[RayClassification | None] = [None] * mixed.size
    hit = np.zeros(mixed.size, dtype=bool)
    dead = np.zeros(mixed.size, dtype=bool)
    for _ in range(max_iter):
        act = np.flatnonzero(~hit & ~dead)
        if act.size == 0:
            break
        m = a[act] + b[act]
        m /= np.linalg.norm(m, axis=1, keepdims=True)
        recs = classify_directions(body, x, boundary_point(body, m), params)
        for j, i in enumerate(act):
            lab = recs[j].label
            if lab == Label.BISECTOR:
                hit[i] = True
                found[i] = recs[j]
            elif lab == Label.LEFT:
                a[i] = m[j]
            elif lab == Label.RIGHT:
                b[i] = m[j]
            else:
                dead[i] = True

    N0 = len(mesh)
    new_idx = np.full(mixed.size, -1)
    new_idx[hit] = N0 + np.arange(int(hit.sum()))
    edge_pos = {tuple(e[k]): j for j, k in enumerate(mixed)}

    new_dirs = np.array([found[i].direction for i in np.flatnonzero(hit)]).reshape(-1, mesh.n)
    new_dirs = new_dirs / np.linalg.norm(new_dirs, axis=1, keepdims=True) if len(new_dirs) else new_dirs
    D = np.vstack([mesh.directions, new_dirs])
    Y = np.vstack([mesh.vertices, [found[i].direction for i in np.flatnonzero(hit)]]) \
        if hit.any() else mesh.vertices
    labels = np.concatenate([L, np.full(int(hit.sum()), int(Label.BISECTOR))])
    records = list(mesh.records) + [found[i] for i in np.flatnonzero(hit)]

    # antipodes of inserted points sit on the antipodal edge
    anti = np.concatenate([mesh.antipode, np.full(int(hit.sum()), -1)])
    for j in np.flatnonzero(hit):
        i0, i1 = e[mixed[j]]
        key = tuple(sorted((mesh.antipode[i0], mesh.antipode[i1])))
        jj = edge_pos.get(key)
        if jj is not None and hit[jj]:
            anti[new_idx[j]] = new_idx[jj]

    keep = np.ones(len(e), dtype=bool)
    keep[mixed[hit]] = False
    extra = []
    for j in np.flatnonzero(hit):
        i0, i1 = e[mixed[j]]
        extra += [(i0, new_idx[j]), (i1, new_idx[j])]
    if mesh.faces is not None:
        for f in mesh.faces:
            ins = []
            for u, v in ((f[0], f[1]), (f[1], f[2]), (f[2], f[0])):
                j = edge_pos.get((min(u, v), max(u, v)))
                if j is not None and hit[j]:
                    ins.append(new_idx[j])
            bis = [w for w in f if L[w] == Label.BISECTOR]
            for p in range(len(ins)):
                for q in range(p + 1, len(ins)):
                    extra.append((ins[p], ins[q]))
                extra += [(ins[p], w) for w in bis]
    E = np.vstack([e[keep], np.array(extra, dtype=int).reshape(-1, 2)])
    E = np.unique(np.sort(E, axis=1), axis=0)
    meta = dict(mesh.meta, refined=int(hit.sum()), unrefined=int((~hit).sum()))
    return LabeledMesh(D, E, anti, mesh.faces, mesh.level, labels, records, Y, meta)


def connected_components(mesh: LabeledMesh, label: Label) -> tuple[int, np.ndarray]:
    """Components of the subgraph induced by ``label``; membership is -1 elsewhere."""
    mask = mesh.labels == label
    memb = np.full(len(mesh), -1)
    if not mask.any():
        return 0, memb
    idx = np.flatnonzero(mask)
    A = mesh.adjacency(mask)[idx][:, idx]
    k, lab = _cc(A, directed=False)
    memb[idx] = lab
    return int(k), memb


def closedness_check(mesh: LabeledMesh) -> bool:
    """No LEFT vertex is adjacent to a RIGHT vertex."""
    L = mesh.labels[mesh.edges]
    return not bool(np.any(L[:, 0] * L[:, 1] == int(Label.LEFT) * int(Label.RIGHT)))


def separation_check(mesh: LabeledMesh) -> bool:
    """After deleting BISECTOR vertices no component holds both LEFT and RIGHT."""
    mask = (mesh.labels == Label.LEFT) | (mesh.labels == Label.RIGHT)
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return True
    _, comp = _cc(mesh.adjacency(mask)[idx][:, idx], directed=False)
    lab = mesh.labels[idx]
    has_l = np.zeros(comp.max() + 1, dtype=bool)
    has_r = np.zeros_like(has_l)
    has_l[comp[lab == Label.LEFT]] = True
    has_r[comp[lab == Label.RIGHT]] = True
    return not bool(np.any(has_l & has_r))


def frontier(mesh: LabeledMesh, label: Label = Label.BISECTOR) -> np.ndarray:
    """Mask of ``label`` vertices with a neighbour of another label."""
    e = mesh.edges
    L = mesh.labels
    diff = L[e[:, 0]] != L[e[:, 1]]
    out = np.zeros(len(mesh), dtype=bool)
    for c in (0, 1):
        hit = e[diff, c]
        out[hit[L[hit] == label]] = True
    return out


@dataclass
class Contour:
    """Boundary curves of the BISECTOR region: crossing points on mesh edges.

    ``points`` are Euclidean unit directions, one per mesh edge joining a
    BISECTOR vertex to a LEFT/RIGHT vertex; ``edges`` join crossings that share
    a mesh face (marching triangles), so the graph is a union of closed curves.
    """

    points: np.ndarray
    edges: np.ndarray

    def __len__(self) -> int:
        return len(self.points)

    @property
    def spacing(self) -> float:
        if len(self.edges) == 0:
            return 0.0
        d = self.points[self.edges[:, 0]] - self.points[self.edges[:, 1]]
        return float(np.linalg.norm(d, axis=1).max())


def boundary_crossings(body: ConvexBody, x, mesh: LabeledMesh,
                       params: ClassifyParams | None = None, iters: int = 20) -> Contour:
    """Locate where mesh edges leave the BISECTOR region and join them face by face."""
    if mesh.faces is None:
        raise ValueError("boundary crossings need a triangulated mesh")
    L = mesh.labels
    e = mesh.edges
    side = np.abs(L) == 1
    sel = ((L[e[:, 0]] == Label.BISECTOR) & side[e[:, 1]]) | \
        ((L[e[:, 1]] == Label.BISECTOR) & side[e[:, 0]])
    ce = e[sel]
    if len(ce) == 0:
        return Contour(np.empty((0, mesh.n)), np.empty((0, 2), dtype=int))
    first_in = L[ce[:, 0]] == Label.BISECTOR
    a = mesh.directions[np.where(first_in, ce[:, 0], ce[:, 1])].copy()
    b = mesh.directions[np.where(first_in, ce[:, 1], ce[:, 0])].copy()
    for _ in range(iters):
        m = a + b
        m /= np.linalg.norm(m, axis=1, keepdims=True)
        lab = np.array([r.label for r in
                        classify_directions(body, x, boundary_point(body, m), params)])
        inside = lab == Label.BISECTOR
        a[inside] = m[inside]
        b[~inside] = m[~inside]
    pos = {tuple(k): i for i, k in enumerate(ce)}
    links = []
    for f in mesh.faces:
        hit = [pos.get((min(u, v), max(u, v))) for u, v in ((f[0], f[1]), (f[1], f[2]), (f[2], f[0]))]
        hit = [h for h in hit if h is not None]
        for i in range(len(hit)):
            for j in range(i + 1, len(hit)):
                links.append((hit[i], hit[j]))
    E = np.unique(np.sort(np.array(links, dtype=int).reshape(-1, 2), axis=1), axis=0)
    return Contour(a, E)


def _count_components(points: np.ndarray, link: float, edges: np.ndarray | None = None) -> int:
    if edges is None:
        pairs = cKDTree(points).query_pairs(link, output_type="ndarray")
    else:
        pairs = edges
    N = len(points)
    A = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(N, N)) \
        if len(pairs) else coo_matrix((N, N))
    return int(_cc(A, directed=False)[0])


def local_branch_count(source, p, r: float, mask: np.ndarray | None = None,
                       link: float | None = None, snap: float | None = None,
                       min_points: int = 2) -> int:
    """Number of components of the samples in the annulus ``r/2 <= dist(p, q) <= r``.

    ``source`` may be

    * a point cloud: Euclidean distance, components via a link radius
      (default ``r / 4``);
    * a labeled mesh with a vertex ``mask``: Euclidean distance, components via
      mesh edges between annulus vertices;
    * a :class:`Contour`: graph distance along the curves, measured from every
      node within ``snap`` of ``p`` (default 1.5 times the longest contour edge),
      components via contour edges.
    """
    p = np.asarray(p, dtype=float)
    if isinstance(source, Contour):
        P, E = source.points, source.edges
        N = len(P)
        snap = 1.5 * source.spacing if snap is None else snap
        d0 = np.linalg.norm(P - p, axis=1)
        src = np.flatnonzero(d0 <= max(snap, d0.min()))
        w = np.linalg.norm(P[E[:, 0]] - P[E[:, 1]], axis=1)
        G = coo_matrix((w, (E[:, 0], E[:, 1])), shape=(N, N)).tocsr()
        dist = dijkstra(G, directed=False, indices=src, limit=r + snap)
        dist = np.min(dist + d0[src, None], axis=0)
        sel = (dist >= r / 2) & (dist <= r)
        idx = np.flatnonzero(sel)
        if idx.size < min_points:
            raise InsufficientSamples(f"{idx.size} samples in annulus of radius {r}")
        posn = np.full(N, -1)
        posn[idx] = np.arange(idx.size)
        e = E[sel[E[:, 0]] & sel[E[:, 1]]]
        return _count_components(P[idx], 0.0, posn[e])
    if isinstance(source, LabeledMesh):
        mask = np.ones(len(source), dtype=bool) if mask is None else mask
        d = np.linalg.norm(source.directions - p, axis=1)
        sel = mask & (d >= r / 2) & (d <= r)
        idx = np.flatnonzero(sel)
        if idx.size < min_points:
            raise InsufficientSamples(f"{idx.size} samples in annulus of radius {r}")
        posn = np.full(len(source), -1)
        posn[idx] = np.arange(idx.size)
        e = source.edges[sel[source.edges[:, 0]] & sel[source.edges[:, 1]]]
        return _count_components(source.directions[idx], 0.0, posn[e])
    P = np.atleast_2d(np.asarray(source, dtype=float))
    d = np.linalg.norm(P - p, axis=1)
    Q = P[(d >= r / 2) & (d <= r)]
    if len(Q) < min_points:
        raise InsufficientSamples(f"{len(Q)} samples in annulus of radius {r}")
    return _count_components(Q, r / 4 if link is None else link)


def hausdorff(A, B) -> float:
    """Symmetric Hausdorff distance between finite point sets."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.size == 0 or B.size == 0:
        raise ValueError("hausdorff distance of an empty set")
    dab = cKDTree(B).query(A)[0].max()
    dba = cKDTree(A).query(B)[0].max()
    return float(max(dab, dba))


def hyperplane_flatness(points) -> float:
    """RMS distance to the best hyperplane through the origin.

    Square root of the smallest eigenvalue of the second-moment matrix
    ``P^T P / N`` (moments about the origin, since the hyperplane is linear),
    taken as the smallest singular value of ``P / sqrt(N)`` so that tiny
    residuals are not swamped by round-off in the squared form.
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    if len(P) < P.shape[1]:
        raise ValueError(f"need at least {P.shape[1]} points, got {len(P)}")
    sv = np.linalg.svd(P / np.sqrt(len(P)), compute_uv=False)
    return float(sv[-1])
