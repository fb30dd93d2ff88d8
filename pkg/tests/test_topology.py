import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize
from scipy.spatial.distance import cdist

from _oracle import grid_labels
from normbisect.bisector import Label
from normbisect.body import HalfDiskHull, LpBall, cube
from normbisect.topology import (InsufficientSamples, LabeledMesh, boundary_crossings,
                                 classify_sphere, closedness_check, connected_components,
                                 frontier, hausdorff, hyperplane_flatness, icosphere,
                                 local_branch_count, refine_interface, separation_check,
                                 sphere_mesh)

E1 = np.array([1.0, 0.0, 0.0])


@pytest.fixture(scope="module")
def euclid_mesh():
    # the Euclidean bisector is a great circle, thinner than any mesh: refine onto it
    body = LpBall(3, 2)
    return refine_interface(body, E1, classify_sphere(body, E1, sphere_mesh(3, 4)))


@pytest.fixture(scope="module")
def cube_mesh():
    return classify_sphere(cube(3), E1, sphere_mesh(3, 3))


class TestSphereMesh:
    def test_icosphere_level4(self):
        m = sphere_mesh(3, 4)
        assert len(m) == 2562
        assert set(np.unique(m.degrees())) == {5, 6}
        assert np.allclose(np.linalg.norm(m.directions, axis=1), 1.0)

    def test_antipodes_exact(self):
        m = sphere_mesh(3, 4)
        assert np.array_equal(m.directions[m.antipode], -m.directions)
        assert np.array_equal(m.antipode[m.antipode], np.arange(len(m)))
        assert np.all(m.antipode != np.arange(len(m)))

    def test_antipode_preserves_adjacency(self):
        m = sphere_mesh(3, 3)
        E = {tuple(e) for e in m.edges}
        for a, b in m.edges:
            u, v = sorted((m.antipode[a], m.antipode[b]))
            assert (u, v) in E

    def test_polygon(self):
        m = sphere_mesh(2, 8)
        assert len(m) == 256 and np.all(m.degrees() == 2)
        assert connected_components_all(m) == 1

    def test_4d_advisory(self):
        m = sphere_mesh(4, 1, seed=3)
        assert m.meta.get("advisory")
        assert np.array_equal(m.directions[m.antipode], -m.directions)
        again = sphere_mesh(4, 1, seed=3)
        assert np.array_equal(m.directions, again.directions)

    def test_unsupported(self):
        with pytest.raises(ValueError):
            sphere_mesh(5, 1)

    def test_icosphere_counts(self):
        for level in range(4):
            V, F = icosphere(level)
            assert len(V) == 10 * 4 ** level + 2 and len(F) == 20 * 4 ** level


def connected_components_all(m: LabeledMesh) -> int:
    m.labels = np.zeros(len(m), dtype=int)
    return connected_components(m, Label.BISECTOR)[0]


class TestLabels:
    def test_euclid_band(self, euclid_mesh):
        m = euclid_mesh
        B = m.labels == Label.BISECTOR
        ang = np.abs(np.arcsin(np.clip(m.directions[B] @ E1, -1, 1)))
        assert np.all(ang <= 2 * m.spacing)
        assert np.all(np.sign(m.directions[m.labels == Label.RIGHT] @ E1) > 0)

    def test_partition_total(self, euclid_mesh, cube_mesh):
        for m in (euclid_mesh, cube_mesh):
            total = sum(m.count(lab) for lab in (Label.LEFT, Label.RIGHT, Label.BISECTOR))
            assert total == len(m)

    def test_antipodal_law(self, cube_mesh):
        m = cube_mesh
        mirrored = np.array([Label(v).mirror() for v in m.labels])
        assert np.array_equal(m.labels[m.antipode], mirrored)

    def test_cube_matches_grid_oracle(self, cube_mesh):
        m = cube_mesh
        want = grid_labels(cube(3), E1, m.vertices, t_end=1e4, num=20_000)
        ideal = np.array([r.ideal_limit for r in m.records])
        # ideal directions need a limit argument a finite grid cannot make
        assert np.array_equal(m.labels[~ideal], want[~ideal])

    def test_linf_arcs(self):
        body = LpBall(2, np.inf)
        m = classify_sphere(body, np.array([1.0, 0.0]), sphere_mesh(2, 8))
        k, memb = connected_components(m, Label.BISECTOR)
        assert k == 2
        sizes = np.bincount(memb[memb >= 0])
        assert np.all(sizes > 10)


class TestComponents:
    def test_euclid(self, euclid_mesh):
        for lab in (Label.LEFT, Label.RIGHT, Label.BISECTOR):
            assert connected_components(euclid_mesh, lab)[0] == 1

    def test_left_right_equal(self, cube_mesh):
        assert connected_components(cube_mesh, Label.LEFT)[0] == \
            connected_components(cube_mesh, Label.RIGHT)[0]

    def test_euclid_circle(self):
        body = LpBall(2, 2)
        m = classify_sphere(body, np.array([1.0, 0.0]), sphere_mesh(2, 8))
        assert connected_components(m, Label.BISECTOR)[0] == 2

    def test_checks(self, euclid_mesh, cube_mesh):
        for m in (euclid_mesh, cube_mesh):
            assert closedness_check(m) and separation_check(m)

    def test_checks_detect_breakage(self, euclid_mesh):
        m = euclid_mesh
        broken = LabeledMesh(m.directions, m.edges, m.antipode, m.faces, m.level,
                             labels=np.where(m.labels == Label.BISECTOR, Label.LEFT, m.labels))
        assert not closedness_check(broken)
        assert not separation_check(broken)

    def test_frontier(self, euclid_mesh):
        fr = frontier(euclid_mesh)
        assert fr.any()
        assert np.all(euclid_mesh.labels[fr] == Label.BISECTOR)


class TestRefinement:
    def test_halfdisk_interface(self):
        body = HalfDiskHull(64)
        m = classify_sphere(body, E1, sphere_mesh(3, 3))
        r = refine_interface(body, E1, m)
        assert len(r) >= len(m)
        assert closedness_check(r)
        mirrored = np.array([Label(v).mirror() for v in r.labels])
        assert np.array_equal(r.labels[r.antipode], mirrored)
        assert connected_components(r, Label.BISECTOR)[0] == 1

    def test_contour_is_closed_curves(self):
        body = cube(3)
        m = refine_interface(body, E1, classify_sphere(body, E1, sphere_mesh(3, 3)))
        c = boundary_crossings(body, E1, m)
        assert len(c) > 0
        assert np.all(np.bincount(c.edges.ravel(), minlength=len(c)) == 2)


def circle_points(k, arc=2 * np.pi):
    a = np.linspace(0, arc, k, endpoint=arc < 2 * np.pi)
    return np.column_stack([np.cos(a), np.sin(a), np.zeros(k)])


class TestBranchCount:
    def test_curve_interior(self):
        P = circle_points(400)
        assert local_branch_count(P, P[0], 0.3) == 2

    def test_arc_endpoint(self):
        P = circle_points(200, arc=np.pi)
        assert local_branch_count(P, P[0], 0.3) == 1

    def test_cross(self):
        s = np.linspace(-1, 1, 401)
        z = np.zeros_like(s)
        P = np.vstack([np.column_stack([s, z, z]), np.column_stack([z, s, z])])
        assert local_branch_count(P, [0, 0, 0], 0.5) == 4

    def test_too_few(self):
        with pytest.raises(InsufficientSamples):
            local_branch_count(circle_points(50), [5, 0, 0], 0.3)

    def test_mesh_mode(self, euclid_mesh):
        m = euclid_mesh
        B = m.labels == Label.BISECTOR
        p = m.directions[B][0]
        assert local_branch_count(m, p, 0.3, mask=B) == 2


class TestHausdorff:
    def test_examples(self):
        A = np.random.default_rng(0).normal(size=(50, 3))
        assert hausdorff(A, A) == 0.0
        assert hausdorff([[0, 0, 0]], [[1, 0, 0]]) == pytest.approx(1.0)

    def test_refined_disk(self):
        def disk(h):
            g = np.arange(-1, 1 + h / 2, h)
            X, Y = np.meshgrid(g, g)
            P = np.column_stack([X.ravel(), Y.ravel()])
            return P[np.hypot(P[:, 0], P[:, 1]) <= 1]
        assert hausdorff(disk(0.1), disk(0.05)) <= 0.1

    @settings(max_examples=30, deadline=None)
    @given(na=st.integers(1, 40), nb=st.integers(1, 40), seed=st.integers(0, 10_000))
    def test_brute_force(self, na, nb, seed):
        rng = np.random.default_rng(seed)
        A, B = rng.normal(size=(na, 3)), rng.normal(size=(nb, 3))
        D = cdist(A, B)
        want = max(D.min(axis=1).max(), D.min(axis=0).max())
        assert hausdorff(A, B) == pytest.approx(want, abs=1e-12)

    def test_empty(self):
        with pytest.raises(ValueError):
            hausdorff(np.empty((0, 3)), [[0, 0, 0]])


class TestFlatness:
    def test_coplanar(self):
        P = np.random.default_rng(1).normal(size=(500, 3))
        P[:, 0] = 0
        assert hyperplane_flatness(P) <= 1e-12

    def test_tilted_plane(self):
        rng = np.random.default_rng(2)
        P = rng.normal(size=(500, 3))
        n = np.array([1.0, 2.0, -0.5])
        P -= np.outer(P @ n / (n @ n), n)
        assert hyperplane_flatness(P) <= 1e-12

    def test_thick_cloud(self):
        P = np.random.default_rng(3).normal(size=(2000, 3))
        assert hyperplane_flatness(P) > 0.5

    def test_rms_oracle(self):
        rng = np.random.default_rng(4)
        P = rng.normal(size=(800, 3))
        P[:, 2] *= 0.01
        # RMS distance to the best plane, by brute force over normals
        N = rng.normal(size=(20_000, 3))
        N /= np.linalg.norm(N, axis=1, keepdims=True)
        rms = lambda v: np.sqrt(np.mean((P @ v) ** 2) / (v @ v))
        start = N[np.argmin(np.mean((P @ N.T) ** 2, axis=0))]
        brute = minimize(rms, start, method="Nelder-Mead",
                         options={"xatol": 1e-10, "fatol": 1e-14}).fun
        got = hyperplane_flatness(P)
        assert got <= brute + 1e-12 and got == pytest.approx(brute, rel=1e-6)

    def test_too_few(self):
        with pytest.raises(ValueError):
            hyperplane_flatness([[1, 0, 0], [0, 1, 0]])
