import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from normbisect.body import (BodyError, HalfDiskHull, LpBall, PolytopeH, PolytopeV,
                             boundary_point, cross_polytope, cross_polytope_vertices, cube,
                             cube_vertices, gauge, load_body, regular_polygon, save_body,
                             support, support_contacts, validate)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
vec3 = arrays(np.float64, 3, elements=finite)


def nonzero(v):
    return np.linalg.norm(v) > 1e-6


BODIES = {
    "l2": LpBall(3, 2),
    "l1.5": LpBall(3, 1.5),
    "l3": LpBall(3, 3),
    "linf": LpBall(3, np.inf),
    "cube": cube(3),
    "cube_v": cube(3, form="v"),
    "cross": cross_polytope(3),
    "halfdisk": HalfDiskHull(64),
}


class TestGaugeExamples:
    def test_euclidean_345(self):
        assert gauge(LpBall(2, 2), [3, 4]) == pytest.approx(5.0, abs=1e-12)

    def test_cube_h(self):
        assert gauge(cube(3), [0.2, -1.5, 0.7]) == pytest.approx(1.5, abs=1e-12)

    def test_cube_v_agrees_with_h(self):
        assert gauge(cube(3, form="v"), [0.2, -1.5, 0.7]) == pytest.approx(1.5, abs=1e-9)

    def test_zero_vector(self):
        for b in BODIES.values():
            assert gauge(b, np.zeros(3)) == 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            gauge(cube(3), [1.0, 2.0])


class TestSupportExamples:
    def test_cube(self):
        assert support(cube(3), [1, 1, 1]) == pytest.approx(3.0)

    def test_euclid(self):
        assert support(LpBall(3, 2), [0, 2, 0]) == pytest.approx(2.0)

    def test_halfdisk_triangle_face(self):
        body = HalfDiskHull(256)
        assert support(body, [-1, 2, 0]) == pytest.approx(1.0, abs=1e-12)
        # the supporting plane touches (1,1,0) and the two diameter ends of C-
        pts = support_contacts(body, np.array([-1.0, 2.0, 0.0]) / np.sqrt(5))
        assert len(pts) == 3
        want = np.array([[-1, 0, -1], [-1, 0, 1], [1, 1, 0]], dtype=float)
        assert np.allclose(pts[np.lexsort(pts.T[::-1])], want[np.lexsort(want.T[::-1])])

    def test_halfdisk_support_matches_vertices(self):
        body = HalfDiskHull(256)
        rng = np.random.default_rng(3)
        U = rng.normal(size=(200, 3))
        exact = body.support(U)
        sampled = np.max(U @ body.vertices.T, axis=1)
        # the polygonal arcs sit inside the true arcs, within the chord sagitta
        assert np.all(sampled <= exact + 1e-12)
        assert np.all(exact - sampled <= np.linalg.norm(U, axis=1) * (np.pi / 256) ** 2)

    def test_zero_direction(self):
        with pytest.raises(ValueError):
            support(cube(3), [0, 0, 0])


class TestBoundaryPoint:
    def test_examples(self):
        assert np.allclose(boundary_point(LpBall(3, 2), [0, 0, 5]), [0, 0, 1])
        assert np.allclose(boundary_point(cube(3), [2, 1, 0]), [1, 0.5, 0])
        assert np.allclose(boundary_point(LpBall(2, 1), [1, 1]), [0.5, 0.5])

    def test_zero(self):
        with pytest.raises(ValueError):
            boundary_point(cube(3), [0, 0, 0])


class TestValidate:
    def test_cube_v_passes(self):
        assert validate(PolytopeV(cube_vertices(3)))

    def test_missing_antipode(self):
        V = cube_vertices(3)[:-1]
        rep = validate(PolytopeV(V, check=False))
        assert not rep
        assert any("not centrally symmetric" in f for f in rep.failures)
        with pytest.raises(BodyError, match="not centrally symmetric"):
            PolytopeV(V)

    def test_zero_offset(self):
        N = np.vstack([np.eye(3), -np.eye(3)])
        c = np.ones(6)
        c[0] = 0.0
        rep = validate(PolytopeH(N, c, check=False))
        assert any("origin not interior" in f for f in rep.failures)

    def test_nonfinite_payload(self):
        rep = validate(LpBall(3, float("nan"), check=False))
        assert not rep

    def test_flat_body(self):
        V = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0]], dtype=float)
        with pytest.raises(BodyError):
            PolytopeV(V)


class TestSpecFiles:
    def test_lp_document(self):
        b = load_body({"type": "lp", "p": 2, "n": 3})
        assert isinstance(b, LpBall) and b.p == 2 and b.n == 3

    def test_halfdisk_document(self):
        b = load_body('{"type": "halfdisk-hull", "m": 256}')
        assert isinstance(b, HalfDiskHull) and b.m == 256

    def test_cross_polytope_document(self):
        doc = {"type": "polytope-v", "vertices": cross_polytope_vertices(3).tolist()}
        assert gauge(load_body(doc), [1, 1, 1]) == pytest.approx(3.0)

    def test_unknown_type(self):
        with pytest.raises(BodyError):
            load_body({"type": "ellipsoid", "n": 3})

    def test_malformed(self):
        with pytest.raises(BodyError):
            load_body({"type": "lp", "n": 3})

    @pytest.mark.parametrize("name", sorted(BODIES))
    def test_round_trip(self, name, tmp_path):
        body = BODIES[name]
        path = tmp_path / "body.json"
        save_body(body, path)
        again = load_body(json.loads(path.read_text()))
        probe = np.random.default_rng(0).normal(size=(100, 3))
        assert np.allclose(again.gauge(probe), body.gauge(probe), rtol=0, atol=1e-12)


class TestCrossForms:
    """V-form and H-form of the same polytope, plus the LP route, agree."""

    @pytest.mark.parametrize("maker", [cube, cross_polytope])
    def test_h_vs_v(self, maker):
        probe = np.random.default_rng(1).normal(size=(500, 3))
        gh = maker(3, form="h").gauge(probe)
        gv = maker(3, form="v").gauge(probe)
        assert np.allclose(gh, gv, rtol=1e-9, atol=1e-12)

    def test_lp_route_in_4d(self):
        V = PolytopeV(cube_vertices(4))
        assert V.uses_lp
        probe = np.random.default_rng(2).normal(size=(40, 4))
        assert np.allclose(V.gauge(probe), np.max(np.abs(probe), axis=1), rtol=1e-8)

    def test_lp_matches_facets_3d(self):
        body = HalfDiskHull(32)
        probe = np.random.default_rng(5).normal(size=(30, 3))
        assert np.allclose(body.gauge_lp(probe), body.gauge(probe), rtol=1e-7)

    def test_halfdisk_gauge_against_support_sweep(self):
        # gauge(v) = max_u <u, v> / h(u): a dense sweep of u gives a lower bound
        body = HalfDiskHull(512)
        rng = np.random.default_rng(7)
        U = rng.normal(size=(40_000, 3))
        U /= np.linalg.norm(U, axis=1, keepdims=True)
        h = body.support(U)
        V = rng.normal(size=(20, 3))
        sweep = np.max((V @ U.T) / h, axis=1)
        g = body.gauge(V)
        assert np.all(sweep <= g * (1 + 1e-4))
        assert np.allclose(sweep, g, rtol=2e-2)

    def test_regular_polygon(self):
        hexagon = regular_polygon(6)
        assert hexagon.n == 2
        assert gauge(hexagon, [1.0, 0.0]) == pytest.approx(1.0)


@pytest.mark.parametrize("name", sorted(BODIES))
class TestInvariants:
    @settings(max_examples=60, deadline=None)
    @given(v=vec3, lam=st.floats(0, 50))
    def test_homogeneity(self, name, v, lam):
        b = BODIES[name]
        g = b.gauge(v)
        assert abs(b.gauge(lam * v) - lam * g) <= 1e-10 * max(1.0, lam * g) + b.gauge_tol

    @settings(max_examples=60, deadline=None)
    @given(v=vec3)
    def test_symmetry_exact(self, name, v):
        b = BODIES[name]
        assert b.gauge(-v) == b.gauge(v)

    @settings(max_examples=60, deadline=None)
    @given(u=vec3, v=vec3)
    def test_subadditive(self, name, u, v):
        b = BODIES[name]
        assert b.gauge(u + v) <= b.gauge(u) + b.gauge(v) + 1e-9 * (1 + b.gauge(u) + b.gauge(v))

    @settings(max_examples=60, deadline=None)
    @given(u=vec3, v=vec3)
    def test_dual_consistency(self, name, u, v):
        if not nonzero(u):
            return
        b = BODIES[name]
        assert float(u @ v) <= b.support(u) * b.gauge(v) * (1 + 1e-9) + 1e-12

    @settings(max_examples=30, deadline=None)
    @given(v=vec3)
    def test_positive_off_origin(self, name, v):
        if nonzero(v):
            assert BODIES[name].gauge(v) > 0


def test_facet_membership_on_boundary():
    body = cube(3)
    P = boundary_point(body, np.random.default_rng(4).normal(size=(300, 3)))
    assert np.all(P @ body.normals.T <= body.offsets * (1 + body.gauge_tol))


def test_homogeneity_sample_of_thousand():
    rng = np.random.default_rng(11)
    V = rng.normal(size=(1000, 3))
    for b in BODIES.values():
        g2 = b.gauge(2 * V)
        assert np.all(np.abs(g2 - 2 * b.gauge(V)) <= max(b.gauge_tol, 1e-15) * g2 + 1e-15)
