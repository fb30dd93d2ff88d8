import numpy as np
import pytest

from _oracle import grid_line_min
from normbisect.bisector import Label
from normbisect.body import HalfDiskHull, LpBall, boundary_point, cube
from normbisect.ortho import line_boundary_roots
from normbisect.shadow import (MIDPOINT, SHADOW, bisector_label_fraction, bounded_representation,
                               chord_arrays, chord_field, complement_basis, offset_grid,
                               radial_crosscheck, rim_sweep, shadow_boundary_test, shadow_mask,
                               sharp_point_test)

E2 = LpBall(2, 2)
E3 = LpBall(3, 2)
CUBE = cube(3)
HD = HalfDiskHull(256)
E1 = np.array([1.0, 0.0, 0.0])


class TestShadowBoundary:
    def test_euclid_great_circle(self):
        assert shadow_boundary_test(E3, E1, [0, 0.6, 0.8])

    def test_cube_side_face(self):
        assert shadow_boundary_test(CUBE, E1, [0.3, 1, 0.2])
        # oracle: the e1 line through the point never goes below gauge 1
        assert grid_line_min(CUBE, [0.3, 1, 0.2], E1, -20, 20, 40_001) >= 1.0 - 1e-12

    def test_cube_front_face(self):
        assert not shadow_boundary_test(CUBE, E1, [1, 0.3, 0.2])

    def test_off_boundary(self):
        with pytest.raises(ValueError):
            shadow_boundary_test(E3, E1, [0, 0.3, 0.4])

    def test_mask_matches_scalar(self):
        P = boundary_point(CUBE, np.random.default_rng(0).normal(size=(100, 3)))
        P[:20, 0] = 0.0
        P = boundary_point(CUBE, P)
        m = shadow_mask(CUBE, E1, P)
        assert m.tolist() == [shadow_boundary_test(CUBE, E1, p) for p in P]


class TestSharp:
    def test_euclid(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            v = rng.normal(size=3)
            v[0] = 0
            assert sharp_point_test(E3, E1, v / np.linalg.norm(v))

    def test_cube_face(self):
        assert not sharp_point_test(CUBE, E1, [0, 1, 0.5])
        (lo, hi), = line_boundary_roots(CUBE, [0, 1, 0.5], E1)
        assert hi - lo == pytest.approx(2.0, abs=1e-8)

    def test_halfdisk_pole_not_sharp(self):
        # (1,0,1) and (-1,0,1) both lie in K: the e1 line through z touches along a segment
        z = np.array([0.0, 0.0, 1.0])
        assert HD.gauge(z) == pytest.approx(1.0)
        assert shadow_boundary_test(HD, E1, z)
        assert not sharp_point_test(HD, E1, z)

    def test_off_shadow(self):
        with pytest.raises(ValueError):
            sharp_point_test(CUBE, E1, [1, 0.3, 0.2])


class TestChords:
    def test_euclid_345(self):
        f = chord_arrays(E2, [1, 0], [[0, 0.6]])
        assert f.t_minus[0] == pytest.approx(-0.8) and f.t_plus[0] == pytest.approx(0.8)
        assert np.allclose(f.midpoints[0], [0, 0.6])
        assert f.half_lengths[0] == pytest.approx(0.8)

    def test_cube_interior(self):
        c, = chord_field(CUBE, E1, offsets=[[0, 0.5, 0.5]])
        assert (c.t_minus, c.t_plus) == pytest.approx((-1.0, 1.0))
        assert np.allclose(c.midpoint, [0, 0.5, 0.5]) and c.half_length == pytest.approx(1.0)

    def test_cube_tangency(self):
        c, = chord_field(CUBE, E1, offsets=[[0, 1, 0.5]])
        assert c.tangent and c.half_length == 0.0

    def test_misses_dropped(self):
        assert len(chord_arrays(E3, E1, [[0, 2, 0]])) == 0

    def test_endpoints_on_boundary(self):
        f = chord_arrays(HD, E1, offset_grid(HD, E1, 0.1))
        s = f.half_lengths > 0
        for t in (f.t_minus, f.t_plus):
            g = HD.gauge(f.offsets[s] + t[s, None] * E1)
            assert np.allclose(g, 1.0, atol=1e-9)

    @pytest.mark.parametrize("body", [CUBE, HD, LpBall(3, 1.5)], ids=["cube", "hd", "l1.5"])
    def test_midpoint_symmetry(self, body):
        x = np.array([0.8, -0.3, 0.5])
        x /= body.gauge(x)
        H = offset_grid(body, x, 0.1)
        a = chord_arrays(body, x, H)
        b = chord_arrays(body, x, -H)
        assert len(a) == len(b)
        assert np.allclose(a.midpoints, -b.midpoints, atol=1e-9)

    def test_grid_is_symmetric(self):
        H = offset_grid(HD, E1, 0.05)
        assert np.allclose(np.sort(H, axis=0), np.sort(-H, axis=0))
        assert np.allclose(H @ E1, 0)

    def test_complement_basis(self):
        x = np.array([0.3, -1.0, 0.2])
        B = complement_basis(x)
        assert B.shape == (2, 3)
        assert np.allclose(B @ B.T, np.eye(2)) and np.allclose(B @ x, 0)


class TestBoundedRepresentation:
    def test_euclid_plane(self):
        br = bounded_representation(E3, E1, spacing=0.05)
        assert np.max(np.abs(br.points[:, 0])) <= 1e-8
        assert np.all(E3.gauge(br.points) <= 1 + 1e-10)

    def test_cube(self):
        br = bounded_representation(CUBE, E1, spacing=0.05)
        m = br.midpoints
        assert np.allclose(m[:, 0], 0, atol=1e-9)
        assert np.all(np.max(np.abs(m[:, 1:]), axis=1) < 1)
        sh = br.shadow
        assert np.allclose(np.max(np.abs(sh[:, 1:]), axis=1), 1.0, atol=1e-9)
        assert np.all(np.abs(sh[:, 0]) <= 1 + 1e-9)
        # per-point oracle: every shadow point is a tangency of its e1 line
        for p in sh[::7]:
            assert len(line_boundary_roots(CUBE, p, E1)) == 1

    @pytest.mark.parametrize("body", [CUBE, HD, LpBall(3, 3)], ids=["cube", "hd", "l3"])
    def test_invariants(self, body):
        br = bounded_representation(body, E1, spacing=0.05)
        assert np.all(body.gauge(br.midpoints) < 1 + 1e-10)
        assert np.allclose(body.gauge(br.shadow), 1.0, atol=1e-9)
        assert np.all(shadow_mask(body, E1, br.shadow))
        tags = br.tags
        assert set(tags) == {MIDPOINT, SHADOW}
        assert len(tags) == len(br.points)

    @pytest.mark.parametrize("body", [CUBE, HD], ids=["cube", "hd"])
    def test_radial_projection_is_bisector(self, body):
        br = bounded_representation(body, E1, spacing=0.1)
        labels = radial_crosscheck(body, E1, br.points)
        assert bisector_label_fraction(labels) == 1.0

    def test_rim_points_on_boundary(self):
        P = rim_sweep(HD, E1, 0.05)
        assert np.allclose(HD.gauge(P), 1.0, atol=1e-9)

    def test_label_fraction_empty(self):
        assert bisector_label_fraction(np.empty(0)) == 1.0
        assert bisector_label_fraction(np.array([Label.LEFT, Label.BISECTOR])) == 0.5
