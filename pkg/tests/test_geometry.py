"""Frames, exponents, apex, bow-tie construction."""

import math

import numpy as np
import pytest

from bowtielab import geometry as geo
from bowtielab.errors import ConfigError, DomainError

RIGHT = geo.ApertureAngles(math.pi / 2, math.pi / 2)
MIXED = geo.ApertureAngles(math.pi / 3, math.pi / 2)


class TestAngles:
    def test_rejects_out_of_range(self):
        with pytest.raises(DomainError):
            geo.ApertureAngles(0.0, 1.0)
        with pytest.raises(DomainError):
            geo.ApertureAngles(1.0, math.pi + 1e-6)
        with pytest.raises(DomainError):
            geo.ApertureAngles(math.pi, math.pi)  # sum hits 2*pi - C2
        with pytest.raises(DomainError):
            geo.ApertureAngles(0.01, 0.01)  # sum below C1

    def test_boundary_angle_pi_allowed(self):
        a = geo.ApertureAngles(math.pi, math.pi / 2)
        assert a.alpha(1) == math.pi


class TestExponents:
    def test_corner_exponent_values(self):
        assert geo.corner_exponent(math.pi / 2) == pytest.approx(2.0 / 3.0, abs=1e-15)
        assert geo.corner_exponent(math.pi) == pytest.approx(1.0, abs=1e-15)
        # limit toward zero aperture
        assert geo.corner_exponent(1e-9) == pytest.approx(0.5, abs=1e-8)
        with pytest.raises(DomainError):
            geo.corner_exponent(-0.1)
        with pytest.raises(DomainError):
            geo.corner_exponent(math.pi + 0.1)

    def test_gap_exponent_values(self):
        assert geo.gap_exponent(RIGHT) == pytest.approx(2.0, abs=1e-15)
        assert geo.gap_exponent(MIXED) == pytest.approx(12.0 / 7.0, abs=1e-15)

    def test_exponent_ranges(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            a1 = rng.uniform(0.06, math.pi)
            a2 = rng.uniform(max(0.1 - a1, 0.06), min(math.pi, 2 * math.pi - 0.1 - a1))
            angles = geo.ApertureAngles(a1, a2)
            for j in (1, 2):
                b = geo.corner_exponent(angles.alpha(j))
                assert 0.5 < b <= 1.0
            assert geo.gap_exponent(angles) > 1.0


class TestGapApex:
    def test_symmetric_right_angle(self):
        q = geo.gap_apex(RIGHT)
        assert q == pytest.approx([0.0, -0.5], abs=1e-15)

    def test_equal_angles_centered(self):
        for a in (0.3, 1.0, 2.0, 3.0):
            q = geo.gap_apex(geo.ApertureAngles(a, a))
            assert q[0] == pytest.approx(0.0, abs=1e-15)

    def test_mixed_value_against_line_intersection(self):
        # independent derivation: intersect the two upper-edge lines directly
        f1 = geo.cone_frame(MIXED, 1)
        f2 = geo.cone_frame(MIXED, 2)
        A = np.column_stack([f1.reference_ray, -f2.reference_ray])
        t = np.linalg.solve(A, f2.vertex - f1.vertex)
        expected = f1.vertex + t[0] * f1.reference_ray
        q = geo.gap_apex(MIXED)
        assert q == pytest.approx(expected, abs=1e-14)
        assert q == pytest.approx([0.13397459621556135, -0.36602540378443865], abs=1e-12)

    def test_apex_on_both_edge_lines(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            a1 = rng.uniform(0.2, math.pi)
            a2 = rng.uniform(0.2, min(math.pi, 2 * math.pi - 0.2 - a1))
            angles = geo.ApertureAngles(a1, a2)
            q = geo.gap_apex(angles)
            for j in (1, 2):
                f = geo.cone_frame(angles, j)
                d = q - f.vertex
                cross = d[0] * f.reference_ray[1] - d[1] * f.reference_ray[0]
                assert abs(cross) < 1e-12


class TestConePolar:
    def test_origin_seen_from_cone2(self):
        frame = geo.cone_frame(RIGHT, 2)
        r, theta = geo.cone_polar(frame, np.array([0.0, 0.0]))
        assert r == pytest.approx(0.5, abs=1e-15)
        assert theta == pytest.approx(3 * math.pi / 4, abs=1e-14)

    @pytest.mark.parametrize("j", [1, 2])
    def test_edges_map_to_sweep_limits(self, j):
        angles = MIXED
        frame = geo.cone_frame(angles, j)
        ts = np.linspace(0.1, 3.0, 7)
        upper = frame.vertex + ts[:, None] * frame.reference_ray
        _, theta = geo.cone_polar(frame, upper)
        assert np.allclose(theta, 0.0, atol=1e-12)
        lower = upper * np.array([1.0, -1.0])
        _, theta = geo.cone_polar(frame, lower)
        assert np.allclose(theta, frame.exterior_sweep, atol=1e-12)

    def test_inside_raises(self):
        frame = geo.cone_frame(RIGHT, 2)
        with pytest.raises(DomainError):
            geo.cone_polar(frame, np.array([2.0, 0.0]))

    def test_parametrization_inverse(self):
        # points laid down via the printed parametrization must round-trip
        angles = MIXED
        frame = geo.cone_frame(angles, 2)
        a2 = angles.alpha2 / 2.0
        rng = np.random.default_rng(2)
        for _ in range(100):
            r = rng.uniform(0.01, 5.0)
            th = rng.uniform(0.0, frame.exterior_sweep)
            x = 0.5 + r * math.cos(th + a2)
            y = r * math.sin(th + a2)
            rr, tt = geo.cone_polar(frame, np.array([x, y]))
            assert rr == pytest.approx(r, rel=1e-12)
            assert tt == pytest.approx(th, abs=1e-10)


class TestGapPolar:
    def test_reference_point(self):
        frame = geo.gap_frame(RIGHT)
        rho, phi = geo.gap_polar(frame, np.array([0.0, 0.5]))
        assert rho == pytest.approx(1.0, abs=1e-15)
        assert phi == pytest.approx(math.pi / 4, abs=1e-14)

    def test_edge_values(self):
        angles = MIXED
        frame = geo.gap_frame(angles)
        f1 = geo.cone_frame(angles, 1)
        f2 = geo.cone_frame(angles, 2)
        p1 = f1.vertex + 1.7 * f1.reference_ray
        p2 = f2.vertex + 0.9 * f2.reference_ray
        _, phi1 = geo.gap_polar(frame, p1)
        _, phi2 = geo.gap_polar(frame, p2)
        assert phi1 == pytest.approx(0.0, abs=1e-12)
        assert phi2 == pytest.approx(math.pi / frame.gamma, abs=1e-12)

    def test_even_extension_and_interior_range(self):
        frame = geo.gap_frame(MIXED)
        rng = np.random.default_rng(3)
        pts = rng.uniform([-3, 0.01], [3, 3], size=(500, 2))
        mask = geo.in_exterior_of_cones(MIXED, pts)
        pts = pts[mask]
        rho, phi = geo.gap_polar(frame, pts)
        assert np.all(phi > 0.0) and np.all(phi < math.pi / frame.gamma)
        mirrored = pts * np.array([1.0, -1.0])
        _, phi_m = geo.gap_polar(frame, mirrored)
        assert np.allclose(phi, phi_m, atol=1e-14)

    def test_level_sets_are_rays_from_apex(self):
        frame = geo.gap_frame(MIXED)
        rng = np.random.default_rng(4)
        for _ in range(20):
            phi0 = rng.uniform(0.05, math.pi / frame.gamma - 0.05)
            psi = frame.reference_angle - phi0
            d = np.array([math.cos(psi), math.sin(psi)])
            pts = frame.q + np.linspace(1.0, 6.0, 5)[:, None] * d
            _, phi = geo.gap_polar(frame, pts, check=False)
            assert np.allclose(phi, phi0, atol=1e-12)
            # collinearity with the apex
            rel = pts - frame.q
            cross = rel[:, 0] * d[1] - rel[:, 1] * d[0]
            assert np.max(np.abs(cross)) < 1e-12

    def test_inside_cone_raises(self):
        frame = geo.gap_frame(RIGHT)
        with pytest.raises(DomainError):
            geo.gap_polar(frame, np.array([3.0, 0.0]))


class TestBowTie:
    def test_vertices(self):
        geom = geo.build_bowtie(RIGHT, eps=0.1)
        assert geom.vertex(1) == pytest.approx([-0.05, 0.0], abs=1e-15)
        assert geom.vertex(2) == pytest.approx([0.05, 0.0], abs=1e-15)

    def test_bad_parameters(self):
        with pytest.raises(ConfigError):
            geo.build_bowtie(RIGHT, eps=-1.0)
        with pytest.raises(ConfigError):
            geo.build_bowtie(RIGHT, eps=0.3, delta=0.25)  # eps >= delta
        with pytest.raises(ConfigError):
            geo.build_bowtie(RIGHT, eps=0.01, edge_len=0.2, delta=0.25)
        with pytest.raises(ConfigError):
            # cap would intrude into the coincidence disk
            geo.build_bowtie(geo.ApertureAngles(0.95 * math.pi, 0.5), eps=0.01)

    def test_local_cone_coincidence(self):
        geom = geo.build_bowtie(RIGHT, eps=0.01)
        rng = np.random.default_rng(5)
        pts = rng.uniform(-geom.delta, geom.delta, size=(10_000, 2))
        pts = pts[np.hypot(pts[:, 0], pts[:, 1]) < geom.delta]
        for j in (1, 2):
            inc = geom.inclusion(j).contains(pts)
            cone = geo.translated_cone_contains(geom, j, pts)
            assert np.array_equal(inc, cone)

    def test_boundary_symmetric_and_on_curve(self):
        geom = geo.build_bowtie(MIXED, eps=0.02)
        for j in (1, 2):
            inc = geom.inclusion(j)
            s = np.linspace(0.0, inc.perimeter, 903, endpoint=False)
            pts = inc.boundary_point(s)
            mirrored = inc.boundary_point(np.mod(inc.perimeter - s, inc.perimeter))
            assert np.allclose(pts * np.array([1.0, -1.0]), mirrored, atol=1e-12)

    def test_cap_points_on_tangent_circle(self):
        geom = geo.build_bowtie(MIXED, eps=0.02)
        for j in (1, 2):
            inc = geom.inclusion(j)
            cap_lo = inc.edge_len
            cap_hi = inc.perimeter - inc.edge_len
            s = np.linspace(cap_lo, cap_hi, 101)
            pts = inc.boundary_point(s)
            r = np.hypot(pts[:, 0] - inc.cap_center[0], pts[:, 1] - inc.cap_center[1])
            assert np.allclose(r, inc.cap_radius, atol=1e-12)
            # radius of the tangent circle
            assert inc.cap_radius == pytest.approx(
                inc.edge_len * math.tan(inc.opening / 2.0), abs=1e-15
            )

    def test_boundary_closed_and_non_self_intersecting(self):
        geom = geo.build_bowtie(RIGHT, eps=0.05)
        inc = geom.inclusion(2)
        s = np.linspace(0.0, inc.perimeter, 2000, endpoint=False)
        pts = inc.boundary_point(s)
        # closed: parameter wraps around to the vertex
        assert inc.boundary_point(np.array([0.0]))[0] == pytest.approx(inc.vertex, abs=1e-12)
        assert inc.boundary_point(np.array([inc.perimeter - 1e-12]))[0] == pytest.approx(
            inc.vertex, abs=1e-9
        )
        # simple polygon check: consecutive point spacing stays bounded
        gaps = np.hypot(*np.diff(np.vstack([pts, pts[:1]]), axis=0).T)
        assert gaps.max() < 3.0 * inc.perimeter / 2000

    def test_boundary_sample_table(self):
        geom = geo.build_bowtie(RIGHT, eps=0.05)
        rows = geom.boundary_sample(100)
        assert rows.shape == (200, 4)
        assert set(np.unique(rows[:, 0])) == {1.0, 2.0}


class TestGapAngleGradient:
    def test_magnitude_and_orthogonality(self):
        frame = geo.gap_frame(MIXED)
        rng = np.random.default_rng(6)
        pts = rng.uniform([-2, 0.05], [2, 2.5], size=(300, 2))
        pts = pts[geo.in_exterior_of_cones(MIXED, pts)]
        grad, flag = geo.gap_angle_gradient(frame, pts)
        rho, _ = geo.gap_polar(frame, pts)
        assert np.allclose(np.hypot(grad[:, 0], grad[:, 1]), 1.0 / rho, rtol=1e-12)
        rel = pts - frame.q
        dot = grad[:, 0] * rel[:, 0] + grad[:, 1] * rel[:, 1]
        assert np.max(np.abs(dot)) < 1e-12
        assert not flag.any()

    def test_finite_difference(self):
        frame = geo.gap_frame(RIGHT)
        rng = np.random.default_rng(7)
        h = 1e-6
        for _ in range(100):
            p = rng.uniform([-1.5, 0.05], [1.5, 2.0])
            if not geo.in_exterior_of_cones(RIGHT, p):
                continue
            grad, _ = geo.gap_angle_gradient(frame, p)
            for d in range(2):
                step = np.zeros(2)
                step[d] = h
                _, fp = geo.gap_polar(frame, p + step, check=False)
                _, fm = geo.gap_polar(frame, p - step, check=False)
                assert grad[d] == pytest.approx((fp - fm) / (2 * h), rel=1e-6, abs=1e-9)

    def test_on_axis_flag_one_sided(self):
        frame = geo.gap_frame(RIGHT)
        pts = np.array([[0.2, 0.0], [0.2, 1e-9]])
        grad, flag = geo.gap_angle_gradient(frame, pts)
        assert flag[0] and not flag[1]
        assert grad[0] == pytest.approx(grad[1], rel=1e-6)

    def test_continuity_across_axis_of_phi(self):
        frame = geo.gap_frame(MIXED)
        xs = np.linspace(-0.4, 0.4, 21)
        up = np.stack([xs, np.full_like(xs, 1e-9)], axis=-1)
        dn = np.stack([xs, np.full_like(xs, -1e-9)], axis=-1)
        _, phi_u = geo.gap_polar(frame, up)
        _, phi_d = geo.gap_polar(frame, dn)
        assert np.allclose(phi_u, phi_d, atol=1e-8)
