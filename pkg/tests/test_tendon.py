"""Tendon waypoint law, force projection, and moment profile."""

import numpy as np
import pytest

from softgrip.errors import DegenerateRouteError
from softgrip.geometry.finger import FingerParams
from softgrip.tendon import (
    TendonRoute,
    TendonState,
    bending_moment_profile,
    place_waypoints,
    tendon_forces,
    tendon_nodal_loads,
)


def _route(waypoints, normals, arcs=None, heights=None):
    waypoints = np.asarray(waypoints, dtype=float)
    n = len(waypoints)
    if arcs is None:
        arcs = np.linspace(0, 1, n)
    if heights is None:
        heights = np.zeros(n)
    return TendonRoute(
        waypoints=waypoints,
        normals=np.asarray(normals, dtype=float),
        vertex_indices=np.arange(n),
        arcs=np.asarray(arcs, dtype=float),
        heights=np.asarray(heights, dtype=float),
    )


class TestWaypointLaw:
    def test_base_mid_tip(self):
        p = FingerParams()
        h = p.height_profile(np.array([0.0, p.length / 2, p.length]))
        H = p.base_height
        assert h[0] == pytest.approx(H)
        assert h[1] == pytest.approx(H / 4)
        assert h[2] == pytest.approx(0.0)

    def test_route_heights_exact(self):
        p = FingerParams(length=0.123, base_height=0.017)
        route = place_waypoints(p)
        law = p.base_height * (1 - route.arcs / p.length) ** 2
        assert np.abs(route.heights - law).max() <= 1e-12

    def test_custom_waypoint_count(self):
        p = FingerParams()
        route = place_waypoints(p, n_waypoints=9)
        assert len(route.arcs) == 9
        assert route.arcs[0] == 0.0
        assert route.arcs[-1] == pytest.approx(p.length)
        law = p.base_height * (1 - route.arcs / p.length) ** 2
        assert np.abs(route.heights - law).max() <= 1e-12

    def test_minimum_two_waypoints(self):
        with pytest.raises(ValueError):
            place_waypoints(FingerParams(), n_waypoints=1)


class TestTendonForces:
    def test_projection_annihilates_normal_direction(self):
        r = _route([[0, 0, 0], [1, 0, 0]], [[1, 0, 0], [1, 0, 0]])
        f = tendon_forces(r, TendonState(5.0))
        assert np.allclose(f[0], 0.0)

    def test_tangential_projection(self):
        d = np.array([1.0, 1.0, 0.0]) / np.sqrt(2)
        r = _route([[0, 0, 0], d], [[1, 0, 0], [1, 0, 0]])
        f = tendon_forces(r, TendonState(1.0))
        assert np.allclose(f[0], [0.0, 1 / np.sqrt(2), 0.0], atol=1e-15)

    def test_tip_case(self):
        r = _route([[0, 0, 0], [1, 0, 0]], [[1, 0, 0], [0, 1, 0]])
        f = tendon_forces(r, TendonState(2.0))
        assert np.allclose(f[-1], [0.0, -2.0, 0.0])

    def test_projection_idempotent(self, rng):
        n = rng.normal(size=3)
        n /= np.linalg.norm(n)
        r = _route([[0, 0, 0], rng.normal(size=3) + 2],
                   [n, [1, 0, 0]])
        f1 = tendon_forces(r, TendonState(3.0))[0]
        proj = f1 - n * (n @ f1)
        assert np.abs(proj - f1).max() <= 1e-12

    def test_tangency(self, rng):
        for _ in range(20):
            pts = np.cumsum(rng.uniform(0.1, 1, size=(5, 3)), axis=0)
            normals = rng.normal(size=(5, 3))
            normals /= np.linalg.norm(normals, axis=1, keepdims=True)
            r = _route(pts, normals)
            f = tendon_forces(r, TendonState(2.5))
            for i in range(4):
                assert abs(f[i] @ normals[i]) <= 1e-12

    def test_coincident_waypoints_rejected(self):
        r = _route([[0, 0, 0], [0, 0, 0]], [[1, 0, 0], [1, 0, 0]])
        with pytest.raises(DegenerateRouteError):
            tendon_forces(r, TendonState(1.0))

    def test_linearity_in_tension(self, rng):
        pts = np.cumsum(rng.uniform(0.1, 1, size=(4, 3)), axis=0)
        normals = rng.normal(size=(4, 3))
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
        r = _route(pts, normals)
        f1 = tendon_forces(r, TendonState(2.0))
        f2 = tendon_forces(r, TendonState(4.0))
        assert np.allclose(f2, 2.0 * f1)
        l1 = tendon_nodal_loads(pts, normals, 2.0)
        l2 = tendon_nodal_loads(pts, normals, 4.0)
        assert np.allclose(l2, 2.0 * l1)

    def test_negative_tension_rejected(self):
        with pytest.raises(ValueError):
            TendonState(-1.0)


class TestMomentProfile:
    def test_zero_tension(self):
        route = place_waypoints(FingerParams())
        assert np.allclose(bending_moment_profile(route, 0.0), 0.0)

    def test_tip_moment_zero(self):
        route = place_waypoints(FingerParams())
        m = bending_moment_profile(route, 7.0)
        assert m[-1] == 0.0

    def test_normalized_quadratic_profile(self):
        p = FingerParams()
        route = place_waypoints(p)
        m = bending_moment_profile(route, 3.0)
        # direct evaluation of the quadratic at each arc
        expected = (1 - route.arcs / p.length) ** 2
        assert np.allclose(m / m[0], expected, atol=1e-12)

    def test_tip_slope_vanishes(self):
        p = FingerParams()
        route = place_waypoints(p, n_waypoints=41)
        m = bending_moment_profile(route, 5.0)
        dl = route.arcs[-1] - route.arcs[-2]
        slope = (m[-1] - m[-2]) / dl
        # quadratic law: |dM/dl| at tip ~ O(dl), vanishing with refinement
        assert abs(slope) <= 2 * m[0] / p.length * (dl / p.length) * 1.01
