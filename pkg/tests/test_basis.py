"""Loop patch basis: regular box spline, extraordinary patches, quadrature."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import CLASSIC_POSITIONS, loop_limit_weights, subdivision_barycentre_value

from orthoshell.basis import (
    box_spline_regular,
    eval_irregular,
    eval_ring,
    quadrature_rule,
)
from orthoshell.mesh import (
    CANONICAL_FROM_CLASSIC,
    ControlMesh,
    build_one_ring,
    gen_rect_sheet,
    subdivide_quadrisect,
)

GOLDEN = Path(__file__).parent / "data" / "box_spline_barycentre.txt"

# canonical slot -> lattice position of the regular patch
SLOT_POSITIONS = np.zeros((12, 2))
for classic, slot in CANONICAL_FROM_CLASSIC.items():
    SLOT_POSITIONS[slot] = CLASSIC_POSITIONS[classic - 1]

interior_points = st.tuples(st.floats(0.0, 1.0), st.floats(0.0, 1.0)).filter(lambda p: p[0] + p[1] <= 1.0)


def _golden():
    rows = [line.split() for line in GOLDEN.read_text().splitlines() if line and not line.startswith("#")]
    return {int(k): float(v) for k, v in rows}


def _fan_mesh(n, z=None):
    """Planar disk: a centre of valence ``n``, a first ring of valence-6
    nodes and an outer ring of 2n boundary nodes."""
    ang = 2 * np.pi * np.arange(n) / n
    ring1 = np.c_[np.cos(ang), np.sin(ang)]
    outer = []
    for k in range(n):
        outer.append(2 * ring1[k])
        outer.append(ring1[k] + ring1[(k + 1) % n])
    nodes = np.vstack([[0.0, 0.0], ring1, outer])
    nodes = np.c_[nodes, np.zeros(len(nodes)) if z is None else z(nodes)]
    r1 = lambda k: 1 + k % n  # noqa: E731
    r2 = lambda k: 1 + n + k % (2 * n)  # noqa: E731
    tris = []
    for k in range(n):
        tris.append((0, r1(k), r1(k + 1)))
        tris.append((r1(k), r2(2 * k), r2(2 * k + 1)))
        tris.append((r1(k), r2(2 * k + 1), r1(k + 1)))
        tris.append((r1(k + 1), r2(2 * k + 1), r2(2 * k + 2)))
    return ControlMesh(nodes, np.array(tris))


class TestRegularBoxSpline:
    def test_barycentre_matches_golden_fixture(self):
        table = box_spline_regular((1 / 3, 1 / 3))
        for classic, value in _golden().items():
            assert table.values[CANONICAL_FROM_CLASSIC[classic]] == pytest.approx(value, abs=1e-14)

    @pytest.mark.parametrize("classic", [1, 3, 4, 9])
    def test_golden_fixture_reproduced_by_subdivision_oracle(self, classic):
        value = subdivision_barycentre_value(np.eye(12)[classic - 1])
        assert value == pytest.approx(_golden()[classic], abs=1e-12)

    def test_barycentre_exact_fractions(self):
        v = box_spline_regular().values
        corners = [CANONICAL_FROM_CLASSIC[k] for k in (4, 7, 8)]
        edges = [CANONICAL_FROM_CLASSIC[k] for k in (3, 5, 11)]
        np.testing.assert_allclose(v[corners], 23 / 81, atol=1e-15)
        np.testing.assert_allclose(v[edges], 7 / 162, atol=1e-15)

    @given(interior_points)
    def test_partition_of_unity(self, p):
        t = box_spline_regular(p)
        assert abs(t.values.sum() - 1.0) < 1e-12
        assert np.abs(t.first.sum(axis=0)).max() < 1e-10
        assert np.abs(t.second.sum(axis=0)).max() < 1e-10

    @given(interior_points)
    def test_linear_reproduction(self, p):
        t = box_spline_regular(p)
        A, B, C = SLOT_POSITIONS[:3]
        expected = A + p[0] * (B - A) + p[1] * (C - A)
        np.testing.assert_allclose(t.values @ SLOT_POSITIONS, expected, atol=1e-9)
        np.testing.assert_allclose(t.first.T @ SLOT_POSITIONS, np.array([B - A, C - A]), atol=1e-9)
        assert np.abs(np.einsum("iab,ik->abk", t.second, SLOT_POSITIONS)).max() < 1e-9

    @given(interior_points)
    def test_quadratic_reproduction(self, p):
        """Quartic box splines reproduce quadratics up to a constant shift."""
        t = box_spline_regular(p)
        f = lambda q: q[..., 0] ** 2 + 0.5 * q[..., 0] * q[..., 1] - q[..., 1] ** 2  # noqa: E731
        x = SLOT_POSITIONS
        A, B, C = x[:3]
        Hf = np.array([[2.0, 0.5], [0.5, -2.0]])
        J = np.array([B - A, C - A])
        np.testing.assert_allclose(np.einsum("iab,i->ab", t.second, f(x)), J @ Hf @ J.T, atol=1e-9)

    @given(interior_points)
    def test_derivatives_match_finite_differences(self, p):
        v, w = p
        h = 1e-6
        v = min(max(v, h), 1 - 2 * h)
        w = min(max(w, h), 1 - v - h)
        t = box_spline_regular((v, w))
        dv = (box_spline_regular((v + h, w)).values - box_spline_regular((v - h, w)).values) / (2 * h)
        dw = (box_spline_regular((v, w + h)).values - box_spline_regular((v, w - h)).values) / (2 * h)
        np.testing.assert_allclose(t.d_xi, dv, atol=1e-7)
        np.testing.assert_allclose(t.d_eta, dw, atol=1e-7)

    def test_symmetry_swaps_values(self):
        """Reflection across the element's A-median swaps xi and eta."""
        # classic mirror: 4 fixed, 7 <-> 8 with the rest of the lattice mirrored
        x = SLOT_POSITIONS
        A, B, C = x[:3]
        axis = (B + C) / 2 - A
        axis /= np.linalg.norm(axis)
        mirrored = A + 2 * ((x - A) @ axis)[:, None] * axis - (x - A)
        perm = [int(np.argmin(np.linalg.norm(x - m, axis=1))) for m in mirrored]
        a = box_spline_regular((0.2, 0.1)).values
        b = box_spline_regular((0.1, 0.2)).values
        np.testing.assert_allclose(a, b[perm], atol=1e-15)

    def test_point_outside_master_triangle(self):
        with pytest.raises(ValueError):
            box_spline_regular((0.8, 0.5))


class TestExtraordinaryPatches:
    def test_valence_six_through_irregular_path(self):
        mesh = _fan_mesh(6)
        e = 0
        ring = build_one_ring(mesh, e)
        assert ring.is_regular
        for p in [(1 / 3, 1 / 3), (0.1, 0.7), (0.6, 0.2)]:
            ref = box_spline_regular(p)
            got = eval_irregular(ring, p)
            np.testing.assert_allclose(got.values, ref.values, atol=1e-12)
            np.testing.assert_allclose(got.first, ref.first, atol=1e-12)
            np.testing.assert_allclose(got.second, ref.second, atol=1e-11)

    @pytest.mark.parametrize("n, size", [(5, 11), (7, 13), (8, 14), (3, 9)])
    def test_ring_size_is_valence_plus_six(self, n, size):
        ring = build_one_ring(_fan_mesh(n), 0)
        assert not ring.is_regular
        assert ring.size == size

    @pytest.mark.parametrize("n", [3, 4, 5, 7, 8])
    def test_partition_of_unity(self, n):
        ring = build_one_ring(_fan_mesh(n), 0)
        for p in [(1 / 3, 1 / 3), (0.05, 0.05), (0.5, 0.4)]:
            t = eval_irregular(ring, p)
            assert abs(t.values.sum() - 1.0) < 1e-10
            assert np.abs(t.first.sum(axis=0)).max() < 1e-10
            assert np.abs(t.second.sum(axis=0)).max() < 1e-9

    @pytest.mark.parametrize("n", [5, 7])
    def test_planar_data_stays_planar(self, n):
        """Near an extraordinary vertex the parametrisation is not affine,
        but planar control data still gives a planar, regular surface."""
        mesh = _fan_mesh(n, z=lambda q: 0.2 * q[:, 0] - 0.1 * q[:, 1] + 1.0)
        ring = build_one_ring(mesh, 0)
        x = mesh.nodes[list(ring.nodes)]
        plane = lambda y: y[..., 2] - (0.2 * y[..., 0] - 0.1 * y[..., 1] + 1.0)  # noqa: E731
        for p in [(1 / 3, 1 / 3), (0.2, 0.05), (0.02, 0.03)]:
            t = eval_irregular(ring, p)
            assert abs(plane(t.values @ x)) < 1e-12
            a = t.first.T @ x
            assert np.abs(a[:, 2] - (0.2 * a[:, 0] - 0.1 * a[:, 1])).max() < 1e-12
            assert np.linalg.norm(np.cross(a[0], a[1])) > 1e-3

    def test_derivatives_match_finite_differences_valence_five(self):
        z = lambda q: 0.3 * q[:, 0] ** 2 - 0.2 * q[:, 0] * q[:, 1] + 0.1 * q[:, 1] ** 3  # noqa: E731
        mesh = _fan_mesh(5, z=z)
        ring = build_one_ring(mesh, 0)
        x = mesh.nodes[list(ring.nodes)]
        h = 1e-5
        for v, w in [(1 / 3, 1 / 3), (0.25, 0.4), (0.12, 0.08)]:
            t = eval_irregular(ring, (v, w))
            pos = lambda a, b: eval_irregular(ring, (a, b)).values @ x  # noqa: E731
            d1 = (pos(v + h, w) - pos(v - h, w)) / (2 * h)
            d2 = (pos(v, w + h) - pos(v, w - h)) / (2 * h)
            a = t.first.T @ x
            assert np.linalg.norm(a[0] - d1) / np.linalg.norm(a[0]) < 1e-6
            assert np.linalg.norm(a[1] - d2) / np.linalg.norm(a[1]) < 1e-6
            g1 = lambda a_, b_: eval_irregular(ring, (a_, b_)).first.T @ x  # noqa: E731
            d11 = (g1(v + h, w)[0] - g1(v - h, w)[0]) / (2 * h)
            d12 = (g1(v, w + h)[0] - g1(v, w - h)[0]) / (2 * h)
            sec = np.einsum("iab,ik->abk", t.second, x)
            assert np.linalg.norm(sec[0, 0] - d11) / np.linalg.norm(sec[0, 0]) < 1e-5
            assert np.linalg.norm(sec[0, 1] - d12) / max(np.linalg.norm(sec[0, 1]), 1e-3) < 1e-5

    @pytest.mark.parametrize("n", [5, 7])
    def test_limit_position_near_extraordinary_vertex(self, n):
        """Approaching the irregular corner recovers the Loop limit mask."""
        ring = build_one_ring(_fan_mesh(n), 0)
        centre, nb = loop_limit_weights(n)
        t = eval_irregular(ring, (1e-7, 1e-7))
        assert t.values[0] == pytest.approx(centre, abs=1e-5)
        ring_slots = [s for s, node in enumerate(ring.nodes) if 1 <= node <= n]
        np.testing.assert_allclose(t.values[ring_slots], nb, atol=1e-5)

    def test_limit_position_at_regular_corner(self):
        """At a valence-6 corner the regular vertex mask (1/2, 1/12) applies."""
        mesh = _fan_mesh(5)
        ring = build_one_ring(mesh, 0)
        t = eval_irregular(ring, (1.0, 0.0))
        B = ring.nodes[1]
        nbrs = {v for tri in mesh.triangles.tolist() if B in tri for v in tri} - {B}
        assert t.values[1] == pytest.approx(0.5, abs=1e-12)
        for s, node in enumerate(ring.nodes):
            if node in nbrs:
                assert t.values[s] == pytest.approx(1 / 12, abs=1e-12)

    def test_three_irregular_vertices_supported(self):
        from oracles import ICOSAHEDRON_FACES, icosahedron_nodes

        mesh = ControlMesh(icosahedron_nodes(), np.array(ICOSAHEDRON_FACES))
        ring = build_one_ring(mesh, 0)
        assert ring.size == 9
        ids, t = eval_ring(ring)
        assert abs(t.values.sum() - 1.0) < 1e-10
        # the limit surface of a convex polyhedron lies inside it
        x = t.values @ mesh.nodes[ids]
        assert 0.0 < np.linalg.norm(x) < np.linalg.norm(mesh.nodes[0])


class TestQuadrature:
    def test_single_point_at_barycentre(self):
        point, weight = quadrature_rule()
        assert point == (1 / 3, 1 / 3)
        assert weight == 0.5

    def test_area_of_unit_square(self):
        from orthoshell.material import Material
        from orthoshell.model import ShellModel

        mesh = gen_rect_sheet(4, 4, 1.0, 1.0)
        model = ShellModel(mesh, Material.isotropic(1.0, 0.3, 0.01), "isotropic", orthotropic=False)
        assert model.total_area() == pytest.approx(1.0, abs=1e-10)

    def test_area_unchanged_by_two_quadrisections(self):
        from orthoshell.material import Material
        from orthoshell.model import ShellModel

        mat = Material.isotropic(1.0, 0.3, 0.01)
        mesh = gen_rect_sheet(3, 2, 1.5, 1.0)
        fine = subdivide_quadrisect(subdivide_quadrisect(mesh))
        a0 = ShellModel(mesh, mat, "isotropic", orthotropic=False).total_area()
        a2 = ShellModel(fine, mat, "isotropic", orthotropic=False).total_area()
        assert a2 == pytest.approx(a0, abs=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([5, 7]), interior_points)
def test_irregular_partition_of_unity_property(n, p):
    ring = build_one_ring(_fan_mesh(n), 0)
    t = eval_irregular(ring, (max(p[0], 1e-3), max(p[1], 1e-3)) if p[0] + p[1] < 2e-3 else p)
    assert abs(t.values.sum() - 1.0) < 1e-10
