"""Surface geometry and strain measures at the element quadrature point."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orthoshell.errors import DegenerateElementError
from orthoshell.kinematics import inverse_metric, strains, surface_geometry
from orthoshell.material import Material, hemisphere_material
from orthoshell.mesh import gen_hemisphere, gen_rect_sheet
from orthoshell.model import ShellModel


def _rotation(axis, angle):
    axis = np.asarray(axis, float) / np.linalg.norm(axis)
    K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * K @ K


def _geometry(model, u=None):
    x = model.reference if u is None else model.reference + u.reshape(-1, 3)
    t = model.tables
    return surface_geometry(t.first, t.second, x[t.conn])


@pytest.fixture(scope="module")
def hemisphere():
    return ShellModel(gen_hemisphere(16, 64, 10.0, 18.0), hemisphere_material(1.0))


@pytest.fixture(scope="module")
def sheet():
    mat = Material.isotropic(1.0, 0.3, 0.1, d=[1.0, 0.0, 0.0])
    return ShellModel(gen_rect_sheet(6, 6, 1.0, 1.0), mat, "isotropic")


class TestGeometry:
    def test_flat_sheet(self, sheet):
        g = _geometry(sheet)
        np.testing.assert_allclose(g.curvature, 0.0, atol=1e-12)
        np.testing.assert_allclose(g.normal, np.broadcast_to([0.0, 0.0, 1.0], g.normal.shape), atol=1e-14)

    def test_invariants(self, hemisphere):
        g = _geometry(hemisphere)
        np.testing.assert_allclose(np.einsum("eak,ek->ea", g.basis, g.normal), 0.0, atol=1e-10)
        np.testing.assert_allclose(np.linalg.norm(g.normal, axis=1), 1.0, atol=1e-14)
        np.testing.assert_allclose(g.metric, g.metric.transpose(0, 2, 1), atol=1e-12)
        eye = np.broadcast_to(np.eye(2), g.metric.shape)
        np.testing.assert_allclose(g.inverse_metric @ g.metric, eye, atol=1e-10)
        np.testing.assert_allclose(g.curvature, g.curvature.transpose(0, 2, 1), atol=1e-9)

    def test_two_curvature_forms_agree(self, hemisphere):
        # b_ab = a3 . a_a,b  and  b_ab = -a_a . a3,b
        g = _geometry(hemisphere)
        a1, a2, n = g.basis[:, 0], g.basis[:, 1], g.normal
        dn = np.empty_like(g.basis)
        for b in range(2):
            dc = np.cross(g.basis_derivatives[:, 0, b], a2) + np.cross(a1, g.basis_derivatives[:, 1, b])
            dc -= np.einsum("ek,ek->e", dc, n)[:, None] * n
            dn[:, b] = dc / g.jacobian[:, None]
        other = -np.einsum("eak,ebk->eab", g.basis, dn)
        np.testing.assert_allclose(g.curvature, other, atol=1e-9 * np.abs(g.curvature).max())

    def test_sphere_curvature(self, hemisphere):
        g = _geometry(hemisphere)
        interior = ~np.any(hemisphere.mesh.boundary_nodes[hemisphere.mesh.triangles], axis=1)
        k = np.linalg.eigvals(np.linalg.solve(g.metric, g.curvature)).real[interior]
        # outward normal: both principal values are -1/R
        np.testing.assert_allclose(k, -0.1, rtol=0.01)

    def test_band_area(self, hemisphere):
        exact = 2 * np.pi * 10.0**2 * np.cos(np.deg2rad(18.0))
        assert hemisphere.total_area() == pytest.approx(exact, rel=5e-3)

    def test_degenerate(self):
        first = np.array([[[1.0, 0.0], [0.0, 1.0]]])
        x = np.array([[[1.0, 0, 0], [1.0, 0, 0]]])
        with pytest.raises(DegenerateElementError):
            surface_geometry(first, np.zeros((1, 2, 2, 2)), x)

    @given(st.lists(st.floats(-2, 2), min_size=3, max_size=3))
    def test_inverse_metric(self, c):
        g = np.array([[2.5 + c[0], c[1]], [c[1], 2.5 + c[2]]])
        np.testing.assert_allclose(inverse_metric(g), np.linalg.inv(g), rtol=1e-12)


class TestStrains:
    def test_zero_displacement(self, hemisphere):
        g = _geometry(hemisphere)
        s = strains(g, g)
        assert not np.any(s.membrane) and not np.any(s.bending)

    @settings(max_examples=20, deadline=None)
    @given(
        st.lists(st.floats(-1, 1), min_size=3, max_size=3).filter(lambda v: np.linalg.norm(v) > 0.1),
        st.floats(-np.pi, np.pi),
        st.lists(st.floats(-5, 5), min_size=3, max_size=3),
    )
    def test_rigid_motion(self, hemisphere, axis, angle, shift):
        x = hemisphere.reference
        u = (x @ _rotation(axis, angle).T + np.array(shift) - x).ravel()
        s = hemisphere.element_strains(u)
        assert np.abs(s.membrane).max() < 1e-9 * 10.0**2
        assert np.abs(s.bending).max() < 1e-9 * 10.0

    def test_uniform_stretch(self):
        eps = 0.01
        mat = Material.isotropic(1.0, 0.3, 0.1, d=[1.0, 0.0, 0.0])
        model = ShellModel(gen_rect_sheet(4, 4, 2.0, 1.0), mat, "isotropic")
        u = np.zeros_like(model.reference)
        u[:, 0] = eps * model.reference[:, 0]
        s = model.element_strains(u.ravel())
        a11 = model.ref.metric[:, 0, 0]
        np.testing.assert_allclose(s.membrane[:, 0, 0], (2 * eps + eps**2) / 2 * a11, rtol=1e-13)
        np.testing.assert_allclose(s.membrane[:, 0, 1], 0.0, atol=1e-14 * a11.max())
        np.testing.assert_allclose(s.membrane[:, 1, 1], 0.0, atol=1e-14 * a11.max())
        np.testing.assert_allclose(s.bending, 0.0, atol=1e-14)

    def test_bending_sign(self):
        # lifting the sheet into a parabola that opens towards +z (the normal side)
        mat = Material.isotropic(1.0, 0.3, 0.1, d=[1.0, 0.0, 0.0])
        model = ShellModel(gen_rect_sheet(6, 6, 1.0, 1.0), mat, "isotropic")
        u = np.zeros_like(model.reference)
        u[:, 2] = 0.5 * 1e-3 * (model.reference[:, 0] - 0.5) ** 2
        s = model.element_strains(u.ravel())
        # b grows positive, so beta = b_ref - b is negative along the bent direction
        assert np.all(s.bending[:, 0, 0] < 0)

    def test_transformed_strains_are_tensor_transformed(self):
        mesh = gen_rect_sheet(4, 3, 1.0, 1.0)
        plain = ShellModel(mesh, Material.isotropic(1.0, 0.3, 0.1), "isotropic", orthotropic=False)
        aligned = ShellModel(mesh, Material.isotropic(1.0, 0.3, 0.1, d=[1.0, 2.0, 0.0]), "isotropic")
        rng = np.random.default_rng(3)
        u = 1e-2 * rng.normal(size=3 * mesh.n_nodes)
        s0 = plain.element_strains(u)
        s1 = aligned.element_strains(u)
        T = np.array([r.T for r in aligned.records])
        for name in ("membrane", "bending"):
            expected = np.einsum("eab,eac,ecd->ebd", T, getattr(s0, name), T)
            np.testing.assert_allclose(getattr(s1, name), expected, atol=1e-9 * np.abs(expected).max())
