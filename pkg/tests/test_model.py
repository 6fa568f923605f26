"""Assembled energy, internal force, tangent and lumped mass."""

from __future__ import annotations

import numpy as np
import pytest

from orthoshell.material import Material, hemisphere_material, wrinkle_material
from orthoshell.mesh import gen_hemisphere, gen_rect_sheet, subdivide_quadrisect
from orthoshell.model import ShellModel


def _fd_gradient(model, u, step):
    g = np.empty_like(u)
    for i in range(len(u)):
        d = np.zeros_like(u)
        d[i] = step
        g[i] = (model.internal_energy(u + d) - model.internal_energy(u - d)) / (2 * step)
    return g


@pytest.fixture(scope="module")
def curved():
    return ShellModel(gen_hemisphere(3, 12, 10.0, 18.0), hemisphere_material(0.5), "voigt")


@pytest.fixture(scope="module")
def sheet():
    return ShellModel(gen_rect_sheet(4, 4, 1.0, 1.0), wrinkle_material("ortho"), "voigt")


class TestInternal:
    def test_zero_state(self, curved):
        E, f = curved.internal(np.zeros(curved.n_dof))
        assert E == 0.0
        assert np.abs(f).max() < 1e-12

    @pytest.mark.parametrize("mode", ["coefficient", "voigt"])
    def test_gradient_matches_finite_differences_sheet(self, mode):
        model = ShellModel(gen_rect_sheet(4, 4, 1.0, 1.0), wrinkle_material("ortho"), mode)
        rng = np.random.default_rng(0)
        u = 1e-2 * rng.normal(size=model.n_dof)
        f = model.internal_force(u)
        g = _fd_gradient(model, u, 1e-7 * 1.0)
        assert np.abs(f - g).max() < 1e-6 * np.abs(g).max()

    def test_gradient_matches_finite_differences_curved(self, curved):
        rng = np.random.default_rng(1)
        u = 1e-2 * rng.normal(size=curved.n_dof)
        f = curved.internal_force(u)
        g = _fd_gradient(curved, u, 1e-7 * curved.char_length)
        assert np.abs(f - g).max() < 1e-6 * np.abs(g).max()

    def test_rigid_body_motion(self, curved):
        x = curved.reference
        c, s = np.cos(0.3), np.sin(0.3)
        R = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1.0]]) @ np.array([[1, 0, 0], [0, c, -s], [0, s, c]])
        u = (x @ R.T + [1.0, -2.0, 0.5] - x).ravel()
        E, f = curved.internal(u)
        scale = curved.material.E1 * curved.material.h * curved.char_length
        assert E < 1e-12 * scale * curved.char_length
        assert np.abs(f).max() < 1e-8 * scale

    def test_element_energies_sum(self, sheet):
        u = 1e-2 * np.random.default_rng(2).normal(size=sheet.n_dof)
        mem, bend = sheet.element_energies(u)
        assert mem.sum() + bend.sum() == pytest.approx(sheet.internal_energy(u), rel=1e-12)
        assert np.all(mem >= 0) and np.all(bend >= 0)


class TestTangent:
    def test_symmetric_and_consistent(self, sheet):
        rng = np.random.default_rng(3)
        u = 1e-2 * rng.normal(size=sheet.n_dof)
        K = sheet.tangent(u)
        assert abs(K - K.T).max() < 1e-12 * abs(K).max()
        v = rng.normal(size=sheet.n_dof)
        h = 1e-6
        fd = (sheet.internal_force(u + h * v) - sheet.internal_force(u - h * v)) / (2 * h)
        np.testing.assert_allclose(K @ v, fd, atol=1e-6 * np.abs(fd).max())

    def test_rigid_modes_in_kernel(self, curved):
        K = curved.tangent(np.zeros(curved.n_dof))
        for k in range(3):
            t = np.zeros((curved.n_nodes, 3))
            t[:, k] = 1.0
            assert np.abs(K @ t.ravel()).max() < 1e-6 * abs(K).max()


class TestMass:
    def test_flat_sheet_total(self):
        mat = wrinkle_material("iso")
        model = ShellModel(gen_rect_sheet(8, 4, 200.0, 100.0), mat)
        M = model.lumped_mass()
        assert M.sum() == pytest.approx(3 * mat.rho * mat.h * 200.0 * 100.0, rel=1e-8)

    def test_positive_on_regular_mesh(self):
        model = ShellModel(gen_hemisphere(8, 32), hemisphere_material(1.0))
        assert np.all(model.lumped_mass() > 0)

    def test_total_is_three_rho_h_area(self, curved):
        m = curved.material
        assert curved.lumped_mass().sum() == pytest.approx(3 * m.rho * m.h * curved.total_area(), rel=1e-8)

    def test_refinement_keeps_mass(self):
        mat = wrinkle_material("iso")
        mesh = gen_rect_sheet(4, 2, 200.0, 100.0)
        coarse = ShellModel(mesh, mat).lumped_mass().sum()
        fine = ShellModel(subdivide_quadrisect(mesh), mat).lumped_mass().sum()
        assert fine == pytest.approx(coarse, rel=1e-8)


class TestSetup:
    def test_orthotropic_material_needs_alignment(self):
        with pytest.raises(ValueError):
            ShellModel(gen_rect_sheet(2, 2, 1.0, 1.0), wrinkle_material("ortho"), "coefficient", orthotropic=False)

    def test_alignment_needs_direction(self):
        with pytest.raises(ValueError):
            ShellModel(gen_rect_sheet(2, 2, 1.0, 1.0), Material.isotropic(1.0, 0.3, 0.1))

    def test_default_mode(self):
        from orthoshell.material import DEFAULT_CONSTITUTIVE

        assert ShellModel(gen_rect_sheet(2, 2, 1.0, 1.0), wrinkle_material("iso")).constitutive == DEFAULT_CONSTITUTIVE

    def test_isotropic_alignment_does_not_change_response(self):
        mesh = gen_hemisphere(3, 12)
        mat = Material.isotropic(6.825e7, 0.3, 0.04, d=[0.0, 0.0, 1.0])
        on = ShellModel(mesh, mat, "isotropic", orthotropic=True)
        off = ShellModel(mesh, mat, "isotropic", orthotropic=False)
        u = 1e-3 * np.random.default_rng(5).normal(size=on.n_dof)
        E_on, f_on = on.internal(u)
        E_off, f_off = off.internal(u)
        assert E_on == pytest.approx(E_off, rel=1e-9)
        np.testing.assert_allclose(f_on, f_off, atol=1e-9 * np.abs(f_off).max())

    def test_deterministic(self, sheet):
        u = 1e-2 * np.random.default_rng(6).normal(size=sheet.n_dof)
        a = sheet.internal(u)[1]
        b = sheet.internal(u)[1]
        assert np.array_equal(a, b)
