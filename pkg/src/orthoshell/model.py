"""Element setup and global assembly of energy, forces, tangent and mass.

:class:`ShellModel` freezes everything that depends only on the reference
configuration: the shape tables over real nodes (ghosts folded in), the
optional orthotropic transformation, reference metric and curvature, and the
constitutive tensor of every element.  Evaluation is vectorised over elements.

Sign convention: ``internal_force`` is the gradient of the internal energy, so
static equilibrium reads ``f_int(u) = f_ext`` and the dynamic residual is
``M a + f_int - f_ext``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .basis import ShapeTable, eval_ring, quadrature_rule
from .kinematics import StrainState, surface_geometry
from .material import (
    DEFAULT_CONSTITUTIVE,
    Material,
    constitutive_tensor,
    energy_density,
    stress_resultants,
)
from .mesh import ControlMesh, build_one_rings
from .orthotropy import setup_element_orthotropy

__all__ = ["ShellModel", "build_model", "ElementTables"]


@dataclass(frozen=True)
class ElementTables:
    """Padded per-element shape tables; padded slots have all-zero entries."""

    conn: np.ndarray  # (E, n) node ids
    values: np.ndarray  # (E, n)
    first: np.ndarray  # (E, n, 2)
    second: np.ndarray  # (E, n, 2, 2)

    def table(self, e: int) -> ShapeTable:
        return ShapeTable(self.values[e], self.first[e], self.second[e])


def _pad_tables(items, n_max):
    E = len(items)
    conn = np.zeros((E, n_max), dtype=np.int64)
    vals = np.zeros((E, n_max))
    first = np.zeros((E, n_max, 2))
    second = np.zeros((E, n_max, 2, 2))
    for e, (ids, t) in enumerate(items):
        k = len(ids)
        conn[e, :k] = ids
        conn[e, k:] = ids[0]
        vals[e, :k] = t.values
        first[e, :k] = t.first
        second[e, :k] = t.second
    return ElementTables(conn, vals, first, second)


class ShellModel:
    """Rotation-free Kirchhoff-Love shell discretised with Loop patches.

    Parameters
    ----------
    mesh : ControlMesh
    material : Material
    constitutive : {"coefficient", "voigt", "isotropic"}, optional
        Defaults to :data:`~orthoshell.material.DEFAULT_CONSTITUTIVE`.
    orthotropic : bool
        Align every element basis with ``material.d`` before anything else.
        With ``False`` the raw subdivision basis is used (isotropic only).
    """

    def __init__(self, mesh: ControlMesh, material: Material, constitutive=None, orthotropic=True, reference=None):
        constitutive = DEFAULT_CONSTITUTIVE if constitutive is None else constitutive
        self.mesh = mesh
        self.material = material
        self.constitutive = constitutive
        self.orthotropic = orthotropic
        self.reference = mesh.nodes if reference is None else np.asarray(reference, dtype=float)
        self.rings = build_one_rings(mesh)
        _, weight = quadrature_rule()
        self.weight = weight

        items = [eval_ring(r) for r in self.rings]
        self.records = None
        if orthotropic:
            if material.d is None:
                raise ValueError("orthotropic setup needs a preferred direction")
            self.records = []
            for e, (ids, table) in enumerate(items):
                rec = setup_element_orthotropy(table, self.reference[ids], material.d, element=e)
                self.records.append(rec)
                items[e] = (ids, rec.table)
        elif not material.is_isotropic and constitutive != "isotropic":
            raise ValueError("an orthotropic material needs the aligned basis (orthotropic=True)")
        n_max = max(len(ids) for ids, _ in items)
        self.tables = _pad_tables(items, n_max)

        ref = surface_geometry(self.tables.first, self.tables.second, self.reference[self.tables.conn])
        self.ref = ref
        self.area = ref.jacobian * weight
        self.C = constitutive_tensor(material, ref.inverse_metric, constitutive)
        self.char_length = float(np.sqrt(self.area.mean()))
        self._pattern = None

    # ------------------------------------------------------------------
    @property
    def n_nodes(self) -> int:
        return self.mesh.n_nodes

    @property
    def n_dof(self) -> int:
        return 3 * self.mesh.n_nodes

    @property
    def n_elements(self) -> int:
        return self.mesh.n_triangles

    def _positions(self, u):
        u = np.asarray(u, dtype=float).reshape(-1, 3)
        return (self.reference + u)[self.tables.conn]

    def _geometry(self, xe):
        t = self.tables
        return surface_geometry(t.first, t.second, xe, min_jacobian=1e-8 * self.ref.jacobian.min())

    def element_strains(self, u) -> StrainState:
        cur = self._geometry(self._positions(u))
        return StrainState(0.5 * (cur.metric - self.ref.metric), self.ref.curvature - cur.curvature)

    def element_energies(self, u):
        """(membrane, bending) energy of every element."""
        s = self.element_strains(u)
        h = self.material.h
        mem = energy_density(StrainState(s.membrane, np.zeros_like(s.bending)), self.C, h)
        bend = energy_density(StrainState(np.zeros_like(s.membrane), s.bending), self.C, h)
        return mem * self.area, bend * self.area

    def _element_forces(self, xe):
        """Element energies and local force blocks (E, n, 3) for positions xe."""
        t = self.tables
        cur = self._geometry(xe)
        strain = StrainState(0.5 * (cur.metric - self.ref.metric), self.ref.curvature - cur.curvature)
        res = stress_resultants(strain, self.C, self.material.h)
        W = 0.5 * (
            np.einsum("eab,eab->e", res.membrane, strain.membrane)
            + np.einsum("eab,eab->e", res.bending, strain.bending)
        )
        a = cur.basis
        a1, a2, a3 = a[:, 0], a[:, 1], cur.normal
        f = np.einsum("eab,ena,ebk->enk", res.membrane, t.first, a)
        # curvature variation through a_a,b and through the normal
        m = res.bending
        c = np.einsum("eab,eabk->ek", m, cur.basis_derivatives)
        g = (c - np.einsum("ek,ek->e", c, a3)[:, None] * a3) / cur.jacobian[:, None]
        f -= np.einsum("enab,eab->en", t.second, m)[:, :, None] * a3[:, None, :]
        f -= t.first[:, :, 0, None] * np.cross(a2, g)[:, None, :]
        f -= t.first[:, :, 1, None] * np.cross(g, a1)[:, None, :]
        return W * self.area, f * self.area[:, None, None]

    def internal(self, u):
        """Internal energy and its gradient (flat, length 3 * n_nodes)."""
        W, fe = self._element_forces(self._positions(u))
        f = np.zeros((self.n_nodes, 3))
        conn = self.tables.conn
        for k in range(3):
            f[:, k] = np.bincount(conn.ravel(), weights=fe[:, :, k].ravel(), minlength=self.n_nodes)
        return float(W.sum()), f.ravel()

    def internal_energy(self, u) -> float:
        return self.internal(u)[0]

    def internal_force(self, u):
        return self.internal(u)[1]

    # ------------------------------------------------------------------
    def _sparsity(self):
        if self._pattern is None:
            conn = self.tables.conn
            E, n = conn.shape
            dofs = (3 * conn[:, :, None] + np.arange(3)).reshape(E, 3 * n)
            rows = np.repeat(dofs, 3 * n, axis=1).ravel()
            cols = np.tile(dofs, (1, 3 * n)).ravel()
            key = rows * self.n_dof + cols
            uniq, inverse = np.unique(key, return_inverse=True)
            self._pattern = (uniq // self.n_dof, uniq % self.n_dof, inverse)
        return self._pattern

    def element_stiffness(self, u, step=None):
        """Central-difference Jacobian of the element forces, (E, 3n, 3n)."""
        xe = self._positions(u)
        E, n, _ = xe.shape
        h = (1e-7 if step is None else step) * self.char_length
        K = np.empty((E, 3 * n, 3 * n))
        for j in range(n):
            for k in range(3):
                xp = xe.copy()
                xp[:, j, k] += h
                fp = self._element_forces(xp)[1]
                xp[:, j, k] -= 2.0 * h
                fm = self._element_forces(xp)[1]
                K[:, :, 3 * j + k] = ((fp - fm) / (2.0 * h)).reshape(E, 3 * n)
        # padded slots carry zero tables; their rows/columns vanish already
        return 0.5 * (K + K.transpose(0, 2, 1))

    def tangent(self, u, step=None) -> sp.csr_matrix:
        Ke = self.element_stiffness(u, step)
        rows, cols, inverse = self._sparsity()
        data = np.bincount(inverse, weights=Ke.ravel(), minlength=len(rows))
        return sp.csr_matrix((data, (rows, cols)), shape=(self.n_dof, self.n_dof))

    def lumped_mass(self) -> np.ndarray:
        """Row-sum lumped mass per DOF (length 3 * n_nodes)."""
        m = self.material.rho * self.material.h * self.area[:, None] * self.tables.values
        node_mass = np.bincount(self.tables.conn.ravel(), weights=m.ravel(), minlength=self.n_nodes)
        return np.repeat(node_mass, 3)

    def total_area(self) -> float:
        return float(self.area.sum())


def build_model(mesh, material, constitutive=None, orthotropic=True, reference=None) -> ShellModel:
    return ShellModel(mesh, material, constitutive, orthotropic, reference)
