"""Surface geometry and membrane/bending strains at quadrature points.

All functions accept arrays with arbitrary leading batch dimensions, so the
same code serves a single element and the whole mesh at once:

    first  (..., n, 2)      shape function gradients
    second (..., n, 2, 2)   shape function Hessians
    x      (..., n, 3)      control-node positions

Sign convention: the normal is ``a1 x a2 / J`` and ``b_ab = a3 . a_a,b``, so a
sphere with outward normal has negative-definite ``b``.  Bending a flat sheet
so that it becomes convex towards +z (centre of curvature below) decreases
``b_11`` and therefore increases ``beta_11``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateElementError

__all__ = ["QuadratureGeometry", "StrainState", "surface_geometry", "strains", "inverse_metric"]


@dataclass(frozen=True)
class QuadratureGeometry:
    basis: np.ndarray  # (..., 2, 3) covariant a_alpha
    normal: np.ndarray  # (..., 3) unit a3
    jacobian: np.ndarray  # (...,) J = |a1 x a2|
    metric: np.ndarray  # (..., 2, 2) a_ab
    inverse_metric: np.ndarray  # (..., 2, 2) a^ab
    curvature: np.ndarray  # (..., 2, 2) b_ab
    basis_derivatives: np.ndarray  # (..., 2, 2, 3) a_a,b


@dataclass(frozen=True)
class StrainState:
    membrane: np.ndarray  # alpha_ab
    bending: np.ndarray  # beta_ab


def inverse_metric(g):
    det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] * g[..., 1, 0]
    inv = np.empty_like(g)
    inv[..., 0, 0] = g[..., 1, 1] / det
    inv[..., 1, 1] = g[..., 0, 0] / det
    inv[..., 0, 1] = -g[..., 0, 1] / det
    inv[..., 1, 0] = -g[..., 1, 0] / det
    return inv


def surface_geometry(first, second, x, min_jacobian=0.0) -> QuadratureGeometry:
    """Basis, normal, metric and shape tensor from shape tables and positions."""
    a = np.einsum("...na,...nk->...ak", first, x)
    da = np.einsum("...nab,...nk->...abk", second, x)
    c = np.cross(a[..., 0, :], a[..., 1, :])
    J = np.linalg.norm(c, axis=-1)
    if np.any(~(J > min_jacobian)):
        bad = np.flatnonzero(~(np.atleast_1d(J) > min_jacobian))
        raise DegenerateElementError("degenerate element geometry", int(bad[0]) if bad.size else None)
    a3 = c / J[..., None]
    g = np.einsum("...ak,...bk->...ab", a, a)
    b = np.einsum("...abk,...k->...ab", da, a3)
    return QuadratureGeometry(a, a3, J, g, inverse_metric(g), b, da)


def strains(ref: QuadratureGeometry, cur: QuadratureGeometry) -> StrainState:
    """Green-Lagrange membrane strain and curvature change."""
    return StrainState(0.5 * (cur.metric - ref.metric), ref.curvature - cur.curvature)
