"""Reference-configuration alignment of shape-function derivatives.

Each element's covariant basis is replaced by an orthogonal pair aligned with
the tangent projection of a global preferred direction ``d`` while keeping the
area density J = |a1 x a2|.  Because the new basis is a fixed linear
combination of the old one, the change is carried entirely by the shape
function derivatives: gradients map with ``T^T`` and Hessians with
``T^T H T``.  This happens once per element; deformed configurations reuse the
transformed tables as they are.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import ShapeTable
from .errors import DegenerateElementError, OrthotropyError

__all__ = [
    "PreferredDirection",
    "TransformRecord",
    "project_direction",
    "perpendicular_direction",
    "basis_angle",
    "rescale_basis",
    "build_transform",
    "transform_shape_table",
    "setup_element_orthotropy",
    "PARALLEL_TOL",
]

PARALLEL_TOL = 1e-8
DEGENERATE_SIN = 1e-10


@dataclass(frozen=True)
class PreferredDirection:
    """Unit material direction; normalised on construction."""

    d: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float).reshape(3)
        norm = np.linalg.norm(d)
        if not np.isfinite(norm) or norm == 0.0:
            raise OrthotropyError("preferred direction must be a nonzero vector")
        d = d / norm
        d.setflags(write=False)
        object.__setattr__(self, "d", d)

    @classmethod
    def from_angle(cls, alpha_degrees: float) -> "PreferredDirection":
        """In-plane direction at ``alpha_degrees`` from the y-axis, towards +x."""
        a = np.deg2rad(alpha_degrees)
        return cls(np.array([np.sin(a), np.cos(a), 0.0]))


@dataclass(frozen=True)
class TransformRecord:
    a_hat: np.ndarray  # (2, 3) unscaled aligned pair
    theta: float  # angle between the projected direction and the old a1
    basis: np.ndarray  # (2, 3) rescaled orthogonal basis
    T: np.ndarray  # (2, 2), new a_b = sum_a T[a, b] old a_a
    table: ShapeTable

    @property
    def xi_prime(self):
        return self.T[:, 0]

    @property
    def eta_prime(self):
        return self.T[:, 1]


def project_direction(d, a3, element=None) -> np.ndarray:
    """Tangent-plane projection of ``d``; fails when ``d`` is nearly normal."""
    d = np.asarray(d, dtype=float)
    a3 = np.asarray(a3, dtype=float)
    a1_hat = d - np.dot(d, a3) * a3
    if np.linalg.norm(a1_hat) < PARALLEL_TOL:
        raise OrthotropyError("preferred direction is parallel to the surface normal", element)
    return a1_hat


def perpendicular_direction(a3, a1_hat) -> np.ndarray:
    return np.cross(a3, a1_hat)


def basis_angle(a1_hat, a1) -> float:
    """Angle in [0, pi] between two vectors (two-argument arctangent)."""
    return float(np.arctan2(np.linalg.norm(np.cross(a1_hat, a1)), np.dot(a1_hat, a1)))


def rescale_basis(a_hat, a, element=None) -> np.ndarray:
    """Scale the aligned pair so the new basis is orthogonal with the old J.

    New vectors follow ``a_hat`` and keep the relative lengths of the old
    ``a1``, ``a2``; a common factor sqrt(sin phi), phi the angle between
    ``a1`` and ``a2``, makes |a1' x a2'| equal |a1 x a2|.
    """
    a_hat = np.asarray(a_hat, dtype=float)
    a = np.asarray(a, dtype=float)
    lengths = np.linalg.norm(a, axis=1)
    J = np.linalg.norm(np.cross(a[0], a[1]))
    sin_phi = J / (lengths[0] * lengths[1])
    if sin_phi < DEGENERATE_SIN:
        raise DegenerateElementError("collapsed reference basis", element)
    unit = a_hat / np.linalg.norm(a_hat, axis=1)[:, None]
    return unit * (lengths * np.sqrt(sin_phi))[:, None]


def build_transform(a, a_new) -> np.ndarray:
    """Full 3x3 map ``(a_k (x) e_k)^-1 (a'_k (x) e_k)``; the normal is kept."""
    a = np.asarray(a, dtype=float)
    a_new = np.asarray(a_new, dtype=float)
    n = np.cross(a[0], a[1])
    n /= np.linalg.norm(n)
    A = np.column_stack([a[0], a[1], n])
    A_new = np.column_stack([a_new[0], a_new[1], n])
    if abs(np.linalg.det(A)) < 1e-300:
        raise DegenerateElementError("singular reference basis")
    return np.linalg.solve(A, A_new)


def transform_shape_table(table: ShapeTable, T) -> ShapeTable:
    """Apply the in-plane block ``T`` (2x2) to first and second derivatives."""
    T = np.asarray(T, dtype=float)
    if T.shape == (3, 3):
        T = T[:2, :2]
    first = table.first @ T
    second = np.einsum("ka,iab,bl->ikl", T.T, table.second, T)
    second = 0.5 * (second + second.transpose(0, 2, 1))
    return ShapeTable(table.values.copy(), first, second)


def setup_element_orthotropy(table: ShapeTable, positions, d, element=None) -> TransformRecord:
    """Project, rotate and rescale the basis of one element; transform its table.

    ``positions`` are the reference coordinates matching the rows of ``table``.
    """
    x = np.asarray(positions, dtype=float)
    d = PreferredDirection(d).d if not isinstance(d, PreferredDirection) else d.d
    a = table.first.T @ x  # (2, 3)
    c = np.cross(a[0], a[1])
    J = np.linalg.norm(c)
    if J < 1e-300:
        raise DegenerateElementError("zero reference area", element)
    a3 = c / J
    a1_hat = project_direction(d, a3, element)
    a2_hat = perpendicular_direction(a3, a1_hat)
    a_hat = np.array([a1_hat, a2_hat])
    theta = basis_angle(a1_hat, a[0])
    basis = rescale_basis(a_hat, a, element)
    T = build_transform(a, basis)[:2, :2]
    return TransformRecord(a_hat, theta, basis, T, transform_shape_table(table, T))
