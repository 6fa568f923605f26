"""Orthotropic St. Venant-Kirchhoff shell law and material presets.

Three constitutive modes build a tensor ``C^{abcd}`` on the (transformed)
reference metric; membrane and bending resultants are ``n = h C : alpha`` and
``m = h^3/12 C : beta`` and the energy density is the matching quadratic form.

``coefficient``
    ``K^{ab} H^{abcd}`` with no summation over the pair shared by K and H,
    as in the orthotropic Koiter functional.  Only its symmetric part enters
    the quadratic energy, so that part is used and the resultants are the
    exact strain gradients of the energy.
``voigt``
    Classical orthotropic plane stress (Q11, Q22, Q12, G12) expressed in the
    aligned orthogonal basis.  Needs an orthogonal reference metric.
``isotropic``
    ``E/(1 - nu^2) H^{abcd}`` using E1 and nu1; valid on any metric.

In the isotropic limit ``voigt`` and ``isotropic`` coincide, while ``coefficient``
carries half the shear stiffness.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import MaterialError
from .kinematics import StrainState
from .orthotropy import PreferredDirection

__all__ = [
    "Material",
    "StressResultants",
    "MODES",
    "DEFAULT_CONSTITUTIVE",
    "elasticity_tensor",
    "stiffness_coefficients",
    "constitutive_tensor",
    "stress_resultants",
    "literal_resultants",
    "energy_density",
    "HEMISPHERE_TABLE",
    "hemisphere_material",
    "wrinkle_material",
]

MODES = ("coefficient", "voigt", "isotropic")
DEFAULT_CONSTITUTIVE = "voigt"


@dataclass(frozen=True)
class Material:
    """Thin orthotropic sheet; index 1 is the preferred direction ``d``.

    ``nu2`` is never stored: it follows from ``E1 nu2 = E2 nu1``.
    """

    h: float
    E1: float
    E2: float
    nu1: float
    G12: float
    rho: float = 1.0
    d: PreferredDirection | None = field(default=None)

    def __post_init__(self):
        for name in ("h", "E1", "E2", "G12", "rho"):
            if not getattr(self, name) > 0.0:
                raise MaterialError(f"{name} must be positive, got {getattr(self, name)}")
        if not 1.0 - self.nu1 * self.nu2 > 0.0:
            raise MaterialError(f"nu1 * nu2 = {self.nu1 * self.nu2} must stay below 1")
        if self.d is not None and not isinstance(self.d, PreferredDirection):
            object.__setattr__(self, "d", PreferredDirection(self.d))

    @property
    def nu2(self) -> float:
        return self.nu1 * self.E2 / self.E1

    @classmethod
    def isotropic(cls, E, nu, h, rho=1.0, d=None):
        return cls(h=h, E1=E, E2=E, nu1=nu, G12=E / (2.0 * (1.0 + nu)), rho=rho, d=d)

    @property
    def is_isotropic(self) -> bool:
        return (
            np.isclose(self.E1, self.E2, rtol=1e-12)
            and np.isclose(self.G12, self.E1 / (2.0 * (1.0 + self.nu1)), rtol=1e-12)
        )


@dataclass(frozen=True)
class StressResultants:
    membrane: np.ndarray  # n^{ab}, force per length
    bending: np.ndarray  # m^{ab}, force


def elasticity_tensor(a_contra, nu):
    """``nu a^ab a^cd + (1 - nu)/2 (a^ac a^bd + a^ad a^bc)``."""
    g = np.asarray(a_contra, dtype=float)
    return nu * np.einsum("...ab,...cd->...abcd", g, g) + 0.5 * (1.0 - nu) * (
        np.einsum("...ac,...bd->...abcd", g, g) + np.einsum("...ad,...bc->...abcd", g, g)
    )


def stiffness_coefficients(material: Material) -> np.ndarray:
    """Symmetric 2x2 array ``[[K11, K12], [K12, K22]]``."""
    m = material
    denom = 1.0 - m.nu1 * m.nu2
    if denom <= 0.0:
        raise MaterialError("nu1 * nu2 must stay below 1")
    k12 = m.G12 / (1.0 - m.nu1)
    return np.array([[m.E1 / denom, k12], [k12, m.E2 / denom]])


def constitutive_tensor(material: Material, a_contra, mode="coefficient"):
    """``C^{abcd}`` with full minor and major symmetry on the given metric."""
    g = np.asarray(a_contra, dtype=float)
    m = material
    if mode == "coefficient":
        K = stiffness_coefficients(m)
        lit = K[:, :, None, None] * elasticity_tensor(g, m.nu1)
        return 0.5 * (lit + np.swapaxes(np.swapaxes(lit, -4, -2), -3, -1))
    if mode == "isotropic":
        return m.E1 / (1.0 - m.nu1**2) * elasticity_tensor(g, m.nu1)
    if mode == "voigt":
        off = np.abs(g[..., 0, 1]) / np.sqrt(g[..., 0, 0] * g[..., 1, 1])
        if np.any(off > 1e-8):
            raise MaterialError("voigt mode needs an orthogonal (aligned) reference basis")
        denom = 1.0 - m.nu1 * m.nu2
        q11, q22, q12 = m.E1 / denom, m.E2 / denom, m.nu1 * m.E2 / denom
        g11, g22 = g[..., 0, 0], g[..., 1, 1]
        C = np.zeros(g.shape[:-2] + (2, 2, 2, 2))
        C[..., 0, 0, 0, 0] = q11 * g11**2
        C[..., 1, 1, 1, 1] = q22 * g22**2
        C[..., 0, 0, 1, 1] = C[..., 1, 1, 0, 0] = q12 * g11 * g22
        for idx in ((0, 1, 0, 1), (0, 1, 1, 0), (1, 0, 0, 1), (1, 0, 1, 0)):
            C[(...,) + idx] = m.G12 * g11 * g22
        return C
    raise MaterialError(f"unknown constitutive mode {mode!r}; expected one of {MODES}")


def stress_resultants(strain: StrainState, C, h) -> StressResultants:
    n = h * np.einsum("...abcd,...cd->...ab", C, strain.membrane)
    m = h**3 / 12.0 * np.einsum("...abcd,...cd->...ab", C, strain.bending)
    return StressResultants(n, m)


def literal_resultants(strain: StrainState, K, H, h) -> StressResultants:
    """Resultants ``h K^{ab} H^{abcd} alpha_cd`` read term by term.

    Differs from the energy gradient only in the normal coupling terms when
    ``K11 != K22``; kept for comparison.
    """
    n = h * K * np.einsum("...abcd,...cd->...ab", H, strain.membrane)
    m = h**3 / 12.0 * K * np.einsum("...abcd,...cd->...ab", H, strain.bending)
    return StressResultants(n, m)


def energy_density(strain: StrainState, C, h):
    res = stress_resultants(strain, C, h)
    return 0.5 * (
        np.einsum("...ab,...ab->...", res.membrane, strain.membrane)
        + np.einsum("...ab,...ab->...", res.bending, strain.bending)
    )


# --------------------------------------------------------------------------
# presets

# degree of orthotropy -> (meridional modulus, shear modulus)
HEMISPHERE_TABLE = {
    1.0: (6.825e7, 2.625e7),
    0.9: (6.143e7, 2.518e7),
    0.5: (3.413e7, 1.896e7),
    0.1: (6.825e6, 5.884e6),
}
HEMISPHERE_EC = 6.825e7
HEMISPHERE_NUC = 0.3
HEMISPHERE_H = 0.04


def hemisphere_material(lam: float) -> Material:
    """Pinched-hemisphere material; axis 1 meridional, axis 2 circumferential.

    The circumferential Poisson ratio is 0.3, so ``nu1 = 0.3 * E_m / E_c``.
    """
    try:
        Em, G = HEMISPHERE_TABLE[float(lam)]
    except KeyError:
        raise MaterialError(f"no hemisphere material for lambda={lam}; choose from {sorted(HEMISPHERE_TABLE)}") from None
    return Material(
        h=HEMISPHERE_H,
        E1=Em,
        E2=HEMISPHERE_EC,
        nu1=HEMISPHERE_NUC * Em / HEMISPHERE_EC,
        G12=G,
        rho=1.0,
        d=PreferredDirection([0.0, 0.0, 1.0]),
    )


# wrinkling sheet, N and mm; density in t/mm^3 only matters for dynamics
WRINKLE_THICKNESS = 0.2
WRINKLE_RHO = 1e-9
WRINKLE_ALPHA = 30.0


def wrinkle_material(kind: str) -> Material:
    """``iso`` or ``ortho`` sheet; ``d`` lies 30 degrees off the shear axis (x)."""
    a = np.deg2rad(WRINKLE_ALPHA)
    d = PreferredDirection([np.cos(a), np.sin(a), 0.0])
    if kind == "iso":
        return Material.isotropic(600.0, 0.45, WRINKLE_THICKNESS, WRINKLE_RHO, d=d)
    if kind == "ortho":
        return Material(h=WRINKLE_THICKNESS, E1=106.6, E2=106.6, nu1=0.22, G12=11.3, rho=WRINKLE_RHO, d=d)
    raise MaterialError(f"unknown wrinkle material {kind!r}; expected 'iso' or 'ortho'")
