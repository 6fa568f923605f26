"""Orthotropic rotation-free thin shells on Loop subdivision surfaces."""

from .basis import ShapeTable, box_spline_regular, eval_irregular, quadrature_rule
from .material import Material
from .mesh import (
    ControlMesh,
    OneRing,
    build_one_rings,
    gen_hemisphere,
    gen_rect_sheet,
    load_mesh,
    subdivide_quadrisect,
)
from .model import ShellModel, build_model
from .orthotropy import PreferredDirection, setup_element_orthotropy

__version__ = "0.1.0"

__all__ = [
    "ShapeTable",
    "box_spline_regular",
    "eval_irregular",
    "quadrature_rule",
    "Material",
    "ControlMesh",
    "OneRing",
    "build_one_rings",
    "gen_hemisphere",
    "gen_rect_sheet",
    "load_mesh",
    "subdivide_quadrisect",
    "ShellModel",
    "build_model",
    "PreferredDirection",
    "setup_element_orthotropy",
]
