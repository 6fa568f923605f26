"""Loop-subdivision shape functions at an element's quadrature point.

Regular patches (12 control nodes) are evaluated with the closed-form quartic
box-spline basis.  Patches with an extraordinary vertex are evaluated by
subdividing the patch locally until the evaluation point falls into a child
triangle with three valence-6 vertices; the box-spline table of that child is
pulled back through the composed subdivision matrices.  For the barycentre a
single step suffices, because the middle child has only new edge vertices.

Parametric coordinates are ``(xi, eta) = (v, w)`` with ``u = 1 - v - w``;
``u``, ``v``, ``w`` are the barycentric weights of slots 0, 1 and 2.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import UnsupportedPatchError
from .mesh import (
    CANONICAL_FROM_CLASSIC,
    REGULAR_SIZE,
    ControlMesh,
    OneRing,
    _regular_ring,
)

__all__ = [
    "ShapeTable",
    "box_spline_regular",
    "eval_irregular",
    "eval_ring",
    "quadrature_rule",
    "loop_vertex_weight",
]

# Quartic box-spline basis (times 12) in the classic 1..12 numbering.
_BOX_SPLINE = (
    "u4 + 2u3v",
    "u4 + 2u3w",
    "u4 + 2u3w + 6u3v + 6u2vw + 12u2v2 + 6uv2w + 6uv3 + 2v3w + v4",
    "6u4 + 24u3w + 24u2w2 + 8uw3 + w4 + 24u3v + 60u2vw + 36uvw2 + 6vw3 + 24u2v2"
    " + 36uv2w + 12v2w2 + 8uv3 + 6v3w + v4",
    "u4 + 6u3w + 12u2w2 + 6uw3 + w4 + 2u3v + 6u2vw + 6uvw2 + 2vw3",
    "2uv3 + v4",
    "u4 + 6u3w + 12u2w2 + 6uw3 + w4 + 8u3v + 36u2vw + 36uvw2 + 8vw3 + 24u2v2"
    " + 60uv2w + 24v2w2 + 24uv3 + 24v3w + 6v4",
    "u4 + 8u3w + 24u2w2 + 24uw3 + 6w4 + 6u3v + 36u2vw + 60uvw2 + 24vw3 + 12u2v2"
    " + 36uv2w + 24v2w2 + 6uv3 + 8v3w + v4",
    "2uw3 + w4",
    "2v3w + v4",
    "2uw3 + w4 + 6uvw2 + 6vw3 + 6uv2w + 12v2w2 + 2uv3 + 6v3w + v4",
    "w4 + 2vw3",
)

_TERM = re.compile(r"(\d*)((?:[uvw]\d?)+)")


def _parse_poly(text):
    poly = {}
    for coef, mono in _TERM.findall(text.replace(" ", "")):
        exps = [0, 0, 0]
        for var, power in re.findall(r"([uvw])(\d?)", mono):
            exps["uvw".index(var)] += int(power or 1)
        key = tuple(exps)
        poly[key] = poly.get(key, 0.0) + float(coef or 1) / 12.0
    return poly


def _diff(poly, var):
    """Derivative along ``v`` or ``w`` with ``u = 1 - v - w`` eliminated."""
    k = "uvw".index(var)
    out = {}
    for (a, b, c), coef in poly.items():
        e = [a, b, c]
        for idx, sign in ((k, 1.0), (0, -1.0)):
            if e[idx]:
                f = list(e)
                f[idx] -= 1
                out[tuple(f)] = out.get(tuple(f), 0.0) + sign * coef * e[idx]
    return out


def _eval_poly(poly, u, v, w):
    return sum(coef * u**a * v**b * w**c for (a, b, c), coef in poly.items())


def _canonical_polys():
    classic = [_parse_poly(t) for t in _BOX_SPLINE]
    polys = [None] * REGULAR_SIZE
    for number, slot in CANONICAL_FROM_CLASSIC.items():
        polys[slot] = classic[number - 1]
    first = [(_diff(p, "v"), _diff(p, "w")) for p in polys]
    second = [
        ((_diff(pv, "v"), _diff(pv, "w")), (_diff(pw, "v"), _diff(pw, "w")))
        for pv, pw in first
    ]
    return polys, first, second


_POLYS, _FIRST, _SECOND = _canonical_polys()


@dataclass(frozen=True)
class ShapeTable:
    """Shape function values and parametric derivatives at one point.

    ``values[I]`` is N_I, ``first[I, a]`` is dN_I/dxi_a and ``second[I, a, b]``
    the symmetric second derivative, with ``(xi_0, xi_1) = (xi, eta)``.
    """

    values: np.ndarray
    first: np.ndarray
    second: np.ndarray

    @property
    def size(self) -> int:
        return len(self.values)

    @property
    def d_xi(self):
        return self.first[:, 0]

    @property
    def d_eta(self):
        return self.first[:, 1]

    @property
    def d_xixi(self):
        return self.second[:, 0, 0]

    @property
    def d_etaeta(self):
        return self.second[:, 1, 1]

    @property
    def d_xieta(self):
        return self.second[:, 0, 1]

    def combine(self, E: np.ndarray) -> "ShapeTable":
        """Table over the columns of ``E`` given slot values ``x_slot = E x``."""
        return ShapeTable(E.T @ self.values, E.T @ self.first, np.einsum("sk,sab->kab", E, self.second))


def box_spline_regular(point=(1.0 / 3.0, 1.0 / 3.0)) -> ShapeTable:
    """Regular 12-node Loop patch basis at ``point = (xi, eta)``."""
    xi, eta = float(point[0]), float(point[1])
    return _box_spline_cached(xi, eta)


@lru_cache(maxsize=64)
def _box_spline_cached(v, w):
    u = 1.0 - v - w
    if min(u, v, w) < -1e-12:
        raise ValueError(f"point {(v, w)} lies outside the master triangle")
    vals = np.array([_eval_poly(p, u, v, w) for p in _POLYS])
    first = np.array([[_eval_poly(p, u, v, w) for p in pair] for pair in _FIRST])
    second = np.array([[[_eval_poly(p, u, v, w) for p in row] for row in h] for h in _SECOND])
    for arr in (vals, first, second):
        arr.setflags(write=False)
    return ShapeTable(vals, first, second)


def quadrature_rule(element=None):
    """Single-point rule: the barycentre with the master-triangle area 1/2."""
    return (1.0 / 3.0, 1.0 / 3.0), 0.5


# --------------------------------------------------------------------------
# extraordinary patches


def loop_vertex_weight(n: int) -> float:
    """Loop's neighbour weight beta for a vertex of valence ``n``."""
    return (5.0 / 8.0 - (3.0 / 8.0 + 0.25 * math.cos(2.0 * math.pi / n)) ** 2) / n


# parent-parameter corners of the four children of face (a, b, c)
_PARENT_UV = {"a": (0.0, 0.0), "b": (1.0, 0.0), "c": (0.0, 1.0), "ab": (0.5, 0.0), "bc": (0.5, 0.5), "ca": (0.0, 0.5)}
_CHILDREN = (("a", "ab", "ca"), ("b", "bc", "ab"), ("c", "ca", "bc"), ("ab", "bc", "ca"))


def _loop_subdivide(mesh: ControlMesh):
    """One Loop step on a local patch mesh.

    Returns the subdivision matrix (child nodes x parent nodes, NaN rows where
    the local data is insufficient), the child triangles, and per parent face
    the child-node ids of its six corner/midpoint labels.
    """
    n = mesh.n_nodes
    bnd = mesh.boundary_nodes
    edges = mesh.edges
    S = np.full((n + len(edges), n), np.nan)
    for v in range(n):
        if bnd[v] or mesh.valence[v] == 0:
            continue
        nb = mesh.edges[(mesh.edges == v).any(axis=1)].ravel()
        nb = nb[nb != v]
        beta = loop_vertex_weight(len(nb))
        S[v] = 0.0
        S[v, v] = 1.0 - len(nb) * beta
        S[v, nb] = beta
    edge_id = {}
    for k, (p, q) in enumerate(edges.tolist()):
        edge_id[(p, q)] = edge_id[(q, p)] = n + k
        r, s = mesh.third_vertex(p, q), mesh.third_vertex(q, p)
        if r is None or s is None:
            continue
        row = S[n + k]
        row[:] = 0.0
        row[[p, q]] = 3.0 / 8.0
        row[[r, s]] = 1.0 / 8.0
    labels, child_tris = [], []
    for a, b, c in mesh.triangles.tolist():
        lab = {"a": a, "b": b, "c": c, "ab": edge_id[(a, b)], "bc": edge_id[(b, c)], "ca": edge_id[(c, a)]}
        labels.append(lab)
        child_tris += [[lab[k] for k in child] for child in _CHILDREN]
    return S, np.array(child_tris, dtype=np.int64), labels


def _locate_child(point):
    """Child index (0..3) holding ``point`` and the point in child coordinates."""
    p = np.asarray(point, dtype=float)
    best = None
    for k in (3, 0, 1, 2):
        P0, P1, P2 = (np.array(_PARENT_UV[lab]) for lab in _CHILDREN[k])
        J = np.column_stack([P1 - P0, P2 - P0])
        c = np.linalg.solve(J, p - P0)
        margin = min(c[0], c[1], 1.0 - c[0] - c[1])
        if best is None or margin > best[0]:
            best = (margin, k, c, J)
        if margin >= 0.0:
            break
    _, k, c, J = best
    return k, c, J


def _element_regular(mesh: ControlMesh, face: int) -> bool:
    verts = mesh.triangles[face]
    return bool(np.all(~mesh.boundary_nodes[verts]) and np.all(mesh.valence[verts] == 6))


def _eval_local(mesh: ControlMesh, face: int, point, extra: int, budget: int):
    """Table over all local nodes for element ``face`` of a local patch mesh."""
    if _element_regular(mesh, face) and extra <= 0:
        ring = _regular_ring(mesh, face, *map(int, mesh.triangles[face]), (6, 6, 6))
        if ring.ghosts:
            raise UnsupportedPatchError("regular child patch is incomplete", f"local face {face}")
        E = np.zeros((REGULAR_SIZE, mesh.n_nodes))
        E[np.arange(REGULAR_SIZE), list(ring.nodes)] = 1.0
        return box_spline_regular(point).combine(E)
    if budget <= 0:
        raise UnsupportedPatchError("evaluation point too close to an extraordinary vertex")
    if _element_regular(mesh, face):
        extra -= 1
    S, child_tris, labels = _loop_subdivide(mesh)
    k, child_point, J = _locate_child(point)
    child_face = 4 * face + k
    keep_verts = set(child_tris[child_face].tolist())
    local = [t for t in child_tris.tolist() if keep_verts & set(t)]
    used = sorted({v for t in local for v in t})
    renum = {v: i for i, v in enumerate(used)}
    S_sub = S[used]
    if np.isnan(S_sub).any():
        raise UnsupportedPatchError("local patch too small for subdivision step")
    child_mesh = ControlMesh(np.zeros((len(used), 3)), np.array([[renum[v] for v in t] for t in local]))
    new_face = local.index(child_tris[child_face].tolist())
    child = _eval_local(child_mesh, new_face, tuple(child_point), extra, budget - 1)
    Jinv = np.linalg.inv(J)
    first = child.first @ Jinv
    second = np.einsum("ka,iab,bl->ikl", Jinv.T, child.second, Jinv)
    return ShapeTable(child.values, first, second).combine(S_sub)


def eval_irregular(ring: OneRing, point=(1.0 / 3.0, 1.0 / 3.0), extra_levels: int = 0, max_depth: int = 40) -> ShapeTable:
    """Limit-surface basis of a patch with extraordinary vertices.

    Works for any valences of the three element vertices.  ``extra_levels``
    forces additional subdivision steps after the point already lies in a
    regular child; the result must not change.
    """
    if ring.local_triangles is None:
        tris = _regular_local_triangles(ring)
    else:
        tris = ring.local_triangles
    mesh = ControlMesh(np.zeros((ring.size, 3)), tris)
    face = next(i for i, t in enumerate(tris.tolist()) if t == [0, 1, 2])
    return _eval_local(mesh, face, point, extra_levels, max_depth)


def _regular_local_triangles(ring: OneRing):
    if ring.ghosts:
        raise UnsupportedPatchError("boundary patches are evaluated through the regular path", f"element {ring.element}")
    # 13 triangles of a regular patch, canonical slots (see mesh module)
    return np.array(
        [
            [0, 1, 2], [1, 0, 6], [0, 2, 3], [2, 1, 9], [6, 0, 5], [0, 3, 4], [0, 4, 5],
            [1, 6, 7], [9, 1, 8], [1, 7, 8], [2, 9, 10], [3, 2, 11], [2, 10, 11],
        ],
        dtype=np.int64,
    )


def eval_ring(ring: OneRing, point=(1.0 / 3.0, 1.0 / 3.0)):
    """Shape table of an element over real mesh nodes.

    Returns ``(node_ids, table)``; ghost slots are folded into the real nodes
    they are built from.
    """
    table = box_spline_regular(point) if ring.is_regular else eval_irregular(ring, point)
    real, E = ring.expansion()
    return real, table.combine(E)
