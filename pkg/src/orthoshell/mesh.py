"""Triangle control meshes: validation, import, generators and patch rings.

A :class:`ControlMesh` is the discrete middle surface.  Elements are its
triangles, oriented counter-clockwise about the outward normal.  The shape
functions of one element are supported on the element's *one-ring*, the union
of the one-rings of its three vertices.  :func:`build_one_rings` extracts that
support in a fixed canonical order:

    slot 0, 1, 2   element vertices A, B, C
    slots 3..      the remaining ring nodes, counter-clockwise around the
                   element, starting with the node across edge C-A

For a regular patch this gives 12 slots.  On a regular lattice with the
element pointing up (A on top, B bottom-left, C bottom-right) the outer slots
are, in order: right of A, upper-right, upper-left, left of A, far left of B,
lower-left, below edge B-C, lower-right, far right of C.

Patches touching the boundary are completed with ghost nodes.  A ghost that
would lie across the lattice edge P-Q from a known node R is placed at
``x_P + x_Q - x_R``; ghosts are linear combinations of real nodes and never
carry degrees of freedom of their own.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import MeshError, UnsupportedPatchError

__all__ = [
    "ControlMesh",
    "OneRing",
    "load_mesh",
    "subdivide_quadrisect",
    "gen_hemisphere",
    "gen_rect_sheet",
    "build_one_rings",
    "build_one_ring",
    "REGULAR_SIZE",
]

REGULAR_SIZE = 12

# Regular-patch walk in the classic 1..12 box-spline numbering, where the
# element is (4, 7, 8).  Each step (new, P, Q, R): ``new`` is the third vertex
# of the triangle holding half-edge P->Q; if absent it is the reflection of R.
_WALK = (
    (3, 7, 4, 8),
    (5, 4, 8, 7),
    (11, 8, 7, 4),
    (1, 3, 4, 7),
    (2, 4, 5, 8),
    (6, 7, 3, 4),
    (10, 11, 7, 8),
    (12, 8, 11, 7),
    (9, 5, 8, 4),
)
# classic number -> canonical slot
CANONICAL_FROM_CLASSIC = {4: 0, 7: 1, 8: 2, 5: 3, 2: 4, 1: 5, 3: 6, 6: 7, 10: 8, 11: 9, 12: 10, 9: 11}


@dataclass(frozen=True, eq=False)
class ControlMesh:
    """Nodes and consistently oriented triangles of a 2-manifold with boundary.

    The constructor validates the mesh and raises :class:`MeshError` naming
    the offending face or edge.
    """

    nodes: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        nodes = np.ascontiguousarray(self.nodes, dtype=float)
        tris = np.ascontiguousarray(self.triangles, dtype=np.int64)
        if nodes.ndim != 2 or nodes.shape[1] != 3:
            raise MeshError(f"nodes must have shape (n, 3), got {nodes.shape}")
        if tris.ndim != 2 or tris.shape[1] != 3:
            raise MeshError(f"triangles must have shape (m, 3), got {tris.shape}")
        nodes.setflags(write=False)
        tris.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "triangles", tris)
        self._validate()

    def _validate(self):
        n = len(self.nodes)
        for f, (a, b, c) in enumerate(self.triangles):
            if min(a, b, c) < 0 or max(a, b, c) >= n:
                raise MeshError("triangle references a missing node", f"face {f}")
            if a == b or b == c or a == c:
                raise MeshError("triangle repeats a node", f"face {f}")
        undirected = Counter()
        for a, b, c in self.triangles:
            for p, q in ((a, b), (b, c), (c, a)):
                undirected[(min(p, q), max(p, q))] += 1
        for edge, count in undirected.items():
            if count > 2:
                raise MeshError(f"non-manifold edge shared by {count} triangles", f"edge {edge}")
        seen = {}
        for f, (a, b, c) in enumerate(self.triangles):
            for he in ((a, b), (b, c), (c, a)):
                if he in seen:
                    raise MeshError(
                        f"inconsistent orientation with face {seen[he]}", f"face {f}, edge {he}"
                    )
                seen[he] = f

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_dof(self) -> int:
        return 3 * len(self.nodes)

    @cached_property
    def half_edges(self) -> dict:
        """Map directed edge ``(p, q)`` to the index of the face containing it."""
        out = {}
        for f, (a, b, c) in enumerate(self.triangles.tolist()):
            out[(a, b)] = f
            out[(b, c)] = f
            out[(c, a)] = f
        return out

    @cached_property
    def edges(self) -> np.ndarray:
        e = np.sort(self.triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        return np.unique(e, axis=0)

    @cached_property
    def boundary_edges(self) -> np.ndarray:
        """Directed boundary edges, oriented as in their single triangle."""
        he = self.half_edges
        out = [(p, q) for (p, q) in he if (q, p) not in he]
        return np.array(sorted(out), dtype=np.int64).reshape(-1, 2)

    @cached_property
    def boundary_nodes(self) -> np.ndarray:
        flags = np.zeros(self.n_nodes, dtype=bool)
        flags[self.boundary_edges.ravel()] = True
        return flags

    @cached_property
    def valence(self) -> np.ndarray:
        val = np.zeros(self.n_nodes, dtype=np.int64)
        np.add.at(val, self.edges.ravel(), 1)
        return val

    def third_vertex(self, p: int, q: int):
        """Third vertex of the face holding half-edge ``p -> q``, or None."""
        f = self.half_edges.get((p, q))
        if f is None:
            return None
        a, b, c = self.triangles[f]
        for v in (a, b, c):
            if v != p and v != q:
                return int(v)

    def ring(self, v: int, start: int) -> list:
        """Neighbours of interior vertex ``v``, counter-clockwise from ``start``."""
        out = [start]
        cur = start
        for _ in range(self.valence[v] + 1):
            nxt = self.third_vertex(v, cur)
            if nxt is None:
                raise MeshError("open fan around vertex", f"node {v}")
            if nxt == start:
                break
            out.append(nxt)
            cur = nxt
        if len(out) != self.valence[v]:
            raise MeshError("vertex fan is not a single disk", f"node {v}")
        return out

    def areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        return 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)

    def summary(self) -> str:
        interior = ~self.boundary_nodes
        hist = Counter(self.valence[interior].tolist())
        lines = [
            f"nodes            {self.n_nodes}",
            f"triangles        {self.n_triangles}",
            f"edges            {len(self.edges)}",
            f"boundary edges   {len(self.boundary_edges)}",
            f"displacement DOF {self.n_dof}",
            "interior valence " + (", ".join(f"{k}:{hist[k]}" for k in sorted(hist)) or "-"),
        ]
        return "\n".join(lines)


# --------------------------------------------------------------------------
# import


def load_mesh(path, format=None) -> ControlMesh:
    """Read an OFF or OBJ file holding vertices and triangular faces only."""
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).lower()
    try:
        text = path.read_text()
    except OSError as exc:
        raise MeshError(f"cannot read mesh file: {exc}") from exc
    if fmt == "off":
        nodes, tris = _parse_off(text, path.name)
    elif fmt == "obj":
        nodes, tris = _parse_obj(text, path.name)
    else:
        raise MeshError(f"unsupported mesh format {fmt!r} (expected OFF or OBJ)")
    return ControlMesh(np.array(nodes, dtype=float).reshape(-1, 3), np.array(tris, dtype=np.int64).reshape(-1, 3))


def _parse_off(text, name):
    tokens = []  # (line number, fields)
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            tokens.append((lineno, line.split()))
    if not tokens or not tokens[0][1][0].upper().endswith("OFF"):
        raise MeshError("missing OFF header", f"{name}:1")
    head = tokens[0][1][1:]
    rest = tokens[1:]
    if not head:
        if not rest:
            raise MeshError("missing element counts", f"{name}")
        (lineno, head), rest = rest[0], rest[1:]
    try:
        nv, nf = int(head[0]), int(head[1])
    except (ValueError, IndexError):
        raise MeshError("bad element counts", f"{name}") from None
    if len(rest) < nv + nf:
        raise MeshError(f"expected {nv} vertices and {nf} faces", f"{name}")
    nodes, tris = [], []
    for lineno, fields in rest[:nv]:
        try:
            nodes.append([float(x) for x in fields[:3]])
        except ValueError:
            raise MeshError("bad vertex", f"{name}:{lineno}") from None
        if len(nodes[-1]) != 3:
            raise MeshError("vertex needs three coordinates", f"{name}:{lineno}")
    for lineno, fields in rest[nv : nv + nf]:
        try:
            ids = [int(x) for x in fields]
        except ValueError:
            raise MeshError("bad face", f"{name}:{lineno}") from None
        if ids[0] != 3 or len(ids) < 4:
            raise MeshError("only triangular faces are supported", f"{name}:{lineno}")
        tris.append(ids[1:4])
    return nodes, tris


def _parse_obj(text, name):
    nodes, tris = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        fields = raw.split("#", 1)[0].split()
        if not fields:
            continue
        if fields[0] == "v":
            try:
                nodes.append([float(x) for x in fields[1:4]])
            except ValueError:
                raise MeshError("bad vertex", f"{name}:{lineno}") from None
            if len(nodes[-1]) != 3:
                raise MeshError("vertex needs three coordinates", f"{name}:{lineno}")
        elif fields[0] == "f":
            if len(fields) != 4:
                raise MeshError("only triangular faces are supported", f"{name}:{lineno}")
            ids = []
            for tok in fields[1:]:
                try:
                    i = int(tok.split("/")[0])
                except ValueError:
                    raise MeshError("bad face index", f"{name}:{lineno}") from None
                ids.append(i - 1 if i > 0 else len(nodes) + i)
            tris.append(ids)
    return nodes, tris


# --------------------------------------------------------------------------
# refinement and generators


def subdivide_quadrisect(mesh: ControlMesh) -> ControlMesh:
    """Split every triangle into four at the edge midpoints (no smoothing)."""
    edges = mesh.edges
    index = {(int(a), int(b)): mesh.n_nodes + k for k, (a, b) in enumerate(edges)}
    mids = 0.5 * (mesh.nodes[edges[:, 0]] + mesh.nodes[edges[:, 1]])

    def mid(p, q):
        return index[(p, q) if p < q else (q, p)]

    tris = []
    for a, b, c in mesh.triangles.tolist():
        ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
        tris += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
    return ControlMesh(np.vstack([mesh.nodes, mids]), np.array(tris))


def _grid_triangles(n_rows, n_cols, wrap, pattern="uniform"):
    """Two triangles per cell split along a diagonal.

    With ``pattern="uniform"`` every diagonal runs from (i, j) to (i+1, j+1);
    ``"alternate"`` flips the direction on odd rows, which keeps every
    interior valence at 6.  Node (i, j) sits in row i, column j; columns wrap
    around when ``wrap``.
    """
    if pattern not in ("uniform", "alternate"):
        raise MeshError(f"unknown triangulation pattern {pattern!r}")
    width = n_cols if wrap else n_cols + 1

    def nid(i, j):
        return i * width + (j % n_cols if wrap else j)

    tris = []
    for i in range(n_rows):
        for j in range(n_cols):
            p00, p01 = nid(i, j), nid(i, j + 1)
            p10, p11 = nid(i + 1, j), nid(i + 1, j + 1)
            if pattern == "alternate" and i % 2:
                tris.append((p00, p01, p10))
                tris.append((p01, p11, p10))
            else:
                tris.append((p00, p01, p11))
                tris.append((p00, p11, p10))
    return np.array(tris, dtype=np.int64)


def gen_hemisphere(n_meridian=16, n_circumference=64, R=10.0, hole_angle=18.0, pattern="uniform") -> ControlMesh:
    """Latitude-longitude hemisphere from the equator (row 0) to a polar hole.

    Rows run in polar angle from 90 degrees down to ``hole_angle``; columns
    start at azimuth 0 so equator nodes sit on the x and y axes whenever
    ``n_circumference`` is a multiple of 4.  Normals point outward.
    """
    if n_meridian < 2 or n_circumference < 8:
        raise MeshError(f"degenerate resolution {n_meridian}x{n_circumference}")
    if not 0.0 < hole_angle < 90.0:
        raise MeshError(f"hole angle must lie in (0, 90) degrees, got {hole_angle}")
    polar = np.deg2rad(np.linspace(90.0, hole_angle, n_meridian + 1))
    polar[-1] = math.radians(hole_angle)
    azim = 2.0 * np.pi * np.arange(n_circumference) / n_circumference
    P, A = np.meshgrid(polar, azim, indexing="ij")
    nodes = R * np.stack([np.sin(P) * np.cos(A), np.sin(P) * np.sin(A), np.cos(P)], axis=-1)
    return ControlMesh(nodes.reshape(-1, 3), _grid_triangles(n_meridian, n_circumference, wrap=True, pattern=pattern))


def gen_rect_sheet(nx, ny, Lx, Ly) -> ControlMesh:
    """Flat ``Lx`` x ``Ly`` sheet in the z = 0 plane with ``nx`` x ``ny`` cells.

    Node ``j * (nx + 1) + i`` sits at ``(i Lx / nx, j Ly / ny, 0)``.
    """
    if nx < 2 or ny < 2:
        raise MeshError(f"degenerate resolution {nx}x{ny}")
    x = np.linspace(0.0, Lx, nx + 1)
    y = np.linspace(0.0, Ly, ny + 1)
    X, Y = np.meshgrid(x, y)  # rows follow y
    nodes = np.stack([X, Y, np.zeros_like(X)], axis=-1).reshape(-1, 3)
    return ControlMesh(nodes, _grid_triangles(ny, nx, wrap=False))


# --------------------------------------------------------------------------
# patch rings


@dataclass(frozen=True)
class OneRing:
    """Support of one element's shape functions in canonical slot order.

    ``nodes[s]`` is the mesh node in slot ``s`` or -1 for a ghost; each ghost
    slot maps in ``ghosts`` to a slot triple ``(p, q, r)`` with
    ``x_ghost = x_p + x_q - x_r``.  Irregular patches (an interior element
    vertex of valence other than 6) carry ``local_triangles``, the triangles
    incident to the element's vertices in slot numbering, which the basis
    module subdivides.
    """

    element: int
    nodes: tuple
    valences: tuple
    ghosts: dict = field(default_factory=dict)
    local_triangles: np.ndarray | None = None

    @property
    def size(self) -> int:
        return len(self.nodes)

    @property
    def is_regular(self) -> bool:
        return self.local_triangles is None

    def expansion(self):
        """Real node ids and the (slots x real nodes) matrix resolving ghosts."""
        real = sorted({n for n in self.nodes if n >= 0})
        col = {n: k for k, n in enumerate(real)}
        E = np.zeros((self.size, len(real)))
        for s, n in enumerate(self.nodes):
            if n >= 0:
                E[s, col[n]] = 1.0
        for s in sorted(self.ghosts, key=_ghost_order(self.ghosts)):
            p, q, r = self.ghosts[s]
            E[s] = E[p] + E[q] - E[r]
        return np.array(real, dtype=np.int64), E


def _ghost_order(ghosts):
    # ghosts may reference earlier ghosts; resolve in dependency order
    depth = {}

    def d(s):
        if s not in ghosts:
            return 0
        if s not in depth:
            depth[s] = 1 + max(d(x) for x in ghosts[s])
        return depth[s]

    return d


def build_one_ring(mesh: ControlMesh, element: int) -> OneRing:
    A, B, C = (int(v) for v in mesh.triangles[element])
    bnd = mesh.boundary_nodes
    val = mesh.valence
    irregular = [v for v in (A, B, C) if not bnd[v] and val[v] != 6]
    valences = tuple(int(val[v]) for v in (A, B, C))
    if irregular:
        if any(bnd[v] for v in (A, B, C)):
            raise UnsupportedPatchError(
                "element mixes an irregular interior vertex with a boundary vertex; quadrisect first",
                f"element {element}",
            )
        return _irregular_ring(mesh, element, A, B, C, valences)
    return _regular_ring(mesh, element, A, B, C, valences)


def _regular_ring(mesh, element, A, B, C, valences):
    slot_of = dict(CANONICAL_FROM_CLASSIC)
    node = {4: A, 7: B, 8: C}
    ghosts = {}
    for new, p, q, r in _WALK:
        found = None
        if node[p] >= 0 and node[q] >= 0:
            found = mesh.third_vertex(node[p], node[q])
        if found is None:
            node[new] = -1
            ghosts[slot_of[new]] = (slot_of[p], slot_of[q], slot_of[r])
        else:
            node[new] = found
    nodes = [0] * REGULAR_SIZE
    for classic, slot in slot_of.items():
        nodes[slot] = node[classic]
    return OneRing(element, tuple(nodes), valences, ghosts)


def _irregular_ring(mesh, element, A, B, C, valences):
    ring_a = mesh.ring(A, B)
    ring_b = mesh.ring(B, C)
    ring_c = mesh.ring(C, A)
    nodes = [A, B, C] + ring_a[2:] + ring_b[3:-1] + [ring_b[-1]] + ring_c[3:-1]
    if len(set(nodes)) != len(nodes):
        raise UnsupportedPatchError("patch rings overlap (mesh too coarse); quadrisect first", f"element {element}")
    slot = {n: s for s, n in enumerate(nodes)}
    local = [
        [slot[v] for v in tri]
        for tri in mesh.triangles.tolist()
        if A in tri or B in tri or C in tri
    ]
    return OneRing(element, tuple(nodes), valences, {}, np.array(local, dtype=np.int64))


def build_one_rings(mesh: ControlMesh) -> list:
    """One :class:`OneRing` per triangle, in triangle order."""
    return [build_one_ring(mesh, e) for e in range(mesh.n_triangles)]
