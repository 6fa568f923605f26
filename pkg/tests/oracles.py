"""Independent reference computations used by the tests.

Nothing here imports the package's basis code: the subdivision oracle works
on a plain axial lattice with the textbook Loop stencils.
"""

from __future__ import annotations

import numpy as np

# Regular patch nodes in the classic 1..12 numbering laid out on a unit
# equilateral lattice; the element is (4, 7, 8).
_H = np.sqrt(3.0) / 2.0
CLASSIC_POSITIONS = np.array(
    [
        (0.0, 2 * _H), (1.0, 2 * _H), (-0.5, _H), (0.5, _H), (1.5, _H), (-1.0, 0.0),
        (0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (-0.5, -_H), (0.5, -_H), (1.5, -_H),
    ]
)
# axial lattice coordinates (i along +x, j along the 60 degree direction)
_AXIAL = [(int(round(x - y / _H / 2.0)), int(round(y / _H))) for x, y in CLASSIC_POSITIONS]
_NEIGHBOURS = [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)]


def _shift(G, a, b):
    n, m = G.shape
    R = np.full_like(G, np.nan)
    R[max(0, -a) : min(n, n - a), max(0, -b) : min(m, m - b)] = G[max(0, a) : min(n, n + a), max(0, b) : min(m, m + b)]
    return R


def _refine(G):
    """One Loop subdivision step of a valence-6 lattice (NaN marks missing data)."""
    n, m = G.shape
    R = np.full((2 * n, 2 * m), np.nan)
    R[0::2, 0::2] = 5 / 8 * G + 1 / 16 * sum(_shift(G, a, b) for a, b in _NEIGHBOURS)
    R[1::2, 0::2] = 3 / 8 * (G + _shift(G, 1, 0)) + 1 / 8 * (_shift(G, 0, 1) + _shift(G, 1, -1))
    R[0::2, 1::2] = 3 / 8 * (G + _shift(G, 0, 1)) + 1 / 8 * (_shift(G, 1, 0) + _shift(G, -1, 1))
    E = 3 / 8 * (G + _shift(G, -1, 1)) + 1 / 8 * (_shift(G, -1, 0) + _shift(G, 0, 1))
    R[1::2, 1::2] = _shift(E, 1, 0)
    return R


def _limit(G, a, b):
    return 0.5 * G[a, b] + sum(G[a + x, b + y] for x, y in _NEIGHBOURS) / 12.0


def subdivision_barycentre_value(classic_values, levels=10):
    """Limit value at the element barycentre for control data on the patch.

    The data is subdivided ``levels`` times; at every level the limit
    positions of the small triangle containing the barycentre are averaged and
    the sequence is Richardson-extrapolated in the mesh size.
    """
    n, off = 11, 5
    G = np.zeros((n, n))
    for k, val in enumerate(classic_values):
        i, j = _AXIAL[k]
        G[i + off, j + off] = val
    c = np.array([1 / 3, 1 / 3]) + off
    est = []
    for _ in range(levels):
        G = _refine(G)
        c = 2 * c
        fi, fj = int(np.floor(c[0])), int(np.floor(c[1]))
        fr = c - [fi, fj]
        tri = [(fi, fj), (fi + 1, fj), (fi, fj + 1)] if fr.sum() < 1 else [(fi + 1, fj), (fi + 1, fj + 1), (fi, fj + 1)]
        est.append(np.mean([_limit(G, a, b) for a, b in tri]))
        lo = np.array([fi, fj]) - 8
        G = G[lo[0] : lo[0] + 20, lo[1] : lo[1] + 20]
        c = c - lo
    est = np.array(est)
    hs = 2.0 ** -(np.arange(len(est)) + 1)
    k = np.arange(len(est))[-6:]
    s = (-1.0) ** k
    M = np.c_[np.ones(6), hs[k] ** 2, s * hs[k] ** 3, hs[k] ** 4, s * hs[k], hs[k] ** 3]
    return float(np.linalg.lstsq(M, est[k], rcond=None)[0][0])


def loop_beta(n):
    return (5.0 / 8.0 - (3.0 / 8.0 + 0.25 * np.cos(2.0 * np.pi / n)) ** 2) / n


def loop_limit_weights(n):
    """(centre, each neighbour) weights of the Loop limit-position mask."""
    chi = 1.0 / (3.0 / (8.0 * loop_beta(n)) + n)
    return 1.0 - n * chi, chi


def newmark_period_ratio(omega, dt):
    """Numerical over exact period of trapezoidal (average acceleration) Newmark."""
    x = omega * dt / 2.0
    return x / np.arctan(x)


ICOSAHEDRON_FACES = [
    (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
    (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
    (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
    (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
]


def icosahedron_nodes():
    t = (1.0 + np.sqrt(5.0)) / 2.0
    return np.array(
        [
            (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
            (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
            (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1),
        ],
        dtype=float,
    )


def icosahedron_obj():
    lines = ["# icosahedron"]
    lines += [f"v {x:.17g} {y:.17g} {z:.17g}" for x, y, z in icosahedron_nodes()]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in ICOSAHEDRON_FACES]
    return "\n".join(lines) + "\n"


def icosahedron_off():
    nodes = icosahedron_nodes()
    lines = ["OFF", f"{len(nodes)} {len(ICOSAHEDRON_FACES)} 30"]
    lines += [f"{x:.17g} {y:.17g} {z:.17g}" for x, y, z in nodes]
    lines += [f"3 {a} {b} {c}" for a, b, c in ICOSAHEDRON_FACES]
    return "\n".join(lines) + "\n"
