"""Pinched-hemisphere and sheet-wrinkling studies plus their post-processing.

Hemisphere
    Four equatorial point loads 90 degrees apart: an inward pair on the y axis
    (points A) and an outward pair on the x axis (points B).  Load level
    ``P`` means the force a quarter-symmetry model applies at a loaded node
    lying on its symmetry planes; the full hemisphere therefore carries point
    forces of ``2 P`` (``load_convention="quarter"``).  ``"full"`` applies
    ``P`` directly.  Rigid motion is removed with six statically determinate
    constraints away from the loads, and displacements are reported as
    half-changes of the loaded diameters, which rigid motion cannot affect.

Wrinkling
    A ``Lx`` x ``Ly`` sheet (x is the long axis) with the lower edge (y = 0)
    pinned.  The upper edge is pulled by ``prestretch`` in y, then moved by
    up to ``shear`` in x while its y displacement stays fixed.  A seeded
    transverse roughness of amplitude ``perturbation * h`` is built into the
    reference surface so the flat state is not an exact equilibrium path.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .basis import box_spline_regular, eval_irregular
from .material import DEFAULT_CONSTITUTIVE, hemisphere_material, wrinkle_material
from .mesh import ControlMesh, gen_hemisphere, gen_rect_sheet, subdivide_quadrisect
from .model import ShellModel
from .output import step_record, write_csv, write_vtk
from .solver import LoadCase, SolverSettings, SolverState, static_solve

__all__ = [
    "HemisphereCase",
    "HemisphereResult",
    "WrinkleCase",
    "WrinkleMetrics",
    "WrinkleResult",
    "rigid_constraints",
    "run_hemisphere",
    "run_wrinkle",
    "detect_critical_shear",
    "count_lobes",
    "count_wrinkles",
    "sample_field",
    "export_fields",
    "NO_WRINKLING",
]

log = logging.getLogger(__name__)

NO_WRINKLING = "no wrinkling"


# --------------------------------------------------------------------------
# shared helpers


def rigid_constraints(nodes, candidates):
    """(node, component) pairs removing all six rigid modes, chosen greedily.

    Candidates are tried in order, component by component; a DOF is kept
    when it raises the rank of the rigid-mode matrix it sees.
    """
    rows = []
    chosen = []
    for n in candidates:
        x = nodes[n]
        for k in range(3):
            r = np.zeros(6)
            r[k] = 1.0
            r[3:] = np.cross(np.eye(3), x)[:, k]
            trial = rows + [r]
            if np.linalg.matrix_rank(np.array(trial), tol=1e-9 * max(1.0, np.abs(x).max())) > len(rows):
                rows = trial
                chosen.append((int(n), k))
            if len(rows) == 6:
                return chosen
    raise ValueError("candidate nodes cannot remove all rigid modes")


def _sampler_cache(model):
    cache = getattr(model, "_sample_cache", None)
    if cache is None:
        cache = {}
        model._sample_cache = cache
    return cache


def sample_field(model: ShellModel, elements, points, field):
    """Limit-surface values of a nodal field at parametric points.

    ``elements[k]`` and ``points[k] = (xi, eta)`` locate sample k; ``field`` is
    (n_nodes,) or (n_nodes, m).
    """
    cache = _sampler_cache(model)
    field = np.asarray(field, dtype=float)
    out = np.empty((len(elements),) + field.shape[1:])
    for k, (e, p) in enumerate(zip(elements, points)):
        e = int(e)
        if e not in cache:
            cache[e] = model.rings[e].expansion()
        ids, E = cache[e]
        ring = model.rings[e]
        p = (float(p[0]), float(p[1]))
        vals = box_spline_regular(p).values if ring.is_regular else eval_irregular(ring, p).values
        out[k] = (E.T @ vals) @ field[ids]
    return out


def _lattice(n):
    """Barycentric lattice points (xi, eta) with spacing 1/n."""
    return np.array([(i / n, j / n) for i in range(n + 1) for j in range(n + 1 - i)])


# --------------------------------------------------------------------------
# hemisphere


@dataclass(frozen=True)
class HemisphereCase:
    lam: float = 1.0
    resolution: tuple = (16, 64)
    R: float = 10.0
    h: float = 0.04
    hole_angle: float = 18.0
    max_load: float = 100.0
    load_convention: str = "quarter"
    steps: int = 20
    constitutive: str = DEFAULT_CONSTITUTIVE
    orthotropic: bool = True
    refine: int = 0  # quadrisections of the generated mesh; node ids are kept

    def __post_init__(self):
        if self.load_convention not in ("quarter", "full"):
            raise ValueError(f"load_convention must be 'quarter' or 'full', got {self.load_convention!r}")
        if self.resolution[1] % 4:
            raise ValueError("circumferential resolution must be a multiple of 4 to put nodes under the loads")

    @property
    def point_force(self) -> float:
        return (2.0 if self.load_convention == "quarter" else 1.0) * self.max_load


@dataclass
class HemisphereResult:
    case: HemisphereCase
    load: np.ndarray  # load level per converged step
    A: np.ndarray  # inward displacement at the A pair
    B: np.ndarray  # outward displacement at the B pair
    records: list
    states: list
    model: ShellModel = field(repr=False)

    def final(self):
        return float(self.A[-1]), float(self.B[-1])


def _hemisphere_setup(case: HemisphereCase):
    n_mer, n_circ = case.resolution
    mesh = gen_hemisphere(n_mer, n_circ, case.R, case.hole_angle)
    for _ in range(case.refine):
        mesh = subdivide_quadrisect(mesh)
    mat = hemisphere_material(case.lam)
    if case.h != mat.h:
        mat = replace(mat, h=case.h)
    model = ShellModel(mesh, mat, case.constitutive, case.orthotropic)
    q = n_circ // 4
    # equator is row 0, azimuth index k at angle 2 pi k / n_circ
    B1, A1, B2, A2 = 0, q, 2 * q, 3 * q
    F = case.point_force
    lc = LoadCase(model.n_dof)
    lc.add_force(B1, [F, 0.0, 0.0])
    lc.add_force(B2, [-F, 0.0, 0.0])
    lc.add_force(A1, [0.0, -F, 0.0])
    lc.add_force(A2, [0.0, F, 0.0])
    cands = [q // 2, q + q // 2, 2 * q + q // 2, 3 * q + q // 2]
    for n, k in rigid_constraints(mesh.nodes, cands):
        lc.prescribe(n, k, 0.0)
    return model, lc, (A1, A2, B1, B2)


def _pair_measures(x, u, pts):
    A1, A2, B1, B2 = pts
    X = x + u.reshape(-1, 3)
    dA = np.linalg.norm(x[A1] - x[A2]) - np.linalg.norm(X[A1] - X[A2])
    dB = np.linalg.norm(X[B1] - X[B2]) - np.linalg.norm(x[B1] - x[B2])
    return 0.5 * dA, 0.5 * dB


def run_hemisphere(case: HemisphereCase = HemisphereCase(), settings: SolverSettings | None = None, csv_path=None):
    """Ramp the pinching loads and record A/B displacements per step."""
    model, lc, pts = _hemisphere_setup(case)
    settings = settings or SolverSettings(steps=case.steps)
    x = model.mesh.nodes
    states = static_solve(model, lc, settings=settings)
    A, B, records = [], [], []
    for st in states:
        a, b = _pair_measures(x, st.u, pts)
        A.append(a)
        B.append(b)
        records.append(step_record(model, st, {"load": st.load_factor * case.max_load, "u_A": a, "u_B": b}))
    if csv_path is not None:
        write_csv(csv_path, records, ["load", "u_A", "u_B"])
    load = np.array([s.load_factor for s in states]) * case.max_load
    return HemisphereResult(case, load, np.array(A), np.array(B), records, states, model)


# --------------------------------------------------------------------------
# wrinkling


@dataclass(frozen=True)
class WrinkleCase:
    material: str = "iso"
    resolution: tuple = (56, 28)
    Lx: float = 200.0
    Ly: float = 100.0
    prestretch: float = 1.0
    shear: float = 10.0
    prestretch_steps: int = 4
    shear_increment: float = 0.1
    perturbation: float = 1e-4
    seed: int = 0
    threshold_factor: float = 5.0
    growth_steps: int = 3
    refine_tol: float = 0.01
    constitutive: str = DEFAULT_CONSTITUTIVE

    def __post_init__(self):
        if self.material not in ("iso", "ortho"):
            raise ValueError(f"material must be 'iso' or 'ortho', got {self.material!r}")


@dataclass
class WrinkleMetrics:
    critical_shear: float | str
    wrinkles: int
    amplitude: float

    @property
    def wrinkled(self) -> bool:
        return self.critical_shear != NO_WRINKLING


@dataclass
class WrinkleResult:
    case: WrinkleCase
    metrics: WrinkleMetrics
    shear: np.ndarray  # shear displacement per recorded state
    max_uz: np.ndarray
    records: list
    final: SolverState
    model: ShellModel = field(repr=False)


def _wrinkle_model(case: WrinkleCase):
    nx, ny = case.resolution
    mesh = gen_rect_sheet(nx, ny, case.Lx, case.Ly)
    mat = wrinkle_material(case.material)
    ref = mesh.nodes.copy()
    y = ref[:, 1]
    interior = (y > 1e-9 * case.Ly) & (y < case.Ly * (1 - 1e-9))
    rng = np.random.default_rng(case.seed)
    noise = rng.uniform(-1.0, 1.0, mesh.n_nodes)
    ref[interior, 2] += case.perturbation * mat.h * noise[interior]
    mesh = ControlMesh(ref, mesh.triangles)
    model = ShellModel(mesh, mat, case.constitutive, orthotropic=True)
    bottom = np.flatnonzero(y <= 1e-9 * case.Ly)
    top = np.flatnonzero(y >= case.Ly * (1 - 1e-9))
    return model, bottom, top


def _wrinkle_loadcase(model, bottom, top, ux, uy):
    lc = LoadCase(model.n_dof)
    lc.fix(bottom)
    for n in top:
        lc.prescribe(n, 0, ux)
        lc.prescribe(n, 1, uy)
        lc.prescribe(n, 2, 0.0)
    return lc


def _max_uz(u):
    return float(np.abs(u[2::3]).max())


def detect_critical_shear(shear, max_uz, threshold, growth_steps=3):
    """Index of the first state whose ``max_uz`` exceeds ``threshold`` and
    keeps growing for ``growth_steps`` further states, or ``None``."""
    shear = np.asarray(shear, dtype=float)
    amp = np.asarray(max_uz, dtype=float)
    for k in range(len(amp)):
        if amp[k] <= threshold:
            continue
        # near the end of the ramp, growth over the remaining states suffices
        tail = amp[k : k + growth_steps + 1]
        if len(tail) > 1 and np.all(np.diff(tail) > 0.0):
            return k
    return None


def count_lobes(signal, global_max, fraction=0.1):
    """Sign-consistent runs of ``signal`` whose peak exceeds ``fraction * global_max``."""
    s = np.asarray(signal, dtype=float)
    if global_max <= 0.0 or s.size == 0:
        return 0
    sign = np.sign(s)
    count = 0
    start = 0
    for k in range(1, len(s) + 1):
        if k == len(s) or sign[k] != sign[start]:
            if sign[start] != 0 and np.abs(s[start:k]).max() > fraction * global_max:
                count += 1
            start = k
    return count


def _locate(model, xy):
    """Element and (xi, eta) of planar reference points (flat meshes only)."""
    x = model.mesh.nodes[:, :2]
    tri = model.mesh.triangles
    a, b, c = x[tri[:, 0]], x[tri[:, 1]], x[tri[:, 2]]
    e1, e2 = b - a, c - a
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    elems, params = [], []
    for p in np.atleast_2d(xy):
        d = p - a
        v = (d[:, 0] * e2[:, 1] - d[:, 1] * e2[:, 0]) / det
        w = (e1[:, 0] * d[:, 1] - e1[:, 1] * d[:, 0]) / det
        slack = np.minimum(np.minimum(v, w), 1.0 - v - w)
        e = int(np.argmax(slack))
        vv, ww = np.clip(v[e], 0.0, 1.0), np.clip(w[e], 0.0, 1.0)
        s = vv + ww
        if s > 1.0:
            vv, ww = vv / s, ww / s
        elems.append(e)
        params.append((vv, ww))
    return np.array(elems), np.array(params)


def crest_normal(model, u):
    """Unit in-plane direction across the wrinkle crests.

    Dominant eigenvector of the area-weighted structure tensor of the u_z
    gradient evaluated at element barycentres.
    """
    t = model.tables
    uz = np.asarray(u).reshape(-1, 3)[:, 2]
    # parametric gradient of uz, mapped to the reference plane with the basis
    g_par = np.einsum("ena,en->ea", t.first, uz[t.conn])
    basis = model.ref.basis[:, :, :2]  # (E, 2, 2) rows a_alpha (x, y)
    G = np.linalg.solve(basis, g_par[..., None])[..., 0]
    S = np.einsum("e,ei,ej->ij", model.area, G, G)
    w, V = np.linalg.eigh(S)
    n = V[:, -1]
    return n / np.linalg.norm(n)


def count_wrinkles(model, u, Lx=None, Ly=None, fraction=0.1, supersample=4):
    """Wrinkle count along the crest normal through the sheet centre and the
    maximum |u_z| over a supersampled limit surface."""
    uz = np.asarray(u, dtype=float).reshape(-1, 3)[:, 2]
    x = model.mesh.nodes
    Lx = x[:, 0].max() - x[:, 0].min() if Lx is None else Lx
    Ly = x[:, 1].max() - x[:, 1].min() if Ly is None else Ly
    lat = _lattice(supersample)
    E = model.n_elements
    field_vals = sample_field(model, np.repeat(np.arange(E), len(lat)), np.tile(lat, (E, 1)), uz)
    amplitude = float(np.abs(field_vals).max())
    if amplitude == 0.0:
        return 0, 0.0
    n = crest_normal(model, u)
    centre = np.array([x[:, 0].min() + 0.5 * Lx, x[:, 1].min() + 0.5 * Ly])
    # clip the line centre + t n to the sheet rectangle
    lo = np.array([x[:, 0].min(), x[:, 1].min()])
    hi = lo + np.array([Lx, Ly])
    t_max = np.inf
    for k in range(2):
        if abs(n[k]) > 1e-12:
            t_max = min(t_max, (hi[k] - centre[k]) / abs(n[k]))
    nx = int(np.sqrt(model.n_elements / 2 * Lx / Ly)) or 1
    h_cell = Lx / nx
    n_samples = max(8, int(np.ceil(2 * t_max / h_cell * supersample)) + 1)
    ts = np.linspace(-t_max, t_max, n_samples)
    pts = centre + ts[:, None] * n[None, :]
    elems, params = _locate(model, pts)
    line = sample_field(model, elems, params, uz)
    return count_lobes(line, amplitude, fraction), amplitude


def _solve_shear(model, bottom, top, case, state, ux, steps=1, settings=None):
    lc = _wrinkle_loadcase(model, bottom, top, ux, case.prestretch)
    settings = settings or SolverSettings(steps=steps, stabilize=True)
    return static_solve(model, lc, state, settings)


def run_wrinkle(case: WrinkleCase = WrinkleCase(), settings: SolverSettings | None = None, callback=None):
    """Prestretch, shear ramp, onset detection with bisection, final metrics."""
    model, bottom, top = _wrinkle_model(case)
    n_inc = int(round(case.shear / case.shear_increment))
    # stage 1
    lc = _wrinkle_loadcase(model, bottom, top, 0.0, case.prestretch)
    pre = static_solve(model, lc, settings=settings or SolverSettings(steps=case.prestretch_steps))
    state = replace(pre[-1], load_factor=0.0)
    records = [step_record(model, state, {"shear": 0.0, "max_uz": _max_uz(state.u)})]
    shears = [0.0]
    amps = [_max_uz(state.u)]
    states = [state]
    # stage 2: one continuation over the whole ramp, states kept for bisection
    lc = _wrinkle_loadcase(model, bottom, top, case.shear, case.prestretch)

    def keep(st):
        s = st.load_factor * case.shear
        shears.append(s)
        amps.append(_max_uz(st.u))
        states.append(st)
        records.append(step_record(model, st, {"shear": s, "max_uz": amps[-1]}))
        log.info("shear %.3f  max|u_z| %.3e  iterations %d", s, amps[-1], st.iterations)
        if callback is not None:
            callback(st)

    ramp = settings or SolverSettings(steps=n_inc, stabilize=True)
    static_solve(model, lc, state, ramp, callback=keep)

    threshold = case.threshold_factor * case.perturbation * model.material.h
    k = detect_critical_shear(shears, amps, threshold, case.growth_steps)
    if k is None or k == 0:
        uc = NO_WRINKLING
    else:
        lo, hi = shears[k - 1], shears[k]
        base = states[k - 1]
        while hi - lo > case.refine_tol:
            mid = 0.5 * (lo + hi)
            trial = _solve_shear(model, bottom, top, case, base, mid)[-1]
            if _max_uz(trial.u) > threshold:
                hi = mid
            else:
                lo, base = mid, trial
        uc = 0.5 * (lo + hi)
    final = states[-1]
    count, amp = count_wrinkles(model, final.u, case.Lx, case.Ly)
    metrics = WrinkleMetrics(uc, count, amp)
    return WrinkleResult(case, metrics, np.array(shears), np.array(amps), records, final, model)


# --------------------------------------------------------------------------
# export


def export_fields(model: ShellModel, u, path, title="shell state"):
    """VTK snapshot with displacement point data and energy densities per cell.

    Cell densities are per unit reference area, so ``sum(density * area)``
    reproduces the model's membrane and bending energies.
    """
    mem, bend = model.element_energies(u)
    cell = {
        "bending_energy_density": bend / model.area,
        "membrane_energy_density": mem / model.area,
    }
    return write_vtk(path, model.mesh.nodes, model.mesh.triangles, u, cell, title)
