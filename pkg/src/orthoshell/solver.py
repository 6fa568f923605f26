"""Static continuation and Newmark time stepping for an assembled shell.

Any object with ``internal(u) -> (energy, force)``, ``tangent(u)`` (sparse)
and ``lumped_mass()`` can be driven; :class:`~orthoshell.model.ShellModel` is
the usual one.

Constrained DOFs are eliminated by substitution: their values are imposed on
``u`` before every solve and only the free block of the tangent is factorised.
Reactions are the residual entries at the constrained DOFs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConvergenceError, DegenerateElementError, ShellError

__all__ = [
    "SolverState",
    "LoadCase",
    "SolverSettings",
    "apply_constraints",
    "reactions",
    "static_solve",
    "newmark_step",
    "newmark_run",
    "total_energy",
]

log = logging.getLogger(__name__)


@dataclass
class SolverState:
    u: np.ndarray
    v: np.ndarray | None = None
    a: np.ndarray | None = None
    load_factor: float = 0.0
    step: int = 0
    iterations: int = 0
    time: float = 0.0
    energy: float = 0.0

    @classmethod
    def zero(cls, n_dof):
        return cls(np.zeros(n_dof), np.zeros(n_dof), np.zeros(n_dof))

    def copy(self):
        return replace(
            self,
            u=self.u.copy(),
            v=None if self.v is None else self.v.copy(),
            a=None if self.a is None else self.a.copy(),
        )


@dataclass
class LoadCase:
    """Nodal forces at full load and prescribed DOF targets.

    ``prescribed`` maps a global DOF (3 * node + component) to its value at
    load factor 1; a continuation ramps it linearly from the value the DOF
    holds in the starting state.  Forces ramp from ``initial_forces`` (zero
    unless an earlier stage left loads in place) to ``forces``.
    """

    n_dof: int
    forces: np.ndarray = None
    prescribed: dict = field(default_factory=dict)
    initial_forces: np.ndarray = None

    def __post_init__(self):
        if self.forces is None:
            self.forces = np.zeros(self.n_dof)
        self.forces = np.asarray(self.forces, dtype=float).reshape(self.n_dof)
        if self.initial_forces is None:
            self.initial_forces = np.zeros(self.n_dof)
        self.initial_forces = np.asarray(self.initial_forces, dtype=float).reshape(self.n_dof)
        loaded = [d for d in self.prescribed if self.forces[d] != 0.0]
        if loaded:
            raise ShellError(f"DOF {loaded[0]} is both loaded and prescribed")

    def add_force(self, node, force):
        for k in range(3):
            if force[k] != 0.0 and 3 * node + k in self.prescribed:
                raise ShellError(f"DOF {3 * node + k} is both loaded and prescribed")
        self.forces[3 * node : 3 * node + 3] += np.asarray(force, dtype=float)

    def external(self, s):
        """External force vector at load factor ``s``."""
        return self.initial_forces + s * (self.forces - self.initial_forces)

    def prescribe(self, node, component, value):
        dof = 3 * int(node) + int(component)
        old = self.prescribed.get(dof)
        if old is not None and old != value:
            raise ShellError(f"conflicting prescriptions for DOF {dof}: {old} and {value}")
        if self.forces[dof] != 0.0:
            raise ShellError(f"DOF {dof} is both loaded and prescribed")
        self.prescribed[dof] = float(value)

    def fix(self, nodes, components="xyz"):
        for n in np.atleast_1d(nodes):
            for c in components:
                self.prescribe(int(n), "xyz".index(c), 0.0)

    @property
    def constrained(self) -> np.ndarray:
        return np.array(sorted(self.prescribed), dtype=np.int64)

    def targets(self) -> np.ndarray:
        return np.array([self.prescribed[d] for d in sorted(self.prescribed)])


@dataclass
class SolverSettings:
    steps: int = 20
    tol_rel: float = 1e-6
    tol_abs: float = 1e-10
    max_iter: int = 25
    min_fraction: float = 1.0 / 1024.0
    force_scale: float | None = None
    predictor: bool = True
    stabilize: bool = False
    max_escape: int = 80


def apply_constraints(K, residual, constrained):
    """Free block of ``K``, free residual entries and the free DOF indices."""
    n = len(residual)
    mask = np.ones(n, dtype=bool)
    mask[np.asarray(constrained, dtype=np.int64)] = False
    free = np.flatnonzero(mask)
    K = sp.csr_matrix(K)
    return K[free][:, free], residual[free], free


def reactions(f_int, f_ext, constrained):
    """Constraint forces needed for equilibrium at the constrained DOFs."""
    c = np.asarray(constrained, dtype=np.int64)
    return f_int[c] - f_ext[c]


def _force_scale(system, settings):
    if settings.force_scale is not None:
        return settings.force_scale
    mat = getattr(system, "material", None)
    if mat is None:
        return 1.0
    return max(mat.E1, mat.E2) * mat.h * getattr(system, "char_length", 1.0)


def _factor(Kff):
    """Symmetric-mode LU of ``Kff`` and its number of negative pivots.

    With diagonal pivoting only, the factorisation is an LDL^T in disguise,
    so by Sylvester's law of inertia the negative entries of ``diag(U)``
    count the negative eigenvalues.
    """
    lu = spla.splu(
        sp.csc_matrix(Kff),
        permc_spec="MMD_AT_PLUS_A",
        diag_pivot_thresh=0.0,
        options=dict(SymmetricMode=True),
    )
    d = lu.U.diagonal()
    if not np.all(np.isfinite(d)) or np.any(d == 0.0):
        raise ConvergenceError("singular tangent")
    return lu, int(np.sum(d < 0.0))


def _descent_step(system, u, free, Kff, rf, f_ext, potential):
    """Energy-decreasing step with a positive definite shifted tangent.

    The shift ``mu`` starts at a small fraction of the diagonal and doubles
    until ``Kff + mu I`` is positive definite.  Along a direction of negative
    curvature the step then amplifies the displacement by at least a factor
    of two per iteration, which moves the state off a saddle point.
    """
    diag = np.abs(Kff.diagonal())
    mu = 1e-8 * float(diag.mean())
    eye = sp.identity(Kff.shape[0], format="csc")
    for _ in range(200):
        try:
            lu, neg = _factor(Kff + mu * eye)
        except ConvergenceError:
            neg = 1
        if neg == 0:
            break
        mu *= 2.0
    else:
        raise ConvergenceError("could not make the tangent positive definite")
    du = lu.solve(-rf)
    slope = float(rf @ du)
    t = 1.0
    for _ in range(30):
        trial = u.copy()
        trial[free] += t * du
        try:
            e, f = system.internal(trial)
        except DegenerateElementError:
            t *= 0.5
            continue
        if e - f_ext @ trial <= potential + 1e-4 * t * slope:
            return trial
        t *= 0.5
    raise ConvergenceError("line search failed")


def _newton(system, u, f_ext, constrained, settings, scale):
    """Newton iterations on the free DOFs; returns (u, energy, iterations).

    With ``settings.stabilize`` a state only counts as converged when the
    free tangent is positive definite; indefinite tangents switch to shifted
    descent steps so the iteration settles in a local energy minimum rather
    than on an unstable branch.
    """
    mask = np.ones(len(u), dtype=bool)
    mask[constrained] = False
    free = np.flatnonzero(mask)
    first = None
    limit = settings.max_iter + (settings.max_escape if settings.stabilize else 0)
    for it in range(limit + 1):
        energy, f = system.internal(u)
        r = f - f_ext
        rf = r[free]
        norm = np.linalg.norm(rf)
        if not np.isfinite(norm):
            raise ConvergenceError("non-finite residual")
        ref = max(np.linalg.norm(f_ext), np.linalg.norm(f))
        small = norm <= settings.tol_rel * ref + settings.tol_abs * scale
        if small and not settings.stabilize:
            return u, energy, it
        if free.size == 0:
            return u, energy, it
        if first is None:
            first = max(norm, settings.tol_abs * scale)
        elif norm > 1e8 * first:
            raise ConvergenceError("Newton iterations diverge")
        if it == limit:
            break
        K = system.tangent(u)
        Kff = sp.csc_matrix(K[free][:, free])
        if not settings.stabilize:
            du = spla.spsolve(Kff, -rf)
            if not np.all(np.isfinite(du)):
                raise ConvergenceError("singular tangent")
            u = u.copy()
            u[free] += du
            continue
        lu, neg = _factor(Kff)
        if neg == 0:
            if small:
                return u, energy, it
            u = u.copy()
            u[free] += lu.solve(-rf)
        else:
            log.debug("indefinite tangent (%d negative pivots), descent step", neg)
            u = _descent_step(system, u, free, Kff, rf, f_ext, energy - f_ext @ u)
    raise ConvergenceError(f"no convergence in {limit} iterations (residual {norm:.3e})")


def static_solve(
    system,
    load_case: LoadCase,
    state: SolverState | None = None,
    settings: SolverSettings | None = None,
    callback=None,
):
    """Ramp loads and prescribed values from ``state`` to full load.

    Returns the list of converged states (the starting state first).  Steps
    that fail to converge are bisected down to ``min_fraction`` of a nominal
    step; below that a :class:`ConvergenceError` carrying the last converged
    state is raised.  ``callback(state)`` runs after every converged step.
    """
    settings = settings or SolverSettings()
    n = load_case.n_dof
    state = SolverState(np.zeros(n)) if state is None else state.copy()
    constrained = load_case.constrained
    start = state.u[constrained].copy()
    target = load_case.targets()
    scale = _force_scale(system, settings)

    nominal = 1.0 / settings.steps
    trajectory = [replace(state, load_factor=0.0)]
    trajectory[0].energy = system.internal(state.u)[0]
    s, ds = 0.0, nominal
    u = state.u.copy()
    u_prev, s_prev = None, None
    step = state.step
    while s < 1.0 - 1e-12:
        ds = min(ds, 1.0 - s)
        s_new = s + ds
        trial = u.copy()
        if settings.predictor and u_prev is not None:
            trial += (ds / (s - s_prev)) * (u - u_prev)
        trial[constrained] = start + s_new * (target - start)
        try:
            trial, energy, its = _newton(system, trial, load_case.external(s_new), constrained, settings, scale)
        except (ConvergenceError, DegenerateElementError, np.linalg.LinAlgError, RuntimeError) as exc:
            if ds <= settings.min_fraction * nominal * (1 + 1e-9):
                last = trajectory[-1]
                raise ConvergenceError(f"step failed at load factor {s_new:.6f}: {exc}", last) from exc
            log.debug("bisecting at s=%.6f (%s)", s_new, exc)
            ds *= 0.5
            continue
        u_prev, s_prev = u, s
        u, s = trial, s_new
        step += 1
        st = SolverState(u.copy(), load_factor=s, step=step, iterations=its, energy=energy)
        trajectory.append(st)
        if callback is not None:
            callback(st)
        if its <= 4:
            ds = min(nominal, 2.0 * ds)
    return trajectory


# --------------------------------------------------------------------------
# dynamics


def total_energy(system, state: SolverState, mass=None):
    """Kinetic plus internal energy."""
    mass = system.lumped_mass() if mass is None else mass
    return 0.5 * np.dot(state.v * mass, state.v) + system.internal(state.u)[0]


def newmark_step(
    system,
    state: SolverState,
    dt,
    f_ext=None,
    prescribed=None,
    mass=None,
    damping=0.0,
    gamma=0.5,
    beta=0.25,
    settings: SolverSettings | None = None,
    min_dt=None,
):
    """One implicit Newmark step (average acceleration by default).

    Solves ``M a + c M v + f_int(u) = f_ext`` at ``t + dt``.  ``prescribed``
    maps DOFs to their values at the end of the step.  A failed Newton solve
    is retried as two half steps, down to ``min_dt``.
    """
    settings = settings or SolverSettings(max_iter=20)
    mass = system.lumped_mass() if mass is None else mass
    n = len(state.u)
    f_ext = np.zeros(n) if f_ext is None else f_ext
    prescribed = prescribed or {}
    min_dt = dt / 64.0 if min_dt is None else min_dt
    try:
        return _newmark_once(system, state, dt, f_ext, prescribed, mass, damping, gamma, beta, settings)
    except (ConvergenceError, DegenerateElementError) as exc:
        if dt / 2.0 < min_dt:
            raise ConvergenceError(f"time step failed at t={state.time + dt:.6g}: {exc}", state) from exc
    # interpolate prescribed values to the midpoint
    cons = np.array(sorted(prescribed), dtype=np.int64)
    mid = {d: 0.5 * (state.u[d] + prescribed[d]) for d in cons}
    half = newmark_step(system, state, dt / 2, f_ext, mid, mass, damping, gamma, beta, settings, min_dt)
    return newmark_step(system, half, dt / 2, f_ext, prescribed, mass, damping, gamma, beta, settings, min_dt)


def _newmark_once(system, state, dt, f_ext, prescribed, mass, damping, gamma, beta, settings):
    u0, v0, a0 = state.u, state.v, state.a
    c0 = 1.0 / (beta * dt * dt)

    def kin(u):
        a = c0 * (u - u0 - dt * v0) - (0.5 / beta - 1.0) * a0
        v = v0 + dt * ((1.0 - gamma) * a0 + gamma * a)
        return v, a

    cons = np.array(sorted(prescribed), dtype=np.int64)
    mask = np.ones(len(u0), dtype=bool)
    mask[cons] = False
    free = np.flatnonzero(mask)
    u = u0 + dt * v0 + dt * dt * (0.5 - beta) * a0  # predictor with a = 0 correction
    u[cons] = [prescribed[d] for d in cons]
    scale = _force_scale(system, settings)
    meff = mass * (c0 + damping * gamma / (beta * dt))
    first = None
    for it in range(settings.max_iter + 1):
        v, a = kin(u)
        energy, f = system.internal(u)
        r = mass * a + damping * mass * v + f - f_ext
        rf = r[free]
        norm = np.linalg.norm(rf)
        if not np.isfinite(norm):
            raise ConvergenceError("non-finite dynamic residual")
        # the inertia of the step increment keeps the reference away from zero
        # when both acceleration and elastic force pass through zero
        inertia = np.linalg.norm((c0 * mass * (u - u0))[free])
        ref = max(np.linalg.norm(f_ext), np.linalg.norm(f), np.linalg.norm(mass * a), inertia)
        if norm <= settings.tol_rel * ref + settings.tol_abs * scale or free.size == 0:
            return SolverState(u, v, a, state.load_factor, state.step + 1, it, state.time + dt, energy)
        if first is None:
            first = norm
        elif norm > 1e8 * first:
            break
        if it == settings.max_iter:
            break
        K = sp.csr_matrix(system.tangent(u)) + sp.diags(meff)
        du = spla.spsolve(sp.csc_matrix(K[free][:, free]), -rf)
        u = u.copy()
        u[free] += du
    raise ConvergenceError("dynamic Newton iterations did not converge")


def newmark_run(system, state, dt, n_steps, f_ext=None, prescribed_fn=None, damping=0.0, callback=None, **kw):
    """Advance ``n_steps``; ``prescribed_fn(t)`` gives prescribed values at time t."""
    mass = system.lumped_mass()
    history = [state]
    for _ in range(n_steps):
        pres = prescribed_fn(state.time + dt) if prescribed_fn is not None else None
        state = newmark_step(system, state, dt, f_ext, pres, mass, damping, **kw)
        history.append(state)
        if callback is not None:
            callback(state)
    return history
