"""INI-style run configurations: parse, validate, serialise and execute.

A configuration has five sections.  Every key is optional unless noted;
unknown sections or keys, missing required keys and out-of-range values are
reported with the offending line number.

``[geometry]``
    ``generator`` (required): ``rect_sheet`` (``nx``, ``ny``, ``lx``, ``ly``),
    ``hemisphere`` (``n_meridian``, ``n_circumference``, ``radius``,
    ``hole_angle``) or ``file`` (``path``).  ``refine`` quadrisects n times.
``[material]``
    ``preset``: ``hemisphere`` (with ``lambda``), ``wrinkle-iso`` or
    ``wrinkle-ortho``; explicit keys override preset values.  Without a
    preset ``h``, ``e1`` and ``nu1`` are required, ``e2`` defaults to ``e1``
    and ``g12`` to the isotropic value when ``e2 == e1``.  ``nu2`` is derived
    and may not be given.  The preferred direction is ``direction = x, y, z``
    or ``alpha_degrees`` (from the y-axis towards +x).  ``constitutive``
    picks the law.
``[boundary]``
    ``fix``: ``selector [components]`` entries separated by ``;``.
    ``prescribe``: ``selector components value [@stage]``.
    ``load``: ``selector fx fy fz [@stage]`` (force per selected node).
    ``rigid``: selectors of candidate nodes for six automatic rigid-mode
    constraints.  Selectors are ``node:ID``, ``nearest:x,y,z``,
    ``edge:xmin|xmax|ymin|ymax|zmin|zmax``, ``boundary`` and ``all``.
``[solver]``
    ``mode`` (``static`` or ``dynamic``), ``steps`` (per stage, may be a
    comma list), ``tol_rel``, ``tol_abs``, ``max_iter``, ``dt``, ``damping``,
    ``perturbation`` (reference roughness in units of h), ``seed`` and
    ``stabilize`` (true: Newton checks the tangent's inertia and escapes
    unstable equilibria, as needed past a bifurcation).
``[output]``
    ``csv``, ``vtk`` (true/false), ``vtk_prefix`` and ``monitor``
    (``selector component`` entries; each selector must pick one node).
"""

from __future__ import annotations

import configparser
import logging
import re
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import ConfigError, MaterialError, ShellError
from .material import (
    DEFAULT_CONSTITUTIVE,
    HEMISPHERE_TABLE,
    MODES,
    Material,
    hemisphere_material,
    wrinkle_material,
)
from .mesh import (
    ControlMesh,
    gen_hemisphere,
    gen_rect_sheet,
    load_mesh,
    subdivide_quadrisect,
)
from .orthotropy import PreferredDirection

__all__ = [
    "GeometryConfig",
    "MaterialConfig",
    "BoundaryConfig",
    "SolverConfig",
    "OutputConfig",
    "RunConfig",
    "parse_config",
    "parse_config_text",
    "to_ini",
    "build_mesh",
    "build_material",
    "select_nodes",
    "run_config",
    "RunResult",
    "PRESETS",
]

log = logging.getLogger(__name__)

PRESETS = ("hemisphere", "wrinkle-iso", "wrinkle-ortho")
GENERATORS = ("rect_sheet", "hemisphere", "file")


@dataclass(frozen=True)
class GeometryConfig:
    generator: str
    nx: int = 8
    ny: int = 4
    lx: float = 1.0
    ly: float = 1.0
    n_meridian: int = 16
    n_circumference: int = 64
    radius: float = 10.0
    hole_angle: float = 18.0
    path: str = ""
    refine: int = 0


@dataclass(frozen=True)
class MaterialConfig:
    h: float
    e1: float
    e2: float
    nu1: float
    g12: float
    rho: float = 1.0
    direction: tuple = (1.0, 0.0, 0.0)
    constitutive: str = DEFAULT_CONSTITUTIVE
    preset: str = ""
    lam: float = 1.0


@dataclass(frozen=True)
class BoundaryConfig:
    fix: tuple = ()  # (selector, components)
    prescribe: tuple = ()  # (selector, components, value, stage)
    load: tuple = ()  # (selector, (fx, fy, fz), stage)
    rigid: tuple = ()  # selectors

    @property
    def n_stages(self) -> int:
        stages = [p[3] for p in self.prescribe] + [ld[2] for ld in self.load]
        return max(stages, default=1)


@dataclass(frozen=True)
class SolverConfig:
    mode: str = "static"
    steps: tuple = (20,)
    tol_rel: float = 1e-6
    tol_abs: float = 1e-10
    max_iter: int = 25
    dt: float = 1e-3
    damping: float = 0.0
    perturbation: float = 0.0
    seed: int = 0
    stabilize: bool = False


@dataclass(frozen=True)
class OutputConfig:
    csv: str = ""
    vtk: bool = False
    vtk_prefix: str = ""
    monitor: tuple = ()  # (selector, component)


@dataclass(frozen=True)
class RunConfig:
    geometry: GeometryConfig
    material: MaterialConfig
    boundary: BoundaryConfig = field(default_factory=BoundaryConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    output: OutputConfig = field(default_factory=OutputConfig)


_SECTIONS = {
    "geometry": {f.name for f in fields(GeometryConfig)},
    "material": ({f.name for f in fields(MaterialConfig)} - {"lam"}) | {"lambda", "alpha_degrees"},
    "boundary": {f.name for f in fields(BoundaryConfig)},
    "solver": {f.name for f in fields(SolverConfig)},
    "output": {f.name for f in fields(OutputConfig)},
}
_COMPONENTS = "xyz"


# --------------------------------------------------------------------------
# parsing


def _line_index(text):
    """Map (section, key) and section names to 1-based line numbers."""
    where = {}
    section = None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        m = re.match(r"\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip().lower()
            where.setdefault(section, no)
            continue
        if section is not None and ("=" in line or ":" in line) and not raw[:1].isspace():
            key = re.split(r"[=:]", line, maxsplit=1)[0].strip().lower()
            where[(section, key)] = no
    return where


class _Reader:
    def __init__(self, parser, where, section):
        self.parser = parser
        self.where = where
        self.section = section
        self.used = set()

    def line(self, key=None):
        return self.where.get((self.section, key)) if key else self.where.get(self.section)

    def has(self, key):
        return self.parser.has_section(self.section) and self.parser.has_option(self.section, key)

    def raw(self, key):
        self.used.add(key)
        return self.parser.get(self.section, key).strip()

    def fail(self, key, message):
        raise ConfigError(f"[{self.section}] {key}: {message}", self.line(key))

    def get(self, key, conv, default=None, required=False, check=None, what=""):
        if not self.has(key):
            if required:
                raise ConfigError(f"[{self.section}] missing required key {key!r}", self.line())
            return default
        text = self.raw(key)
        try:
            value = conv(text)
        except (ValueError, TypeError) as exc:
            self.fail(key, f"cannot read {text!r} ({exc})")
        if check is not None and not check(value):
            self.fail(key, f"value {text!r} out of range{': ' + what if what else ''}")
        return value


def _bool(text):
    t = text.lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected true or false")


def _vector(text):
    v = tuple(float(p) for p in re.split(r"[,\s]+", text.strip()) if p)
    if len(v) != 3:
        raise ValueError("expected three numbers")
    return v


def _entries(text):
    return [e.strip() for e in text.replace("\n", ";").split(";") if e.strip()]


def _check_selector(sel):
    kind, _, arg = sel.partition(":")
    if sel in ("all", "boundary"):
        return sel
    if kind == "node":
        if not arg.isdigit():
            raise ValueError(f"bad node id in {sel!r}")
    elif kind == "nearest":
        _vector(arg)
    elif kind == "edge":
        if arg not in ("xmin", "xmax", "ymin", "ymax", "zmin", "zmax"):
            raise ValueError(f"unknown edge {arg!r}")
    else:
        raise ValueError(f"unknown selector {sel!r}")
    return sel


def _components(text):
    if not text or any(c not in _COMPONENTS for c in text) or len(set(text)) != len(text):
        raise ValueError(f"components must be letters from 'xyz', got {text!r}")
    return text


def _stage(tokens):
    if tokens and tokens[-1].startswith("@"):
        s = int(tokens[-1][1:])
        if s < 1:
            raise ValueError("stages count from 1")
        return tokens[:-1], s
    return tokens, 1


def _parse_fix(text):
    out = []
    for e in _entries(text):
        tok = e.split()
        if len(tok) not in (1, 2):
            raise ValueError(f"expected 'selector [components]', got {e!r}")
        out.append((_check_selector(tok[0]), _components(tok[1]) if len(tok) == 2 else "xyz"))
    return tuple(out)


def _parse_prescribe(text):
    out = []
    for e in _entries(text):
        tok, stage = _stage(e.split())
        if len(tok) != 3:
            raise ValueError(f"expected 'selector components value [@stage]', got {e!r}")
        out.append((_check_selector(tok[0]), _components(tok[1]), float(tok[2]), stage))
    return tuple(out)


def _parse_load(text):
    out = []
    for e in _entries(text):
        tok, stage = _stage(e.split())
        if len(tok) != 4:
            raise ValueError(f"expected 'selector fx fy fz [@stage]', got {e!r}")
        out.append((_check_selector(tok[0]), tuple(float(t) for t in tok[1:]), stage))
    return tuple(out)


def _parse_selectors(text):
    return tuple(_check_selector(e) for e in _entries(text))


def _parse_monitor(text):
    out = []
    for e in _entries(text):
        tok = e.split()
        if len(tok) != 2 or len(tok[1]) != 1:
            raise ValueError(f"expected 'selector component', got {e!r}")
        out.append((_check_selector(tok[0]), _components(tok[1])))
    return tuple(out)


def _parse_steps(text):
    steps = tuple(int(p) for p in text.split(",") if p.strip())
    if not steps or min(steps) < 1:
        raise ValueError("steps must be positive integers")
    return steps


def parse_config(path) -> RunConfig:
    """Read and validate a configuration file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    cfg = parse_config_text(text)
    if cfg.geometry.generator == "file" and not Path(cfg.geometry.path).is_absolute():
        geo = cfg.geometry
        cfg = RunConfig(
            GeometryConfig(**{**asdict(geo), "path": str(path.parent / geo.path)}),
            cfg.material,
            cfg.boundary,
            cfg.solver,
            cfg.output,
        )
    return cfg


def parse_config_text(text: str) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",), strict=True)
    parser.optionxform = str.lower
    try:
        parser.read_string(text)
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key {exc.option!r} in [{exc.section}]", exc.lineno) from exc
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]", exc.lineno) from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}", getattr(exc, "lineno", None)) from exc
    where = _line_index(text)
    for sec in parser.sections():
        if sec.lower() not in _SECTIONS:
            raise ConfigError(f"unknown section [{sec}]", where.get(sec.lower()))
        for key in parser.options(sec):
            if key == "nu2" and sec == "material":
                raise ConfigError("nu2 is derived from e1 * nu2 = e2 * nu1 and may not be set", where.get((sec, key)))
            if key not in _SECTIONS[sec]:
                raise ConfigError(f"unknown key {key!r} in [{sec}]", where.get((sec, key)))
    for sec in ("geometry", "material"):
        if not parser.has_section(sec):
            raise ConfigError(f"missing required section [{sec}]")

    cfg = RunConfig(
        _geometry(_Reader(parser, where, "geometry")),
        _material(_Reader(parser, where, "material")),
        _boundary(_Reader(parser, where, "boundary")),
        _solver(_Reader(parser, where, "solver")),
        _output(_Reader(parser, where, "output")),
    )
    _log_defaults(parser)
    return cfg


def _log_defaults(parser):
    for sec, keys in _SECTIONS.items():
        missing = sorted(k for k in keys if not (parser.has_section(sec) and parser.has_option(sec, k)))
        if missing:
            log.debug("[%s] defaults applied for %s", sec, ", ".join(missing))


def _positive(v):
    return v > 0


def _geometry(r: _Reader) -> GeometryConfig:
    gen = r.get("generator", str, required=True, check=lambda g: g in GENERATORS, what=f"one of {GENERATORS}")
    d = GeometryConfig(gen)
    kw = dict(generator=gen, refine=r.get("refine", int, 0, check=lambda v: v >= 0))
    if gen == "rect_sheet":
        kw.update(
            nx=r.get("nx", int, d.nx, check=lambda v: v >= 2),
            ny=r.get("ny", int, d.ny, check=lambda v: v >= 2),
            lx=r.get("lx", float, d.lx, check=_positive),
            ly=r.get("ly", float, d.ly, check=_positive),
        )
    elif gen == "hemisphere":
        kw.update(
            n_meridian=r.get("n_meridian", int, d.n_meridian, check=lambda v: v >= 2),
            n_circumference=r.get("n_circumference", int, d.n_circumference, check=lambda v: v >= 8),
            radius=r.get("radius", float, d.radius, check=_positive),
            hole_angle=r.get("hole_angle", float, d.hole_angle, check=lambda v: 0 < v < 90),
        )
    else:
        kw.update(path=r.get("path", str, required=True))
    for key in _SECTIONS["geometry"] - set(kw) - r.used:
        if r.has(key):
            r.fail(key, f"not used by generator {gen!r}")
    return GeometryConfig(**kw)


def _preset_values(name, lam, r):
    if name == "hemisphere":
        if lam not in HEMISPHERE_TABLE:
            r.fail("lambda", f"no hemisphere material for {lam}; choose from {sorted(HEMISPHERE_TABLE)}")
        m = hemisphere_material(lam)
    elif name == "wrinkle-iso":
        m = wrinkle_material("iso")
    else:
        m = wrinkle_material("ortho")
    return dict(h=m.h, e1=m.E1, e2=m.E2, nu1=m.nu1, g12=m.G12, rho=m.rho, direction=tuple(float(c) for c in m.d.d))


def _material(r: _Reader) -> MaterialConfig:
    preset = r.get("preset", str, "", check=lambda p: p in PRESETS, what=f"one of {PRESETS}")
    lam = r.get("lambda", float, 1.0)
    if r.has("lambda") and preset != "hemisphere":
        r.fail("lambda", "only meaningful with preset = hemisphere")
    base = _preset_values(preset, lam, r) if preset else {}
    req = not preset
    h = r.get("h", float, base.get("h"), required=req, check=_positive)
    e1 = r.get("e1", float, base.get("e1"), required=req, check=_positive)
    nu1 = r.get("nu1", float, base.get("nu1"), required=req)
    e2 = r.get("e2", float, base.get("e2", e1), check=_positive)
    g_default = base.get("g12")
    if g_default is None and e2 == e1:
        g_default = e1 / (2.0 * (1.0 + nu1))
    g12 = r.get("g12", float, g_default, required=g_default is None, check=_positive)
    rho = r.get("rho", float, base.get("rho", 1.0), check=_positive)
    if r.has("direction") and r.has("alpha_degrees"):
        r.fail("alpha_degrees", "give either direction or alpha_degrees, not both")
    direction = base.get("direction", (1.0, 0.0, 0.0))
    if r.has("direction"):
        direction = r.get("direction", _vector, check=lambda v: any(c != 0 for c in v), what="nonzero vector")
    elif r.has("alpha_degrees"):
        a = r.get("alpha_degrees", float)
        direction = tuple(float(c) for c in PreferredDirection.from_angle(a).d)
    mode = r.get("constitutive", str, DEFAULT_CONSTITUTIVE, check=lambda m: m in MODES, what=f"one of {MODES}")
    try:
        Material(h, e1, e2, nu1, g12, rho, PreferredDirection(direction))
    except (MaterialError, ShellError) as exc:
        raise ConfigError(f"[material] {exc}", r.line()) from exc
    return MaterialConfig(h, e1, e2, nu1, g12, rho, tuple(direction), mode, preset, lam)


def _boundary(r: _Reader) -> BoundaryConfig:
    return BoundaryConfig(
        fix=r.get("fix", _parse_fix, ()),
        prescribe=r.get("prescribe", _parse_prescribe, ()),
        load=r.get("load", _parse_load, ()),
        rigid=r.get("rigid", _parse_selectors, ()),
    )


def _solver(r: _Reader) -> SolverConfig:
    d = SolverConfig()
    return SolverConfig(
        mode=r.get("mode", str, d.mode, check=lambda m: m in ("static", "dynamic"), what="static or dynamic"),
        steps=r.get("steps", _parse_steps, d.steps),
        tol_rel=r.get("tol_rel", float, d.tol_rel, check=_positive),
        tol_abs=r.get("tol_abs", float, d.tol_abs, check=lambda v: v >= 0),
        max_iter=r.get("max_iter", int, d.max_iter, check=_positive),
        dt=r.get("dt", float, d.dt, check=_positive),
        damping=r.get("damping", float, d.damping, check=lambda v: v >= 0),
        perturbation=r.get("perturbation", float, d.perturbation, check=lambda v: v >= 0),
        seed=r.get("seed", int, d.seed),
        stabilize=r.get("stabilize", _bool, d.stabilize),
    )


def _output(r: _Reader) -> OutputConfig:
    return OutputConfig(
        csv=r.get("csv", str, ""),
        vtk=r.get("vtk", _bool, False),
        vtk_prefix=r.get("vtk_prefix", str, ""),
        monitor=r.get("monitor", _parse_monitor, ()),
    )


# --------------------------------------------------------------------------
# serialisation


def _num(v):
    return repr(float(v)) if isinstance(v, float) else str(v)


def to_ini(cfg: RunConfig) -> str:
    """Serialise with every value explicit; ``parse_config_text`` inverts it."""
    g, m, b, s, o = cfg.geometry, cfg.material, cfg.boundary, cfg.solver, cfg.output
    out = ["[geometry]", f"generator = {g.generator}"]
    if g.generator == "rect_sheet":
        keys = ("nx", "ny", "lx", "ly")
    elif g.generator == "hemisphere":
        keys = ("n_meridian", "n_circumference", "radius", "hole_angle")
    else:
        keys = ("path",)
    out += [f"{k} = {_num(getattr(g, k))}" for k in keys + ("refine",)]

    out += ["", "[material]"]
    if m.preset:
        out.append(f"preset = {m.preset}")
        if m.preset == "hemisphere":
            out.append(f"lambda = {_num(m.lam)}")
    out += [f"{k} = {_num(getattr(m, k))}" for k in ("h", "e1", "e2", "nu1", "g12", "rho")]
    out.append("direction = " + ", ".join(_num(c) for c in m.direction))
    out.append(f"constitutive = {m.constitutive}")

    out += ["", "[boundary]"]
    if b.fix:
        out.append("fix = " + " ; ".join(f"{sel} {c}" for sel, c in b.fix))
    if b.prescribe:
        out.append("prescribe = " + " ; ".join(f"{sel} {c} {_num(v)} @{st}" for sel, c, v, st in b.prescribe))
    if b.load:
        out.append(
            "load = " + " ; ".join(f"{sel} {' '.join(_num(f) for f in F)} @{st}" for sel, F, st in b.load)
        )
    if b.rigid:
        out.append("rigid = " + " ; ".join(b.rigid))

    out += ["", "[solver]", f"mode = {s.mode}", "steps = " + ", ".join(str(k) for k in s.steps)]
    out += [f"{k} = {_num(getattr(s, k))}" for k in ("tol_rel", "tol_abs", "max_iter", "dt", "damping", "perturbation", "seed")]
    out.append(f"stabilize = {'true' if s.stabilize else 'false'}")

    out += ["", "[output]"]
    if o.csv:
        out.append(f"csv = {o.csv}")
    out.append(f"vtk = {'true' if o.vtk else 'false'}")
    if o.vtk_prefix:
        out.append(f"vtk_prefix = {o.vtk_prefix}")
    if o.monitor:
        out.append("monitor = " + " ; ".join(f"{sel} {c}" for sel, c in o.monitor))
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------
# building and running


def build_mesh(g: GeometryConfig) -> ControlMesh:
    if g.generator == "rect_sheet":
        mesh = gen_rect_sheet(g.nx, g.ny, g.lx, g.ly)
    elif g.generator == "hemisphere":
        mesh = gen_hemisphere(g.n_meridian, g.n_circumference, g.radius, g.hole_angle)
    else:
        mesh = load_mesh(g.path)
    for _ in range(g.refine):
        mesh = subdivide_quadrisect(mesh)
    return mesh


def build_material(m: MaterialConfig) -> Material:
    return Material(m.h, m.e1, m.e2, m.nu1, m.g12, m.rho, PreferredDirection(m.direction))


def select_nodes(mesh: ControlMesh, selector: str) -> np.ndarray:
    """Node ids picked by a selector string."""
    x = mesh.nodes
    kind, _, arg = selector.partition(":")
    if selector == "all":
        return np.arange(mesh.n_nodes)
    if selector == "boundary":
        return np.flatnonzero(mesh.boundary_nodes)
    if kind == "node":
        n = int(arg)
        if not 0 <= n < mesh.n_nodes:
            raise ConfigError(f"selector {selector!r}: node id out of range (mesh has {mesh.n_nodes} nodes)")
        return np.array([n])
    if kind == "nearest":
        p = np.array(_vector(arg))
        return np.array([int(np.argmin(np.linalg.norm(x - p, axis=1)))])
    if kind == "edge":
        axis = "xyz".index(arg[0])
        lo, hi = x[:, axis].min(), x[:, axis].max()
        tol = 1e-9 * max(hi - lo, 1.0)
        target = lo if arg.endswith("min") else hi
        picked = np.flatnonzero(np.abs(x[:, axis] - target) <= tol)
        if picked.size == 0:
            raise ConfigError(f"selector {selector!r} matches no nodes")
        return picked
    raise ConfigError(f"unknown selector {selector!r}")


@dataclass
class RunResult:
    config: RunConfig
    states: list
    records: list
    model: object = field(repr=False)


def _apply_perturbation(mesh, constrained_nodes, amplitude, seed):
    if amplitude == 0.0:
        return mesh
    rng = np.random.default_rng(seed)
    noise = rng.uniform(-1.0, 1.0, mesh.n_nodes)
    free = np.ones(mesh.n_nodes, dtype=bool)
    free[list(constrained_nodes)] = False
    x = mesh.nodes.copy()
    # displace along the vertex normal so curved shells work too
    normals = np.zeros_like(x)
    tri = mesh.triangles
    fn = np.cross(x[tri[:, 1]] - x[tri[:, 0]], x[tri[:, 2]] - x[tri[:, 0]])
    for k in range(3):
        np.add.at(normals, tri[:, k], fn)
    normals /= np.linalg.norm(normals, axis=1)[:, None]
    x[free] += amplitude * noise[free, None] * normals[free]
    return ControlMesh(x, tri)


def run_config(cfg: RunConfig, csv_path=None, vtk_prefix=None, vtk=None, callback=None) -> RunResult:
    """Build the model, run every stage and write the requested outputs.

    Output arguments override the config's ``[output]`` settings.
    """
    from .bench import export_fields, rigid_constraints
    from .model import ShellModel
    from .output import step_record, write_csv
    from .solver import (
        LoadCase,
        SolverSettings,
        SolverState,
        newmark_step,
        static_solve,
    )

    mesh = build_mesh(cfg.geometry)
    material = build_material(cfg.material)
    b = cfg.boundary
    n_stages = b.n_stages
    steps = cfg.solver.steps
    if len(steps) not in (1, n_stages):
        raise ConfigError(f"[solver] steps lists {len(steps)} values for {n_stages} stages")
    steps = steps * n_stages if len(steps) == 1 else steps

    fixed = [(select_nodes(mesh, sel), comps) for sel, comps in b.fix]
    presc = [(select_nodes(mesh, sel), comps, v, st) for sel, comps, v, st in b.prescribe]
    loads = [(select_nodes(mesh, sel), F, st) for sel, F, st in b.load]
    constrained_nodes = set()
    for nodes, *_ in fixed + presc:
        constrained_nodes.update(int(n) for n in nodes)
    mesh = _apply_perturbation(mesh, constrained_nodes, cfg.solver.perturbation * material.h, cfg.solver.seed)
    model = ShellModel(mesh, material, cfg.material.constitutive, orthotropic=True)
    rigid = []
    if b.rigid:
        cands = [int(n) for sel in b.rigid for n in select_nodes(mesh, sel)]
        rigid = rigid_constraints(mesh.nodes, cands)

    monitors = []
    for sel, comp in cfg.output.monitor:
        nodes = select_nodes(mesh, sel)
        if nodes.size != 1:
            raise ConfigError(f"monitor selector {sel!r} must pick exactly one node, got {nodes.size}")
        n = int(nodes[0])
        monitors.append((f"u{comp}_node{n}", 3 * n + "xyz".index(comp)))
    names = [m[0] for m in monitors]

    def stage_case(stage):
        lc = LoadCase(model.n_dof)
        for nodes, comps in fixed:
            lc.fix(nodes, comps)
        for n, k in rigid:
            lc.prescribe(n, k, 0.0)
        for nodes, comps, v, st in presc:
            for n in nodes:
                for c in comps:
                    dof = 3 * int(n) + "xyz".index(c)
                    if st <= stage:
                        lc.prescribe(int(n), "xyz".index(c), v)
                    elif dof not in lc.prescribed:
                        lc.prescribe(int(n), "xyz".index(c), 0.0)
        for nodes, F, st in loads:
            if st <= stage:
                for n in nodes:
                    lc.add_force(int(n), F)
        return lc

    def previous_forces(stage):
        return stage_case(stage - 1).forces if stage > 1 else np.zeros(model.n_dof)

    records = []
    state = SolverState.zero(model.n_dof)
    states = [state]
    step_counter = [0]

    def keep(st, stage):
        step_counter[0] += 1
        st.step = step_counter[0]
        states.append(st)
        mon = {name: st.u[dof] for name, dof in monitors}
        rec = step_record(model, st, mon)
        rec["load_factor"] = (stage - 1) + st.load_factor
        records.append(rec)
        if callback is not None:
            callback(st)

    records.append(step_record(model, state, {name: 0.0 for name in names}))
    settings = SolverSettings(
        tol_rel=cfg.solver.tol_rel,
        tol_abs=cfg.solver.tol_abs,
        max_iter=cfg.solver.max_iter,
        stabilize=cfg.solver.stabilize,
    )
    for stage in range(1, n_stages + 1):
        lc = stage_case(stage)
        f0 = previous_forces(stage)
        lc.initial_forces = f0
        if cfg.solver.mode == "static":
            settings.steps = steps[stage - 1]
            state = static_solve(model, lc, state, settings, callback=lambda st: keep(st, stage))[-1]
        else:
            mass = model.lumped_mass()
            n = steps[stage - 1]
            start = {d: state.u[d] for d in lc.prescribed}
            for k in range(1, n + 1):
                s = k / n
                f_ext = lc.external(s)
                pres = {d: start[d] + s * (v - start[d]) for d, v in lc.prescribed.items()}
                state = newmark_step(model, state, cfg.solver.dt, f_ext, pres, mass, cfg.solver.damping, settings=settings)
                state.load_factor = s
                keep(state, stage)
    csv_path = csv_path if csv_path is not None else (cfg.output.csv or None)
    if csv_path:
        write_csv(csv_path, records, names)
    vtk = cfg.output.vtk if vtk is None else vtk
    prefix = vtk_prefix if vtk_prefix is not None else (cfg.output.vtk_prefix or "state")
    if vtk:
        export_fields(model, state.u, f"{prefix}_final.vtk")
    return RunResult(cfg, states, records, model)
