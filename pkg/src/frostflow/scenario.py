"""Scenario configuration: parsing, presets, and simulation assembly.

A scenario is a plain JSON document with named sections (mesh, materials,
density, tensors, yield_surface, boundary, initial, solver, output).
Space- and time-dependent data are arithmetic expressions in x, y, t over
a small whitelisted grammar, so scenario files stay language-agnostic and
diffable.
"""

from __future__ import annotations

import ast
import copy
import json
import math
from dataclasses import dataclass

import numpy as np

from .hysteresis import MemoryGrid, PreisachDensity
from .materials import (
    ConductivityLaw,
    HeatCapacityLaw,
    LinearSaturationLaw,
    MaterialSet,
    MobilityLaw,
    PhysicalConstants,
    RelaxationLaw,
    SaturationLaw,
    validate_hypotheses,
)
from .meshing import BoundaryData, Mesh, build_mesh
from .plasticity import ElasticTensors, IsoPair, YieldSurface
from .solver import Simulation, SolverConfig

__all__ = [
    "ScenarioError",
    "compile_expression",
    "Scenario",
    "PRESETS",
    "load_config",
]


class ScenarioError(ValueError):
    pass


# ---------------------------------------------------------------------------
# expression grammar

_FUNCTIONS = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp,
    "log": np.log, "sqrt": np.sqrt, "abs": np.abs, "tanh": np.tanh,
    "sign": np.sign, "min": np.minimum, "max": np.maximum,
}
_CONSTANTS = {"pi": math.pi, "e": math.e}
_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.Mod)
_UNARY = (ast.UAdd, ast.USub)


def _validate_node(node, variables):
    if isinstance(node, ast.Expression):
        _validate_node(node.body, variables)
    elif isinstance(node, ast.Constant):
        if not isinstance(node.value, (int, float)):
            raise ScenarioError(f"literal {node.value!r} is not numeric")
    elif isinstance(node, ast.Name):
        if node.id not in variables and node.id not in _CONSTANTS:
            raise ScenarioError(f"unknown name {node.id!r} in expression")
    elif isinstance(node, ast.BinOp) and isinstance(node.op, _BINOPS):
        _validate_node(node.left, variables)
        _validate_node(node.right, variables)
    elif isinstance(node, ast.UnaryOp) and isinstance(node.op, _UNARY):
        _validate_node(node.operand, variables)
    elif isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCTIONS:
            raise ScenarioError("only the documented functions are allowed")
        if node.keywords:
            raise ScenarioError("keyword arguments are not allowed")
        for arg in node.args:
            _validate_node(arg, variables)
    else:
        raise ScenarioError(
            f"unsupported syntax {type(node).__name__!r} in expression")


def compile_expression(text, variables=("x", "y", "t")):
    """Compile an arithmetic expression of x, y, t into a numpy callable."""
    if isinstance(text, (int, float)):
        value = float(text)
        return lambda **kw: value
    try:
        tree = ast.parse(str(text), mode="eval")
    except SyntaxError as exc:
        raise ScenarioError(f"cannot parse expression {text!r}: {exc}") from exc
    _validate_node(tree, set(variables))
    code = compile(tree, "<scenario-expression>", "eval")
    env = {**_FUNCTIONS, **_CONSTANTS}

    def fn(**kw):
        out = eval(code, {"__builtins__": {}}, {**env, **kw})
        return out

    fn.source = str(text)
    return fn


def _field_fn(expr):
    """Nodal field from an expression of x (and y in 2D)."""
    fn = compile_expression(expr, variables=("x", "y"))

    def evaluate(coords):
        kw = {"x": coords[:, 0]}
        if coords.shape[1] > 1:
            kw["y"] = coords[:, 1]
        else:
            kw["y"] = np.zeros(coords.shape[0])
        return np.broadcast_to(np.asarray(fn(**kw), dtype=float),
                               (coords.shape[0],)).copy()

    return evaluate


def _trace_fn(expr):
    """Boundary trace (x, t) -> values at the given coordinates."""
    fn = compile_expression(expr, variables=("x", "y", "t"))

    def evaluate(coords, t):
        kw = {"x": coords[:, 0], "t": t}
        kw["y"] = coords[:, 1] if coords.shape[1] > 1 else np.zeros(
            coords.shape[0])
        return np.broadcast_to(np.asarray(fn(**kw), dtype=float),
                               (coords.shape[0],)).copy()

    return evaluate


# ---------------------------------------------------------------------------
# scenario


def _get(section, key, default=None, required=False):
    if key in section:
        return section[key]
    if required:
        raise ScenarioError(f"missing required key {key!r}")
    return default


@dataclass
class Scenario:
    """Validated wrapper around one configuration document."""

    data: dict

    SCHEMA_VERSION = "1"

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        if not isinstance(data, dict):
            raise ScenarioError("configuration must be a JSON object")
        missing = [k for k in ("mesh", "solver") if k not in data]
        if missing:
            raise ScenarioError(f"missing sections {missing}")
        return cls(data=copy.deepcopy(data))

    @classmethod
    def from_text(cls, text: str) -> "Scenario":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ScenarioError(
                f"config parse error at line {exc.lineno}, column "
                f"{exc.colno}: {exc.msg}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)

    def to_text(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True) + "\n"

    @property
    def name(self) -> str:
        return self.data.get("name", "unnamed")

    def with_solver(self, **overrides) -> "Scenario":
        data = self.to_dict()
        data.setdefault("solver", {}).update(overrides)
        return Scenario(data=data)

    # -- section builders ------------------------------------------------------

    def build_mesh(self) -> Mesh:
        sec = self.data["mesh"]
        if "path" in sec:
            from .meshing import mesh_from_text
            with open(sec["path"], "r", encoding="utf-8") as fh:
                return mesh_from_text(fh.read())
        return build_mesh(int(_get(sec, "dim", 1)),
                          _get(sec, "extents", [0.0, 1.0]),
                          _get(sec, "resolution", 100))

    def build_materials(self) -> MaterialSet:
        sec = self.data.get("materials", {})
        sat_sec = dict(_get(sec, "saturation", {}))
        kind = sat_sec.pop("kind", "bounded")
        if kind == "bounded":
            saturation = SaturationLaw(**sat_sec)
        elif kind == "linear":
            saturation = LinearSaturationLaw(**sat_sec)
        else:
            raise ScenarioError(f"unknown saturation kind {kind!r}")
        return MaterialSet(
            saturation=saturation,
            mobility=MobilityLaw(**_get(sec, "mobility", {})),
            heat_capacity=HeatCapacityLaw(**_get(sec, "heat_capacity", {})),
            conductivity=ConductivityLaw(**_get(sec, "conductivity", {})),
            relaxation=RelaxationLaw(**_get(sec, "relaxation", {})),
            constants=PhysicalConstants(**_get(sec, "constants", {})),
        )

    def build_density(self):
        sec = dict(self.data.get("density", {"kind": "uniform"}))
        kind = sec.pop("kind", "uniform")
        n_r = int(sec.pop("n_r", 64))
        if kind == "uniform":
            density = PreisachDensity.uniform_box(
                sec.get("value", 0.2),
                (0.0, sec.get("r_max", 1.0)),
                (-sec.get("v_max", 1.0), sec.get("v_max", 1.0)))
        elif kind == "exponential":
            density = PreisachDensity.separable_exponential(
                sec.get("amplitude", 0.3), sec.get("r_scale", 0.5),
                sec.get("v_scale", 0.5), sec.get("r_max", 2.0),
                sec.get("v_max", 2.0))
        elif kind == "zero":
            density = PreisachDensity.zero()
        elif kind == "file":
            with open(sec["path"], "r", encoding="utf-8") as fh:
                density = PreisachDensity.from_text(fh.read())
        else:
            raise ScenarioError(f"unknown density kind {kind!r}")
        grid = MemoryGrid.midpoint(float(density.r_edges[-1]), n_r)
        return density, grid

    def build_tensors(self) -> ElasticTensors:
        sec = self.data.get("tensors", {})

        def pair(key, default):
            val = _get(sec, key, default)
            if np.isscalar(val):
                return IsoPair.scalar(float(val))
            return IsoPair(bulk=float(val[0]), shear=float(val[1]))

        return ElasticTensors(hardening=pair("hardening", 1.0),
                              elasticity=pair("elasticity", 1.0),
                              viscosity=pair("viscosity", 1.0))

    def build_surface(self) -> YieldSurface:
        sec = self.data.get("yield_surface", {})
        return YieldSurface(kind=_get(sec, "kind", "ball"),
                            radius=float(_get(sec, "radius", 1.0)),
                            trace_bound=_get(sec, "trace_bound", None))

    def build_boundary(self, mesh: Mesh) -> BoundaryData:
        sec = self.data.get("boundary", {})
        k = mesh.boundary_facets.shape[0]
        mids = mesh.nodes[mesh.boundary_facets].mean(axis=1)

        def coeff(key, default):
            val = _get(sec, key, default)
            if isinstance(val, (int, float)):
                return np.full(k, float(val))
            return _field_fn(val)(mids)

        return BoundaryData(alpha=coeff("alpha", 1.0),
                            omega=coeff("omega", 1.0),
                            p_star=_trace_fn(_get(sec, "p_star", 0.0)),
                            theta_star=_trace_fn(_get(sec, "theta_star", 1.0)))

    def build_solver_config(self) -> SolverConfig:
        sec = dict(self.data.get("solver", {}))
        cutoff = sec.pop("cutoff_R", None)
        return SolverConfig(
            dt=float(_get(sec, "dt", 1e-3)),
            t_end=float(_get(sec, "t_end", 1.0)),
            cutoff_R=math.inf if cutoff in (None, "inf") else float(cutoff),
            eta=float(_get(sec, "eta", 0.0)),
            tol=float(_get(sec, "tol", 1e-10)),
            max_iter=int(_get(sec, "max_iter", 50)),
            max_halvings=int(_get(sec, "max_halvings", 5)),
            sweeps=int(_get(sec, "sweeps", 1)),
            spectral=bool(_get(sec, "spectral", False)),
            n_modes=_get(sec, "n_modes", None),
            disabled_sources=tuple(_get(sec, "disabled_sources", ())),
        )

    def initial_fields(self, mesh: Mesh):
        sec = self.data.get("initial", {})
        p0 = _field_fn(_get(sec, "p", 0.0))(mesh.nodes)
        theta0 = _field_fn(_get(sec, "theta", 1.0))(mesh.nodes)
        chi0 = _field_fn(_get(sec, "chi", 1.0))(mesh.nodes)
        u_expr = _get(sec, "u", None)
        u0 = None
        if u_expr is not None:
            comps = u_expr if isinstance(u_expr, (list, tuple)) else [u_expr]
            if len(comps) != mesh.dim:
                raise ScenarioError("initial displacement needs one "
                                    "expression per dimension")
            cols = [_field_fn(c)(mesh.nodes) for c in comps]
            u0 = np.stack(cols, axis=1).ravel()
        return p0, theta0, chi0, u0

    def gravity(self, mesh: Mesh):
        g = self.data.get("gravity")
        if g is None:
            return np.zeros(mesh.dim), True
        g = np.asarray(g, dtype=float)
        if g.shape != (mesh.dim,):
            raise ScenarioError("gravity must be a constant vector matching "
                                "the mesh dimension")
        return g, True   # constant vectors always derive from a potential

    # -- assembly ---------------------------------------------------------------

    def build_simulation(self):
        mesh = self.build_mesh()
        boundary = self.build_boundary(mesh)
        materials = self.build_materials()
        density, grid = self.build_density()
        tensors = self.build_tensors()
        surface = self.build_surface()
        config = self.build_solver_config()
        g, _ = self.gravity(mesh)
        probe = self.data.get("output", {}).get("probe_node")
        sim = Simulation(mesh, boundary, materials, density, grid, tensors,
                         surface, config, gravity=g, probe_node=probe)
        p0, theta0, chi0, u0 = self.initial_fields(mesh)
        state = sim.initial_state(p0, theta0, chi0, u0)
        return sim, state

    def validate(self, seed=0):
        mesh = self.build_mesh()
        boundary = self.build_boundary(mesh)
        materials = self.build_materials()
        density, _ = self.build_density()
        tensors = self.build_tensors()
        surface = self.build_surface()
        p0, theta0, chi0, _ = self.initial_fields(mesh)
        _, conservative = self.gravity(mesh)
        t_end = float(self.data.get("solver", {}).get("t_end", 1.0))
        mids = mesh.nodes[mesh.boundary_facets].mean(axis=1)
        times = np.linspace(0.0, t_end, 33)
        p_star = np.concatenate([boundary.p_star(mids, t) for t in times])
        theta_star = np.concatenate([boundary.theta_star(mids, t)
                                     for t in times])
        return validate_hypotheses(
            materials, density, dim=mesh.dim, tensors=tensors,
            surface=surface,
            boundary={"alpha": boundary.alpha, "omega": boundary.omega,
                      "ds": mesh.facet_measures(), "p_star": p_star,
                      "theta_star": theta_star},
            initial={"theta0": theta0, "chi0": chi0},
            body_force={"conservative": conservative},
            seed=seed)


# ---------------------------------------------------------------------------
# presets


def _zero_forcing() -> dict:
    return {
        "name": "zero_forcing",
        "mesh": {"dim": 1, "extents": [0.0, 1.0], "resolution": 60},
        "materials": {
            "heat_capacity": {"c_flat": 0.5, "c_sharp": 1.0},
            "relaxation": {"gamma_flat": 0.05, "gamma_sharp": 0.1},
            "constants": {"rho_star": 0.917, "latent_heat": 6.0,
                          "theta_c": 2.0, "beta": 0.4, "theta_bar": 0.25},
        },
        "density": {"kind": "uniform", "value": 0.2, "r_max": 1.0,
                    "v_max": 1.0, "n_r": 64},
        "tensors": {"hardening": 0.5, "elasticity": 2.0, "viscosity": 0.2},
        "yield_surface": {"kind": "ball", "radius": 0.05},
        "boundary": {"alpha": 1.0, "omega": 1.0, "p_star": 0.0,
                     "theta_star": 2.0},
        "initial": {"p": 0.0, "theta": 2.0, "chi": 0.6},
        "solver": {"dt": 0.002, "t_end": 0.2},
        "output": {"snapshot_every": 20},
    }


def _freeze_thaw() -> dict:
    # amplitudes tuned so the run freezes fully, rewarms past chi = 1/2,
    # cycles the capillary pressure through the hysteresis band, and yields
    # plastically; thresholds below are measured, not assumed
    return {
        "name": "freeze_thaw",
        "mesh": {"dim": 1, "extents": [0.0, 1.0], "resolution": 200},
        "materials": {
            "heat_capacity": {"c_flat": 0.5, "c_sharp": 1.0},
            "relaxation": {"gamma_flat": 0.05, "gamma_sharp": 0.1},
            "constants": {"rho_star": 0.917, "latent_heat": 6.0,
                          "theta_c": 2.0, "beta": 0.4, "theta_bar": 0.25},
        },
        "density": {"kind": "uniform", "value": 0.2, "r_max": 1.0,
                    "v_max": 1.0, "n_r": 64},
        "tensors": {"hardening": 0.5, "elasticity": 2.0, "viscosity": 0.2},
        "yield_surface": {"kind": "ball", "radius": 0.05},
        "boundary": {"alpha": 3.0, "omega": 6.0,
                     "p_star": "1.2*sin(2*pi*t)",
                     "theta_star": "2.6 - 2.2*sin(pi*t)**2"},
        "initial": {"p": 0.0, "theta": 2.6, "chi": 1.0},
        "solver": {"dt": 0.001, "t_end": 1.0},
        "output": {"snapshot_every": 50},
    }


def _linear_regime() -> dict:
    # spectral eigenmode-decay study: linear saturation, no hysteresis,
    # insulated boundary, frozen phase and skeleton; fails validation by
    # construction and must be run with the override flag
    return {
        "name": "linear_regime",
        "mesh": {"dim": 1, "extents": [0.0, 1.0], "resolution": 128},
        "materials": {
            "saturation": {"kind": "linear", "slope": 0.5, "offset": 0.5},
            "relaxation": {"gamma_flat": 1e8, "gamma_sharp": 2e8},
            "constants": {"rho_star": 0.917, "latent_heat": 1.0,
                          "theta_c": 2.0, "beta": 0.0, "theta_bar": 0.25},
        },
        "density": {"kind": "zero", "n_r": 8},
        "tensors": {"hardening": 1.0, "elasticity": 1.0, "viscosity": 1e6},
        "yield_surface": {"kind": "ball", "radius": 1e6},
        "boundary": {"alpha": 0.0, "omega": 0.0, "p_star": 0.0,
                     "theta_star": 2.0},
        "initial": {"p": "0.3*cos(pi*x)", "theta": 2.0, "chi": 1.0},
        "solver": {"dt": 0.00125, "t_end": 0.05, "spectral": True,
                   "n_modes": 16},
        "output": {"snapshot_every": 10},
    }


PRESETS = {
    "zero_forcing": _zero_forcing,
    "freeze_thaw": _freeze_thaw,
    "linear_regime": _linear_regime,
}


def load_config(source: str) -> Scenario:
    """Load a scenario from a file path or a ``preset:<name>`` reference."""
    if source.startswith("preset:"):
        name = source.split(":", 1)[1]
        if name not in PRESETS:
            raise ScenarioError(
                f"unknown preset {name!r}; available: {sorted(PRESETS)}")
        return Scenario.from_dict(PRESETS[name]())
    with open(source, "r", encoding="utf-8") as fh:
        return Scenario.from_text(fh.read())
