"""Semi-implicit time stepping for the coupled freeze-thaw system.

Step order: phase fraction (exact clamp resolvent), capillary pressure
(backward Euler in the mobility Kirchhoff variable, implicit play-bank
updates), momentum (viscous implicit solve with frozen-stress fixed point),
temperature (backward Euler in the conductivity Kirchhoff variable with
semi-implicit heat sink).  Every step feeds an energy ledger and a
diagnostic report: dissipation signs, phase confinement, temperature
positivity against the comparison trajectory, and cut-off activity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import solve_banded

from . import hysteresis as hys
from .materials import MaterialSet
from .meshing import (
    AssembledForms,
    BoundaryData,
    Mesh,
    SpectralBasis1D,
    div_load,
    robin_load,
    tensor_load,
    vector_mass_load,
)
from .plasticity import (
    ElasticTensors,
    PlasticPoint,
    YieldSurface,
    check_projection_metric,
    make_point,
    stop_step,
)

__all__ = [
    "SolverError",
    "StepFailure",
    "SolverConfig",
    "SimState",
    "StepReport",
    "LedgerEntry",
    "ThetaFloor",
    "Simulation",
    "phase_resolvent",
    "theta_floor",
    "floor_constant",
    "cutoff_monitor",
]


class SolverError(RuntimeError):
    pass


class StepFailure(SolverError):
    """A nonlinear sub-solve diverged or positivity was lost."""


DEFAULT_SOURCES = ("viscous", "plastic", "darcy", "preisach", "phase")


@dataclass
class SolverConfig:
    dt: float = 1e-3
    t_end: float = 1.0
    cutoff_R: float = math.inf
    eta: float = 0.0
    tol: float = 1e-10
    max_iter: int = 50
    max_halvings: int = 5
    sweeps: int = 1
    spectral: bool = False
    n_modes: Optional[int] = None
    disabled_sources: tuple = ()
    check_floor: bool = True

    def __post_init__(self):
        if self.dt <= 0 or self.t_end <= 0:
            raise SolverError("time step and horizon must be positive")
        if self.cutoff_R != math.inf and self.cutoff_R <= 1.0:
            raise SolverError("cut-off parameter must exceed 1")
        if not 0.0 <= self.eta < 1.0:
            raise SolverError("fourth-order damping must lie in [0, 1)")
        unknown = set(self.disabled_sources) - set(DEFAULT_SOURCES)
        if unknown:
            raise SolverError(f"unknown heat sources {sorted(unknown)}")


@dataclass
class SimState:
    t: float
    p: np.ndarray
    theta: np.ndarray
    chi: np.ndarray
    u: np.ndarray                 # flattened displacement incl. boundary zeros
    bank: hys.PlayBank
    plastic: PlasticPoint
    mass_content: np.ndarray      # committed (chi + rho*(1-chi))(f + G0 + div u)
    dissipation_totals: dict = field(default_factory=lambda: {
        "viscous": 0.0, "plastic": 0.0, "preisach": 0.0, "phase": 0.0})

    def copy(self) -> "SimState":
        return SimState(
            t=self.t, p=self.p.copy(), theta=self.theta.copy(),
            chi=self.chi.copy(), u=self.u.copy(),
            bank=hys.PlayBank(self.bank.xi.copy(), self.bank.last_input.copy()),
            plastic=PlasticPoint(self.plastic.eps.copy(),
                                 self.plastic.sigma_p.copy(),
                                 np.array(self.plastic.potential, copy=True),
                                 np.array(self.plastic.dissipation, copy=True)),
            mass_content=self.mass_content.copy(),
            dissipation_totals=dict(self.dissipation_totals),
        )


@dataclass
class LedgerEntry:
    t: float
    internal: float
    boundary_rate: float
    cut_waste_rate: float
    gravity_work: float
    defect: float


@dataclass
class StepReport:
    t: float
    dt: float
    sub_steps: int
    iterations_pressure: int
    iterations_momentum: int
    iterations_temperature: int
    residual_pressure: float
    residual_momentum: float
    residual_temperature: float
    p_min: float
    p_max: float
    theta_min: float
    theta_max: float
    chi_min: float
    chi_max: float
    max_chi_rate: float
    chi_rate_bound: float
    dissipation_viscous: float
    dissipation_plastic: float
    dissipation_preisach: float
    dissipation_phase: float
    cutoff_flags: dict
    max_grad_p_sq: float
    ledger: LedgerEntry
    floor_value: float
    floor_violation: float
    probe_p: float
    probe_saturation: float


@dataclass
class ThetaFloor:
    times: np.ndarray
    values: np.ndarray
    constant: float

    @property
    def final(self) -> float:
        return float(self.values[-1])

    def at(self, t: float) -> float:
        return float(np.interp(t, self.times, self.values))


def phase_resolvent(chi, drive, gamma, dt):
    """Exact backward-Euler resolvent of the [0, 1] confinement inclusion."""
    return np.clip(np.asarray(chi) + dt * np.asarray(drive)
                   / np.asarray(gamma), 0.0, 1.0)


def floor_constant(materials: MaterialSet, tensors: ElasticTensors,
                   dim: int) -> float:
    """Comparison constant from the Young splitting of the heat sink."""
    c = materials.constants
    ncomp = {1: 1, 2: 3, 3: 6}[dim]
    b_flat = tensors.viscosity.lower_bound(ncomp)
    gamma_flat = materials.relaxation.gamma_flat
    return ((c.latent_heat / c.theta_c) ** 2 / (4.0 * gamma_flat)
            + 3.0 * c.beta ** 2 / (4.0 * b_flat))


def theta_floor(heat_capacity_fn, constant: float, theta_bar: float,
                t_end: float, n_steps: int = 2000) -> ThetaFloor:
    """Positive nonincreasing subsolution of d/dt C_V(phi) = -C phi^2."""
    ts = np.linspace(0.0, t_end, n_steps + 1)
    h = t_end / n_steps
    phi = np.empty(n_steps + 1)
    phi[0] = theta_bar

    def rate(x):
        return -constant * x * x / float(heat_capacity_fn(x))

    y = theta_bar
    for k in range(n_steps):
        k1 = rate(y)
        k2 = rate(y + 0.5 * h * k1)
        k3 = rate(y + 0.5 * h * k2)
        k4 = rate(y + h * k3)
        y = y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if y <= 0:
            raise SolverError("comparison trajectory lost positivity; "
                              "refine its time grid")
        phi[k + 1] = y
    return ThetaFloor(times=ts, values=phi, constant=constant)


# ---------------------------------------------------------------------------
# simulation


class Simulation:
    """Problem data plus the discrete stepping operators."""

    def __init__(self, mesh: Mesh, boundary: BoundaryData,
                 materials: MaterialSet, density: hys.PreisachDensity,
                 grid: hys.MemoryGrid, tensors: ElasticTensors,
                 surface: YieldSurface, config: SolverConfig,
                 gravity=None, probe_node: Optional[int] = None):
        check_projection_metric(tensors, surface, mesh.ncomp)
        self.mesh = mesh
        self.boundary = boundary
        self.materials = materials
        self.density = density
        self.grid = grid
        self.tensors = tensors
        self.surface = surface
        self.config = config
        self.pack = materials.cutoff(config.cutoff_R)
        self.forms = AssembledForms.build(mesh, boundary, tensors.viscosity,
                                          tensors.hardening)
        self.forms.check_constrained()
        if gravity is None:
            gravity = np.zeros(mesh.dim)
        g = np.asarray(gravity, dtype=float)
        self.gravity_elem = (np.tile(g, (mesh.n_elements, 1))
                             if g.ndim == 1 else g)
        self.gravity_load = vector_mass_load(mesh, self.gravity_elem)
        self.probe_node = (mesh.n_nodes // 2 if probe_node is None
                           else int(probe_node))
        self.dg = hys.DensityGrid(density, grid)
        self._momentum_factor = {}
        self._stiff_band = None
        if mesh.dim == 1:
            n = mesh.n_nodes
            dense = self.forms.stiffness.toarray()
            band = np.zeros((3, n))
            band[1] = np.diag(dense)
            band[0, 1:] = np.diag(dense, 1)
            band[2, :-1] = np.diag(dense, -1)
            self._stiff_band = band
        self.basis = None
        if config.spectral:
            if mesh.dim != 1:
                raise SolverError("spectral mode is 1D only")
            n_modes = config.n_modes or min(32, mesh.n_nodes // 2)
            self.basis = SpectralBasis1D.build(mesh, n_modes)
        elif config.eta != 0.0:
            raise SolverError("fourth-order damping requires spectral mode")
        self.floor = None
        if config.check_floor:
            c = floor_constant(materials, tensors, mesh.dim)
            self.floor = theta_floor(
                materials.heat_capacity.heat_capacity, c,
                materials.constants.theta_bar, config.t_end)

    # -- state setup ---------------------------------------------------------

    def initial_state(self, p0, theta0, chi0, u0=None) -> SimState:
        mesh = self.mesh
        p0 = np.asarray(p0, dtype=float)
        u0 = (np.zeros(mesh.n_nodes * mesh.dim) if u0 is None
              else np.asarray(u0, dtype=float).ravel())
        bnodes = mesh.boundary_nodes()
        u_mat = u0.reshape(mesh.n_nodes, mesh.dim)
        if np.max(np.abs(u_mat[bnodes]), initial=0.0) > 1e-12:
            raise SolverError("initial displacement must vanish on the boundary")
        eps0 = mesh.element_strain(u0)
        chi0 = np.asarray(chi0, dtype=float)
        bank = hys.bank_init(p0, self.grid)
        content = self._rho(chi0) * (self.pack.f(p0) + self.dg.value(bank.xi)
                                     + self._div_u_node(u0))
        return SimState(
            t=0.0, p=p0.copy(),
            theta=np.asarray(theta0, dtype=float).copy(),
            chi=chi0.copy(),
            u=u0.copy(),
            bank=bank,
            plastic=make_point(eps0, self.tensors, self.surface),
            mass_content=content,
        )

    # -- helpers ---------------------------------------------------------------

    def _rho(self, chi):
        return chi + self.materials.constants.rho_star * (1.0 - chi)

    def _div_u_elem(self, u):
        from .plasticity import trace as tr
        return tr(self.mesh.element_strain(u))

    def _div_u_node(self, u):
        return self.mesh.element_to_node(self._div_u_elem(u))

    def _grad_p_sq_elem(self, p):
        g = self.mesh.element_gradient(p)
        return np.sum(g * g, axis=1)

    def _mu_secant_elem(self, p):
        """Element mobility: secant of the Kirchhoff map in 1D (exact flux
        pairing), midpoint value otherwise."""
        if self.mesh.dim == 1:
            vals = p[self.mesh.elements]
            dv = vals[:, 1] - vals[:, 0]
            m = self.pack.mobility_kirchhoff(vals)
            num = m[:, 1] - m[:, 0]
            mid = self.pack.mu(self.mesh.element_mean(p))
            with np.errstate(invalid="ignore", divide="ignore"):
                sec = np.where(np.abs(dv) > 1e-30, num / dv, mid)
            return sec
        return self.pack.mu(self.mesh.element_mean(p))

    # -- phase step -------------------------------------------------------------

    def phase_drive(self, state: SimState, p=None, theta=None, u=None):
        """Clamp-inclusion drive F and relaxation coefficient at step start."""
        c = self.materials.constants
        pack = self.pack
        p = state.p if p is None else p
        theta = state.theta if theta is None else theta
        u = state.u if u is None else u
        div_n = self._div_u_node(u)
        g0 = self.dg.value(state.bank.xi)
        u0 = self.dg.potential(state.bank.xi)
        drive = ((1.0 - c.rho_star)
                 * (pack.phi(p) + p * g0 - u0 + p * div_n)
                 + c.latent_heat * (np.clip(np.maximum(theta, 0.0), 0.0,
                                            pack.R) / c.theta_c - 1.0))
        gamma = pack.gamma(p, theta, div_n)
        return drive, gamma

    def step_phase(self, state: SimState, dt: float, p=None, theta=None,
                   u=None):
        drive, gamma = self.phase_drive(state, p=p, theta=theta, u=u)
        chi_new = phase_resolvent(state.chi, drive, gamma, dt)
        rate = np.abs(chi_new - state.chi) / dt
        bound = np.max(np.abs(drive) / gamma)
        if np.max(rate) > bound + 1e-12:
            raise SolverError("phase rate exceeded its drive bound")
        return chi_new, gamma, float(np.max(rate)), float(bound)

    # -- pressure step ------------------------------------------------------------

    def _solve_scalar_system(self, diag, coeff_cols, robin_mat, rhs):
        """Solve (diag(diag) + stiffness diag(coeff_cols) + robin) x = rhs.

        Tridiagonal banded solve in 1D, sparse factorization otherwise.
        """
        if self.mesh.dim == 1:
            ab = self._stiff_band * coeff_cols[None, :]
            ab[1] += diag + robin_mat.diagonal()
            return solve_banded((1, 1), ab, rhs)
        jac = (sp.diags(diag) + self.forms.stiffness @ sp.diags(coeff_cols)
               + robin_mat).tocsc()
        return spla.spsolve(jac, rhs)

    def step_pressure(self, state: SimState, chi_new, dt: float, u=None):
        if self.basis is not None:
            return self._step_pressure_spectral(state, chi_new, dt, u=u)
        mesh, pack, cfg = self.mesh, self.pack, self.config
        forms = self.forms
        ml = forms.lumped
        rho_new = self._rho(chi_new)
        div_n = self._div_u_node(state.u if u is None else u)
        w_old = state.mass_content
        t_new = state.t + dt
        load = robin_load(mesh, self.boundary.alpha, self.boundary.p_star,
                          t_new)
        r_alpha = forms.robin_alpha
        stiff = forms.stiffness
        scale = float(np.linalg.norm(ml * w_old) / dt + np.linalg.norm(load)
                      + 1.0)

        def residual_slope(p_cand):
            g0, slope = self.dg.candidate(state.bank.xi, p_cand)
            res = (ml / dt * (rho_new * (pack.f(p_cand) + g0 + div_n) - w_old)
                   + stiff @ pack.mobility_kirchhoff(p_cand)
                   + r_alpha @ p_cand - load)
            return res, slope

        p = state.p.copy()
        res, slope = residual_slope(p)
        base = np.linalg.norm(res)
        for it in range(1, cfg.max_iter + 1):
            if base <= cfg.tol * scale:
                break
            coeff = ml * rho_new * (pack.f_derivative(p) + slope) / dt
            delta = self._solve_scalar_system(coeff, pack.mu(p), r_alpha, -res)
            step_len = 1.0
            while True:
                cand = p + step_len * delta
                res_c, slope_c = residual_slope(cand)
                norm_c = np.linalg.norm(res_c)
                if norm_c <= base * (1.0 - 1e-4 * step_len) \
                        or step_len <= 1.0 / 64.0:
                    break
                step_len *= 0.5
            p, res, slope, base = cand, res_c, slope_c, norm_c
        else:
            raise StepFailure(
                f"pressure solve stalled at t = {state.t!r}: residual "
                f"{float(base / scale)!r}")
        bank_new, inc = self.dg.commit(state.bank, p)
        content = rho_new * (pack.f(p) + self.dg.value(bank_new.xi) + div_n)
        return p, bank_new, inc, (it, float(base / scale)), content

    def _step_pressure_spectral(self, state: SimState, chi_new, dt: float,
                                u=None):
        mesh, pack, cfg = self.mesh, self.pack, self.config
        basis = self.basis
        w = basis.weights
        rho_new = self._rho(chi_new)
        div_n = self._div_u_node(state.u if u is None else u)
        w_old = state.mass_content
        t_new = state.t + dt
        lam = basis.eigenvalues + cfg.eta * basis.eigenvalues ** 2
        # boundary point contributions (1D counting measure)
        bnode = mesh.boundary_facets[:, 0]
        alpha = self.boundary.alpha
        xb = mesh.nodes[bnode]
        p_star_b = np.asarray(self.boundary.p_star(xb, t_new), dtype=float)
        eb = basis.vectors[:, bnode]          # (n_modes, n_bnd)

        v = basis.project(pack.mobility_kirchhoff(state.p))
        scale = float(np.linalg.norm(basis.project(w_old)) / dt
                      + np.linalg.norm(eb @ (alpha * p_star_b)) + 1.0)

        def residual(v_coeff):
            p_nodal = pack.mobility_kirchhoff_inverse(
                basis.synthesize(v_coeff))
            g0, slope = self.dg.candidate(state.bank.xi, p_nodal)
            bulk = basis.project(rho_new * (pack.f(p_nodal) + g0 + div_n)
                                 - w_old) / dt
            rob = eb @ (alpha * (p_star_b - p_nodal[bnode]))
            return bulk + lam * v_coeff - rob, p_nodal, slope

        for it in range(1, cfg.max_iter + 1):
            res, p_nodal, slope = residual(v)
            if np.linalg.norm(res) <= cfg.tol * scale:
                break
            coeff = (rho_new * (pack.f_derivative(p_nodal) + slope)
                     / pack.mu(p_nodal))
            jac = (basis.vectors * (w * coeff)) @ basis.vectors.T / dt
            jac += np.diag(lam)
            jac += (eb * (alpha / pack.mu(p_nodal[bnode]))) @ eb.T
            delta = np.linalg.solve(jac, -res)
            step_len, base = 1.0, np.linalg.norm(res)
            for _ in range(8):
                res_c, _, _ = residual(v + step_len * delta)
                if np.linalg.norm(res_c) <= base * (1.0 - 1e-4 * step_len):
                    break
                step_len *= 0.5
            v = v + step_len * delta
        else:
            raise StepFailure(f"spectral pressure solve stalled at t = "
                              f"{state.t!r}")
        p = pack.mobility_kirchhoff_inverse(basis.synthesize(v))
        bank_new, inc = self.dg.commit(state.bank, p)
        content = rho_new * (pack.f(p) + self.dg.value(bank_new.xi) + div_n)
        return p, bank_new, inc, (it, float(np.linalg.norm(res) / scale)), \
            content

    # -- momentum step -------------------------------------------------------------

    def _momentum_matrix(self, dt: float):
        key = round(math.log2(dt), 9)
        if key not in self._momentum_factor:
            forms = self.forms
            idx = forms.interior_dofs
            a = (forms.visc_matrix / dt + forms.hard_matrix)
            self._momentum_factor[key] = spla.factorized(
                a[idx][:, idx].tocsc())
        return self._momentum_factor[key]

    def step_momentum(self, state: SimState, p_new, chi_new, theta, dt: float):
        mesh, cfg = self.mesh, self.config
        forms = self.forms
        c = self.materials.constants
        idx = forms.interior_dofs
        solve = self._momentum_matrix(dt)
        rho_new = self._rho(chi_new)
        theta_hat = np.clip(np.maximum(theta, 0.0), 0.0, self.pack.R)
        w_elem = (mesh.element_mean(p_new * rho_new)
                  + c.beta * (mesh.element_mean(theta_hat) - c.theta_c))
        rhs_full = (div_load(mesh, w_elem) + self.gravity_load
                    + forms.visc_matrix @ state.u / dt)
        eps_old = state.plastic.eps
        u = state.u.copy()
        plastic_new, inc = None, None
        for it in range(1, cfg.max_iter + 1):
            eps_k = mesh.element_strain(u)
            plastic_new, inc = stop_step(state.plastic, eps_k - eps_old,
                                         self.tensors, self.surface)
            rhs = rhs_full - tensor_load(mesh, plastic_new.sigma_p)
            u_next = np.zeros_like(u)
            u_next[idx] = solve(rhs[idx])
            gap = np.linalg.norm(u_next - u)
            u = u_next
            if gap <= cfg.tol * (1.0 + np.linalg.norm(u)):
                break
        else:
            raise StepFailure(f"momentum fixed point stalled at t = "
                              f"{state.t!r}")
        eps_new = mesh.element_strain(u)
        plastic_new, inc = stop_step(state.plastic, eps_new - eps_old,
                                     self.tensors, self.surface)
        return u, plastic_new, inc, (it, float(gap / (1.0 + np.linalg.norm(u))))

    # -- temperature step -----------------------------------------------------------

    def step_temperature(self, state: SimState, dt: float, *, p_new, chi_new,
                         u_new, d_bank_diss, d_plastic_diss, gamma_frozen):
        mesh, pack, cfg = self.mesh, self.pack, self.config
        forms = self.forms
        c = self.materials.constants
        hc = self.materials.heat_capacity
        ml = forms.lumped
        disabled = set(cfg.disabled_sources)

        d_eps = mesh.element_strain(u_new) - state.plastic.eps
        visc_elem = self.tensors.viscosity.quad(d_eps) / dt ** 2
        plast_elem = d_plastic_diss / dt
        gs_elem = self._grad_p_sq_elem(p_new)
        mu_elem = self._mu_secant_elem(p_new)
        darcy_elem = mu_elem * np.minimum(gs_elem, pack.R)

        chi_rate = (chi_new - state.chi) / dt
        rho_new = self._rho(chi_new)
        preisach_node = rho_new * d_bank_diss / dt
        phase_node = gamma_frozen * chi_rate ** 2

        elem_src = np.zeros(mesh.n_elements)
        if "viscous" not in disabled:
            elem_src += visc_elem
        if "plastic" not in disabled:
            elem_src += plast_elem
        if "darcy" not in disabled:
            elem_src += darcy_elem
        node_src = np.zeros(mesh.n_nodes)
        if "preisach" not in disabled:
            node_src += preisach_node
        if "phase" not in disabled:
            node_src += phase_node
        src = mesh.element_to_node(elem_src) + node_src

        div_rate = self.mesh.element_to_node(
            (self._div_u_elem(u_new) - self._div_u_elem(state.u)) / dt)
        sink_coef = (c.latent_heat / c.theta_c * chi_rate
                     + c.beta * div_rate)

        load = robin_load(mesh, self.boundary.omega, self.boundary.theta_star,
                          state.t + dt)
        r_omega = forms.robin_omega
        stiff = forms.stiffness
        cv_old = hc.energy(state.theta)
        scale = float(np.linalg.norm(ml * cv_old) / dt
                      + np.linalg.norm(load) + np.linalg.norm(ml * src) + 1.0)

        theta = state.theta.copy()

        def residual(th):
            th_hat = np.clip(np.maximum(th, 0.0), 0.0, pack.R)
            return (ml / dt * (hc.energy(th) - cv_old)
                    + stiff @ pack.heat_kirchhoff(th)
                    + r_omega @ th - load
                    + ml * sink_coef * th_hat
                    - ml * src)

        res = residual(theta)
        base = np.linalg.norm(res)
        for it in range(1, cfg.max_iter + 1):
            if base <= cfg.tol * scale:
                break
            active = ((theta > 0.0) & (theta < pack.R)).astype(float)
            diag = (ml * hc.heat_capacity(theta) / dt
                    + ml * sink_coef * active)
            delta = self._solve_scalar_system(diag, pack.kappa(theta),
                                              r_omega, -res)
            step_len = 1.0
            while True:
                cand = theta + step_len * delta
                res_c = residual(cand)
                norm_c = np.linalg.norm(res_c)
                if norm_c <= base * (1.0 - 1e-4 * step_len) \
                        or step_len <= 1.0 / 64.0:
                    break
                step_len *= 0.5
            theta, res, base = cand, res_c, norm_c
        else:
            raise StepFailure(f"temperature solve stalled at t = {state.t!r}")
        if np.min(theta) <= 0.0:
            raise StepFailure(
                f"temperature positivity lost at t = {state.t + dt!r}: "
                f"min {float(np.min(theta))!r}")
        sources = {
            "viscous": float(np.dot(mesh.element_measures(), visc_elem)) * dt,
            "plastic": float(np.dot(mesh.element_measures(), plast_elem)) * dt,
            "preisach": float(np.dot(ml, preisach_node)) * dt,
            "phase": float(np.dot(ml, phase_node)) * dt,
        }
        return theta, (it, float(base / scale)), sources, gs_elem, mu_elem

    # -- energy ledger ----------------------------------------------------------------

    def internal_energy(self, state: SimState) -> float:
        c = self.materials.constants
        pack = self.pack
        ml = self.forms.lumped
        meas = self.mesh.element_measures()
        u0 = self.dg.potential(state.bank.xi)
        nodal = (self.materials.heat_capacity.energy(state.theta)
                 + c.latent_heat * state.chi
                 + self._rho(state.chi) * (pack.stored(state.p) + u0))
        elem = (c.beta * c.theta_c * self._div_u_elem(state.u)
                + state.plastic.potential)
        return float(np.dot(ml, nodal) + np.dot(meas, elem))

    def boundary_rate(self, state: SimState) -> float:
        t = state.t
        forms = self.forms
        load_a = robin_load(self.mesh, self.boundary.alpha,
                            self.boundary.p_star, t)
        load_o = robin_load(self.mesh, self.boundary.omega,
                            self.boundary.theta_star, t)
        pa = float(state.p @ (forms.robin_alpha @ state.p)
                   - state.p @ load_a)
        th = float(np.sum(forms.robin_omega @ state.theta) - np.sum(load_o))
        return pa + th

    def cut_waste_rate(self, p) -> float:
        gs = self._grad_p_sq_elem(p)
        mu = self._mu_secant_elem(p)
        waste = mu * (gs - np.minimum(gs, self.pack.R))
        return float(np.dot(self.mesh.element_measures(), waste))

    def gravity_work(self, state: SimState) -> float:
        return float(self.gravity_load @ state.u)

    def cutoff_activation(self, state: SimState) -> dict:
        """Exact node/element sets where any cut branch is active."""
        R = self.pack.R
        gs = self._grad_p_sq_elem(state.p)
        return {
            "pressure_nodes": np.where(np.abs(state.p) > R)[0],
            "temperature_nodes": np.where(state.theta > R)[0],
            "gradient_elements": np.where(gs > R)[0],
        }

    # -- full step --------------------------------------------------------------------

    def step(self, state: SimState, dt: Optional[float] = None):
        cfg = self.config
        dt = cfg.dt if dt is None else dt
        p_eval, theta_eval, u_eval = state.p, state.theta, state.u
        for sweep in range(max(1, cfg.sweeps)):
            chi_new, gamma_frozen, max_rate, rate_bound = self.step_phase(
                state, dt, p=p_eval, theta=theta_eval, u=u_eval)
            p_new, bank_new, inc, (it_p, res_p), content_new = \
                self.step_pressure(state, chi_new, dt, u=u_eval)
            u_new, plastic_new, pinc, (it_u, res_u) = self.step_momentum(
                state, p_new, chi_new, theta_eval, dt)
            theta_new, (it_t, res_t), sources, gs_elem, mu_elem = \
                self.step_temperature(
                    state, dt, p_new=p_new, chi_new=chi_new, u_new=u_new,
                    d_bank_diss=inc.d_dissipation,
                    d_plastic_diss=pinc.d_dissipation,
                    gamma_frozen=gamma_frozen)
            p_eval, theta_eval, u_eval = p_new, theta_new, u_new

        e_old = self.internal_energy(state)
        totals = {k: state.dissipation_totals[k] + sources[k]
                  for k in state.dissipation_totals}
        new_state = SimState(t=state.t + dt, p=p_new, theta=theta_new,
                             chi=chi_new, u=u_new, bank=bank_new,
                             plastic=plastic_new, mass_content=content_new,
                             dissipation_totals=totals)
        e_new = self.internal_energy(new_state)
        b_rate = self.boundary_rate(new_state)
        waste_rate = self.cut_waste_rate(p_new)
        g_old = self.gravity_work(state)
        g_new = self.gravity_work(new_state)
        defect = (e_new - e_old) + dt * (b_rate + waste_rate) - (g_new - g_old)
        ledger = LedgerEntry(t=new_state.t, internal=e_new,
                             boundary_rate=b_rate, cut_waste_rate=waste_rate,
                             gravity_work=g_new, defect=defect)

        flags = self.pack.activity(p_new, theta_new, gs_elem)
        floor_value = self.floor.at(new_state.t) if self.floor else 0.0
        floor_violation = max(0.0, floor_value - float(np.min(theta_new)))
        probe = self.probe_node
        g0_probe = float(self.dg.value(bank_new.xi[probe]))
        sat_probe = g0_probe + float(self.pack.f(p_new[probe]))

        report = StepReport(
            t=new_state.t, dt=dt, sub_steps=1,
            iterations_pressure=it_p, iterations_momentum=it_u,
            iterations_temperature=it_t,
            residual_pressure=res_p, residual_momentum=res_u,
            residual_temperature=res_t,
            p_min=float(np.min(p_new)), p_max=float(np.max(p_new)),
            theta_min=float(np.min(theta_new)),
            theta_max=float(np.max(theta_new)),
            chi_min=float(np.min(chi_new)), chi_max=float(np.max(chi_new)),
            max_chi_rate=max_rate, chi_rate_bound=rate_bound,
            dissipation_viscous=sources["viscous"],
            dissipation_plastic=sources["plastic"],
            dissipation_preisach=sources["preisach"],
            dissipation_phase=sources["phase"],
            cutoff_flags=flags,
            max_grad_p_sq=float(np.max(gs_elem, initial=0.0)),
            ledger=ledger,
            floor_value=floor_value,
            floor_violation=floor_violation,
            probe_p=float(p_new[probe]),
            probe_saturation=sat_probe,
        )
        self._check_invariants(new_state, report)
        return new_state, report

    def _check_invariants(self, state: SimState, report: StepReport):
        if report.chi_min < -1e-15 or report.chi_max > 1.0 + 1e-15:
            raise SolverError("phase fraction escaped [0, 1]")
        if report.theta_min <= 0.0:
            raise SolverError("temperature lost positivity")
        for name in ("viscous", "plastic", "preisach", "phase"):
            if getattr(report, f"dissipation_{name}") < 0.0:
                raise SolverError(f"negative {name} dissipation")
        band = np.abs(state.p[:, None] - state.bank.xi) - self.grid.levels
        if np.max(band) > 1e-12:
            raise SolverError("play bank escaped its band")

    def step_adaptive(self, state: SimState, dt: float, depth: int = 0):
        """One base step, recursively halved on sub-solve failure."""
        try:
            return self.step(state, dt)
        except StepFailure:
            if depth >= self.config.max_halvings:
                raise
        half = dt / 2.0
        mid, rep1 = self.step_adaptive(state, half, depth + 1)
        end, rep2 = self.step_adaptive(mid, half, depth + 1)
        merged = self._merge_reports(rep1, rep2)
        return end, merged

    @staticmethod
    def _merge_reports(a: StepReport, b: StepReport) -> StepReport:
        led = LedgerEntry(
            t=b.ledger.t, internal=b.ledger.internal,
            boundary_rate=b.ledger.boundary_rate,
            cut_waste_rate=b.ledger.cut_waste_rate,
            gravity_work=b.ledger.gravity_work,
            defect=a.ledger.defect + b.ledger.defect)
        return StepReport(
            t=b.t, dt=a.dt + b.dt, sub_steps=a.sub_steps + b.sub_steps,
            iterations_pressure=a.iterations_pressure + b.iterations_pressure,
            iterations_momentum=a.iterations_momentum + b.iterations_momentum,
            iterations_temperature=(a.iterations_temperature
                                    + b.iterations_temperature),
            residual_pressure=max(a.residual_pressure, b.residual_pressure),
            residual_momentum=max(a.residual_momentum, b.residual_momentum),
            residual_temperature=max(a.residual_temperature,
                                     b.residual_temperature),
            p_min=min(a.p_min, b.p_min), p_max=max(a.p_max, b.p_max),
            theta_min=min(a.theta_min, b.theta_min),
            theta_max=max(a.theta_max, b.theta_max),
            chi_min=min(a.chi_min, b.chi_min),
            chi_max=max(a.chi_max, b.chi_max),
            max_chi_rate=max(a.max_chi_rate, b.max_chi_rate),
            chi_rate_bound=max(a.chi_rate_bound, b.chi_rate_bound),
            dissipation_viscous=a.dissipation_viscous + b.dissipation_viscous,
            dissipation_plastic=a.dissipation_plastic + b.dissipation_plastic,
            dissipation_preisach=(a.dissipation_preisach
                                  + b.dissipation_preisach),
            dissipation_phase=a.dissipation_phase + b.dissipation_phase,
            cutoff_flags={k: a.cutoff_flags[k] or b.cutoff_flags[k]
                          for k in a.cutoff_flags},
            max_grad_p_sq=max(a.max_grad_p_sq, b.max_grad_p_sq),
            ledger=led,
            floor_value=b.floor_value,
            floor_violation=max(a.floor_violation, b.floor_violation),
            probe_p=b.probe_p,
            probe_saturation=b.probe_saturation,
        )

    # -- trajectory ---------------------------------------------------------------------

    def run(self, state: SimState, snapshot_every: int = 0):
        """March to the horizon; returns (final state, reports, snapshots)."""
        cfg = self.config
        n_steps = int(round(cfg.t_end / cfg.dt))
        if abs(n_steps * cfg.dt - cfg.t_end) > 1e-9 * cfg.t_end:
            raise SolverError("horizon must be an integer number of steps")
        reports = []
        snapshots = [self.snapshot(state)] if snapshot_every else []
        for k in range(n_steps):
            state, report = self.step_adaptive(state, cfg.dt)
            reports.append(report)
            if snapshot_every and ((k + 1) % snapshot_every == 0
                                   or k == n_steps - 1):
                snapshots.append(self.snapshot(state))
        return state, reports, snapshots

    def snapshot(self, state: SimState) -> dict:
        return {
            "t": state.t,
            "p": state.p.copy(),
            "theta": state.theta.copy(),
            "chi": state.chi.copy(),
            "u": state.u.copy(),
        }


def cutoff_monitor(reports, config: SolverConfig) -> dict:
    """Aggregate cut-off activity over a trajectory."""
    flags = {}
    for rep in reports:
        for key, val in rep.cutoff_flags.items():
            flags[key] = flags.get(key, False) or bool(val)
    return {
        "R": config.cutoff_R,
        "max_abs_p": max((max(abs(r.p_min), abs(r.p_max)) for r in reports),
                         default=0.0),
        "max_theta": max((r.theta_max for r in reports), default=0.0),
        "max_grad_p_sq": max((r.max_grad_p_sq for r in reports), default=0.0),
        "any_active": any(flags.values()),
        "flags": flags,
    }
