"""Concrete material laws, their cut-off family, and Kirchhoff transforms.

Defaults sit on the lower growth envelopes of the admissible parameter
ranges, which keeps every antiderivative in closed form.  A validation
routine checks each admissibility clause numerically and reports the
witnessing sample on failure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import quad

from .plasticity import ElasticTensors, YieldSurface

__all__ = [
    "MaterialError",
    "SaturationLaw",
    "LinearSaturationLaw",
    "MobilityLaw",
    "HeatCapacityLaw",
    "ConductivityLaw",
    "RelaxationLaw",
    "PhysicalConstants",
    "MaterialSet",
    "CutoffPack",
    "clip_symmetric",
    "kirchhoff",
    "kirchhoff_inverse",
    "invert_increasing",
    "ClauseResult",
    "HypothesisReport",
    "validate_hypotheses",
]


class MaterialError(ValueError):
    pass


def clip_symmetric(z, bound):
    """Projection of the reals onto [-bound, bound]; identity for bound=inf."""
    if np.any(np.asarray(bound) <= 0):
        raise MaterialError("clip bound must be positive")
    return np.clip(z, -bound, bound)


def invert_increasing(fn, dfn, y, lo, hi, tol=1e-13, max_iter=200):
    """Vectorized safeguarded Newton for strictly increasing scalar maps.

    Brackets [lo, hi] must contain the roots; bisection takes over whenever
    a Newton step leaves the bracket.
    """
    y = np.asarray(y, dtype=float)
    lo = np.broadcast_to(np.asarray(lo, dtype=float), y.shape).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), y.shape).copy()
    x = 0.5 * (lo + hi)
    scale = 1.0 + np.abs(y)
    for _ in range(max_iter):
        f = fn(x) - y
        if np.all(np.abs(f) <= tol * scale):
            break
        hi = np.where(f > 0, x, hi)
        lo = np.where(f > 0, lo, x)
        d = dfn(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_new = x - f / d
        bad = ~np.isfinite(x_new) | (x_new <= lo) | (x_new >= hi)
        x = np.where(bad, 0.5 * (lo + hi), x_new)
    else:
        raise MaterialError("inversion did not converge; law is not "
                            "increasing on the bracket")
    return x


# ---------------------------------------------------------------------------
# laws


@dataclass(frozen=True)
class SaturationLaw:
    """Bounded monotone non-hysteretic saturation component.

    f(p) = offset + sgn(p) (f_flat/nu) (1 - (1+|p|)^(-nu)), whose derivative
    is exactly the admissible lower envelope f_flat (1+|p|)^(-1-nu).
    """

    f_flat: float = 0.1
    f_sharp: float = 0.2
    nu: float = 0.5
    offset: float = 0.5

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        return (self.offset
                + np.sign(p) * (self.f_flat / self.nu)
                * (1.0 - (1.0 + np.abs(p)) ** (-self.nu)))

    def derivative(self, p):
        p = np.asarray(p, dtype=float)
        return self.f_flat * (1.0 + np.abs(p)) ** (-1.0 - self.nu)

    def antiderivative(self, p):
        """Phi(p) = int_0^p f; the sign part integrates to an even function."""
        p = np.asarray(p, dtype=float)
        q = np.abs(p)
        even = (self.f_flat / self.nu) * (
            q - ((1.0 + q) ** (1.0 - self.nu) - 1.0) / (1.0 - self.nu))
        return self.offset * p + even

    def stored(self, p):
        """V(p) = p f(p) - Phi(p) = int_0^p f'(z) z dz >= 0."""
        p = np.asarray(p, dtype=float)
        return p * self(p) - self.antiderivative(p)

    def range(self):
        half = self.f_flat / self.nu
        return (self.offset - half, self.offset + half)


@dataclass(frozen=True)
class LinearSaturationLaw:
    """Unbounded affine saturation: the linear-regime test law.

    Violates the admissible range clause (the validator reports it); used
    with the override flag for eigenmode-decay studies.
    """

    slope: float = 0.1
    offset: float = 0.5
    nu: float = 0.5

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        return self.offset + self.slope * p

    def derivative(self, p):
        return self.slope * np.ones_like(np.asarray(p, dtype=float))

    def antiderivative(self, p):
        p = np.asarray(p, dtype=float)
        return self.offset * p + 0.5 * self.slope * p * p

    def stored(self, p):
        p = np.asarray(p, dtype=float)
        return 0.5 * self.slope * p * p

    def range(self):
        return (-math.inf, math.inf)

    @property
    def f_flat(self):
        return self.slope

    @property
    def f_sharp(self):
        return self.slope


@dataclass(frozen=True)
class MobilityLaw:
    """Pressure-dependent mobility mu(p) = mu_flat + mod_amp / (1 + p^2)."""

    mu_flat: float = 1.0
    mod_amp: float = 0.0

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        return self.mu_flat + self.mod_amp / (1.0 + p * p)

    def antiderivative(self, p):
        p = np.asarray(p, dtype=float)
        return self.mu_flat * p + self.mod_amp * np.arctan(p)


@dataclass(frozen=True)
class HeatCapacityLaw:
    """Caloric energy with c_V(theta) = c_flat (1 + theta^b) for theta >= 0."""

    c_flat: float = 1.0
    c_sharp: float = 2.0
    b: float = 0.5
    b_hat: float = 0.75

    def heat_capacity(self, theta):
        theta = np.asarray(theta, dtype=float)
        return self.c_flat * (1.0 + np.maximum(theta, 0.0) ** self.b)

    def energy(self, theta):
        """C_V(theta), extended linearly below zero for solver safety."""
        theta = np.asarray(theta, dtype=float)
        pos = np.maximum(theta, 0.0)
        return self.c_flat * (theta + pos ** (1.0 + self.b) / (1.0 + self.b))

    def energy_inverse(self, y):
        y = np.asarray(y, dtype=float)
        hi = np.maximum(y, 0.0) / self.c_flat + 1.0
        lo = np.minimum(y, 0.0) / self.c_flat
        return invert_increasing(self.energy, self.heat_capacity, y, lo, hi)


@dataclass(frozen=True)
class ConductivityLaw:
    """Heat conductivity kappa(theta) = kappa_flat (1 + theta^(1+a))."""

    kappa_flat: float = 1.0
    kappa_sharp: float = 2.0
    a: float = 0.25
    a_hat: float = 1.0

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        return self.kappa_flat * (1.0 + np.maximum(theta, 0.0) ** (1.0 + self.a))

    def antiderivative(self, theta):
        """int_0^theta kappa(z+) dz; linear in theta below zero."""
        theta = np.asarray(theta, dtype=float)
        pos = np.maximum(theta, 0.0)
        return self.kappa_flat * (theta + pos ** (2.0 + self.a) / (2.0 + self.a))


@dataclass(frozen=True)
class RelaxationLaw:
    """Phase relaxation gamma(theta, d) = gamma_flat (1 + theta + d^2)."""

    gamma_flat: float = 1.0
    gamma_sharp: float = 2.0

    def __call__(self, theta, div_u):
        theta = np.asarray(theta, dtype=float)
        div_u = np.asarray(div_u, dtype=float)
        return self.gamma_flat * (1.0 + np.maximum(theta, 0.0) + div_u ** 2)


@dataclass(frozen=True)
class PhysicalConstants:
    rho_star: float = 0.917        # ice/water density ratio
    latent_heat: float = 1.0
    theta_c: float = 273.15        # melting temperature
    beta: float = 0.1              # thermal expansion
    theta_bar: float = 1.0         # temperature floor datum
    rho_w: float = 1.0             # water density normalization

    def __post_init__(self):
        if not 0.0 < self.rho_star < 1.0:
            raise MaterialError("density ratio must lie in (0, 1)")
        if min(self.latent_heat, self.theta_c, self.theta_bar) <= 0:
            raise MaterialError("latent heat and temperatures must be positive")


@dataclass(frozen=True)
class MaterialSet:
    """All nonlinearities and constants of one simulation setup."""

    saturation: SaturationLaw | LinearSaturationLaw | None = None
    mobility: MobilityLaw = field(default_factory=MobilityLaw)
    heat_capacity: HeatCapacityLaw = field(default_factory=HeatCapacityLaw)
    conductivity: ConductivityLaw = field(default_factory=ConductivityLaw)
    relaxation: RelaxationLaw = field(default_factory=RelaxationLaw)
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)

    def __post_init__(self):
        if self.saturation is None:
            object.__setattr__(self, "saturation", SaturationLaw())

    def cutoff(self, R=math.inf) -> "CutoffPack":
        return CutoffPack(self, R)


# ---------------------------------------------------------------------------
# cut-off family


class CutoffPack:
    """Cut versions of the nonlinearities for a truncation parameter R > 1.

    Inside [-R, R] every map agrees with its uncut original; outside, the
    saturation is extended C^1-linearly and mobility/conductivity are
    frozen, keeping all Kirchhoff maps strictly increasing with slope
    bounded below.  R = inf disables every cut.
    """

    def __init__(self, materials: MaterialSet, R=math.inf):
        if R != math.inf and R <= 1.0:
            raise MaterialError("cut-off parameter must exceed 1")
        self.materials = materials
        self.R = float(R)

    # -- scalar clip --------------------------------------------------------

    def clip(self, z):
        return np.clip(z, -self.R, self.R)

    # -- saturation ---------------------------------------------------------

    def f(self, p):
        f = self.materials.saturation
        p = np.asarray(p, dtype=float)
        pc = self.clip(p)
        return f(pc) + f.derivative(pc) * (p - pc)

    def f_derivative(self, p):
        f = self.materials.saturation
        return f.derivative(self.clip(p))

    def phi(self, p):
        f = self.materials.saturation
        p = np.asarray(p, dtype=float)
        pc = self.clip(p)
        tail = p - pc
        return f.antiderivative(pc) + f(pc) * tail + 0.5 * f.derivative(pc) * tail ** 2

    def stored(self, p):
        p = np.asarray(p, dtype=float)
        return p * self.f(p) - self.phi(p)

    # -- mobility and its Kirchhoff map --------------------------------------

    def mu(self, p):
        return self.materials.mobility(self.clip(p))

    def mobility_kirchhoff(self, p):
        mob = self.materials.mobility
        p = np.asarray(p, dtype=float)
        pc = self.clip(p)
        return mob.antiderivative(pc) + mob(pc) * (p - pc)

    def mobility_kirchhoff_inverse(self, v):
        v = np.asarray(v, dtype=float)
        mob = self.materials.mobility
        if mob.mod_amp == 0.0:
            return v / mob.mu_flat
        bound = np.abs(v) / mob.mu_flat + 1.0
        return invert_increasing(self.mobility_kirchhoff, self.mu, v,
                                 -bound, bound)

    # -- conductivity and its Kirchhoff map ----------------------------------

    def kappa(self, theta):
        """kappa(Q_R(theta+)): the conductivity actually used in the flux."""
        theta = np.asarray(theta, dtype=float)
        return self.materials.conductivity(
            np.minimum(np.maximum(theta, 0.0), self.R))

    def heat_kirchhoff(self, theta):
        cond = self.materials.conductivity
        theta = np.asarray(theta, dtype=float)
        if self.R == math.inf:
            return cond.antiderivative(theta)
        inner = np.clip(theta, 0.0, self.R)
        return (cond.antiderivative(inner)
                + cond(np.asarray(self.R)) * np.maximum(theta - self.R, 0.0)
                + cond.kappa_flat * np.minimum(theta, 0.0))

    def heat_kirchhoff_inverse(self, z):
        z = np.asarray(z, dtype=float)
        cond = self.materials.conductivity
        hi = np.maximum(z, 0.0) / cond.kappa_flat + 1.0
        lo = np.minimum(z, 0.0) / cond.kappa_flat
        return invert_increasing(self.heat_kirchhoff, self.kappa, z, lo, hi)

    # -- relaxation -----------------------------------------------------------

    def gamma(self, p, theta, div_u):
        p = np.asarray(p, dtype=float)
        theta = np.asarray(theta, dtype=float)
        shifted = (np.minimum(np.maximum(theta, 0.0), self.R)
                   + np.maximum(p * p - self.R ** 2, 0.0))
        return self.materials.relaxation(shifted, div_u)

    # -- activity -------------------------------------------------------------

    def activity(self, p_values, theta_values, grad_sq_values):
        """Which cut branches a set of field values would trigger."""
        max_p = float(np.max(np.abs(p_values), initial=0.0))
        max_th = float(np.max(theta_values, initial=0.0))
        max_gs = float(np.max(grad_sq_values, initial=0.0))
        return {
            "saturation_extension": max_p > self.R,
            "mobility_freeze": max_p > self.R,
            "gradient_clip": max_gs > self.R,
            "relaxation_shift": max_p > self.R or max_th > self.R,
            "temperature_clip": max_th > self.R,
        }


# ---------------------------------------------------------------------------
# generic Kirchhoff transform


def _cut_integrand(law, R):
    if R is None or R == math.inf:
        return lambda z: law(z)
    return lambda z: law(np.clip(z, -R, R))


def kirchhoff(p, law, cutoff=None):
    """M(p) = int_0^p law(z) dz, analytic when the law exposes an
    antiderivative, adaptive quadrature otherwise."""
    R = math.inf if cutoff is None else float(cutoff)
    p_arr = np.asarray(p, dtype=float)
    if hasattr(law, "antiderivative"):
        anti = law.antiderivative
        pc = np.clip(p_arr, -R, R)
        out = anti(pc) + np.asarray(law(pc)) * (p_arr - pc)
        return out if p_arr.ndim else float(out)
    g = _cut_integrand(law, R)
    flat = np.atleast_1d(p_arr).ravel()
    vals = np.array([quad(g, 0.0, x, limit=200)[0] for x in flat])
    return vals.reshape(np.atleast_1d(p_arr).shape) if p_arr.ndim else float(vals[0])


def kirchhoff_inverse(v, law, cutoff=None, slope_floor=None):
    """Inverse of the Kirchhoff map; requires slope bounded below."""
    R = math.inf if cutoff is None else float(cutoff)
    v_arr = np.atleast_1d(np.asarray(v, dtype=float))
    floor = slope_floor
    if floor is None:
        probe = np.linspace(-10, 10, 41)
        floor = float(np.min(law(np.clip(probe, -R, R))))
    if floor <= 0:
        raise MaterialError("law slope must be bounded below by a positive "
                            "constant for inversion")
    bound = np.abs(v_arr) / floor + 1.0
    fn = lambda x: np.asarray(kirchhoff(x, law, cutoff))
    dfn = _cut_integrand(law, R)
    out = invert_increasing(fn, dfn, v_arr, -bound, bound)
    return out if np.asarray(v).ndim else float(out[0])


# ---------------------------------------------------------------------------
# hypothesis validation


@dataclass
class ClauseResult:
    name: str
    passed: bool
    detail: str = ""
    witness: str = ""

    def line(self) -> str:
        status = "pass" if self.passed else "FAIL"
        extra = f" [{self.witness}]" if (not self.passed and self.witness) else ""
        return f"  {self.name:<14} {status}  {self.detail}{extra}"


@dataclass
class HypothesisReport:
    clauses: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.clauses)

    def lines(self):
        head = ("all admissibility clauses hold" if self.passed
                else "admissibility violated")
        return [head] + [c.line() for c in self.clauses]

    def to_dict(self):
        return {
            "passed": bool(self.passed),
            "clauses": [{"name": c.name, "passed": bool(c.passed),
                         "detail": c.detail, "witness": c.witness}
                        for c in self.clauses],
        }


def _sample_pressures():
    return np.concatenate([np.linspace(-50, 50, 401), [-1e4, 1e4]])


def _sample_temperatures():
    return np.concatenate([np.linspace(0, 50, 301), [1e4]])


def validate_hypotheses(materials: MaterialSet, density, *, dim=1,
                        tensors: Optional[ElasticTensors] = None,
                        surface: Optional[YieldSurface] = None,
                        boundary=None, initial=None, body_force=None,
                        seed=0) -> HypothesisReport:
    """Check every admissibility clause numerically.

    boundary: optional dict with arrays ``alpha``, ``omega``, facet measures
    ``ds``, and sampled traces ``p_star``, ``theta_star``.  initial: optional
    dict with nodal fields ``theta0``, ``chi0``.  body_force: optional dict
    with key ``conservative`` (bool).
    """
    rng = np.random.default_rng(seed)
    out = []
    c = materials.constants
    f = materials.saturation

    # (i) tensor positivity
    if tensors is None:
        out.append(ClauseResult("(i)", True, "tensors not provided, skipped"))
    else:
        ncomp = {1: 1, 2: 3, 3: 6}[dim]
        ok, witness = True, ""
        for name, pair in (("hardening", tensors.hardening),
                           ("elasticity", tensors.elasticity),
                           ("viscosity", tensors.viscosity)):
            lb = pair.lower_bound(ncomp)
            if lb <= 0:
                ok, witness = False, f"{name} lower bound {lb} <= 0"
                break
            xi = rng.normal(size=(64, ncomp))
            q = pair.quad(xi) - lb * np.sum(xi * xi, axis=-1)
            if np.any(q < -1e-10):
                ok, witness = False, f"{name} quadratic form below bound"
                break
        out.append(ClauseResult("(i)", ok, "tensors positive definite",
                                witness))

    # (ii) body force derives from a potential
    if body_force is None:
        out.append(ClauseResult("(ii)", True, "body force not provided, skipped"))
    else:
        ok = bool(body_force.get("conservative", False))
        out.append(ClauseResult("(ii)", ok, "body force is a gradient field",
                                "" if ok else "force field admits no potential"))

    # (iii)-(iv) boundary data
    if boundary is None:
        out.append(ClauseResult("(iii)", True, "boundary not provided, skipped"))
        out.append(ClauseResult("(iv)", True, "boundary not provided, skipped"))
    else:
        alpha, omega, ds = (np.asarray(boundary[k], dtype=float)
                            for k in ("alpha", "omega", "ds"))
        ok = (np.all(alpha >= 0) and np.all(omega >= 0)
              and np.sum(alpha * ds) > 0 and np.sum(omega * ds) > 0)
        out.append(ClauseResult(
            "(iii)", bool(ok), "alpha, omega admissible",
            "" if ok else "boundary coefficients violate sign/positivity"))
        p_star = np.asarray(boundary["p_star"], dtype=float)
        th_star = np.asarray(boundary["theta_star"], dtype=float)
        ok4 = np.all(np.isfinite(p_star)) and np.all(th_star >= c.theta_bar)
        wit = ""
        if not ok4:
            wit = (f"min outer temperature {float(np.min(th_star))!r} "
                   f"below floor datum {c.theta_bar!r}")
        out.append(ClauseResult("(iv)", bool(ok4), "boundary traces admissible",
                                wit))

    # (v) initial data
    if initial is None:
        out.append(ClauseResult("(v)", True, "initial data not provided, skipped"))
    else:
        theta0 = np.asarray(initial["theta0"], dtype=float)
        chi0 = np.asarray(initial["chi0"], dtype=float)
        ok = np.all(theta0 >= c.theta_bar - 1e-12) and np.all(
            (chi0 >= 0) & (chi0 <= 1))
        wit = ""
        if not ok:
            wit = (f"min theta0 {float(np.min(theta0))!r}, chi0 range "
                   f"[{float(np.min(chi0))!r}, {float(np.max(chi0))!r}]")
        out.append(ClauseResult("(v)", bool(ok), "initial fields admissible",
                                wit))

    # (vi) saturation function
    ps = _sample_pressures()
    lo, hi = f.range()
    c_minus, c_plus = density.c_minus, density.c_plus
    nu_ok = 0.0 < getattr(f, "nu", 0.5) <= 0.5
    range_ok = (lo > c_minus) and (hi < 1.0 - c_plus)
    fp = f.derivative(ps)
    envelope_ok = bool(np.all(fp <= f.f_sharp + 1e-12)
                       and np.all(fp >= f.f_flat * (1 + np.abs(ps))
                                  ** (-1 - getattr(f, "nu", 0.5)) - 1e-12)
                       and f.f_sharp > f.f_flat > 0)
    ok = nu_ok and range_ok and envelope_ok
    wit = ""
    if not nu_ok:
        wit = f"exponent nu = {getattr(f, 'nu', None)!r} outside (0, 1/2]"
    elif not range_ok:
        wit = (f"range ({lo!r}, {hi!r}) not inside "
               f"({c_minus!r}, {1 - c_plus!r})")
    elif not envelope_ok:
        wit = "derivative envelope violated"
    out.append(ClauseResult("(vi)", bool(ok), "saturation admissible", wit))

    # (vii) mobility
    mu = materials.mobility
    mu_vals = mu(ps)
    ok = mu.mu_flat > 0 and bool(np.all(mu_vals >= mu.mu_flat - 1e-12))
    out.append(ClauseResult("(vii)", ok, "mobility bounded below",
                            "" if ok else f"min mu {float(np.min(mu_vals))!r}"))

    # (viii) heat capacity
    hc = materials.heat_capacity
    ths = _sample_temperatures()
    expo_ok = 0.5 <= hc.b < hc.b_hat < 1.0
    cv = hc.heat_capacity(ths)
    env_ok = bool(np.all(cv >= hc.c_flat * (1 + ths ** hc.b) - 1e-12)
                  and np.all(cv <= hc.c_sharp * (1 + ths ** hc.b_hat) + 1e-12)
                  and hc.c_sharp > hc.c_flat > 0)
    ok = expo_ok and env_ok
    wit = "" if ok else (
        f"exponents b = {hc.b!r}, b_hat = {hc.b_hat!r} violate "
        "1/2 <= b < b_hat < 1" if not expo_ok else "capacity envelope violated")
    out.append(ClauseResult("(viii)", bool(ok), "heat capacity admissible", wit))

    # (ix) conductivity
    kp = materials.conductivity
    chain_hi = (8 + 3 * kp.a + 2 * hc.b) * (1 + hc.b) / (7 - 2 * hc.b)
    expo_ok = (0 < kp.a < 1 - hc.b) and (kp.a < kp.a_hat < chain_hi)
    kv = kp(ths)
    env_ok = bool(np.all(kv >= kp.kappa_flat * (1 + ths ** (1 + kp.a)) - 1e-9)
                  and np.all(kv <= kp.kappa_sharp * (1 + ths ** (1 + kp.a_hat))
                             + 1e-9)
                  and kp.kappa_sharp > kp.kappa_flat > 0)
    ok = expo_ok and env_ok
    wit = "" if ok else (
        f"exponents a = {kp.a!r}, a_hat = {kp.a_hat!r} violate the chain "
        f"0 < a < {1 - hc.b!r}, a < a_hat < {chain_hi!r}" if not expo_ok
        else "conductivity envelope violated")
    out.append(ClauseResult("(ix)", bool(ok), "conductivity admissible", wit))

    # (x) relaxation
    rel = materials.relaxation
    ds_samples = rng.uniform(-3, 3, 64)
    th_samples = rng.uniform(0, 30, 64)
    gv = rel(th_samples, ds_samples)
    ref = 1 + th_samples + ds_samples ** 2
    env_ok = bool(np.all(gv >= rel.gamma_flat * ref - 1e-12)
                  and np.all(gv <= rel.gamma_sharp * ref + 1e-12)
                  and rel.gamma_sharp > rel.gamma_flat > 0)
    out.append(ClauseResult("(x)", env_ok, "relaxation admissible",
                            "" if env_ok else "relaxation envelope violated"))

    # (xi) plasticity operator
    if surface is None:
        out.append(ClauseResult("(xi)", True, "yield surface not provided, "
                                "skipped"))
    else:
        ok = surface.radius > 0
        wit = "" if ok else "yield set has empty interior"
        if ok and tensors is not None and surface.kind == "ball":
            ncomp = {1: 1, 2: 3, 3: 6}[dim]
            if not tensors.elasticity.is_identity_multiple(ncomp):
                ok, wit = False, ("ball yield set needs elasticity "
                                  "proportional to the identity")
        out.append(ClauseResult("(xi)", bool(ok), "yield set admissible", wit))

    # density envelope (Hyp. 2.2 analogue)
    env = density.envelope_rows
    table_ok = bool(np.all(density.table <= env[:, None] + 1e-15))
    star_ok = np.isfinite(density.c_star)
    ok = table_ok and star_ok
    out.append(ClauseResult("(env)", ok, "density dominated with finite moment",
                            "" if ok else "density envelope violated"))

    # saturation-mass bounds
    ok = 0.0 < c_plus < 0.5 and 0.0 < c_minus < 0.5
    wit = "" if ok else (
        f"masses C+ = {c_plus!r}, C- = {c_minus!r} outside (0, 1/2)")
    out.append(ClauseResult("(mass)", bool(ok), "density masses in (0, 1/2)",
                            wit))

    return HypothesisReport(clauses=out)
