"""Elastoplastic stop-type constitutive operator with kinematic hardening.

Symmetric tensors are stored as Mandel vectors (off-diagonal components
scaled by sqrt(2)) so the plain dot product reproduces the Frobenius
product: 1 component in 1D, 3 in 2D, 6 in 3D.  The plastic stress is
confined to a convex yield set by an implicit catch-up projection, the
exact time-discrete solution of the underlying variational inequality for
piecewise-monotone loading.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SPATIAL_DIM",
    "PlasticityError",
    "TraceFlowError",
    "YieldSurface",
    "ElasticTensors",
    "PlasticPoint",
    "StopIncrement",
    "mandel_from_matrix",
    "matrix_from_mandel",
    "trace",
    "deviator",
    "identity_tensor",
    "project_onto",
    "contains",
    "support_function",
    "stop_init",
    "make_point",
    "stop_step",
    "stress_response",
    "stored_energy",
    "energy_audit",
]

# number of spatial dimensions per Mandel component count
SPATIAL_DIM = {1: 1, 3: 2, 6: 3}
_SQRT2 = np.sqrt(2.0)


class PlasticityError(ValueError):
    pass


class TraceFlowError(PlasticityError):
    """Plastic flow has a trace component the yield set cannot dissipate."""


def _dim(ncomp: int) -> int:
    try:
        return SPATIAL_DIM[ncomp]
    except KeyError:
        raise PlasticityError(f"unsupported component count {ncomp}") from None


def mandel_from_matrix(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    d = m.shape[-1]
    if d == 1:
        return m[..., 0, :]
    if d == 2:
        return np.stack([m[..., 0, 0], m[..., 1, 1], _SQRT2 * m[..., 0, 1]],
                        axis=-1)
    return np.stack([m[..., 0, 0], m[..., 1, 1], m[..., 2, 2],
                     _SQRT2 * m[..., 1, 2], _SQRT2 * m[..., 0, 2],
                     _SQRT2 * m[..., 0, 1]], axis=-1)


def matrix_from_mandel(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    d = _dim(t.shape[-1])
    out = np.zeros(t.shape[:-1] + (d, d))
    if d == 1:
        out[..., 0, 0] = t[..., 0]
    elif d == 2:
        out[..., 0, 0], out[..., 1, 1] = t[..., 0], t[..., 1]
        out[..., 0, 1] = out[..., 1, 0] = t[..., 2] / _SQRT2
    else:
        for i in range(3):
            out[..., i, i] = t[..., i]
        out[..., 1, 2] = out[..., 2, 1] = t[..., 3] / _SQRT2
        out[..., 0, 2] = out[..., 2, 0] = t[..., 4] / _SQRT2
        out[..., 0, 1] = out[..., 1, 0] = t[..., 5] / _SQRT2
    return out


def trace(t):
    t = np.asarray(t, dtype=float)
    return np.sum(t[..., :_dim(t.shape[-1])], axis=-1)


def identity_tensor(ncomp: int) -> np.ndarray:
    out = np.zeros(ncomp)
    out[:_dim(ncomp)] = 1.0
    return out


def deviator(t):
    t = np.asarray(t, dtype=float)
    d = _dim(t.shape[-1])
    out = t.copy()
    out[..., :d] -= (trace(t) / d)[..., None]
    return out


def norm(t):
    return np.linalg.norm(np.asarray(t, dtype=float), axis=-1)


# ---------------------------------------------------------------------------
# yield surface


@dataclass(frozen=True)
class YieldSurface:
    """Admissible plastic stress domain: Frobenius ball or von Mises cylinder.

    The cylinder constrains the deviator norm; trace_bound optionally closes
    it in the trace direction (otherwise trace flow is infeasible and gets
    flagged during stepping).
    """

    kind: str = "ball"
    radius: float = 1.0
    trace_bound: float | None = None

    def __post_init__(self):
        if self.kind not in ("ball", "cylinder"):
            raise PlasticityError(f"unknown yield surface kind {self.kind!r}")
        if self.radius <= 0:
            raise PlasticityError("yield radius must be positive")
        if self.trace_bound is not None and self.trace_bound <= 0:
            raise PlasticityError("trace bound must be positive")


def project_onto(surface: YieldSurface, tau):
    """Closest point of the yield set in the Frobenius metric."""
    tau = np.asarray(tau, dtype=float)
    if surface.kind == "ball":
        n = norm(tau)
        scale = np.where(n > surface.radius,
                         surface.radius / np.where(n == 0.0, 1.0, n), 1.0)
        return tau * scale[..., None]
    d = _dim(tau.shape[-1])
    dev = deviator(tau)
    n = norm(dev)
    scale = np.where(n > surface.radius,
                     surface.radius / np.where(n == 0.0, 1.0, n), 1.0)
    tr = trace(tau)
    if surface.trace_bound is not None:
        tr = np.clip(tr, -surface.trace_bound, surface.trace_bound)
    eye = identity_tensor(tau.shape[-1])
    return dev * scale[..., None] + (tr / d)[..., None] * eye


def contains(surface: YieldSurface, t, tol=1e-12):
    t = np.asarray(t, dtype=float)
    if surface.kind == "ball":
        return norm(t) <= surface.radius + tol
    ok = norm(deviator(t)) <= surface.radius + tol
    if surface.trace_bound is not None:
        ok = ok & (np.abs(trace(t)) <= surface.trace_bound + tol)
    return ok


def support_function(surface: YieldSurface, xi, trace_tol=1e-9):
    """h_Z(xi) = sup_{z in Z} z : xi, the dissipation gauge.

    For an open cylinder a trace component of xi beyond trace_tol (relative
    to |xi|) makes the supremum infinite; that inconsistency is raised.
    """
    xi = np.asarray(xi, dtype=float)
    if surface.kind == "ball":
        return surface.radius * norm(xi)
    d = _dim(xi.shape[-1])
    dev_part = surface.radius * norm(deviator(xi))
    tr = trace(xi)
    if surface.trace_bound is not None:
        return dev_part + surface.trace_bound * np.abs(tr) / d
    bad = np.abs(tr) > trace_tol * (1.0 + norm(xi))
    if np.any(bad):
        raise TraceFlowError(
            "plastic flow has a trace component but the cylinder is open; "
            f"max |trace| = {float(np.max(np.abs(tr)))!r}")
    return dev_part


# ---------------------------------------------------------------------------
# elastic moduli


@dataclass(frozen=True)
class IsoPair:
    """Isotropic fourth-order tensor: bulk and shear response."""

    bulk: float
    shear: float

    def apply(self, t):
        t = np.asarray(t, dtype=float)
        d = _dim(t.shape[-1])
        eye = identity_tensor(t.shape[-1])
        return (2.0 * self.shear * deviator(t)
                + (self.bulk * trace(t))[..., None] * eye)

    def apply_inv(self, t):
        t = np.asarray(t, dtype=float)
        d = _dim(t.shape[-1])
        if self.bulk <= 0 or (d > 1 and self.shear <= 0):
            raise PlasticityError("tensor is singular, cannot invert")
        eye = identity_tensor(t.shape[-1])
        dev_part = (0.0 * t if d == 1 else deviator(t) / (2.0 * self.shear))
        return dev_part + (trace(t) / (self.bulk * d * d))[..., None] * eye

    def quad(self, t):
        """Quadratic form t : A t (nonnegative for admissible moduli)."""
        t = np.asarray(t, dtype=float)
        return (2.0 * self.shear * np.sum(deviator(t) ** 2, axis=-1)
                + self.bulk * trace(t) ** 2)

    def quad_inv(self, t):
        t = np.asarray(t, dtype=float)
        d = _dim(t.shape[-1])
        dev_q = (0.0 if d == 1
                 else np.sum(deviator(t) ** 2, axis=-1) / (2.0 * self.shear))
        return dev_q + trace(t) ** 2 / (self.bulk * d * d)

    def lower_bound(self, ncomp: int) -> float:
        """Largest c with A xi : xi >= c |xi|^2 on symmetric tensors."""
        d = _dim(ncomp)
        return self.bulk if d == 1 else min(2.0 * self.shear, self.bulk * d)

    def upper_bound(self, ncomp: int) -> float:
        d = _dim(ncomp)
        return self.bulk if d == 1 else max(2.0 * self.shear, self.bulk * d)

    def is_identity_multiple(self, ncomp: int) -> bool:
        d = _dim(ncomp)
        return d == 1 or np.isclose(2.0 * self.shear, d * self.bulk)

    @classmethod
    def scalar(cls, value: float) -> "IsoPair":
        """Multiple of the identity in 1D (bulk carries the value)."""
        return cls(bulk=value, shear=0.0)

    @classmethod
    def identity_multiple(cls, value: float, dim: int) -> "IsoPair":
        """c times the identity on symmetric tensors in the given dimension."""
        return cls(bulk=value / dim, shear=value / 2.0)


@dataclass(frozen=True)
class ElasticTensors:
    """Hardening, elasticity, and viscosity moduli of the solid skeleton."""

    hardening: IsoPair
    elasticity: IsoPair
    viscosity: IsoPair

    @classmethod
    def scalars(cls, ah: float, ae: float, b: float) -> "ElasticTensors":
        return cls(IsoPair.scalar(ah), IsoPair.scalar(ae), IsoPair.scalar(b))


# ---------------------------------------------------------------------------
# plastic state and stepping


@dataclass
class PlasticPoint:
    """Constitutive state at one quadrature point (or a batch of them)."""

    eps: np.ndarray
    sigma_p: np.ndarray
    potential: np.ndarray
    dissipation: np.ndarray


@dataclass(frozen=True)
class StopIncrement:
    d_sigma_p: np.ndarray
    d_plastic_flow: np.ndarray
    d_dissipation: np.ndarray


def stop_init(eps0, surface: YieldSurface):
    """Initial plastic stress: projection of the initial strain onto Z."""
    return project_onto(surface, eps0)


def stored_energy(eps, sigma_p, tensors: ElasticTensors):
    """Potential 0.5 Ah eps:eps + 0.5 Ae^-1 sigma_p:sigma_p."""
    return 0.5 * (tensors.hardening.quad(eps)
                  + tensors.elasticity.quad_inv(sigma_p))


def check_projection_metric(tensors: ElasticTensors, surface: YieldSurface,
                            ncomp: int):
    """The Frobenius catch-up is the exact VI solution only when Ae acts as
    a scalar on the constraint subspace: any isotropic Ae for the cylinder
    (deviatoric constraint), an identity multiple for the ball."""
    if surface.kind == "ball" and not tensors.elasticity.is_identity_multiple(
            ncomp):
        raise PlasticityError(
            "ball yield surface requires an elasticity tensor proportional "
            "to the identity (2*shear == dim*bulk)")


def make_point(eps0, tensors: ElasticTensors, surface: YieldSurface):
    eps0 = np.asarray(eps0, dtype=float)
    check_projection_metric(tensors, surface, eps0.shape[-1])
    sigma_p = stop_init(eps0, surface)
    return PlasticPoint(
        eps=eps0.copy(),
        sigma_p=sigma_p,
        potential=stored_energy(eps0, sigma_p, tensors),
        dissipation=np.zeros(eps0.shape[:-1]),
    )


def stop_step(point: PlasticPoint, d_eps, tensors: ElasticTensors,
              surface: YieldSurface):
    """Catch-up update: project the elastic predictor back onto Z.

    The projection is Frobenius-metric, which matches the natural
    Ae^-1-weighted metric whenever Ae acts as a scalar on the active
    constraint subspace (the supported isotropic configurations).
    """
    d_eps = np.asarray(d_eps, dtype=float)
    trial = point.sigma_p + tensors.elasticity.apply(d_eps)
    sigma_new = project_onto(surface, trial)
    d_sigma = sigma_new - point.sigma_p
    d_flow = d_eps - tensors.elasticity.apply_inv(d_sigma)
    d_diss = support_function(surface, d_flow)
    eps_new = point.eps + d_eps
    new_point = PlasticPoint(
        eps=eps_new,
        sigma_p=sigma_new,
        potential=stored_energy(eps_new, sigma_new, tensors),
        dissipation=point.dissipation + d_diss,
    )
    inc = StopIncrement(d_sigma_p=d_sigma, d_plastic_flow=d_flow,
                        d_dissipation=d_diss)
    return new_point, inc


def stress_response(eps, point: PlasticPoint, tensors: ElasticTensors):
    """Total constitutive stress: hardening part plus plastic stress."""
    return tensors.hardening.apply(eps) + point.sigma_p


def energy_audit(before: PlasticPoint, after: PlasticPoint, d_eps,
                 tensors: ElasticTensors, tol=1e-12):
    """Closure of the discrete energy identity over the last step.

    residual = P:d_eps - d(potential) - d(dissipation); the implicit scheme
    over-dissipates, so the residual is nonnegative (up to rounding) and of
    quadratic order in the strain increment.  A negative residual beyond
    tolerance indicates a scheme violation and raises.
    """
    d_eps = np.asarray(d_eps, dtype=float)
    p_new = stress_response(after.eps, after, tensors)
    work = np.sum(p_new * d_eps, axis=-1)
    residual = (work - (after.potential - before.potential)
                - (after.dissipation - before.dissipation))
    scale = 1.0 + np.abs(work)
    if np.any(residual < -tol * scale):
        raise PlasticityError(
            f"energy residual {float(np.min(residual))!r} is negative beyond "
            "tolerance: dissipation exceeded the available work")
    return residual
