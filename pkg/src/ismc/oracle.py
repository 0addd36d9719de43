"""Deterministic ground truth for tests: trapezoid quadrature on boxes.

Nothing here is used by the estimators. Quadrature is limited to one and
two dimensions and every value comes with the change observed when the
grid resolution is halved.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .core import importance_weights, mc_baseline, snis_estimate
from .errors import DegenerateBatchError, UnsupportedError, ValidationError

log = logging.getLogger(__name__)

DEFAULT_POINTS = {1: 4096, 2: 512}


@dataclass(frozen=True)
class QuadratureSpec:
    bounds: list
    points_per_dim: int = None
    rule: str = "trapezoid"

    def __post_init__(self):
        bounds = [(float(a), float(b)) for a, b in self.bounds]
        if not 1 <= len(bounds) <= 2:
            raise UnsupportedError("quadrature supports dim 1 or 2 only")
        if any(not a < b for a, b in bounds):
            raise ValidationError("each bound must satisfy low < high")
        if self.rule != "trapezoid":
            raise ValidationError(f"unknown quadrature rule {self.rule!r}")
        object.__setattr__(self, "bounds", bounds)
        if self.points_per_dim is None:
            object.__setattr__(self, "points_per_dim", DEFAULT_POINTS[len(bounds)])

    @property
    def dim(self):
        return len(self.bounds)

    def scaled(self, factor):
        """Same grid spacing on a box ``factor`` times wider about its center."""
        bounds = []
        for a, b in self.bounds:
            c, h = 0.5 * (a + b), 0.5 * (b - a) * factor
            bounds.append((c - h, c + h))
        return QuadratureSpec(bounds, int((self.points_per_dim - 1) * factor) + 1)


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    half_resolution_delta: float = field(default=0.0)

    def __float__(self):
        return self.value


def _trapezoid(g, bounds, n):
    axes = [np.linspace(a, b, n) for a, b in bounds]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([m.ravel() for m in mesh])
    vals = np.asarray(g(pts), dtype=float).reshape((n,) * len(bounds))
    for ax in reversed(axes):
        vals = np.trapezoid(vals, ax, axis=-1)
    return float(vals)


def quadrature_integral(g, spec):
    """Trapezoid value of ``int g`` over ``spec.bounds``.

    ``g`` maps an ``(n, dim)`` array to ``n`` values.
    """
    if spec.dim > 2:
        raise UnsupportedError("quadrature supports dim <= 2")
    full = _trapezoid(g, spec.bounds, spec.points_per_dim)
    half = _trapezoid(g, spec.bounds, spec.points_per_dim // 2)
    return QuadratureResult(full, abs(full - half))


def default_spec(*objects, points_per_dim=None):
    """Union of the integration boxes of targets (``reference['box']``) and proposals."""
    boxes = []
    for obj in objects:
        if hasattr(obj, "box"):
            boxes.append(obj.box())
        elif "box" in getattr(obj, "reference", {}):
            boxes.append(obj.reference["box"])
        else:
            raise ValidationError(f"no integration box known for {obj!r}")
    lo = np.min([[b[0] for b in box] for box in boxes], axis=0)
    hi = np.max([[b[1] for b in box] for box in boxes], axis=0)
    return QuadratureSpec(list(zip(lo, hi)), points_per_dim)


def normalizing_constant(t, spec=None):
    """``int pi(x) dx`` by quadrature."""
    spec = spec or default_spec(t)
    return quadrature_integral(lambda p: np.exp(t.log_density(p)), spec)


def expectation(t, f, spec=None):
    """``I(f) = int f pi / int pi``, both integrals by quadrature."""
    spec = spec or default_spec(t)
    z = normalizing_constant(t, spec).value
    num = quadrature_integral(lambda p: f(p) * np.exp(t.log_density(p)), spec)
    return QuadratureResult(num.value / z, num.half_resolution_delta / z)


def _normalized_log_target(t):
    if t.known_log_z is None:
        raise ValidationError("sigma_q_squared needs a target with known_log_z")
    return lambda p: t.log_density(p) - t.known_log_z


def sigma_q_squared(t, f, q, spec=None, rtol=1e-8):
    """``int (f pi_tilde - I q)^2 / q``, the single-sample UIS variance.

    The box is widened twice (x2, x4, same spacing). If the last widening
    still moves the value by more than ``rtol`` the integral is reported as
    divergent by returning ``inf``.
    """
    spec = spec or default_spec(t, q)
    log_pt = _normalized_log_target(t)
    i_f = quadrature_integral(lambda p: f(p) * np.exp(log_pt(p)), spec).value

    def integrand(p):
        lq = q.log_pdf(p)
        with np.errstate(over="ignore", invalid="ignore"):
            r = f(p) * np.exp(log_pt(p) - 0.5 * lq) - i_f * np.exp(0.5 * lq)
            return r * r

    values = []
    for factor in (1, 2, 4):
        s = spec.scaled(factor) if factor > 1 else spec
        with np.errstate(over="ignore", invalid="ignore"):
            values.append(_trapezoid(integrand, s.bounds, s.points_per_dim))
    v1, v2, v3 = values
    if not np.isfinite(v3) or abs(v3 - v2) > rtol * max(abs(v3), 1e-300) and v3 - v2 > 1e-14:
        log.info("sigma_q^2 diverges: %.3g -> %.3g -> %.3g under box widening", v1, v2, v3)
        return np.inf
    return v3


def empirical_ess_star(t, q, f, n, trials, rng, spec=None):
    """``N Var[plain MC mean] / MSE[SNIS]`` measured over ``trials`` repetitions.

    The plain-MC variance uses exact target draws; the SNIS error is taken
    against the quadrature value of ``I(f)``. A constant integrand has zero
    MC variance and gives ``0``.
    """
    if trials < 1000:
        raise ValidationError("empirical_ess_star needs at least 1000 trials")
    i_f = expectation(t, f, spec or default_spec(t, q)).value
    mc = np.empty(trials)
    err = np.empty(trials)
    for r in range(trials):
        mc[r] = mc_baseline(t, f, n, rng)
        b = importance_weights(t, q, q.draw(rng, n))
        err[r] = snis_estimate(b, f) - i_f
    var = mc.var(ddof=1)
    if var == 0:
        log.warning("ESS*: plain MC variance is zero (constant integrand); returning 0")
        return 0.0
    mse = np.mean(err * err)
    if mse == 0:
        raise DegenerateBatchError("ESS*: SNIS mean squared error is exactly zero")
    return float(n * var / mse)
