"""Target densities, integrands and the catalog of desk-scale test targets.

Every density is handled in log-space. A target is *unnormalized*: it
evaluates ``log pi(x)`` where ``pi = Z * pi_tilde``. Catalog targets also
carry ``known_log_z``, an exact sampler and their true moments so that tests
can compare estimators against ground truth.

Catalog
-------
``std-gaussian``
    ``log pi(x) = -|x|^2 / 2``; ``Z = (2 pi)^(dim/2)``.
``gaussian``
    params ``mean`` (vector) and ``cov`` (matrix, diagonal or scalar);
    ``log pi`` is the quadratic form only, so ``Z = sqrt(det(2 pi cov))``.
``gaussian-mixture``
    params ``means``, ``weights`` and either ``vars`` (isotropic variances)
    or ``covs``. The density is the normalized mixture, ``Z = 1``.
``banana``
    2-D only; params ``b`` (curvature, default 0.1) and ``sigma`` (default 3).
    ``x1 ~ N(0, sigma^2)`` and ``x2 = y - b (x1^2 - sigma^2)`` with
    ``y ~ N(0, 1)``. The warp has unit Jacobian, so ``Z = 2 pi sigma`` like
    the underlying Gaussian, ``E[x] = 0`` and
    ``Var[x2] = 1 + 2 b^2 sigma^4``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import logsumexp

from ._linalg import (
    LOG_2PI,
    as_matrix,
    as_points,
    check_log_values,
    cholesky_spd,
    gaussian_logpdf,
)
from .errors import ConfigurationError, NumericalError, UnsupportedError, ValidationError

SIGN_HINTS = ("nonnegative", "nonpositive", "mixed", "unknown")
CATALOG = ("std-gaussian", "gaussian", "gaussian-mixture", "banana")


@dataclass(frozen=True, eq=False)
class TargetDensity:
    """Unnormalized target ``pi`` on R^dim.

    ``log_fn`` maps an ``(n, dim)`` array to ``n`` log-densities. Zero density
    is ``-inf``; NaN is an error. ``sampler(rng, n)``, when present, draws
    exactly from the normalized target. ``reference`` holds true moments
    (``mean``, ``cov``) and an integration ``box`` for catalog entries.
    """

    dim: int
    log_fn: Callable[[np.ndarray], np.ndarray]
    known_log_z: Optional[float] = None
    name: str = "custom"
    sampler: Optional[Callable] = None
    reference: dict = field(default_factory=dict)

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ConfigurationError(f"dim must be positive, got {self.dim}")

    def log_density(self, x):
        pts, single = as_points(x, self.dim)
        out = np.asarray(self.log_fn(pts), dtype=float).reshape(-1)
        check_log_values(out, f"target {self.name!r}")
        return out[0] if single else out

    __call__ = log_density

    def sample(self, rng, n):
        if self.sampler is None:
            raise UnsupportedError(f"target {self.name!r} has no exact sampler")
        return np.asarray(self.sampler(rng, n), dtype=float).reshape(n, self.dim)


@dataclass(frozen=True)
class Integrand:
    """Test function ``f`` whose expectation under the target is sought."""

    dim: int
    fn: Callable[[np.ndarray], np.ndarray]
    sign_hint: str = "unknown"
    name: str = "f"

    def __post_init__(self):
        if self.sign_hint not in SIGN_HINTS:
            raise ConfigurationError(f"unknown sign_hint {self.sign_hint!r}")

    def __call__(self, x):
        pts, single = as_points(x, self.dim)
        out = np.broadcast_to(np.asarray(self.fn(pts), dtype=float), (pts.shape[0],))
        if np.isnan(out).any():
            raise NumericalError(f"integrand {self.name!r} returned NaN")
        return out[0] if single else np.array(out)

    def check_sign_hint(self, rng, n=10_000, scale=10.0):
        """Evaluate at ``n`` random points and raise if the sign hint is violated."""
        pts = rng.normal(scale=scale, size=(n, self.dim))
        values = self(pts)
        if self.sign_hint == "nonnegative" and (values < 0).any():
            raise ValidationError(f"integrand {self.name!r} is negative somewhere")
        if self.sign_hint == "nonpositive" and (values > 0).any():
            raise ValidationError(f"integrand {self.name!r} is positive somewhere")


def _map_dim(m):
    return getattr(m, "dim", None)


def _eval_map(m, pts):
    return np.asarray(m(pts), dtype=float).reshape(-1)


def posterior_target(log_likelihood, log_prior, dim):
    """Compose ``log pi(x) = log l(y | x) + log p0(x)``.

    Both maps take an ``(n, dim)`` array; :class:`Integrand` and
    :class:`TargetDensity` instances are accepted and their dims checked.
    """
    for part, m in (("log_likelihood", log_likelihood), ("log_prior", log_prior)):
        d = _map_dim(m)
        if d is not None and d != dim:
            raise ConfigurationError(f"{part} has dim {d}, expected {dim}")

    def log_fn(pts):
        return _eval_map(log_likelihood, pts) + _eval_map(log_prior, pts)

    return TargetDensity(dim=dim, log_fn=log_fn, name="posterior")


# ---------------------------------------------------------------------------
# catalog


def _std_gaussian(dim, params):
    if params:
        raise ConfigurationError(f"std-gaussian takes no params, got {sorted(params)}")

    def log_fn(pts):
        return -0.5 * np.sum(pts * pts, axis=1)

    def sampler(rng, n):
        return rng.standard_normal((n, dim))

    ref = {
        "mean": np.zeros(dim),
        "cov": np.eye(dim),
        "box": [(-12.0, 12.0)] * dim,
    }
    return TargetDensity(dim, log_fn, 0.5 * dim * LOG_2PI, "std-gaussian", sampler, ref)


def _gaussian(dim, params):
    _check_keys("gaussian", params, {"mean", "cov"})
    mean = np.asarray(params.get("mean", np.zeros(dim)), dtype=float).reshape(-1)
    if mean.shape != (dim,):
        raise ConfigurationError(f"gaussian mean must have length {dim}")
    cov = as_matrix(params.get("cov", 1.0), dim)
    chol = cholesky_spd(cov)
    log_z = 0.5 * dim * LOG_2PI + np.log(np.diag(chol)).sum()

    def log_fn(pts):
        return gaussian_logpdf(pts, mean, chol) + log_z

    def sampler(rng, n):
        return mean + rng.standard_normal((n, dim)) @ chol.T

    sd = np.sqrt(np.diag(cov))
    ref = {"mean": mean, "cov": cov, "box": list(zip(mean - 12 * sd, mean + 12 * sd))}
    return TargetDensity(dim, log_fn, float(log_z), "gaussian", sampler, ref)


def _gaussian_mixture(dim, params):
    _check_keys("gaussian-mixture", params, {"means", "weights", "vars", "covs"})
    if "means" not in params:
        raise ConfigurationError("gaussian-mixture requires 'means'")
    means = np.asarray(params["means"], dtype=float).reshape(len(params["means"]), -1)
    k = means.shape[0]
    if means.shape[1] != dim:
        raise ConfigurationError(f"gaussian-mixture means must have dimension {dim}")
    weights = np.asarray(params.get("weights", np.full(k, 1.0 / k)), dtype=float)
    if weights.shape != (k,) or (weights < 0).any() or weights.sum() <= 0:
        raise ConfigurationError("gaussian-mixture weights must be k nonnegative numbers")
    weights = weights / weights.sum()
    if "covs" in params and "vars" in params:
        raise ConfigurationError("give either 'vars' or 'covs', not both")
    if "covs" in params:
        covs = [as_matrix(c, dim) for c in params["covs"]]
    else:
        covs = [as_matrix(v, dim) for v in params.get("vars", np.ones(k))]
    if len(covs) != k:
        raise ConfigurationError("gaussian-mixture needs one covariance per component")
    chols = [cholesky_spd(c) for c in covs]
    with np.errstate(divide="ignore"):
        log_w = np.log(weights)

    def log_fn(pts):
        comp = np.stack(
            [lw + gaussian_logpdf(pts, m, L) for lw, m, L in zip(log_w, means, chols)]
        )
        return logsumexp(comp, axis=0)

    def sampler(rng, n):
        labels = rng.choice(k, size=n, p=weights)
        z = rng.standard_normal((n, dim))
        out = np.empty((n, dim))
        for j in range(k):
            sel = labels == j
            out[sel] = means[j] + z[sel] @ chols[j].T
        return out

    mean = weights @ means
    second = sum(w * (c + np.outer(m, m)) for w, m, c in zip(weights, means, covs))
    sds = np.sqrt(np.array([np.diag(c) for c in covs]))
    lo = (means - 12 * sds).min(axis=0)
    hi = (means + 12 * sds).max(axis=0)
    ref = {"mean": mean, "cov": second - np.outer(mean, mean), "box": list(zip(lo, hi))}
    return TargetDensity(dim, log_fn, 0.0, "gaussian-mixture", sampler, ref)


def _banana(dim, params):
    if dim != 2:
        raise ConfigurationError("banana target is defined for dim = 2 only")
    _check_keys("banana", params, {"b", "sigma"})
    b = float(params.get("b", 0.1))
    sigma = float(params.get("sigma", 3.0))
    if sigma <= 0:
        raise ValidationError("banana sigma must be positive")
    s2 = sigma * sigma

    def log_fn(pts):
        x1, x2 = pts[:, 0], pts[:, 1]
        y = x2 + b * (x1 * x1 - s2)
        return -0.5 * x1 * x1 / s2 - 0.5 * y * y

    def sampler(rng, n):
        z = rng.standard_normal((n, 2))
        x1 = sigma * z[:, 0]
        return np.column_stack([x1, z[:, 1] - b * (x1 * x1 - s2)])

    reach = 8.0 * sigma
    shift = abs(b) * (reach * reach - s2)
    ref = {
        "mean": np.zeros(2),
        "cov": np.diag([s2, 1.0 + 2.0 * b * b * s2 * s2]),
        "box": [
            (-reach, reach),
            (-10.0 - (shift if b > 0 else abs(b) * s2), 10.0 + (shift if b < 0 else b * s2)),
        ],
    }
    return TargetDensity(2, log_fn, float(LOG_2PI + np.log(sigma)), "banana", sampler, ref)


def _check_keys(name, params, allowed):
    extra = set(params) - allowed
    if extra:
        raise ConfigurationError(f"{name}: unknown params {sorted(extra)}")


_BUILDERS = {
    "std-gaussian": _std_gaussian,
    "gaussian": _gaussian,
    "gaussian-mixture": _gaussian_mixture,
    "banana": _banana,
}


def builtin_target(name, dim, params=None):
    """Build a catalog target by name; see the module docstring for families."""
    if name not in _BUILDERS:
        raise ConfigurationError(f"unknown target {name!r}; choose from {', '.join(CATALOG)}")
    if int(dim) < 1:
        raise ConfigurationError(f"dim must be positive, got {dim}")
    return _BUILDERS[name](int(dim), dict(params or {}))


def target_from_proposal(q):
    """Use a proposal's normalized density as a target (``Z = 1``, exact sampler)."""
    return TargetDensity(
        dim=q.dim,
        log_fn=q.log_pdf,
        known_log_z=0.0,
        name=f"{q.family}-target",
        sampler=q.draw,
        reference={"mean": q.location, "box": q.box()},
    )


# ---------------------------------------------------------------------------
# integrand catalog

_INTEGRAND_RE = re.compile(r"^(?:(1)|x(\d+)|x(\d+)\^2|exp\(x(\d+)\))$")


def integrand(name, dim):
    """Named integrands: ``1``, ``x<i>``, ``x<i>^2`` and ``exp(x<i>)`` (0-based ``i``)."""
    m = _INTEGRAND_RE.match(name.replace(" ", ""))
    if m is None:
        raise ConfigurationError(f"unknown integrand {name!r}")
    const, lin, sq, ex = m.groups()
    if const:
        return Integrand(dim, lambda p: np.ones(p.shape[0]), "nonnegative", name)
    i = int(lin or sq or ex)
    if i >= dim:
        raise ConfigurationError(f"integrand {name!r} indexes coordinate {i} of a {dim}-d target")
    if lin:
        return Integrand(dim, lambda p: p[:, i], "mixed", name)
    if sq:
        return Integrand(dim, lambda p: p[:, i] ** 2, "nonnegative", name)
    return Integrand(dim, lambda p: np.exp(p[:, i]), "nonnegative", name)
