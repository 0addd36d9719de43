"""Parametric proposals (Gaussian, Student-t) and mixtures of them.

Sampling is reparameterized: a draw is ``location + L @ z`` with ``L`` the
cached Cholesky factor of ``scale`` and ``z`` a standard draw. The random
stream is consumed identically for every parameter value, which keeps
comparisons between adapted proposals and weighting schemes coupled.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats
from scipy.special import logsumexp

from ._linalg import (
    as_matrix,
    as_points,
    cholesky_spd,
    gaussian_logpdf,
    student_t_logpdf,
)
from .errors import ConfigurationError, ValidationError

FAMILIES = ("gaussian", "student-t")


@dataclass(frozen=True, eq=False)
class ProposalParams:
    """Location vector and SPD scale matrix; the Cholesky factor is cached."""

    location: np.ndarray
    scale: np.ndarray
    chol: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        loc = np.atleast_1d(np.asarray(self.location, dtype=float)).copy()
        if loc.ndim != 1 or not np.all(np.isfinite(loc)):
            raise ValidationError("location must be a finite vector")
        scale = as_matrix(self.scale, loc.shape[0]).copy()
        object.__setattr__(self, "location", loc)
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "chol", cholesky_spd(scale))
        for a in (self.location, self.scale, self.chol):
            a.flags.writeable = False

    @property
    def dim(self):
        return self.location.shape[0]

    def with_location(self, location):
        return ProposalParams(location, self.scale)

    def to_dict(self):
        return {"location": self.location.tolist(), "scale": self.scale.tolist()}


@dataclass(frozen=True, eq=False)
class Proposal:
    """Sampling distribution ``q(x | location, scale)``.

    ``dof`` is required for (and only used by) the Student-t family, where
    ``scale`` is the scale matrix rather than the covariance.
    """

    family: str
    params: ProposalParams
    dof: Optional[float] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(f"unknown proposal family {self.family!r}")
        if self.family == "student-t":
            if self.dof is None or not self.dof > 0:
                raise ConfigurationError("student-t proposal needs a positive dof")
        elif self.dof is not None:
            raise ConfigurationError("dof is only meaningful for student-t")

    @classmethod
    def gaussian(cls, location, cov):
        return cls("gaussian", ProposalParams(location, cov))

    @classmethod
    def student_t(cls, location, scale, dof):
        return cls("student-t", ProposalParams(location, scale), float(dof))

    @property
    def dim(self):
        return self.params.dim

    @property
    def location(self):
        return self.params.location

    def with_params(self, params):
        return Proposal(self.family, params, self.dof)

    def draw(self, rng, count):
        """``count`` i.i.d. draws as a ``(count, dim)`` array."""
        if count < 1:
            raise ValidationError("count must be at least 1")
        z = rng.standard_normal((count, self.dim)) @ self.params.chol.T
        if self.family == "student-t":
            z *= np.sqrt(self.dof / rng.chisquare(self.dof, size=count))[:, None]
        return self.params.location + z

    def log_pdf(self, x):
        """Normalized log-density at one point or at the rows of an array."""
        pts, single = as_points(x, self.dim)
        if self.family == "gaussian":
            out = gaussian_logpdf(pts, self.params.location, self.params.chol)
        else:
            out = student_t_logpdf(pts, self.params.location, self.params.chol, self.dof)
        return out[0] if single else out

    def box(self, tail=1e-12):
        """Per-dimension interval holding all but ``tail`` of each marginal's mass."""
        sd = np.sqrt(np.diag(self.params.scale))
        if self.family == "gaussian":
            half = stats.norm.isf(tail / 2) * sd
        else:
            half = stats.t.isf(tail / 2, self.dof) * sd
        return list(zip(self.location - half, self.location + half))


@dataclass(frozen=True, eq=False)
class MixtureView:
    """Weighted mixture of proposals, as used in deterministic-mixture denominators."""

    components: Sequence[Proposal]
    weights: np.ndarray

    def __post_init__(self):
        comps = tuple(self.components)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if not comps:
            raise ConfigurationError("mixture needs at least one component")
        if w.shape != (len(comps),) or (w < 0).any() or abs(w.sum() - 1.0) > 1e-12:
            raise ValidationError("mixture weights must be nonnegative and sum to 1")
        if len({c.dim for c in comps}) != 1:
            raise ValidationError("mixture components must share a dimension")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, components):
        components = tuple(components)
        return cls(components, np.full(len(components), 1.0 / len(components)))

    @property
    def dim(self):
        return self.components[0].dim

    def log_pdf(self, x):
        pts, single = as_points(x, self.dim)
        comp = np.stack([c.log_pdf(pts) for c in self.components])
        out = logsumexp(comp, axis=0, b=self.weights[:, None])
        return out[0] if single else out


def draw(p, rng, count):
    return p.draw(rng, count)


def log_pdf(p, x):
    return p.log_pdf(x)


def mixture_log_pdf(m, x):
    """``log sum_i w_i q_i(x)`` via log-sum-exp."""
    return m.log_pdf(x)


def proposal_from_dict(spec, dim=None):
    """Build a proposal from ``{family, location, cov | scale, dof}``."""
    spec = dict(spec)
    family = spec.pop("family", "gaussian")
    if "location" not in spec:
        raise ConfigurationError("proposal needs a 'location'")
    loc = np.atleast_1d(np.asarray(spec.pop("location"), dtype=float))
    if dim is not None and loc.shape != (dim,):
        raise ConfigurationError(f"proposal location must have length {dim}")
    if "cov" in spec and "scale" in spec:
        raise ConfigurationError("give either 'cov' or 'scale'")
    scale = spec.pop("cov", spec.pop("scale", 1.0))
    dof = spec.pop("dof", None)
    if spec:
        raise ConfigurationError(f"unknown proposal keys {sorted(spec)}")
    return Proposal(family, ProposalParams(loc, scale), None if dof is None else float(dof))
