"""Multiple importance sampling with several weighting denominators.

Schemes
-------
``n1``
    one draw per proposal, weight ``pi(x_n) / q_n(x_n)``.
``n3``
    one draw per proposal, weight against the whole mixture
    ``psi(x) = (1/M) sum_j q_j(x)`` (deterministic mixture).
``partial_dm``
    like ``n3`` but the mixture only runs over the block of a fixed
    partition that contains the generating proposal.
``balance_heuristic``
    ``n_j`` draws from ``q_j`` and denominator ``sum_k (n_k / N) q_k(x)``.

Proposal indices are 0-based throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import optimize, stats
from scipy.special import logsumexp

from .core import WeightedBatch, log_weights_from_densities, snis_estimate, uis_estimate
from .errors import ConfigurationError, ValidationError

KINDS = ("n1", "n3", "partial_dm", "balance_heuristic")


@dataclass(frozen=True)
class MISScheme:
    kind: str
    partition: Optional[Sequence[Sequence[int]]] = None
    counts: Optional[Sequence[int]] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown MIS scheme {self.kind!r}; choose from {KINDS}")
        if self.kind == "partial_dm":
            if not self.partition:
                raise ConfigurationError("partial_dm needs a partition")
            object.__setattr__(
                self, "partition", tuple(tuple(int(i) for i in blk) for blk in self.partition)
            )
        if self.kind == "balance_heuristic":
            if not self.counts:
                raise ConfigurationError("balance_heuristic needs per-proposal counts")
            counts = tuple(int(c) for c in self.counts)
            if any(c < 1 for c in counts):
                raise ConfigurationError("balance_heuristic counts must be positive")
            object.__setattr__(self, "counts", counts)

    def check(self, n_proposals):
        """Validate the scheme against the number of proposals it will be used with."""
        if self.kind == "partial_dm":
            flat = [i for blk in self.partition for i in blk]
            if any(len(blk) == 0 for blk in self.partition):
                raise ConfigurationError("partition blocks must be nonempty")
            if sorted(flat) != list(range(n_proposals)):
                raise ConfigurationError(
                    f"partition must split proposals 0..{n_proposals - 1} into disjoint blocks"
                )
        if self.kind == "balance_heuristic" and len(self.counts) != n_proposals:
            raise ConfigurationError("balance_heuristic needs one count per proposal")

    def sample_counts(self, n_proposals):
        if self.kind == "balance_heuristic":
            return np.asarray(self.counts)
        return np.ones(n_proposals, dtype=int)

    def mixture_weights(self, n_proposals):
        """Weights of the mixture ``psi`` a randomly picked sample should follow."""
        counts = self.sample_counts(n_proposals)
        return counts / counts.sum()


@dataclass(frozen=True, eq=False)
class MISSample:
    points: np.ndarray
    index: np.ndarray

    def __len__(self):
        return self.points.shape[0]


def _check_proposals(proposals):
    proposals = list(proposals)
    if not proposals:
        raise ConfigurationError("at least one proposal is required")
    if len({q.dim for q in proposals}) != 1:
        raise ConfigurationError("all proposals must share a dimension")
    return proposals


def mis_sample_batch(proposals, scheme, rng, replicates):
    """``replicates`` independent realizations of the sampling scheme.

    Returns points of shape ``(replicates, n_total, dim)`` and the origin
    index of the ``n_total`` samples of one realization.
    """
    proposals = _check_proposals(proposals)
    scheme.check(len(proposals))
    counts = scheme.sample_counts(len(proposals))
    blocks = []
    for q, c in zip(proposals, counts):
        blocks.append(q.draw(rng, int(c) * replicates).reshape(replicates, int(c), q.dim))
    index = np.repeat(np.arange(len(proposals)), counts)
    return np.concatenate(blocks, axis=1), index


def mis_sample(proposals, scheme, rng):
    """Draw one sample per proposal, or ``counts[j]`` from proposal ``j``."""
    pts, index = mis_sample_batch(proposals, scheme, rng, 1)
    return MISSample(pts[0], index)


def _mixture_log_density(points, proposals, weights):
    comp = np.stack([q.log_pdf(points) for q in proposals])
    return logsumexp(comp, axis=0, b=np.asarray(weights, dtype=float)[:, None])


def mis_log_denominators(samples, proposals, scheme):
    """Log weight denominators and the number of proposal evaluations spent."""
    proposals = _check_proposals(proposals)
    m = len(proposals)
    scheme.check(m)
    pts, idx = samples.points, np.asarray(samples.index)
    if idx.min() < 0 or idx.max() >= m:
        raise ValidationError("sample origin index out of range")
    n = len(pts)
    log_den = np.empty(n)
    if scheme.kind == "n1":
        for j, q in enumerate(proposals):
            sel = idx == j
            if sel.any():
                log_den[sel] = q.log_pdf(pts[sel])
        evals = n
    elif scheme.kind == "partial_dm":
        evals = 0
        for blk in scheme.partition:
            sel = np.isin(idx, blk)
            if not sel.any():
                continue
            members = [proposals[i] for i in blk]
            log_den[sel] = _mixture_log_density(
                pts[sel], members, np.full(len(blk), 1.0 / len(blk))
            )
            evals += int(sel.sum()) * len(blk)
    else:
        log_den = _mixture_log_density(pts, proposals, scheme.mixture_weights(m))
        evals = n * m
    return log_den, evals


def mis_weight(samples, proposals, scheme, t, iteration_index=0):
    """Importance weights of MIS samples under ``scheme``."""
    log_den, evals = mis_log_denominators(samples, proposals, scheme)
    lp = t.log_density(samples.points)
    lw = log_weights_from_densities(lp, log_den, samples.points)
    return WeightedBatch(samples.points, lw, samples.index, iteration_index, len(samples), evals)


def balance_heuristic_estimate(proposals, counts, t, f, rng, log_z=None):
    """Balance-heuristic estimate of ``E[f]``.

    With ``log_z`` this is the unbiased form
    ``sum_j sum_i f(x_ji) pi_tilde(x_ji) / sum_k n_k q_k(x_ji)``; without it
    the weights are self-normalized.
    """
    scheme = MISScheme("balance_heuristic", counts=counts)
    b = mis_weight(mis_sample(proposals, scheme, rng), proposals, scheme, t)
    if log_z is None:
        return snis_estimate(b, f)
    return uis_estimate(b, f, log_z)


# ---------------------------------------------------------------------------
# properness


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    dof: int
    observed: tuple
    expected: tuple

    @property
    def p_value(self):
        return float(stats.chi2.sf(self.statistic, self.dof))

    def passes(self, level=0.99):
        """True when the statistic is below the ``level`` quantile of chi-square."""
        return self.statistic < stats.chi2.ppf(level, self.dof)


def _marginal_cdf(q):
    loc = q.location[0]
    sd = np.sqrt(q.params.scale[0, 0])
    if q.family == "gaussian":
        return lambda x: stats.norm.cdf(x, loc, sd)
    return lambda x: stats.t.cdf(x, q.dof, loc, sd)


def mixture_bin_edges(proposals, weights, bins):
    """Interior edges splitting a 1-D mixture into ``bins`` equiprobable cells."""
    cdfs = [_marginal_cdf(q) for q in proposals]

    def cdf(x):
        return sum(w * c(x) for w, c in zip(weights, cdfs))

    lo = min(b[0] for q in proposals for b in q.box(1e-12))
    hi = max(b[1] for q in proposals for b in q.box(1e-12))
    return np.array(
        [optimize.brentq(lambda x: cdf(x) - k / bins, lo, hi, xtol=1e-12) for k in range(1, bins)]
    )


def properness_check(scheme, proposals, rng, draws=10_000, bins=20, sampler=None):
    """Chi-square test that a uniformly picked sample follows the mixture ``psi``.

    The scheme is invoked ``draws`` times; from each realization one sample
    is picked uniformly at random. The picks are binned into ``bins`` cells
    that are equiprobable under ``psi``. ``sampler`` replaces
    :func:`mis_sample_batch` (same signature), e.g. to check a broken scheme.
    """
    proposals = _check_proposals(proposals)
    if proposals[0].dim != 1:
        raise ValidationError("properness_check is one-dimensional")
    if draws < 10_000:
        raise ValidationError("properness_check needs at least 10^4 draws")
    sampler = sampler or mis_sample_batch
    pts, _ = sampler(proposals, scheme, rng, draws)
    picks = pts[np.arange(draws), rng.integers(pts.shape[1], size=draws), 0]
    edges = mixture_bin_edges(proposals, scheme.mixture_weights(len(proposals)), bins)
    observed = np.bincount(np.searchsorted(edges, picks), minlength=bins)
    expected = np.full(bins, draws / bins)
    stat = float(np.sum((observed - expected) ** 2 / expected))
    return ChiSquareResult(stat, bins - 1, tuple(observed.tolist()), tuple(expected.tolist()))
