"""Single-proposal importance sampling: weighting and the basic estimators.

Weights live in log-space. ``uis_estimate`` needs ``log Z`` from the
caller; ``snis_estimate`` and ``z_hat`` work from the weights alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import DegenerateBatchError, PropernessError, ValidationError


@dataclass(frozen=True, eq=False)
class WeightedBatch:
    """Weighted samples with their origin and evaluation counters.

    Parameters
    ----------
    points : ndarray, shape (n, dim)
    log_weights : ndarray, shape (n,)
        ``log w_n``; ``-inf`` marks zero weight.
    proposal_index, iteration_index : ndarray of int, shape (n,)
        Which proposal produced each sample and at which adaptive iteration.
    target_eval_count, proposal_eval_count : int
        Density evaluations spent producing the batch.
    """

    points: np.ndarray
    log_weights: np.ndarray
    proposal_index: np.ndarray
    iteration_index: np.ndarray
    target_eval_count: int = 0
    proposal_eval_count: int = 0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        lw = np.asarray(self.log_weights, dtype=float).reshape(-1)
        n = pts.shape[0]
        if lw.shape != (n,):
            raise ValidationError("one log-weight per point is required")
        if np.isnan(lw).any() or np.isposinf(lw).any():
            raise ValidationError("log-weights must be finite or -inf")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "log_weights", lw)
        for name in ("proposal_index", "iteration_index"):
            idx = np.broadcast_to(np.asarray(getattr(self, name), dtype=int), (n,)).copy()
            object.__setattr__(self, name, idx)

    def __len__(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def entries(self):
        """``(x, log_weight, proposal_index, iteration_index)`` tuples."""
        return list(zip(self.points, self.log_weights, self.proposal_index, self.iteration_index))

    def is_degenerate(self):
        return len(self) == 0 or not np.isfinite(self.log_weights).any()

    def normalized_weights(self):
        """``w_n / sum_j w_j``; raises on a batch without any positive weight."""
        if self.is_degenerate():
            raise DegenerateBatchError("no sample carries positive weight")
        w = np.exp(self.log_weights - self.log_weights.max())
        return w / w.sum()

    def replace_log_weights(self, log_weights, **counts):
        return WeightedBatch(
            self.points,
            log_weights,
            self.proposal_index,
            self.iteration_index,
            counts.get("target_eval_count", self.target_eval_count),
            counts.get("proposal_eval_count", self.proposal_eval_count),
        )

    def select(self, mask):
        """Sub-batch of the samples selected by ``mask``; counters are kept."""
        return WeightedBatch(
            self.points[mask],
            self.log_weights[mask],
            self.proposal_index[mask],
            self.iteration_index[mask],
            self.target_eval_count,
            self.proposal_eval_count,
        )

    @staticmethod
    def concatenate(batches):
        batches = list(batches)
        if not batches:
            raise ValidationError("nothing to concatenate")
        return WeightedBatch(
            np.concatenate([b.points for b in batches]),
            np.concatenate([b.log_weights for b in batches]),
            np.concatenate([b.proposal_index for b in batches]),
            np.concatenate([b.iteration_index for b in batches]),
            sum(b.target_eval_count for b in batches),
            sum(b.proposal_eval_count for b in batches),
        )


def log_weights_from_densities(log_target, log_denominator, points=None):
    """``log pi - log q`` with the conventions for zero densities.

    ``pi = 0`` gives weight zero whatever ``q`` is; ``q = 0`` where ``pi > 0``
    would give an infinite weight and raises :class:`PropernessError`.
    """
    log_target = np.asarray(log_target, dtype=float)
    log_denominator = np.asarray(log_denominator, dtype=float)
    bad = np.isneginf(log_denominator) & (log_target > -np.inf)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        pt = None if points is None else np.asarray(points)[i]
        raise PropernessError(
            f"proposal density is zero at sample {i} where the target is positive", pt
        )
    with np.errstate(invalid="ignore"):
        lw = log_target - log_denominator
    lw[np.isneginf(log_target)] = -np.inf
    return lw


def importance_weights(t, q, xs, proposal_index=0, iteration_index=0):
    """Weight points drawn from ``q`` against the target ``t``."""
    xs = np.asarray(xs, dtype=float).reshape(-1, t.dim)
    lp = t.log_density(xs)
    lq = q.log_pdf(xs)
    lw = log_weights_from_densities(lp, lq, xs)
    n = xs.shape[0]
    return WeightedBatch(xs, lw, proposal_index, iteration_index, n, n)


def _signed_log_sum(log_weights, values):
    """Log of the positive and negative parts of ``sum w_n f_n`` accumulated separately."""
    out = []
    for mask in (values > 0, values < 0):
        terms = log_weights[mask] + np.log(np.abs(values[mask]))
        out.append(logsumexp(terms) if terms.size else -np.inf)
    return out


def uis_estimate(b, f, log_z):
    """Unnormalized IS: ``(1 / (N Z)) sum_n w_n f(x_n)``."""
    if len(b) == 0:
        raise ValidationError("empty batch")
    if not np.isfinite(log_z):
        raise ValidationError("UIS needs a finite log normalizing constant")
    fx = np.asarray(f(b.points), dtype=float).reshape(-1)
    log_scale = np.log(len(b)) + log_z
    with np.errstate(divide="ignore"):
        log_pos, log_neg = _signed_log_sum(b.log_weights, fx)
    return float(np.exp(log_pos - log_scale) - np.exp(log_neg - log_scale))


def snis_estimate(b, f):
    """Self-normalized IS: ``sum_n wbar_n f(x_n)``."""
    w = b.normalized_weights()
    fx = np.asarray(f(b.points), dtype=float).reshape(-1)
    keep = w > 0
    return float(np.dot(w[keep], fx[keep]))


def z_hat(b):
    """``log((1/N) sum_n w_n)``, the log of the unbiased evidence estimate."""
    if len(b) == 0:
        raise ValidationError("empty batch")
    if not np.isfinite(b.log_weights).any():
        return -np.inf
    return float(logsumexp(b.log_weights) - np.log(len(b)))


def particle_approximation(b):
    """Discrete approximation of the target: ``[(x_n, wbar_n), ...]``."""
    w = b.normalized_weights()
    return list(zip(b.points, w))


def mc_baseline(t, f, n, rng):
    """Plain Monte Carlo mean of ``f`` over ``n`` exact draws from the target."""
    xs = t.sample(rng, n)
    return float(np.mean(f(xs)))
