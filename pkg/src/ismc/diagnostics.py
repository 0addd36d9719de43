"""Weight diagnostics (effective sample size, inverse max weight) and truncation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import DegenerateBatchError, ValidationError


@dataclass(frozen=True)
class ESSReport:
    ess_hat: float
    inv_max_weight: float
    n: int

    @property
    def fraction(self):
        return self.ess_hat / self.n

    def as_dict(self):
        return {
            "ess_hat": self.ess_hat,
            "inv_max_weight": self.inv_max_weight,
            "n": self.n,
            "fraction": self.fraction,
        }


def ess_from_log_weights(log_weights):
    """ESS report for raw log-weights.

    Weights are rescaled by their maximum before squaring, so uniform and
    one-hot inputs give exactly ``n`` and ``1``.
    """
    lw = np.asarray(log_weights, dtype=float).reshape(-1)
    n = lw.size
    if n == 0 or not np.isfinite(lw).any():
        raise DegenerateBatchError("no sample carries positive weight")
    w = np.exp(lw - lw.max())
    total = w.sum()
    ess = total * total / np.dot(w, w)
    inv_max = total  # max(w) == 1 after rescaling
    return ESSReport(float(min(max(ess, 1.0), n)), float(min(max(inv_max, 1.0), n)), n)


def ess_hat(b):
    """``1 / sum wbar_n^2`` and ``1 / max wbar_n`` for a weighted batch."""
    return ess_from_log_weights(b.log_weights)


def default_log_tau(log_weights):
    """``log(mean(w) * sqrt(N))``, the default truncation level."""
    lw = np.asarray(log_weights, dtype=float)
    n = lw.size
    return float(logsumexp(lw) - 0.5 * np.log(n))


def truncate_weights(b, tau=None):
    """Replace each raw weight by ``min(w_n, tau)``.

    ``tau`` defaults to the mean raw weight times ``sqrt(N)``.
    """
    if tau is None:
        log_tau = default_log_tau(b.log_weights)
    else:
        if not tau > 0:
            raise ValidationError("tau must be positive")
        log_tau = np.log(tau)
    return b.replace_log_weights(np.minimum(b.log_weights, log_tau))
