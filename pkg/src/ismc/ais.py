"""Generic adaptive importance sampling loop with pluggable adapters.

Each iteration draws ``K`` samples from each of ``N`` proposals, weights
them, and updates the proposal parameters. Three adaptation families are
available:

``pmc_resample``
    new locations are resampled from the latest iteration's weighted
    samples (population Monte Carlo). Pairs with ``standard`` weighting
    (own-proposal denominator) or ``spatial_mixture`` (all current
    proposals in the denominator).
``amis_temporal``
    a single proposal whose location and covariance are moment-matched to
    all samples so far; every past sample is re-weighted against the
    mixture of all past proposals (``temporal_mixture``).
``lais_independent``
    proposal locations follow random-walk Metropolis chains on the target,
    independent of the importance samples; ``spatial_mixture`` weighting.

Evaluation counters follow the usual complexity accounting: every sample
costs one target evaluation and as many proposal evaluations as its
weight denominator has components. Target evaluations made by the LAIS
chains are tallied separately in ``chain_target_evals``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .core import WeightedBatch, log_weights_from_densities, z_hat
from .diagnostics import ESSReport, ess_hat, truncate_weights
from .errors import ConfigurationError, ValidationError
from .proposals import Proposal, ProposalParams

log = logging.getLogger(__name__)

ADAPTERS = ("pmc_resample", "amis_temporal", "lais_independent")
WEIGHTINGS = ("standard", "spatial_mixture", "temporal_mixture")

_ALLOWED = {
    "pmc_resample": ("standard", "spatial_mixture"),
    "amis_temporal": ("temporal_mixture",),
    "lais_independent": ("spatial_mixture",),
}


@dataclass(frozen=True)
class EvalCounters:
    target_evals: int = 0
    proposal_evals: int = 0
    chain_target_evals: int = 0

    def __add__(self, other):
        return EvalCounters(
            self.target_evals + other.target_evals,
            self.proposal_evals + other.proposal_evals,
            self.chain_target_evals + other.chain_target_evals,
        )

    def table_pair(self):
        return self.target_evals, self.proposal_evals


@dataclass(frozen=True, eq=False)
class AISConfig:
    """Description of one adaptive run.

    ``clip_tau`` truncates raw weights at that level after each weighting
    step; the string ``"auto"`` selects ``mean(w) * sqrt(n)``.
    ``step_scale`` is the LAIS random-walk standard deviation, defaulting to
    ``2.4 / sqrt(dim)``.
    """

    n_proposals: int
    samples_per_proposal: int
    iterations: int
    adapter: str
    weighting: str
    init_params: Sequence[ProposalParams]
    clip_tau: Optional[object] = None
    family: str = "gaussian"
    dof: Optional[float] = None
    step_scale: Optional[float] = None

    def __post_init__(self):
        for name in ("n_proposals", "samples_per_proposal", "iterations"):
            if int(getattr(self, name)) < 1:
                raise ConfigurationError(f"{name} must be at least 1")
        if self.adapter not in ADAPTERS:
            raise ConfigurationError(f"unknown adapter {self.adapter!r}; choose from {ADAPTERS}")
        if self.weighting not in WEIGHTINGS:
            raise ConfigurationError(
                f"unknown weighting {self.weighting!r}; choose from {WEIGHTINGS}"
            )
        if self.weighting not in _ALLOWED[self.adapter]:
            raise ConfigurationError(
                f"adapter {self.adapter} requires weighting in {_ALLOWED[self.adapter]}"
            )
        if self.adapter == "amis_temporal" and self.n_proposals != 1:
            raise ConfigurationError("amis_temporal runs a single proposal (n_proposals = 1)")
        params = tuple(self.init_params)
        if len(params) != self.n_proposals:
            raise ConfigurationError("init_params needs one entry per proposal")
        if len({p.dim for p in params}) != 1:
            raise ConfigurationError("init_params must share a dimension")
        object.__setattr__(self, "init_params", params)
        if self.clip_tau is not None and self.clip_tau != "auto":
            if not float(self.clip_tau) > 0:
                raise ConfigurationError("clip_tau must be positive or 'auto'")
        if self.step_scale is not None and not self.step_scale > 0:
            raise ConfigurationError("step_scale must be positive")
        Proposal(self.family, params[0], self.dof)  # validates family/dof

    @property
    def dim(self):
        return self.init_params[0].dim

    def lais_step(self):
        return self.step_scale or 2.4 / np.sqrt(self.dim)


@dataclass(frozen=True, eq=False)
class IterationRecord:
    iteration: int
    log_z_hat: float
    ess: ESSReport
    params: tuple
    counters: EvalCounters
    batch: WeightedBatch = field(repr=False, default=None)


@dataclass(frozen=True, eq=False)
class AISOutput:
    history: WeightedBatch
    per_iteration: list
    counters: EvalCounters
    final_params: tuple = field(default=())


@dataclass(frozen=True, eq=False)
class ChainState:
    points: np.ndarray
    log_density: np.ndarray


# ---------------------------------------------------------------------------
# adapters


def adapt_pmc_resample(batch_j, params_j, rng):
    """Multinomially resample ``N`` new locations from the iteration's samples."""
    params_j = list(params_j)
    if batch_j.is_degenerate():
        log.warning("pmc_resample: degenerate batch, proposals left unchanged")
        return params_j
    w = batch_j.normalized_weights()
    picks = rng.choice(len(batch_j), size=len(params_j), p=w)
    return [p.with_location(batch_j.points[i]) for p, i in zip(params_j, picks)]


def adapt_amis_temporal(full_history, params_history):
    """Moment-match the proposal to all weighted samples so far.

    The covariance is symmetrized; if it is not positive definite a jitter
    of ``1e-6 * trace / dim`` is added, and failing that the previous scale
    is kept.
    """
    prev = list(params_history)[-1]
    if full_history.is_degenerate():
        log.warning("amis_temporal: degenerate history, proposal left unchanged")
        return prev
    w = full_history.normalized_weights()
    x = full_history.points
    mean = w @ x
    diff = x - mean
    cov = (w[:, None] * diff).T @ diff
    cov = 0.5 * (cov + cov.T)
    dim = cov.shape[0]
    eps = 1e-6 * np.trace(cov) / dim
    for candidate in (cov, cov + eps * np.eye(dim)):
        # rank-deficient matrices can pass Cholesky by rounding; require a floor
        if np.linalg.eigvalsh(candidate)[0] > 1e-12 * np.trace(candidate) / dim:
            try:
                return ProposalParams(mean, candidate)
            except ValidationError:
                pass
    log.warning("amis_temporal: covariance not SPD after jitter, keeping previous scale")
    return ProposalParams(mean, prev.scale)


def init_chain(t, locations):
    pts = np.asarray(locations, dtype=float).reshape(-1, t.dim)
    return ChainState(pts, t.log_density(pts))


def adapt_lais_independent(chain_state, t, step_scale, rng, params):
    """Advance each chain by one random-walk Metropolis step on ``t``.

    Returns the new chain state and the proposals re-centred on it; scales
    are unchanged. The importance samples play no part.
    """
    x = chain_state.points
    prop = x + step_scale * rng.standard_normal(x.shape)
    lp_prop = t.log_density(prop)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_u = np.log(rng.uniform(size=x.shape[0]))
        accept = log_u < lp_prop - chain_state.log_density
    new_pts = np.where(accept[:, None], prop, x)
    new_lp = np.where(accept, lp_prop, chain_state.log_density)
    new_state = ChainState(new_pts, new_lp)
    return new_state, [p.with_location(loc) for p, loc in zip(params, new_pts)]


# ---------------------------------------------------------------------------
# complexity table

_COST_TABLE = {
    "standard-pmc": lambda K, N, J: (N * J, N * J),
    "n-pmc": lambda K, N, J: (N * J, N * J),
    "m-pmc": lambda K, N, J: (K * J, K * N * J),
    "lais": lambda K, N, J: (K * (N + 1) * J, K * N * N * J),
    "dm-pmc": lambda K, N, J: (K * N * J, K * N * N * J),
    "amis": lambda K, N, J: (K * J, K * J * J),
    "gapis": lambda K, N, J: (K * N * J, K * N * N * J),
    "apis": lambda K, N, J: (K * N * J, K * N * N * J),
}
ALGORITHMS = tuple(_COST_TABLE)

# named algorithms the engine can run, as (adapter, weighting, clip_tau)
ALGORITHM_CONFIGS = {
    "standard-pmc": ("pmc_resample", "standard", None),
    "n-pmc": ("pmc_resample", "standard", "auto"),
    "dm-pmc": ("pmc_resample", "spatial_mixture", None),
    "lais": ("lais_independent", "spatial_mixture", None),
    "amis": ("amis_temporal", "temporal_mixture", None),
}


def predicted_cost(algorithm, K, N=1, J=1):
    """Closed-form target and proposal evaluation counts for a named algorithm.

    Standard PMC and N-PMC are tabulated for one sample per proposal.
    """
    try:
        target, proposal = _COST_TABLE[algorithm](int(K), int(N), int(J))
    except KeyError:
        raise ConfigurationError(
            f"unknown algorithm {algorithm!r}; choose from {', '.join(ALGORITHMS)}"
        ) from None
    return EvalCounters(target, proposal)


# ---------------------------------------------------------------------------
# engine


def _log_mixture(points, proposals):
    comp = np.stack([q.log_pdf(points) for q in proposals])
    return logsumexp(comp, axis=0) - np.log(len(proposals))


def temporal_log_denominators(points, params_history, family="gaussian", dof=None):
    """From-scratch ``log((1/j) sum_tau q_tau(x))`` over ``j`` proposal snapshots."""
    return _log_mixture(points, [Proposal(family, p, dof) for p in params_history])


def _clip(batch, clip_tau):
    if clip_tau is None:
        return batch
    return truncate_weights(batch, None if clip_tau == "auto" else float(clip_tau))


def run_ais(t, cfg, rng):
    """Run ``cfg.iterations`` rounds of sampling, weighting and adaptation."""
    if t.dim != cfg.dim:
        raise ConfigurationError(f"target has dim {t.dim} but proposals have dim {cfg.dim}")
    K, N = cfg.samples_per_proposal, cfg.n_proposals
    params = list(cfg.init_params)
    counters = EvalCounters()
    records = []
    batches = []

    chain = None
    if cfg.adapter == "lais_independent":
        chain = init_chain(t, [p.location for p in params])
        counters += EvalCounters(chain_target_evals=N)

    # temporal-mixture bookkeeping: all samples, their log target values and
    # the log of the (unnormalized) sum of every past proposal density
    params_history = []
    all_pts = np.empty((0, cfg.dim))
    all_lp = np.empty(0)
    all_logsum = np.empty(0)
    all_iter = np.empty(0, dtype=int)

    for j in range(cfg.iterations):
        proposals = [Proposal(cfg.family, p, cfg.dof) for p in params]
        pts = np.concatenate([q.draw(rng, K) for q in proposals])
        index = np.repeat(np.arange(N), K)
        lp = t.log_density(pts)
        n_new = pts.shape[0]

        if cfg.weighting == "standard":
            log_den = np.concatenate(
                [q.log_pdf(pts[index == i]) for i, q in enumerate(proposals)]
            )
            spent = EvalCounters(n_new, n_new)
        elif cfg.weighting == "spatial_mixture":
            log_den = _log_mixture(pts, proposals)
            spent = EvalCounters(n_new, n_new * N)
        else:
            q_now = proposals[0]
            params_history.append(params[0])
            past = [Proposal(cfg.family, p, cfg.dof) for p in params_history]
            logsum_new = logsumexp(np.stack([q.log_pdf(pts) for q in past]), axis=0)
            if all_pts.shape[0]:
                all_logsum = np.logaddexp(all_logsum, q_now.log_pdf(all_pts))
            spent = EvalCounters(n_new, n_new * len(past) + all_pts.shape[0])
            all_pts = np.concatenate([all_pts, pts])
            all_lp = np.concatenate([all_lp, lp])
            all_logsum = np.concatenate([all_logsum, logsum_new])
            all_iter = np.concatenate([all_iter, np.full(n_new, j)])
            log_den = None
        counters += spent

        if log_den is not None:
            lw = log_weights_from_densities(lp, log_den, pts)
            batch = _clip(WeightedBatch(pts, lw, index, j, *spent.table_pair()), cfg.clip_tau)
            batches.append(batch)
            report_batch = batch
        else:
            lw = log_weights_from_densities(all_lp, all_logsum - np.log(j + 1), all_pts)
            report_batch = _clip(
                WeightedBatch(all_pts, lw, 0, all_iter, *counters.table_pair()), cfg.clip_tau
            )

        ess = ess_hat(report_batch) if not report_batch.is_degenerate() else ESSReport(
            1.0, 1.0, len(report_batch)
        )
        records.append(
            IterationRecord(j, z_hat(report_batch), ess, tuple(params), counters, report_batch)
        )

        if cfg.adapter == "pmc_resample":
            params = adapt_pmc_resample(report_batch, params, rng)
        elif cfg.adapter == "amis_temporal":
            params = [adapt_amis_temporal(report_batch, params_history)]
        else:
            chain, params = adapt_lais_independent(chain, t, cfg.lais_step(), rng, params)
            counters += EvalCounters(chain_target_evals=N)

    if cfg.weighting == "temporal_mixture":
        history = report_batch
    else:
        history = WeightedBatch.concatenate(batches)
    return AISOutput(history, records, counters, tuple(params))
