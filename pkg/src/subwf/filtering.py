"""Computable posterior inference on finite Dirichlet mixtures.

The filter alternates two closed-family steps: a conjugate multinomial
update (component m gains the observation counts, weight scaled by a
Dirichlet-multinomial mass) and a dual-driven prediction (each component
redistributes over its downward closure with conditional dual-transition
probabilities).  For subordinator clocks the signal is Markov and the
recursion applies directly; for inverse clocks the filter conditions on
the clock path: given operational times the conditional filter is the
classical one, and posterior quantities are Monte Carlo averages over the
clock-path posterior, either by self-normalized importance sampling with
prior-path proposals or by exact rejection (accept a prior path with
probability equal to its data likelihood, a pmf value).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product as _cartesian
from typing import Optional, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from .clocks import ClockKind, ClockSpec, identity_clock, sample_clock_path
from .dual import conditional_weight_row, hypergeom_pmf
from .errors import ConfigError, NumericalError, RejectionExhaustedError
from .mixtures import DirichletMixture
from .sampler import FixedPoint, MixtureStart, Stationary, SwfModel
from .wf import Theta, as_counts

__all__ = [
    "ObservationRecord",
    "FilterStep",
    "FilterTrace",
    "ClockPosteriorSample",
    "update",
    "predict",
    "predictive_log_mass",
    "filter_markov",
    "smooth",
    "log_marginal_likelihood",
    "clock_posterior_sample",
    "nonmarkov_filter",
]

_PRUNE_EPS = 1e-12


@dataclass(frozen=True)
class ObservationRecord:
    """Multinomial counts observed at one time point."""

    time: float
    counts: tuple[int, ...]

    def __post_init__(self):
        if self.time < 0:
            raise ConfigError(f"observation time must be >= 0, got {self.time}")
        if any(c < 0 for c in self.counts):
            raise ConfigError(f"counts must be >= 0, got {self.counts}")

    @property
    def total(self) -> int:
        return sum(self.counts)


def _validate_data(data: Sequence[ObservationRecord], dim: int):
    if not data:
        raise ConfigError("need at least one observation")
    times = [r.time for r in data]
    if any(len(r.counts) != dim for r in data):
        raise ConfigError(f"observation dimension mismatch (expected {dim})")
    if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
        raise ConfigError("observation times must be strictly increasing")


@dataclass
class FilterStep:
    time: float
    counts: tuple[int, ...]
    predicted: DirichletMixture
    updated: DirichletMixture
    log_increment: float
    weight_se: Optional[dict[tuple[int, ...], float]] = None


@dataclass
class FilterTrace:
    steps: list[FilterStep]

    @property
    def log_marginal_likelihood(self) -> float:
        return math.fsum(s.log_increment for s in self.steps)

    @property
    def final(self) -> DirichletMixture:
        return self.steps[-1].updated


@dataclass
class ClockPosteriorSample:
    """Accepted operational times at the observation epochs."""

    r: np.ndarray
    attempts: int
    log_likelihood: float

    def __post_init__(self):
        if np.any(self.r < 0) or np.any(np.diff(self.r) < 0):
            raise ConfigError("operational times must be nondecreasing and >= 0")


def _log_dirichlet_multinomial(theta: Theta, m: np.ndarray, y: np.ndarray) -> float:
    """log mass of counts y under the Dirichlet(theta + m) compound."""
    y_tot = int(y.sum())
    th = theta.as_array + m
    th_tot = float(th.sum())
    val = math.lgamma(y_tot + 1.0) - float(gammaln(y + 1.0).sum())
    val += float((gammaln(th + y) - gammaln(th)).sum())
    val -= math.lgamma(th_tot + y_tot) - math.lgamma(th_tot)
    return val


def update(mixture: DirichletMixture, y: Sequence[int]) -> DirichletMixture:
    """Conjugate multinomial update: component m moves to m + y.

    New weights are proportional to the old ones times the component's
    Dirichlet-multinomial mass of y.
    """
    yv = as_counts(y, mixture.theta.dim)
    if int(yv.sum()) == 0:
        return mixture
    log_terms = []
    keys = []
    for k, w in mixture.components.items():
        if w <= 0.0:
            continue
        mv = np.asarray(k, dtype=np.int64)
        log_terms.append(math.log(w) + _log_dirichlet_multinomial(mixture.theta, mv, yv))
        keys.append(tuple(int(v) for v in (mv + yv)))
    log_terms_arr = np.asarray(log_terms)
    log_norm = float(logsumexp(log_terms_arr))
    comps: dict[tuple[int, ...], float] = {}
    for key, lt in zip(keys, log_terms_arr):
        comps[key] = comps.get(key, 0.0) + math.exp(lt - log_norm)
    return DirichletMixture(mixture.theta, comps).pruned(_PRUNE_EPS)


def predictive_log_mass(mixture: DirichletMixture, y: Sequence[int]) -> float:
    """log of the mixture's Dirichlet-multinomial predictive mass of y."""
    yv = as_counts(y, mixture.theta.dim)
    terms = [
        math.log(w) + _log_dirichlet_multinomial(mixture.theta, np.asarray(k), yv)
        for k, w in mixture.components.items()
        if w > 0.0
    ]
    return float(logsumexp(np.asarray(terms)))


def predict(
    mixture: DirichletMixture,
    dt: float,
    clock: ClockSpec,
    tol: float = 1e-10,
) -> DirichletMixture:
    """Propagate the mixture through the signal's transition over dt.

    Component m spreads over its downward closure: the new weight of l
    gains w_m * q_{|m|,|l|}(dt) * H(l, m).  Tiny negative weights from
    series cancellation are clamped and the row renormalized upstream.
    """
    if dt <= 0:
        raise ConfigError(f"dt must be > 0, got {dt}")
    theta = mixture.theta
    out: dict[tuple[int, ...], float] = {}
    for k, w in mixture.components.items():
        if w <= 0.0:
            continue
        mv = np.asarray(k, dtype=np.int64)
        n = int(mv.sum())
        if n == 0:
            out[k] = out.get(k, 0.0) + w
            continue
        row = conditional_weight_row(theta.total, clock, dt, n, tol)
        for l in _cartesian(*(range(int(v) + 1) for v in mv)):
            lv = np.asarray(l, dtype=np.int64)
            p = row[int(lv.sum())]
            if p <= 0.0:
                continue
            h = hypergeom_pmf(lv, mv)
            if h <= 0.0:
                continue
            out[l] = out.get(l, 0.0) + w * p * h
    return DirichletMixture(theta, out).pruned(_PRUNE_EPS)


def _initial_mixture(model: SwfModel) -> DirichletMixture:
    if isinstance(model.initial, Stationary):
        return DirichletMixture.point(model.theta)
    if isinstance(model.initial, MixtureStart):
        return model.initial.mixture
    raise ConfigError(
        "filtering needs a mixture-of-Dirichlet initial law "
        "(Stationary or MixtureStart), not a fixed point"
    )


def _conditional_filter_steps(
    theta: Theta,
    prior: DirichletMixture,
    data: Sequence[ObservationRecord],
    op_times: np.ndarray,
    tol: float,
) -> tuple[list[DirichletMixture], list[DirichletMixture], list[float]]:
    """Classical filter run at given operational times (one per record).

    Returns (predicted mixtures, updated mixtures, log-likelihood
    increments).  This is the conditional filter given a clock path; with
    the identity clock and op_times equal to the observation times it is
    the Markov filter body.
    """
    ident = identity_clock()
    nu = prior
    prev_r = 0.0
    preds: list[DirichletMixture] = []
    upds: list[DirichletMixture] = []
    incs: list[float] = []
    for rec, r in zip(data, op_times):
        gap = float(r - prev_r)
        pred = predict(nu, gap, ident, tol) if gap > 0 else nu
        inc = predictive_log_mass(pred, rec.counts)
        nu = update(pred, rec.counts)
        preds.append(pred)
        upds.append(nu)
        incs.append(inc)
        prev_r = r
    return preds, upds, incs


def filter_markov(
    model: SwfModel,
    data: Sequence[ObservationRecord],
    tol: float = 1e-10,
    start_time: float = 0.0,
) -> FilterTrace:
    """Forward filter for Markov (subordinator-clock) models.

    Alternates prediction over the time gaps with conjugate updates,
    recording the incremental log marginal likelihoods.
    """
    if not model.clock.markovian:
        raise ConfigError(
            "direct filtering requires a subordinator clock; "
            "use nonmarkov_filter for inverse or composed clocks"
        )
    _validate_data(data, model.theta.dim)
    if data[0].time < start_time:
        raise ConfigError("observations precede the initial time")
    nu = _initial_mixture(model)
    prev_t = start_time
    steps: list[FilterStep] = []
    for rec in data:
        gap = float(rec.time - prev_t)
        pred = predict(nu, gap, model.clock, tol) if gap > 0 else nu
        inc = predictive_log_mass(pred, rec.counts)
        nu = update(pred, rec.counts)
        steps.append(FilterStep(rec.time, rec.counts, pred, nu, inc))
        prev_t = rec.time
    return FilterTrace(steps)


def log_marginal_likelihood(trace: FilterTrace) -> float:
    """Total log marginal likelihood of the filtered dataset."""
    return trace.log_marginal_likelihood


def _log_combine_constant(
    theta: Theta, m: np.ndarray, n: np.ndarray
) -> float:
    """log C_{m,n} with g(x, m) D_{theta+n}(x) = C_{m,n} D_{theta+n+m}(x).

    C_{m,n} = (|th|)_{|m|} / (|th|+|n|)_(|m|) * prod_i (th_i+n_i)_(m_i) /
    (th_i)_(m_i); it follows from matching Dirichlet normalizers.
    """
    th = theta.as_array
    th_tot = theta.total
    m_tot, n_tot = float(m.sum()), float(n.sum())
    val = math.lgamma(th_tot + m_tot) - math.lgamma(th_tot)
    val -= math.lgamma(th_tot + n_tot + m_tot) - math.lgamma(th_tot + n_tot)
    val += float((gammaln(th + n + m) - gammaln(th + n)).sum())
    val -= float((gammaln(th + m) - gammaln(th)).sum())
    return val


def smooth(
    model: SwfModel,
    data: Sequence[ObservationRecord],
    tol: float = 1e-10,
) -> list[DirichletMixture]:
    """Smoothing marginals (posterior of the signal at each observation
    time given the whole dataset) for Markov models.

    A backward information filter runs the same update/predict machinery
    on the reversed data (valid by reversibility against the stationary
    Dirichlet); its mixture against the forward filter combines through
    the product identity g(x, m) D_{theta+n} = C_{m,n} D_{theta+n+m}.
    """
    forward = filter_markov(model, data, tol)
    n_obs = len(data)
    out: list[Optional[DirichletMixture]] = [None] * n_obs
    out[n_obs - 1] = forward.steps[-1].updated
    if n_obs == 1:
        return [m for m in out if m is not None]
    theta = model.theta
    # backward pass: bw approximates the reference posterior of X_i given
    # future data, built from the stationary prior
    bw = update(DirichletMixture.point(theta), data[-1].counts)
    for i in range(n_obs - 2, -1, -1):
        gap = float(data[i + 1].time - data[i].time)
        bw_pred = predict(bw, gap, model.clock, tol)
        fwd = forward.steps[i].updated
        comps: dict[tuple[int, ...], float] = {}
        for mk, mw in bw_pred.components.items():
            if mw <= 0:
                continue
            mv = np.asarray(mk, dtype=np.int64)
            for nk, nw in fwd.components.items():
                if nw <= 0:
                    continue
                nv = np.asarray(nk, dtype=np.int64)
                log_c = _log_combine_constant(theta, mv, nv)
                key = tuple(int(v) for v in (mv + nv))
                comps[key] = comps.get(key, 0.0) + mw * nw * math.exp(log_c)
        out[i] = DirichletMixture(theta, comps).normalized().pruned(_PRUNE_EPS)
        if i > 0:
            bw = update(bw_pred, data[i].counts)
    return [m for m in out if m is not None]


# ---------------------------------------------------------------------------
# Non-Markovian (inverse / composed clock) inference
# ---------------------------------------------------------------------------


def _require_augmented_clock(model: SwfModel):
    if model.clock.kind not in (ClockKind.INVERSE, ClockKind.COMPOSED):
        raise ConfigError(
            "clock-posterior machinery applies to inverse or composed clocks; "
            "subordinator clocks keep the Markov recursion"
        )


def _split_times(data: Sequence[ObservationRecord]) -> tuple[np.ndarray, np.ndarray]:
    """Observation times needing clock draws (t > 0) and a mask.

    An observation at t = 0 sees the signal at operational time 0 exactly.
    """
    times = np.array([r.time for r in data], dtype=float)
    return times[times > 0], times > 0


def _op_times_for(data, clock_values: np.ndarray, positive_mask: np.ndarray) -> np.ndarray:
    op = np.zeros(len(data))
    op[positive_mask] = clock_values
    return op


def _conditional_log_likelihood(
    theta: Theta,
    prior: DirichletMixture,
    data: Sequence[ObservationRecord],
    op_times: np.ndarray,
    tol: float,
) -> float:
    _, _, incs = _conditional_filter_steps(theta, prior, data, op_times, tol)
    return math.fsum(incs)


def clock_posterior_sample(
    model: SwfModel,
    data: Sequence[ObservationRecord],
    rng: np.random.Generator,
    max_attempts: int = 100_000,
    tol: float = 1e-10,
    grid_step: float | None = None,
) -> ClockPosteriorSample:
    """Exact draw of the clock path at the observation times, given data.

    Rejection: propose the prior clock path and accept with probability
    equal to the conditional data likelihood (a product of pmf values,
    hence a valid acceptance probability); the acceptance rate equals the
    marginal likelihood of the data.
    """
    _require_augmented_clock(model)
    if not data:
        # nothing to condition on: the prior path is the posterior
        return ClockPosteriorSample(np.array([]), 1, 0.0)
    _validate_data(data, model.theta.dim)
    prior = _initial_mixture(model)
    pos_times, mask = _split_times(data)
    attempts = 0
    while attempts < max_attempts:
        attempts += 1
        vals = sample_clock_path(model.clock, pos_times, rng, grid_step)
        op = _op_times_for(data, vals, mask)
        log_lik = _conditional_log_likelihood(model.theta, prior, data, op, tol)
        if math.log(rng.uniform()) <= log_lik:
            return ClockPosteriorSample(op, attempts, log_lik)
    raise RejectionExhaustedError(attempts)


def nonmarkov_filter(
    model: SwfModel,
    data: Sequence[ObservationRecord],
    n_clock_draws: int = 1000,
    tol: float = 1e-10,
    rng: np.random.Generator | None = None,
    method: str = "is",
    ess_floor: float = 25.0,
    max_attempts: int = 100_000,
    grid_step: float | None = None,
) -> FilterTrace:
    """Filter for inverse/composed-clock models by clock-path Monte Carlo.

    Mixture weights are posterior averages of conditional (classical)
    filter weights over the clock-path law given the data.  The default
    estimator is self-normalized importance sampling with prior-path
    proposals; ``method="rejection"`` uses exact accepted paths instead
    (acceptance rate equals the marginal likelihood, which shrinks with
    the dataset).  Every reported weight carries a Monte Carlo standard
    error.
    """
    if rng is None:
        raise ConfigError("pass an explicit numpy Generator")
    if method not in ("is", "rejection"):
        raise ConfigError(f"unknown method {method!r}")
    _require_augmented_clock(model)
    _validate_data(data, model.theta.dim)
    if n_clock_draws < 2:
        raise ConfigError("need at least 2 clock draws")
    prior = _initial_mixture(model)
    theta = model.theta
    n_obs = len(data)
    pos_times, mask = _split_times(data)

    if method == "rejection":
        return _nonmarkov_filter_rejection(
            model, data, n_clock_draws, tol, rng, max_attempts, grid_step
        )

    # one prior path per draw; conditional filters share the prefix structure
    preds_all: list[list[DirichletMixture]] = []
    upds_all: list[list[DirichletMixture]] = []
    log_inc_all = np.empty((n_clock_draws, n_obs))
    for s in range(n_clock_draws):
        vals = sample_clock_path(model.clock, pos_times, rng, grid_step)
        op = _op_times_for(data, vals, mask)
        preds, upds, incs = _conditional_filter_steps(theta, prior, data, op, tol)
        preds_all.append(preds)
        upds_all.append(upds)
        log_inc_all[s] = incs
    cum_log = np.cumsum(log_inc_all, axis=1)

    steps: list[FilterStep] = []
    for i in range(n_obs):
        # weights over paths given data up to i (update) and up to i-1 (predict)
        log_w_upd = cum_log[:, i]
        log_w_pred = cum_log[:, i - 1] if i > 0 else np.zeros(n_clock_draws)
        w_upd = _normalized_is_weights(log_w_upd, ess_floor, f"update step {i}")
        w_pred = _normalized_is_weights(log_w_pred, ess_floor, f"prediction step {i}")
        pred_mix = _average_mixtures(theta, [p[i] for p in preds_all], w_pred)
        upd_mix, upd_se = _average_mixtures_with_se(
            theta, [u[i] for u in upds_all], w_upd
        )
        log_inc = float(logsumexp(log_w_upd) - logsumexp(log_w_pred))
        steps.append(
            FilterStep(
                data[i].time, data[i].counts, pred_mix, upd_mix, log_inc, upd_se
            )
        )
    return FilterTrace(steps)


def _normalized_is_weights(log_w: np.ndarray, ess_floor: float, where: str) -> np.ndarray:
    w = np.exp(log_w - logsumexp(log_w))
    ess = 1.0 / float((w ** 2).sum())
    if ess < ess_floor:
        raise NumericalError(
            f"importance sampling degenerated at {where}: effective sample size "
            f"{ess:.1f} below floor {ess_floor:g}; increase n_clock_draws"
        )
    return w


def _average_mixtures(
    theta: Theta, mixtures: list[DirichletMixture], weights: np.ndarray
) -> DirichletMixture:
    comps: dict[tuple[int, ...], float] = {}
    for w_path, mix in zip(weights, mixtures):
        if w_path == 0.0:
            continue
        for k, w in mix.components.items():
            comps[k] = comps.get(k, 0.0) + w_path * w
    return DirichletMixture(theta, comps).pruned(_PRUNE_EPS)


def _average_mixtures_with_se(
    theta: Theta, mixtures: list[DirichletMixture], weights: np.ndarray
) -> tuple[DirichletMixture, dict[tuple[int, ...], float]]:
    keys = sorted({k for mix in mixtures for k in mix.components})
    key_idx = {k: i for i, k in enumerate(keys)}
    mat = np.zeros((len(mixtures), len(keys)))
    for s, mix in enumerate(mixtures):
        for k, w in mix.components.items():
            mat[s, key_idx[k]] = w
    means = weights @ mat
    # delta-method standard errors of a self-normalized estimator
    se = np.sqrt(((weights[:, None] * (mat - means[None, :])) ** 2).sum(axis=0))
    comps = {k: float(means[key_idx[k]]) for k in keys if means[key_idx[k]] > 0}
    ses = {k: float(se[key_idx[k]]) for k in comps}
    mix = DirichletMixture(theta, comps).pruned(_PRUNE_EPS)
    return mix, {k: ses.get(k, 0.0) for k in mix.components}


def _rejection_draws(
    model: SwfModel,
    head: Sequence[ObservationRecord],
    n_accept_obs: int,
    n_draws: int,
    tol: float,
    rng: np.random.Generator,
    max_attempts: int,
    grid_step: float | None,
) -> tuple[list[list[DirichletMixture]], list[list[DirichletMixture]], int, int]:
    """Accepted conditional filters over `head`, accepting on the first
    `n_accept_obs` observations only (the remaining clock increments ride
    along as prior extensions, which is exactly the predictive law)."""
    theta = model.theta
    prior = _initial_mixture(model)
    times = np.array([r.time for r in head])
    pos = times[times > 0]
    mask = times > 0
    preds_out: list[list[DirichletMixture]] = []
    upds_out: list[list[DirichletMixture]] = []
    attempts = 0
    accepted = 0
    while accepted < n_draws:
        if attempts >= max_attempts:
            raise RejectionExhaustedError(attempts)
        attempts += 1
        vals = sample_clock_path(model.clock, pos, rng, grid_step)
        op = _op_times_for(head, vals, mask)
        preds, upds, incs = _conditional_filter_steps(theta, prior, head, op, tol)
        if math.log(rng.uniform()) <= math.fsum(incs[:n_accept_obs]):
            accepted += 1
            preds_out.append(preds)
            upds_out.append(upds)
    return preds_out, upds_out, accepted, attempts


def _nonmarkov_filter_rejection(
    model: SwfModel,
    data: Sequence[ObservationRecord],
    n_clock_draws: int,
    tol: float,
    rng: np.random.Generator,
    max_attempts: int,
    grid_step: float | None,
) -> FilterTrace:
    theta = model.theta
    steps: list[FilterStep] = []
    prev_log_ml = 0.0
    for i in range(len(data)):
        head = data[: i + 1]
        # predictive: accept on y_{0:i-1}, the clock value at t_i is a prior
        # extension of the accepted path
        preds, _, _, _ = _rejection_draws(
            model, head, i, n_clock_draws, tol, rng, max_attempts, grid_step
        )
        # update: accept on y_{0:i}
        _, upds, accepted, attempts = _rejection_draws(
            model, head, i + 1, n_clock_draws, tol, rng, max_attempts, grid_step
        )
        flat = np.full(n_clock_draws, 1.0 / n_clock_draws)
        pred_mix = _average_mixtures(theta, [p[i] for p in preds], flat)
        upd_mix, upd_se = _average_mixtures_with_se(theta, [u[i] for u in upds], flat)
        log_ml = math.log(accepted / attempts)
        steps.append(
            FilterStep(
                data[i].time,
                data[i].counts,
                pred_mix,
                upd_mix,
                log_ml - prev_log_ml,
                upd_se,
            )
        )
        prev_log_ml = log_ml
    return FilterTrace(steps)
