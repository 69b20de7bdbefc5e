"""The subordinated dual process.

The time-changed dual is a nonincreasing jump process on Z_+^K whose
time-marginals carry the transition-mixture weights of the signal.  Its
total obeys series laws built from the clock's Laplace transform evaluated
at the death rates lambda_j:

  unconditional (entrance from infinity):
      q_m(t)   = sum_{j >= m} (-1)^(j-m) Phi_t(lambda_j) a_{j,m}
  conditional on a finite start total n:
      q_{n,k}(t) = sum_{j=k}^{n} (-1)^(j-k) Phi_t(lambda_j) a_{j,k}^{(n)},

with the conditional coefficients damped by a falling factorial that
truncates the sum exactly at j = n.  Coordinate allocation of a drop in
total is multivariate hypergeometric.

Everything expensive is memoized in a per-(theta_total, clock) context:
death rates, Levy exponents at death rates, Phi rows per t, coefficient
log-magnitude rows, and the term tables behind the exact sampler.  The
sampler follows the retrospective alternating-series scheme: per-total
partial sums form certified lower/upper envelopes of the CDF once the
terms pass their eventual-decrease index, and a uniform draw is located by
refining all envelopes in lockstep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import mpmath
import numpy as np
from scipy.special import gammaln

from .clocks import (
    ClockKind,
    ClockSpec,
    Family,
    SubordinatorFamily,
    clock_laplace,
    subordinator_clock,
)
from .errors import (
    ConfigError,
    InadmissibleClockError,
    NonConvergenceError,
    NumericalError,
    ToleranceError,
)
from .special import SignedLog, sum_signed
from .wf import as_counts, lambda_n

__all__ = [
    "AdmissibleWithDrift",
    "AdmissibleStableLike",
    "NotAdmissible",
    "check_admissible",
    "DualWeightQuery",
    "DualContext",
    "get_context",
    "qtilde_weight",
    "qtilde_sample",
    "conditional_weight_row",
    "unconditional_weight_table",
    "hypergeom_pmf",
    "hypergeom_sample",
    "dual_transition_pmf",
    "dual_jump_rates",
    "dual_path_sample",
]

# Negative weights below this magnitude are cancellation noise and are
# clamped to zero (rows are then renormalized); anything more negative is a
# genuine numerical failure.
_CLAMP_EPS = 1e-12
_NEGATIVE_HARD_LIMIT = -1e-8


# ---------------------------------------------------------------------------
# Admissibility (conditions for direct alternating-series sampling)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AdmissibleWithDrift:
    drift: float


@dataclass(frozen=True)
class AdmissibleStableLike:
    alpha: float


@dataclass(frozen=True)
class NotAdmissible:
    reason: str


Admissibility = Union[AdmissibleWithDrift, AdmissibleStableLike, NotAdmissible]


def check_admissible(clock: ClockSpec, theta_total: float) -> Admissibility:
    """Classify whether the direct dual sampler may run on this clock.

    Requires a subordinator clock with either positive drift or small-jump
    behaviour pi(du) ~ u^(-1-alpha) with alpha strictly inside (1/2, 1).
    The boundary alpha = 1/2 (inverse-Gaussian) fails the strict condition.
    """
    if theta_total <= 0:
        raise ConfigError("theta_total must be positive")
    if clock.kind is not ClockKind.SUB:
        return NotAdmissible("direct dual sampling applies to subordinator clocks only")
    fam = clock.family
    if fam.effective_drift > 0:
        return AdmissibleWithDrift(fam.effective_drift)
    alpha = fam.pi_zero_exponent
    if alpha is not None and 0.5 < alpha < 1.0:
        return AdmissibleStableLike(alpha)
    if alpha is None:
        return NotAdmissible(
            f"{fam.family.value} family has no drift and finitely many small jumps"
        )
    return NotAdmissible(
        f"small-jump exponent alpha={alpha:g} outside (1/2, 1) and no drift"
    )


# ---------------------------------------------------------------------------
# Context: memoized tables per (theta_total, clock)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DualWeightQuery:
    """Weight query: law of the dual total at time t.

    ``start_total`` absent means the process enters from infinity (the
    weights of the stationary-entrance mixture); present means the
    conditional law started from that finite total.
    """

    theta_total: float
    clock: ClockSpec
    t: float
    start_total: Optional[int] = None

    def __post_init__(self):
        if self.theta_total <= 0:
            raise ConfigError("theta_total must be positive")
        if self.t < 0:
            raise ConfigError("t must be >= 0")
        if self.start_total is not None and self.start_total < 0:
            raise ConfigError("start_total must be >= 0 when present")


class DualContext:
    """Read-after-build caches for one (theta_total, clock) pair.

    Safe for concurrent reads once warmed; build steps are idempotent so a
    benign race only repeats work.
    """

    def __init__(self, theta_total: float, clock: ClockSpec, j_cap: int = 50_000):
        if theta_total <= 0:
            raise ConfigError("theta_total must be positive")
        self.theta_total = float(theta_total)
        self.clock = clock
        self.j_cap = j_cap
        self._lam = np.zeros(0)
        self._psi_lam: Optional[np.ndarray] = np.zeros(0) if clock.markovian else None
        self._log_a_rows: dict[int, np.ndarray] = {}
        self._phi_rows: dict[float, list[float]] = {}
        self._cond_rows: dict[tuple[float, int, float], np.ndarray] = {}
        self._sampler_tables: dict[float, _SamplerTable] = {}
        self._d0: dict[float, Optional[int]] = {}
        # Phi error model: exp/Mittag-Leffler paths are relatively accurate
        # (validated ~1e-15; 2e-13 budgeted), the Volterra route carries an
        # absolute kernel-inversion error instead.
        if clock.markovian or self._ml_fast_path():
            self.phi_rel_err, self.phi_abs_err = 2e-13, 0.0
        else:
            self.phi_rel_err, self.phi_abs_err = 0.0, 5e-8

    def _ml_fast_path(self) -> bool:
        fam = None
        if self.clock.kind is ClockKind.INVERSE:
            fam = self.clock.family
        elif self.clock.kind is ClockKind.COMPOSED:
            fam = self.clock.outer
        if fam is None:
            return False
        return (
            fam.family in (Family.IDENTITY, Family.DRIFT)
            or (fam.family is Family.STABLE and fam.beta == 0.0)
        )

    # -- death rates and Levy exponents ------------------------------------

    def lam(self, j: int) -> float:
        self._ensure_lam(j)
        return float(self._lam[j])

    def _ensure_lam(self, j: int):
        if self._lam.size <= j:
            idx = np.arange(self._lam.size, j + 1, dtype=float)
            new = 0.5 * idx * (idx + self.theta_total - 1.0)
            self._lam = np.concatenate([self._lam, new])
            if self._psi_lam is not None:
                fam = self.clock.family
                self._psi_lam = np.concatenate(
                    [self._psi_lam, np.array([fam.psi(v) for v in new])]
                )

    def psi_lam(self, j: int) -> float:
        if self._psi_lam is None:
            raise ConfigError("psi(lambda_j) defined for subordinator clocks only")
        self._ensure_lam(j)
        return float(self._psi_lam[j])

    # -- Phi values ----------------------------------------------------------

    def log_phi(self, t: float, j: int) -> float:
        """log Phi_t(lambda_j)."""
        if self.clock.markovian:
            return -t * self.psi_lam(j)
        row = self._phi_rows.setdefault(t, [])
        while len(row) <= j:
            jj = len(row)
            val = clock_laplace(self.clock, t, self.lam(jj), tol=1e-8)
            row.append(math.log(val) if val > 0 else -math.inf)
        return row[j]

    # -- coefficient magnitudes ----------------------------------------------

    def log_a_row(self, m: int, j_max: int) -> np.ndarray:
        """log a_{j,m} for j = m..j_max as a vector (extended on demand)."""
        row = self._log_a_rows.get(m)
        need = j_max - m + 1
        if row is None or row.size < need:
            j = np.arange(m, j_max + 1, dtype=float)
            th = self.theta_total
            with np.errstate(divide="ignore", invalid="ignore"):
                row = (
                    np.log(2.0 * j + th - 1.0)
                    + gammaln(m + th + j - 1.0)
                    - gammaln(m + th)
                    - gammaln(m + 1.0)
                    - gammaln(j - m + 1.0)
                )
            if m == 0:
                row[0] = 0.0  # a_{0,0} = 1 exactly; the generic form is 0 * inf
            self._log_a_rows[m] = row
        return self._log_a_rows[m][:need]

    def log_a(self, j: int, m: int) -> float:
        if j < m:
            raise ConfigError("log_a needs j >= m")
        return float(self.log_a_row(m, j)[j - m])

    # -- D0 shortcut for the eventual-decrease index ---------------------------

    def d0(self, t: float) -> Optional[int]:
        """Index beyond which B_m = 0, available when the drift is positive."""
        if t in self._d0:
            return self._d0[t]
        result: Optional[int] = None
        if self.clock.markovian and self.clock.family.effective_drift > 0:
            beta = self.clock.family.effective_drift
            th = self.theta_total
            k = max(0, math.ceil(1.0 / (t * beta) - (th + 1.0) / 2.0))
            for _ in range(self.j_cap):
                gap = self.psi_lam(k + 1) - self.psi_lam(k)
                if (th + 2.0 * k + 1.0) * math.exp(-t * gap) < 1.0:
                    result = k
                    break
                k += 1
            else:  # pragma: no cover - drift guarantees termination
                raise NonConvergenceError("could not locate the D0 index")
        self._d0[t] = result
        return result


_context_cache: dict[tuple[float, ClockSpec], DualContext] = {}


def get_context(theta_total: float, clock: ClockSpec) -> DualContext:
    key = (float(theta_total), clock)
    ctx = _context_cache.get(key)
    if ctx is None:
        if len(_context_cache) > 64:
            _context_cache.clear()
        ctx = DualContext(theta_total, clock)
        _context_cache[key] = ctx
    return ctx


# ---------------------------------------------------------------------------
# Weight evaluation
# ---------------------------------------------------------------------------


def _clamp_weight(value: float, tol: float) -> float:
    if value < min(_NEGATIVE_HARD_LIMIT, -tol):
        raise NumericalError(
            f"series weight {value:.3e} is negative beyond cancellation noise"
        )
    if abs(value) < _CLAMP_EPS:
        return 0.0
    return min(max(value, 0.0), 1.0)


def _mp_supported(ctx: DualContext) -> bool:
    return ctx.clock.markovian


def _weight_mp(ctx: DualContext, t: float, m: int, n: Optional[int], dps: int) -> float:
    """High-precision re-summation; subordinator clocks only (analytic psi)."""
    fam = ctx.clock.family
    th = mpmath.mpf(ctx.theta_total)
    with mpmath.workdps(dps):
        def lam_mp(j):
            jj = mpmath.mpf(j)
            return jj * (jj + th - 1) / 2

        def log_a_mp(j, mm):
            if j == 0:
                return mpmath.mpf(0)
            return (
                mpmath.log(2 * j + th - 1)
                + mpmath.loggamma(mm + th + j - 1)
                - mpmath.loggamma(mm + th)
                - mpmath.loggamma(mpmath.mpf(mm + 1))
                - mpmath.loggamma(mpmath.mpf(j - mm + 1))
            )

        def term(j):
            log_t = log_a_mp(j, m) - mpmath.mpf(t) * fam.psi_mp(lam_mp(j))
            if n is not None:
                log_t += (
                    mpmath.loggamma(mpmath.mpf(n + 1))
                    - mpmath.loggamma(mpmath.mpf(n - j + 1))
                    - (mpmath.loggamma(n + th + j) - mpmath.loggamma(n + th))
                )
            return (-1) ** (j - m) * mpmath.e ** log_t

        if n is not None:
            total = mpmath.fsum(term(j) for j in range(m, n + 1))
        else:
            total = mpmath.mpf(0)
            decrease_seen = False
            prev_abs = None
            for j in range(m, ctx.j_cap):
                tj = term(j)
                total += tj
                a = abs(tj)
                if prev_abs is not None and a < prev_abs:
                    decrease_seen = True
                if decrease_seen and a < mpmath.mpf(10) ** (-dps + 5):
                    break
                prev_abs = a
            else:  # pragma: no cover
                raise NonConvergenceError("high-precision series did not converge")
        return float(total)


def _weight_conditional(ctx: DualContext, t: float, k: int, n: int, tol: float) -> float:
    if k > n:
        return 0.0
    terms: list[SignedLog] = []
    th = ctx.theta_total
    log_a = ctx.log_a_row(k, n)  # j = k..n
    log_ff = gammaln(n + 1.0) - gammaln(n - np.arange(k, n + 1) + 1.0)
    log_rf = gammaln(n + th + np.arange(k, n + 1)) - gammaln(n + th)
    for j in range(k, n + 1):
        log_term = log_a[j - k] + log_ff[j - k] - log_rf[j - k] + ctx.log_phi(t, j)
        sign = 1 if (j - k) % 2 == 0 else -1
        terms.append(SignedLog(sign, log_term))
    value, log_abs = sum_signed(terms)
    err = math.exp(log_abs) * (5e-15 + ctx.phi_rel_err) if log_abs > -math.inf else 0.0
    if ctx.phi_abs_err:
        err += math.exp(float(max(log_a))) * ctx.phi_abs_err * (n - k + 1)
    if err > tol:
        if _mp_supported(ctx):
            digits = int((log_abs - math.log(max(abs(value), tol))) / math.log(10.0))
            return _weight_mp(ctx, t, k, n, max(30, digits + 25))
        raise ToleranceError(
            f"conditional weight q_({n},{k})({t:g}) cannot reach tol={tol:g}: "
            f"the error floor is ~{err:.1e} and the clock's Phi is not available "
            "in high precision"
        )
    return value


def _weight_unconditional(ctx: DualContext, t: float, m: int, tol: float) -> float:
    terms: list[SignedLog] = []
    prev_log: Optional[float] = None
    decrease_at: Optional[int] = None
    log_tol = math.log(tol) - 2.0
    j = m
    while True:
        if j - m > ctx.j_cap:
            raise NonConvergenceError(
                f"series for weight m={m} at t={t:g} did not reach its "
                "eventual-decrease index; see check_admissible for this clock"
            )
        log_b = ctx.log_a(j, m) + ctx.log_phi(t, j)
        terms.append(SignedLog(1 if (j - m) % 2 == 0 else -1, log_b))
        if prev_log is not None:
            if decrease_at is None and log_b < prev_log:
                decrease_at = j
            elif decrease_at is not None and log_b > prev_log + 1e-12:
                raise NumericalError(
                    "series terms increased after their eventual-decrease index; "
                    "refusing to trust the tail bound"
                )
        if decrease_at is not None and log_b < log_tol:
            tail = math.exp(log_b)
            break
        prev_log = log_b
        j += 1
    value, log_abs = sum_signed(terms)
    err = (math.exp(log_abs) * (5e-15 + ctx.phi_rel_err) if log_abs > -math.inf else 0.0) + tail
    if ctx.phi_abs_err:
        err += math.exp(max(s.log_abs for s in terms)) * ctx.phi_abs_err * len(terms)
    if err > tol:
        if _mp_supported(ctx):
            digits = int((log_abs - math.log(max(abs(value), tol))) / math.log(10.0))
            return _weight_mp(ctx, t, m, None, max(30, digits + 25))
        raise ToleranceError(
            f"weight q_{m}({t:g}) cannot reach tol={tol:g} in double precision "
            "and the clock's Phi is not available in high precision"
        )
    return value


def qtilde_weight(query: DualWeightQuery, m: int, tol: float = 1e-10) -> float:
    """Dual-total weight q_m(t) (or q_{n,m}(t) when start_total = n).

    Certified within `tol`: exact truncation in the conditional case, the
    monotone alternating tail bound past the eventual-decrease index in the
    unconditional case; falls back to high-precision arithmetic when double
    precision cannot carry the cancellation.
    """
    if m < 0:
        raise ConfigError("m must be >= 0")
    ctx = get_context(query.theta_total, query.clock)
    n = query.start_total
    if n is not None:
        if m > n:
            return 0.0
        if query.t == 0.0:
            return 1.0 if m == n else 0.0
        return _clamp_weight(_weight_conditional(ctx, query.t, m, n, tol), tol)
    if query.t == 0.0:
        raise ConfigError("entrance-law weights need t > 0")
    return _clamp_weight(_weight_unconditional(ctx, query.t, m, tol), tol)


def conditional_weight_row(
    theta_total: float, clock: ClockSpec, t: float, n: int, tol: float = 1e-10
) -> np.ndarray:
    """Row (q_{n,k}(t))_{k=0..n}: clamped, validated, renormalized.

    Cached per (t, n) in the clock context; this is the workhorse of the
    prediction step.
    """
    ctx = get_context(theta_total, clock)
    key = (t, n, tol)
    cached = ctx._cond_rows.get(key)
    if cached is not None:
        return cached
    if t == 0.0:
        row = np.zeros(n + 1)
        row[n] = 1.0
    else:
        row = np.array(
            [_weight_conditional(ctx, t, k, n, tol) for k in range(n + 1)]
        )
        bad = row < min(_NEGATIVE_HARD_LIMIT, -tol)
        if np.any(bad):
            raise NumericalError(
                f"conditional weight row n={n}, t={t:g} has entries "
                f"{row[bad]} below the cancellation floor"
            )
        row[np.abs(row) < _CLAMP_EPS] = 0.0
        row = np.clip(row, 0.0, None)
        total = row.sum()
        if not 0.0 < total < 2.0 or abs(total - 1.0) > 1e-4:
            raise NumericalError(
                f"conditional weight row n={n}, t={t:g} sums to {total:.6g}"
            )
        row = row / total
    row.setflags(write=False)
    ctx._cond_rows[key] = row
    return row


def unconditional_weight_table(
    query: DualWeightQuery, tol: float = 1e-10, mass_tol: float = 1e-9, m_cap: int = 10_000
) -> np.ndarray:
    """Weights q_m(t) for m = 0.. until all but `mass_tol` mass is covered."""
    if query.start_total is not None:
        n = query.start_total
        return conditional_weight_row(query.theta_total, query.clock, query.t, n, tol)
    out: list[float] = []
    acc = 0.0
    m = 0
    while acc < 1.0 - mass_tol:
        if m > m_cap:
            raise NonConvergenceError(
                f"weight table did not accumulate mass 1 - {mass_tol:g} by m={m_cap}"
            )
        w = qtilde_weight(query, m, tol)
        out.append(w)
        acc += w
        m += 1
    return np.asarray(out)


# ---------------------------------------------------------------------------
# Exact sampling of the dual total (retrospective alternating envelopes)
# ---------------------------------------------------------------------------


class _SamplerRow:
    __slots__ = ("log_b", "prefix", "B", "max_log_b")

    def __init__(self):
        self.log_b: list[float] = []
        self.prefix: list[float] = []
        self.B: Optional[int] = None
        self.max_log_b: float = -math.inf


class _SamplerTable:
    """Term/prefix tables shared by every draw at a fixed (context, t)."""

    def __init__(self, ctx: DualContext, t: float):
        self.ctx = ctx
        self.t = t
        self.rows: dict[int, _SamplerRow] = {}
        self.d0 = ctx.d0(t)

    def row(self, m: int) -> _SamplerRow:
        r = self.rows.get(m)
        if r is None:
            r = _SamplerRow()
            self.rows[m] = r
        return r

    def _extend(self, m: int, upto: int):
        """Ensure term indices i = 0..upto exist for row m."""
        r = self.row(m)
        ctx = self.ctx
        while len(r.log_b) <= upto:
            i = len(r.log_b)
            j = m + i
            log_b = ctx.log_a(j, m) + ctx.log_phi(self.t, j)
            if r.B is not None and i > r.B and log_b > r.log_b[-1] + 1e-12:
                raise NumericalError(
                    f"sampler terms for m={m} increased past the decrease index"
                )
            r.log_b.append(log_b)
            r.max_log_b = max(r.max_log_b, log_b)
            term = math.exp(log_b) if log_b > -745.0 else 0.0
            prev = r.prefix[-1] if r.prefix else 0.0
            r.prefix.append(prev + (term if i % 2 == 0 else -term))

    def locate_B(self, m: int) -> int:
        r = self.row(m)
        if r.B is not None:
            return r.B
        if self.d0 is not None and m > self.d0:
            r.B = 0
            self._extend(m, 1)
            return 0
        self._extend(m, 1)
        i = 0
        while True:
            if i + 1 >= len(r.log_b):
                self._extend(m, i + 1)
            if r.log_b[i + 1] < r.log_b[i]:
                r.B = i
                return i
            i += 1
            if i > self.ctx.j_cap:
                raise NonConvergenceError(
                    f"eventual-decrease index for m={m}, t={self.t:g} not found "
                    f"within {self.ctx.j_cap} terms; check_admissible for this clock"
                )

    def bounds(self, m: int, k_m: int) -> tuple[float, float]:
        """(lower, upper) partial-CDF contribution of row m at depth k_m."""
        self._extend(m, 2 * k_m + 1)
        r = self.rows[m]
        return r.prefix[2 * k_m + 1], r.prefix[2 * k_m]

    def noise(self, m_max: int) -> float:
        """Bound on accumulated rounding error of the envelope sums.

        Each row's partial sums carry roundoff below max-term * eps per
        added term; at small t the terms peak enormously and this floor,
        not the refinement depth, limits what the sampler can resolve.
        """
        total = 0.0
        for m in range(m_max + 1):
            r = self.rows.get(m)
            if r is not None and r.max_log_b > -math.inf:
                total += math.exp(r.max_log_b) * 1e-16 * (len(r.log_b) + 1)
        return total


def qtilde_sample(
    query: DualWeightQuery,
    rng: np.random.Generator,
    max_refinements: int = 1_000_000,
) -> int:
    """Exact draw of the dual total.

    Entrance-law queries run the retrospective alternating-series scheme;
    admissibility is enforced first (identity clocks always pass).  Queries
    with a finite start total sample the exactly-truncated conditional row
    by inversion.
    """
    ctx = get_context(query.theta_total, query.clock)
    if query.start_total is not None:
        row = conditional_weight_row(
            query.theta_total, query.clock, query.t, query.start_total
        )
        return int(rng.choice(row.size, p=row))
    if query.t == 0.0:
        raise ConfigError("entrance-law sampling needs t > 0")
    if not query.clock.is_identity:
        adm = check_admissible(query.clock, query.theta_total)
        if isinstance(adm, NotAdmissible):
            raise InadmissibleClockError(
                f"direct dual sampling rejected: {adm.reason}"
            )
    table = ctx._sampler_tables.get(query.t)
    if table is None:
        if len(ctx._sampler_tables) > 32:
            ctx._sampler_tables.clear()
        table = _SamplerTable(ctx, query.t)
        ctx._sampler_tables[query.t] = table

    u = float(rng.uniform())
    ks: list[int] = []
    lowers: list[float] = []
    uppers: list[float] = []
    refinements = 0
    m = 0
    while True:
        b_m = table.locate_B(m)
        ks.append((b_m + 1) // 2)
        lo, hi = table.bounds(m, ks[m])
        lowers.append(lo)
        uppers.append(hi)
        s_minus = math.fsum(lowers)
        s_plus = math.fsum(uppers)
        eta = table.noise(m)
        # separation must clear the rounding-noise floor of the envelopes,
        # otherwise the decision would be made on noise, not on the series
        while not (u < s_minus - eta or u > s_plus + eta):
            refinements += 1
            if refinements > max_refinements or (
                s_plus - s_minus < eta and eta > 1e-13
            ):
                raise NumericalError(
                    f"cannot resolve the dual-total draw at t={query.t:g}: "
                    f"envelope width {s_plus - s_minus:.3e} vs rounding floor "
                    f"{eta:.3e} after {refinements} refinements; the time "
                    "argument is below the double-precision feasibility range"
                )
            for j in range(len(ks)):
                ks[j] += 1
                lowers[j], uppers[j] = table.bounds(j, ks[j])
            s_minus = math.fsum(lowers)
            s_plus = math.fsum(uppers)
            eta = table.noise(m)
        if u < s_minus - eta:
            return m
        m += 1
        if m > ctx.j_cap:  # pragma: no cover - CDF reaches 1 long before
            raise NonConvergenceError("dual-total sampler failed to terminate")


# ---------------------------------------------------------------------------
# Coordinate allocation and the full transition law
# ---------------------------------------------------------------------------


def hypergeom_pmf(l: Sequence[int], m: Sequence[int]) -> float:
    """Multivariate hypergeometric mass of allocation l out of pools m."""
    lv = as_counts(l)
    mv = as_counts(m, lv.size)
    if np.any(lv > mv):
        return 0.0
    l_tot, m_tot = int(lv.sum()), int(mv.sum())
    if m_tot == 0:
        return 1.0
    log_p = -(gammaln(m_tot + 1) - gammaln(l_tot + 1) - gammaln(m_tot - l_tot + 1))
    for li, mi in zip(lv, mv):
        log_p += gammaln(mi + 1) - gammaln(li + 1) - gammaln(mi - li + 1)
    return float(math.exp(log_p))


def hypergeom_sample(
    m: Sequence[int], k_total: int, rng: np.random.Generator
) -> np.ndarray:
    """Allocate a total of k_total across coordinates hypergeometrically."""
    mv = as_counts(m)
    if k_total < 0 or k_total > int(mv.sum()):
        raise ConfigError(
            f"k_total must lie in [0, {int(mv.sum())}], got {k_total}"
        )
    return rng.multivariate_hypergeometric(mv.tolist(), k_total).astype(np.int64)


def dual_transition_pmf(
    theta_total: float,
    clock: ClockSpec,
    t: float,
    from_: Sequence[int],
    to: Sequence[int],
    tol: float = 1e-10,
) -> float:
    """P[dual(t) = `to` | dual(0) = `from_`] = q_{|m|,|l|}(t) H(l, m)."""
    mv = as_counts(from_)
    lv = as_counts(to, mv.size)
    if t < 0:
        raise ConfigError("t must be >= 0")
    if np.any(lv > mv):
        return 0.0
    h = hypergeom_pmf(lv, mv)
    if h == 0.0:
        return 0.0
    row = conditional_weight_row(theta_total, clock, t, int(mv.sum()), tol)
    return float(row[int(lv.sum())] * h)


def dual_jump_rates(
    theta_total: float,
    fam: SubordinatorFamily,
    from_: Sequence[int],
    to: Sequence[int],
) -> float:
    """Jump rate of the subordinated dual from `from_` to `to` (strict drop).

    rate = H(to, from_) * sum_{j=|to|}^{|from_|} (-1)^(j-|to|+1)
           a_{j,|to|}^{(|from_|)} psi(lambda_j).
    """
    mv = as_counts(from_)
    lv = as_counts(to, mv.size)
    n, k = int(mv.sum()), int(lv.sum())
    if k >= n:
        raise ConfigError("dual jumps strictly decrease the total")
    if np.any(lv > mv):
        return 0.0
    h = hypergeom_pmf(lv, mv)
    if h == 0.0:
        return 0.0
    ctx = get_context(theta_total, subordinator_clock(fam))
    th = theta_total
    log_a = ctx.log_a_row(k, n)
    log_ff = gammaln(n + 1.0) - gammaln(n - np.arange(k, n + 1) + 1.0)
    log_rf = gammaln(n + th + np.arange(k, n + 1)) - gammaln(n + th)
    terms = []
    for j in range(k, n + 1):
        psi_j = fam.psi(lambda_n(th, j))
        if psi_j == 0.0:
            continue
        log_term = log_a[j - k] + log_ff[j - k] - log_rf[j - k] + math.log(psi_j)
        sign = -1 if (j - k) % 2 == 0 else 1
        terms.append(SignedLog(sign, log_term))
    value, _ = sum_signed(terms)
    if value < -1e-6:
        raise NumericalError(f"negative dual jump rate {value:.3e}")
    return max(value, 0.0) * h


# ---------------------------------------------------------------------------
# Dual path simulation (embedded death path on the clock's operational time)
# ---------------------------------------------------------------------------


def _death_path_events(
    theta_total: float,
    start: np.ndarray,
    horizon: float,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Classical pure-death path: event times and states up to `horizon`."""
    state = start.copy()
    times = [0.0]
    states = [state.copy()]
    s = 0.0
    total = int(state.sum())
    while total > 0:
        rate = lambda_n(theta_total, total)
        s += rng.exponential(1.0 / rate)
        if s > horizon:
            break
        probs = state / total
        i = int(rng.choice(state.size, p=probs))
        state[i] -= 1
        total -= 1
        times.append(s)
        states.append(state.copy())
    return np.asarray(times), np.asarray(states)


def dual_path_sample(
    theta_total: float,
    clock: ClockSpec,
    start: Sequence[int],
    times: Sequence[float],
    rng: np.random.Generator,
    grid_step: float | None = None,
) -> np.ndarray:
    """Dual trajectory observed at the given times (one row per time).

    A classical death path runs on operational time; the clock supplies a
    joint draw of its values at the query times.  The time change preserves
    the duality relation, so this is equivalent in law to simulating the
    subordinated dual's own jump rates.
    """
    from .clocks import sample_clock_path

    start_v = as_counts(start)
    ts = np.asarray(list(times), dtype=float)
    if ts.size == 0:
        return np.zeros((0, start_v.size), dtype=np.int64)
    if np.any(ts < 0) or np.any(np.diff(ts) < 0):
        raise ConfigError("times must be ascending and >= 0")
    if clock.is_identity:
        c_vals = ts
    else:
        c_vals = sample_clock_path(clock, ts, rng, grid_step)
    ev_times, ev_states = _death_path_events(
        theta_total, start_v, float(c_vals[-1]) if c_vals.size else 0.0, rng
    )
    idx = np.searchsorted(ev_times, c_vals, side="right") - 1
    return ev_states[idx].astype(np.int64)
