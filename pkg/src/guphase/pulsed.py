"""Exact evaluation of the quartic phase for Dirac pulse trains.

The quintuple delta-constrained simplex integral reduces to a sum over pulse
index tuples of four Heaviside-gated cases, each a signed union of oriented
one-dimensional intervals; the remaining integrals of four-cosine products
are done in closed form by product-to-sum expansion.

Coincident pulse times (repeated indices in the tuple sums) are weighted by
ordered-simplex fractions: a block of m coincident times in a Heaviside
chain contributes 1/m!, the convention consistent with the delta train as a
limit of narrow smooth pulses.  Times are handled internally in units of the
trap frequency; phases are returned in seconds.

Sites are numbered 1..N, pulse indices run 0..3.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from itertools import combinations_with_replacement, permutations, product

import numpy as np

from .errors import NumericalFailureError
from .lattice import ChainSpec, NormalModes
from .magnus import PhaseResult

_TIE_RTOL = 1e-12

# sign patterns of the product-to-sum expansion of a four-cosine product;
# cos is even, so patterns with the first sign fixed suffice (8 of 16)
_SIGNS = np.array([s for s in product((1.0, -1.0), repeat=4) if s[0] == 1.0])

# Heaviside cases: chain of slot ids gated descending after the evaluation
# time, and the oriented intervals (weight, lower slot, upper slot) implied;
# slots 1..4 name pulse times, 0 the origin, 5 the evaluation time.
_CASES = (
    ((4, 3, 2, 1), ((1.0, 3, 4), (-1.0, 4, 5))),
    ((1, 4, 3, 2), ((4.0, 3, 4), (-4.0, 4, 1), (-1.0, 0, 3))),
    ((1, 3, 2, 4), ((1.0, 3, 1),)),
    ((1, 3, 4, 2), ((1.0, 3, 1),)),
)


@dataclass(frozen=True)
class PulseSchedule:
    """Four-pulse-per-site Dirac train.

    Site k (1-based) is hit at t0 + i*period + (k-1)*site_delay for
    i = 0..3.  ``strength`` is the delta area of one pulse.  The first pulse
    must be strictly after time zero, where the interaction starts.
    """

    t0: float
    period: float
    site_delay: float
    strength: float
    eval_time: float
    pulses_per_site = 4

    def __post_init__(self):
        if not self.t0 > 0:
            raise ValueError("t0 must be > 0 (a pulse at the start of the "
                             "interaction is ill-defined)")
        if not self.period > 0:
            raise ValueError("period must be > 0")
        if self.site_delay < 0:
            raise ValueError("site_delay must be >= 0")
        if self.strength < 0:
            raise ValueError("strength must be >= 0")

    @classmethod
    def for_chain(cls, spec: ChainSpec, t0: float, period: float | None = None,
                  site_delay: float | None = None, strength: float = 1.0,
                  eval_time: float | None = None) -> "PulseSchedule":
        """Schedule with the standard defaults, validated against the chain.

        Defaults: period = pi/(2 Omega), site_delay = period/(2N), and
        eval_time = last pulse + one trap period.
        """
        if period is None:
            period = math.pi / (2.0 * spec.trap_freq)
        if site_delay is None:
            site_delay = period / (2.0 * spec.n_sites)
        last = t0 + 3.0 * period + (spec.n_sites - 1) * site_delay
        if eval_time is None:
            eval_time = last + 2.0 * math.pi / spec.trap_freq
        sched = cls(t0=t0, period=period, site_delay=site_delay,
                    strength=strength, eval_time=eval_time)
        sched.validate_for(spec)
        return sched

    def validate_for(self, spec: ChainSpec) -> None:
        """Re-injection and evaluation-time constraints against a chain."""
        if self.period < spec.n_sites * self.site_delay:
            raise ValueError(
                f"re-injection constraint violated: period {self.period} < "
                f"{spec.n_sites} * site_delay {self.site_delay}"
            )
        last = self.last_pulse_time(spec.n_sites)
        if not self.eval_time > last:
            raise ValueError(
                f"eval_time {self.eval_time} must be strictly after the last "
                f"pulse at {last}"
            )

    def last_pulse_time(self, n_sites: int) -> float:
        return self.t0 + 3.0 * self.period + (n_sites - 1) * self.site_delay


def pulse_times(schedule: PulseSchedule, site: int, pulse_index: int) -> float:
    """Arrival time of one pulse: t0 + pulse_index*T + (site-1)*tau."""
    if site < 1:
        raise IndexError(f"site must be >= 1, got {site}")
    if not 0 <= pulse_index < schedule.pulses_per_site:
        raise IndexError(
            f"pulse_index must be in 0..{schedule.pulses_per_site - 1}"
        )
    return schedule.t0 + pulse_index * schedule.period + (site - 1) * schedule.site_delay


@dataclass(frozen=True)
class IntervalSum:
    """Signed, weighted union of oriented intervals: sum of w * int_a^b."""

    terms: tuple

    def __iter__(self):
        return iter(self.terms)

    def __len__(self):
        return len(self.terms)


def _ordering_fraction(values, tol: float) -> float:
    """Fraction of jitter orderings satisfying a weakly-descending chain.

    Strictly ascending neighbors kill the chain; every maximal block of m
    coincident values contributes 1/m! (the probability that i.i.d. jitters
    around a common center fall in the one required order).
    """
    for a, b in zip(values, values[1:]):
        if b - a > tol:
            return 0.0
    frac = 1.0
    i = 0
    n = len(values)
    while i < n:
        j = i
        while j + 1 < n and abs(values[j + 1] - values[i]) <= tol:
            j += 1
        frac /= math.factorial(j - i + 1)
        i = j + 1
    return frac


def _zero_barrier(theta, tol: float) -> float:
    """Weight of the deltas against the integration floor at time zero.

    Pulses before time zero never fire; a pulse exactly at zero keeps half
    its mass inside the integration range.
    """
    w = 1.0
    for th in theta:
        if th < -tol:
            return 0.0
        if abs(th) <= tol:
            w *= 0.5
    return w


def heaviside_decomposition(theta, t: float) -> IntervalSum:
    """Signed interval list of the four Heaviside cases for one time tuple.

    ``theta`` holds the four pinned pulse times; ``t`` is the evaluation
    time.  Coincident times receive ordered-simplex fraction weights.
    """
    theta = tuple(float(x) for x in theta)
    if len(theta) != 4:
        raise ValueError("theta must hold exactly four times")
    scale = max(1.0, abs(t), max(abs(x) for x in theta))
    tol = _TIE_RTOL * scale
    barrier = _zero_barrier(theta, tol)
    if barrier == 0.0:
        return IntervalSum(terms=())

    def slot(idx):
        if idx == 0:
            return 0.0
        if idx == 5:
            return t
        return theta[idx - 1]

    terms = []
    for chain, intervals in _CASES:
        w = _ordering_fraction((t,) + tuple(theta[i - 1] for i in chain), tol)
        if w == 0.0:
            continue
        w *= barrier
        terms.extend((w * c, slot(lo), slot(hi)) for c, lo, hi in intervals)
    return IntervalSum(terms=tuple(terms))


def trig_product_integral(freqs, theta, interval) -> float:
    """Exact integral over [a, b] of prod_s cos(freqs[s] (theta[s] - u)) du.

    Product-to-sum expansion into eight cosines; each term integrates to
    (b-a) sinc(k (b-a) / 2) cos(phi - k (a+b)/2), exact for every combined
    frequency k including zero (degenerate modes hit k = 0 exactly).
    Reversing the interval flips the sign.
    """
    freqs = np.asarray(freqs, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if freqs.shape != (4,) or theta.shape != (4,):
        raise ValueError("freqs and theta must hold four values")
    a, b = float(interval[0]), float(interval[1])
    kappa = _SIGNS @ freqs
    phi = _SIGNS @ (freqs * theta)
    half = 0.5 * kappa * (b - a)
    vals = (b - a) * np.sinc(half / np.pi) * np.cos(phi - 0.5 * kappa * (a + b))
    return math.fsum(vals) / 8.0


class _ModeGrid:
    """Flattened (nu1..nu4) mode grid shared by both chain evaluation paths.

    Index v enumerates the N^4 mode tuples; ``integral`` returns the exact
    cosine-product integral for every tuple at once.
    """

    def __init__(self, modes: NormalModes, omega_hat: np.ndarray):
        n = omega_hat.shape[0]
        idx = np.indices((n,) * 4).reshape(4, -1)
        self.n = n
        self.omega4 = omega_hat[idx]                    # (4, N^4)
        self.kappa = _SIGNS @ self.omega4               # (8, N^4)
        o = modes.o_matrix
        op = modes.o_prime_matrix
        self.o_sel = o[:, idx]                          # (N, 4, N^4)
        self.op_sel = op[:, idx]                        # (N, 4, N^4)
        w4 = np.einsum("ja,jb,jc,jd->abcd", op, op, op, op, optimize=False)
        self.w4_flat = w4.reshape(-1)

    def integral(self, theta, a: float, b: float) -> np.ndarray:
        """(N^4,) vector of trig-product integrals over [a, b] for a theta tuple."""
        phi = _SIGNS @ (np.asarray(theta)[:, None] * self.omega4)
        half = 0.5 * self.kappa * (b - a)
        vals = (b - a) * np.sinc(half / np.pi) * np.cos(
            phi - 0.5 * self.kappa * (a + b)
        )
        return vals.sum(axis=0) / 8.0

    def site_weight(self, sites) -> np.ndarray:
        """prod_s O[i_s, nu_s] over the grid for a 0-based site tuple."""
        w = self.o_sel[sites[0], 0] * self.o_sel[sites[1], 1]
        w = w * self.o_sel[sites[2], 2]
        return w * self.o_sel[sites[3], 3]


def phi_single(omega: float, pulse_times_s, t: float) -> float:
    """Area-normalized quartic phase of a four-pulse train on one oscillator.

    Sums the Heaviside case decomposition over all 4^4 pulse index tuples
    with the exact cosine-product integrals.  Returns Phi in seconds.
    """
    times = [float(x) for x in pulse_times_s]
    if len(times) != 4:
        raise ValueError("need exactly four pulse times")
    if any(x <= 0 for x in times):
        raise ValueError("pulse times must be > 0")
    if not t > max(times):
        raise ValueError("t must be after every pulse")
    th = [omega * x for x in times]
    t_hat = omega * t
    ones = np.ones(4)
    terms = []
    for idx in product(range(4), repeat=4):
        theta = tuple(th[i] for i in idx)
        for w, a, b in heaviside_decomposition(theta, t_hat):
            if a != b:
                terms.append(w * trig_product_integral(ones, theta, (a, b)))
    return math.fsum(terms) / omega


# -- many-body evaluation -----------------------------------------------------

def _internal_pulses(spec: ChainSpec, schedule: PulseSchedule):
    """(site0, theta_hat) pulse list in trap-frequency units, sorted by time."""
    om = spec.trap_freq
    t0 = om * schedule.t0
    per = om * schedule.period
    tau = om * schedule.site_delay
    pulses = [
        (i, t0 + alpha * per + i * tau)
        for i in range(spec.n_sites)
        for alpha in range(schedule.pulses_per_site)
    ]
    pulses.sort(key=lambda p: (p[1], p[0]))
    return pulses


def _phi_chain_naive(modes: NormalModes, pulses, t_hat: float,
                     omega_hat: np.ndarray) -> float:
    """Direct transliteration of the nine-index pulsed sum (reference path)."""
    grid = _ModeGrid(modes, omega_hat)
    n = modes.n_sites
    terms = []
    for mu in product(range(len(pulses)), repeat=4):
        sites = [pulses[m][0] for m in mu]
        theta = tuple(pulses[m][1] for m in mu)
        dec = heaviside_decomposition(theta, t_hat)
        if not len(dec):
            continue
        for w, a, b in dec:
            if a == b:
                continue
            ivec = grid.integral(theta, a, b)
            for j in range(n):
                v = (grid.o_sel[sites[0], 0] * grid.op_sel[j, 0]
                     * grid.o_sel[sites[1], 1] * grid.op_sel[j, 1]
                     * grid.o_sel[sites[2], 2] * grid.op_sel[j, 2]
                     * grid.o_sel[sites[3], 3] * grid.op_sel[j, 3])
                terms.append(w * float(v @ ivec))
    return math.fsum(terms)


def _phi_chain_factored(modes: NormalModes, pulses, t_hat: float,
                        omega_hat: np.ndarray) -> float:
    """Fast path: mode-sum factorization and per-multiset interval caching.

    W[nu] = sum_j prod_s O'[j, nu_s] is precomputed; pulse tuples are grouped
    by multiset (the weight and integral of a tuple depend only on the
    multiset and the interval), and each distinct interval is integrated once
    over the whole mode grid.
    """
    grid = _ModeGrid(modes, omega_hat)
    scale = max(1.0, abs(t_hat), max(abs(p[1]) for p in pulses))
    tol = _TIE_RTOL * scale
    npulse = len(pulses)
    terms = []
    for combo in combinations_with_replacement(range(npulse), 4):
        interval_weights: dict = {}
        for arr in sorted(set(permutations(combo))):
            theta = tuple(pulses[m][1] for m in arr)
            barrier = _zero_barrier(theta, tol)
            if barrier == 0.0:
                continue
            for chain, intervals in _CASES:
                w = _ordering_fraction(
                    (t_hat,) + tuple(theta[i - 1] for i in chain), tol
                )
                if w == 0.0:
                    continue
                w *= barrier
                for c, lo, hi in intervals:
                    a = 0.0 if lo == 0 else (t_hat if lo == 5 else theta[lo - 1])
                    b = 0.0 if hi == 0 else (t_hat if hi == 5 else theta[hi - 1])
                    if a == b:
                        continue
                    key = (a, b)
                    interval_weights[key] = interval_weights.get(key, 0.0) + w * c
        if not interval_weights:
            continue
        tvec = grid.w4_flat * grid.site_weight([pulses[m][0] for m in combo])
        theta_c = tuple(pulses[m][1] for m in combo)
        for (a, b) in sorted(interval_weights):
            w = interval_weights[(a, b)]
            if w == 0.0:
                continue
            terms.append(w * float(tvec @ grid.integral(theta_c, a, b)))
    return math.fsum(terms)


def phi_chain(spec: ChainSpec, modes: NormalModes, schedule: PulseSchedule,
              method: str = "factored") -> PhaseResult:
    """Area-normalized quartic phase Phi(N) of the pulsed chain.

    ``method`` selects the reference nine-index loop ("naive") or the
    factored fast path ("factored"); both evaluate the same sum and agree to
    float accuracy.
    """
    if method not in ("factored", "naive"):
        raise ValueError("method must be 'factored' or 'naive'")
    if modes.n_sites != spec.n_sites:
        raise ValueError("modes and spec disagree on the number of sites")
    schedule.validate_for(spec)
    pulses = _internal_pulses(spec, schedule)
    om = spec.trap_freq
    t_hat = om * schedule.eval_time
    omega_hat = modes.frequencies / om
    if method == "naive":
        phi_hat = _phi_chain_naive(modes, pulses, t_hat, omega_hat)
    else:
        phi_hat = _phi_chain_factored(modes, pulses, t_hat, omega_hat)
    if not math.isfinite(phi_hat):
        raise NumericalFailureError("non-finite accumulation in phi_chain")
    return PhaseResult(
        quartic_coefficient=phi_hat / om,
        evaluation_time=schedule.eval_time,
        method="closed-form",
    )


# -- scaling scan -------------------------------------------------------------

@dataclass(frozen=True)
class ScanRow:
    n: int
    omega_c: float
    phi: float
    abs_phi: float
    n_times_phi1: float
    error: str | None = None


@dataclass(frozen=True)
class ScanFit:
    omega_c: float
    slope: float | None
    residual: float | None


@dataclass(frozen=True)
class ScanResult:
    rows: tuple
    fits: tuple

    def fit_for(self, omega_c: float) -> ScanFit:
        for f in self.fits:
            if f.omega_c == omega_c:
                return f
        raise KeyError(omega_c)


def fit_scaling_exponent(rows):
    """Ordinary least squares of log|Phi| against log N.

    ``rows`` is an iterable of (n, value) pairs or objects with ``n`` and
    ``abs_phi`` attributes.  Returns (slope, rms_residual).
    """
    pairs = []
    for r in rows:
        if hasattr(r, "abs_phi"):
            pairs.append((r.n, r.abs_phi))
        else:
            n, v = r
            pairs.append((int(n), float(v)))
    if len(pairs) < 2:
        raise ValueError("undefined fit: need at least two rows")
    if any(v <= 0 for _, v in pairs):
        raise ValueError("undefined fit: every |Phi| must be > 0")
    logn = np.log([n for n, _ in pairs])
    logv = np.log([v for _, v in pairs])
    slope, intercept = np.polyfit(logn, logv, 1)
    resid = logv - (slope * logn + intercept)
    return float(slope), float(np.sqrt(np.mean(resid**2)))


def scan_lattice(template_spec: ChainSpec, template_schedule: PulseSchedule,
                 n_range, omega_c_list) -> ScanResult:
    """Phi(N) scan over site counts and coupling frequencies.

    The template schedule supplies t0, period and strength; the site delay
    is re-derived as period/(2N) for every N and the evaluation time as the
    last pulse plus one trap period.  Rows are ordered by coupling frequency
    then by N; a least-squares slope of log|Phi| vs log N is fitted per
    coupling frequency when every row of it succeeded with |Phi| > 0.
    """
    from .lattice import normal_modes

    n_list = sorted(set(int(n) for n in n_range))
    if not n_list:
        raise ValueError("n_range must not be empty")
    rows = []
    fits = []
    for omega_c in omega_c_list:
        phi1 = None
        per_oc = []
        for n in n_list:
            spec_n = replace(
                template_spec, n_sites=n, coupling_freq=float(omega_c), hessian=None
            )
            sched_n = PulseSchedule.for_chain(
                spec_n,
                t0=template_schedule.t0,
                period=template_schedule.period,
                strength=template_schedule.strength,
            )
            try:
                phi = phi_chain(spec_n, normal_modes(spec_n), sched_n).quartic_coefficient
            except NumericalFailureError as exc:
                per_oc.append(ScanRow(n=n, omega_c=float(omega_c), phi=float("nan"),
                                      abs_phi=float("nan"), n_times_phi1=float("nan"),
                                      error=str(exc)))
                continue
            if phi1 is None:
                spec_1 = replace(template_spec, n_sites=1,
                                 coupling_freq=float(omega_c), hessian=None)
                sched_1 = PulseSchedule.for_chain(
                    spec_1, t0=template_schedule.t0,
                    period=template_schedule.period,
                    strength=template_schedule.strength,
                )
                phi1 = abs(
                    phi_chain(spec_1, normal_modes(spec_1), sched_1).quartic_coefficient
                )
            per_oc.append(ScanRow(n=n, omega_c=float(omega_c), phi=phi,
                                  abs_phi=abs(phi), n_times_phi1=n * phi1))
        rows.extend(per_oc)
        ok = [r for r in per_oc if r.error is None]
        if len(ok) >= 2 and all(r.abs_phi > 0 for r in ok) and len(ok) == len(per_oc):
            slope, resid = fit_scaling_exponent(ok)
            fits.append(ScanFit(omega_c=float(omega_c), slope=slope, residual=resid))
        else:
            fits.append(ScanFit(omega_c=float(omega_c), slope=None, residual=None))
    return ScanResult(rows=tuple(rows), fits=tuple(fits))
