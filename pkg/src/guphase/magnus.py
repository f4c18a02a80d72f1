"""Phase engines for smooth coupling profiles.

Two quantities are computed by deterministic Gauss-Legendre quadrature:

* ``quadratic_phase`` -- the photon-number-squared phase coefficient
  F(t) = 1/2 int_0^t (g' G'' - g'' G') dt1 with g' = g cos(w t),
  g'' = g sin(w t) and G', G'' their running integrals.

* ``magnus5_quadrature`` -- the photon-number-quartic phase coefficient of
  the fifth-order term, an ordered-simplex integral over five times of
  permutation-weighted products of drive kernels.  The integrand of each
  permutation is symmetric in its four non-reference times, which reduces
  the five-deep nesting exactly to nested one-dimensional integrals of
  kernel moments; the permutation table supplies the weights.

Times are handled internally in units of the trap frequency and converted at
the interface.  Every result carries a refinement error estimate obtained by
doubling the quadrature order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .coupling import CouplingFunction
from .errors import NumericalFailureError
from .lattice import ChainSpec, NormalModes

_MAGNUS5_RTOL = 1e-3
_QUADRATIC_RTOL = 1e-6


@dataclass(frozen=True)
class PermutationTable:
    """The four time-permutations and weights of the surviving fifth-order terms."""

    entries: tuple

    def __post_init__(self):
        if len(self.entries) != 4:
            raise ValueError("the table has exactly four permutations")
        total = sum(Fraction(c) for _, c in self.entries)
        if total != Fraction(1, 30):
            raise ValueError(f"coefficients must sum to 1/30, got {total}")


def permutation_table() -> PermutationTable:
    """Permutations sigma of (1..5) with coefficients lambda_sigma."""
    return PermutationTable(
        entries=(
            ((5, 4, 3, 2, 1), Fraction(-1, 30)),
            ((1, 5, 4, 2, 3), Fraction(2, 15)),
            ((1, 4, 3, 2, 5), Fraction(-1, 30)),
            ((1, 5, 3, 2, 4), Fraction(-1, 30)),
        )
    )


@dataclass(frozen=True)
class QuadraturePlan:
    """Gauss-Legendre order and refinement policy for the phase engines."""

    order: int = 24
    window_restriction: bool = True
    richardson: bool = True

    def __post_init__(self):
        if self.order < 4:
            raise ValueError("quadrature order must be >= 4")


@dataclass(frozen=True)
class PhaseResult:
    """Phase coefficients of one evaluation.

    ``quartic_coefficient`` is the photon-number-quartic factor: for pulse
    trains it is the area-normalized value Phi (seconds, the train's area^4
    divided out); for other couplings it is the raw simplex-integral
    coefficient.  ``method`` is "closed-form" or "quadrature".
    """

    quartic_coefficient: float
    evaluation_time: float
    method: str
    quadratic_coefficient: float | None = None
    error_estimate: float | None = None

    def __post_init__(self):
        if not math.isfinite(self.quartic_coefficient):
            raise ValueError("quartic coefficient must be finite")
        if self.method not in ("closed-form", "quadrature"):
            raise ValueError(f"unknown method tag {self.method!r}")


def _moment_coefficients() -> np.ndarray:
    """Weight of A^(r-1) B^(5-r) / ((r-1)! (5-r)!) for reference position r.

    Each permutation contributes +lambda at r = sigma(5) and -lambda at
    r = sigma(4) (the swapped term).
    """
    coeffs = [Fraction(0)] * 6
    for perm, lam in permutation_table().entries:
        coeffs[perm[4]] += lam
        coeffs[perm[3]] -= lam
    return np.array([float(c) for c in coeffs[1:]])


def _gl(order: int):
    return np.polynomial.legendre.leggauss(order)


def _subdivide(lo: float, hi: float, max_len: float) -> list:
    if hi <= lo:
        return []
    n = max(1, int(math.ceil((hi - lo) / max_len)))
    edges = np.linspace(lo, hi, n + 1)
    return list(zip(edges[:-1], edges[1:]))


class _SitePanel:
    """Quadrature moments of one site's profile over one x-interval."""

    __slots__ = ("site", "lo", "hi", "cos_m", "sin_m")

    def __init__(self, g, om, site, lo, hi, omega_hat, order):
        self.site = site
        self.lo = lo
        self.hi = hi
        xs, ws = _gl(order)
        x = 0.5 * (hi - lo) * xs + 0.5 * (hi + lo)
        w = 0.5 * (hi - lo) * ws * g.site_values(site, x / om)
        # moments sum_x w_x cos(w_k x), sin(w_k x); u-dependence split off via
        # cos(w(x-u)) = cos(wx)cos(wu) + sin(wx)sin(wu)
        self.cos_m = np.cos(np.outer(omega_hat, x)) @ w
        self.sin_m = np.sin(np.outer(omega_hat, x)) @ w


def _site_panels(g: CouplingFunction, om: float, t_hat: float,
                 omega_hat: np.ndarray, order: int) -> list:
    """Per-site x-panels covering supp(g) within [0, t_hat], internal units."""
    panels = []
    max_len = math.pi / (2.0 * float(np.max(omega_hat)))
    if g.is_pulse_train:
        for site in range(1, g.n_sites + 1):
            for _, lo, hi in g.site_windows(site):
                lo, hi = max(lo * om, 0.0), min(hi * om, t_hat)
                if hi > lo:
                    panels.append(_SitePanel(g, om, site, lo, hi, omega_hat, order))
    else:
        breaks = sorted({max(b * om, 0.0) for b in g.breakpoints()} | {0.0, t_hat})
        for a, b in zip(breaks, breaks[1:]):
            a, b = max(a, g.support[0] * om), min(b, g.support[1] * om, t_hat)
            if b <= a:
                continue
            for lo, hi in _subdivide(a, b, max_len):
                for site in range(1, g.n_sites + 1):
                    panels.append(_SitePanel(g, om, site, lo, hi, omega_hat, order))
    return panels


def _u_panels(panels: list, t_hat: float, omega_hat: np.ndarray) -> list:
    edges = {0.0, t_hat}
    for p in panels:
        edges |= {p.lo, p.hi}
    edges = sorted(e for e in edges if 0.0 <= e <= t_hat)
    max_len = math.pi / (2.0 * float(np.max(omega_hat)))
    out = []
    for a, b in zip(edges, edges[1:]):
        out.extend(_subdivide(a, b, max_len))
    return out


def _kernel_weights(modes: NormalModes) -> list:
    """W_i[k, j] = O[i, k] O'[j, k] for each site i (0-based list)."""
    return [
        modes.o_matrix[i][:, None] * modes.o_prime_matrix.T
        for i in range(modes.n_sites)
    ]


def _partial_moments(g, om, site, lo, hi, omega_hat, order):
    if hi <= lo:
        nk = omega_hat.shape[0]
        return np.zeros(nk), np.zeros(nk)
    p = _SitePanel(g, om, site, lo, hi, omega_hat, order)
    return p.cos_m, p.sin_m


def _simplex_coefficient(spec: ChainSpec, modes: NormalModes, g: CouplingFunction,
                         t: float, order: int) -> float:
    """Internal-unit value of sum_sigma lambda_sigma int [prod D_j - swap]."""
    om = spec.trap_freq
    t_hat = om * t
    omega_hat = modes.frequencies / om
    coeffs = _moment_coefficients()
    norms = np.array([
        1.0 / (math.factorial(r - 1) * math.factorial(5 - r)) for r in range(1, 6)
    ])
    cw = coeffs * norms
    panels = _site_panels(g, om, t_hat, omega_hat, order)
    wmats = _kernel_weights(modes)
    xs, ws = _gl(order)
    n = modes.n_sites
    totals = []
    for lo, hi in _u_panels(panels, t_hat, omega_hat):
        u = 0.5 * (hi - lo) * xs + 0.5 * (hi + lo)
        wu = 0.5 * (hi - lo) * ws
        cos_u = np.cos(np.outer(omega_hat, u))
        sin_u = np.sin(np.outer(omega_hat, u))
        a_vals = np.zeros((u.size, n))
        b_vals = np.zeros((u.size, n))
        for p in panels:
            wmat = wmats[p.site - 1]
            if p.lo >= hi:  # panel above every u here -> contributes to A
                mom = p.cos_m[:, None] * cos_u + p.sin_m[:, None] * sin_u
                a_vals += mom.T @ wmat
            elif p.hi <= lo:  # below -> B
                mom = p.cos_m[:, None] * cos_u + p.sin_m[:, None] * sin_u
                b_vals += mom.T @ wmat
            else:  # u runs inside this panel: split each node at u
                for m, ui in enumerate(u):
                    cb, sb = _partial_moments(g, om, p.site, p.lo, min(ui, p.hi),
                                              omega_hat, order)
                    ca, sa = _partial_moments(g, om, p.site, max(ui, p.lo), p.hi,
                                              omega_hat, order)
                    cu, su = cos_u[:, m], sin_u[:, m]
                    b_vals[m] += (cb * cu + sb * su) @ wmat
                    a_vals[m] += (ca * cu + sa * su) @ wmat
        f = np.zeros_like(a_vals)
        for r in range(1, 6):
            f += cw[r - 1] * a_vals ** (r - 1) * b_vals ** (5 - r)
        totals.append(float(wu @ f.sum(axis=1)))
    return math.fsum(totals)


def _report_units(spec: ChainSpec, g: CouplingFunction, raw_internal: float) -> float:
    om = spec.trap_freq
    if g.is_pulse_train:
        if g.area == 0.0:
            return 0.0
        lam_hat = om * g.area
        return 30.0 * raw_internal / lam_hat**4 / om
    return raw_internal / om**5


def magnus5_quadrature(spec: ChainSpec, modes: NormalModes, g: CouplingFunction,
                       t: float, plan: QuadraturePlan | None = None) -> PhaseResult:
    """Quartic phase coefficient of the fifth-order term by quadrature.

    For Gaussian pulse trains the returned coefficient is the
    area-normalized Phi (seconds); for other smooth couplings it is the raw
    simplex-integral coefficient.  With ``plan.richardson`` the order is
    doubled and disagreement beyond 1e-3 relative raises
    ``NumericalFailureError`` with both values attached.
    """
    plan = plan or QuadraturePlan()
    if g.n_sites != spec.n_sites:
        raise ValueError("coupling and chain disagree on the number of sites")
    if t <= 0:
        raise ValueError("evaluation time must be > 0")
    coarse = _report_units(spec, g, _simplex_coefficient(spec, modes, g, t, plan.order))
    if not plan.richardson:
        return PhaseResult(quartic_coefficient=coarse, evaluation_time=t,
                           method="quadrature")
    fine = _report_units(spec, g,
                         _simplex_coefficient(spec, modes, g, t, 2 * plan.order))
    err = abs(coarse - fine)
    if err > _MAGNUS5_RTOL * max(abs(coarse), abs(fine)):
        raise NumericalFailureError(
            f"quadrature did not converge: order {plan.order} -> {coarse!r}, "
            f"order {2 * plan.order} -> {fine!r}",
            values=(coarse, fine),
        )
    return PhaseResult(quartic_coefficient=fine, evaluation_time=t,
                       method="quadrature", error_estimate=err)


def theta5_integrand(modes: NormalModes, g: CouplingFunction, trap_freq: float,
                     times: tuple) -> float:
    """Pointwise simplex integrand sum_sigma lambda_sigma [sum_j prod D_j - swap].

    Exposed for the swap-antisymmetry property check; times in seconds.
    """
    if len(times) != 5:
        raise ValueError("need exactly five times")

    def d_val(x, u):
        gv = g(x)
        cosw = np.cos(modes.frequencies * (x - u))
        return gv @ (modes.o_matrix * cosw) @ modes.o_prime_matrix.T

    total = 0.0
    for perm, lam in permutation_table().entries:
        ref = times[perm[4] - 1]
        prod = np.ones(modes.n_sites)
        for s in range(4):
            prod = prod * d_val(times[perm[s] - 1], ref)
        ref_swap = times[perm[3] - 1]
        prod_swap = np.ones(modes.n_sites)
        for s in (0, 1, 2):
            prod_swap = prod_swap * d_val(times[perm[s] - 1], ref_swap)
        prod_swap = prod_swap * d_val(times[perm[4] - 1], ref_swap)
        total += float(lam) * float(np.sum(prod - prod_swap))
    return total


# -- quadratic phase ---------------------------------------------------------

def _quadratic_value(g: CouplingFunction, omega: float, t: float, order: int) -> float:
    """F(t) in internal units (time measured in 1/omega)."""
    t_hat = omega * t
    xs, ws = _gl(order)
    # active panels: support of g clipped to [0, t], subdivided for the cosines
    lo = max(g.support[0] * omega, 0.0)
    hi = min(g.support[1] * omega, t_hat)
    if hi <= lo:
        return 0.0
    breaks = sorted({max(min(b * omega, hi), lo) for b in g.breakpoints()} | {lo, hi})
    panels = []
    for a, b in zip(breaks, breaks[1:]):
        panels.extend(_subdivide(a, b, math.pi / 2.0))

    def gp(x):   # g cos(wt) in internal units
        return g.site_values(1, x / omega) * np.cos(x)

    def gpp(x):  # g sin(wt)
        return g.site_values(1, x / omega) * np.sin(x)

    def seg(fn, a, b):
        if b <= a:
            return 0.0
        x = 0.5 * (b - a) * xs + 0.5 * (b + a)
        w = 0.5 * (b - a) * ws
        return float(w @ fn(x))

    full_p = [seg(gp, a, b) for a, b in panels]
    full_pp = [seg(gpp, a, b) for a, b in panels]
    total = []
    for k, (a, b) in enumerate(panels):
        x = 0.5 * (b - a) * xs + 0.5 * (b + a)
        w = 0.5 * (b - a) * ws
        head_p = math.fsum(full_p[:k])
        head_pp = math.fsum(full_pp[:k])
        gprime = gp(x)
        gsecond = gpp(x)
        big_p = np.array([head_p + seg(gp, a, xi) for xi in x])
        big_pp = np.array([head_pp + seg(gpp, a, xi) for xi in x])
        total.append(float(w @ (gprime * big_pp - gsecond * big_p)))
    return 0.5 * math.fsum(total)


def quadratic_phase(g: CouplingFunction, omega: float, mass: float, t: float,
                    plan: QuadraturePlan | None = None) -> float:
    """Photon-number-squared phase coefficient F(t) for a single-site coupling.

    ``mass`` only enters the propagator prefactor, which is carried
    symbolically; it is validated but does not change F.
    """
    plan = plan or QuadraturePlan()
    if g.n_sites != 1:
        raise ValueError("quadratic_phase expects a single-site coupling")
    if omega <= 0:
        raise ValueError("omega must be > 0")
    if mass <= 0:
        raise ValueError("mass must be > 0")
    coarse = _quadratic_value(g, omega, t, plan.order) / omega**2
    if not plan.richardson:
        return coarse
    fine = _quadratic_value(g, omega, t, 2 * plan.order) / omega**2
    if abs(coarse - fine) > _QUADRATIC_RTOL * max(abs(coarse), abs(fine)):
        raise NumericalFailureError(
            f"quadratic phase quadrature did not converge: {coarse!r} vs {fine!r}",
            values=(coarse, fine),
        )
    return fine
