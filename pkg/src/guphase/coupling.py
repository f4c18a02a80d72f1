"""Time-dependent light-matter coupling profiles.

A ``CouplingFunction`` evaluates the per-site coupling strength g_i(t) and
declares a support window outside of which it is identically zero.  Three
constructions are provided: Gaussian pulse trains (the smooth stand-in for
ideal delta pulses), a constant value on a window, and tabulated samples with
linear interpolation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Gaussians are truncated at +-8 sigma; the clipped tail mass is ~1.2e-15 of
# the pulse area, far inside the 1e-10 construction check.
WINDOW_SIGMAS = 8.0
_AREA_RTOL = 1e-10
_AREA_ORDER = 48


def _gauss_leg(order: int):
    return np.polynomial.legendre.leggauss(order)


@dataclass(frozen=True)
class CouplingFunction:
    """Per-site coupling profile with declared support.

    Use the classmethods ``gaussian_train``, ``constant`` or ``tabulated``;
    the plain constructor is internal.
    """

    kind: str
    n_sites: int
    support: tuple
    # gaussian train
    centers: tuple = ()          # tuple of per-site center tuples
    sigma: float = 0.0
    area: float = 0.0
    # constant
    value: float = 0.0
    # tabulated
    sample_times: tuple = ()
    sample_values: tuple = ()

    # -- constructors ------------------------------------------------------

    @classmethod
    def gaussian_train(cls, centers_per_site, sigma: float, area: float):
        """Train of normalized Gaussian pulses, one list of centers per site.

        Each pulse integrates to ``area`` (checked at construction to 1e-10
        relative by quadrature over its +-8 sigma window).
        """
        if sigma <= 0:
            raise ValueError("sigma must be > 0")
        if area < 0:
            raise ValueError("area must be >= 0")
        centers = tuple(tuple(float(c) for c in row) for row in centers_per_site)
        if not centers or any(len(row) == 0 for row in centers):
            raise ValueError("every site needs at least one pulse center")
        all_c = [c for row in centers for c in row]
        support = (min(all_c) - WINDOW_SIGMAS * sigma, max(all_c) + WINDOW_SIGMAS * sigma)
        fn = cls(
            kind="gaussian_train",
            n_sites=len(centers),
            support=support,
            centers=centers,
            sigma=float(sigma),
            area=float(area),
        )
        fn._check_pulse_areas()
        return fn

    @classmethod
    def constant(cls, value: float, window, n_sites: int = 1):
        lo, hi = float(window[0]), float(window[1])
        if not hi > lo:
            raise ValueError("window must have positive length")
        return cls(kind="constant", n_sites=n_sites, support=(lo, hi), value=float(value))

    @classmethod
    def tabulated(cls, times, values, n_sites: int = 1):
        t = tuple(float(x) for x in times)
        v = tuple(float(x) for x in values)
        if len(t) < 2 or len(t) != len(v):
            raise ValueError("need matching times/values with at least two samples")
        if any(b <= a for a, b in zip(t, t[1:])):
            raise ValueError("sample times must increase strictly")
        return cls(
            kind="tabulated",
            n_sites=n_sites,
            support=(t[0], t[-1]),
            sample_times=t,
            sample_values=v,
        )

    @classmethod
    def from_schedule(cls, n_sites: int, schedule, sigma: float):
        """Gaussian train matching a Dirac pulse schedule, one train per site."""
        centers = [
            [schedule.t0 + a * schedule.period + (k - 1) * schedule.site_delay
             for a in range(schedule.pulses_per_site)]
            for k in range(1, n_sites + 1)
        ]
        return cls.gaussian_train(centers, sigma, schedule.strength)

    # -- evaluation --------------------------------------------------------

    def site_values(self, site: int, t) -> np.ndarray:
        """g_site(t) for one 1-based site, vectorized over t."""
        if not 1 <= site <= self.n_sites:
            raise IndexError(f"site must be in 1..{self.n_sites}")
        t = np.asarray(t, dtype=float)
        lo, hi = self.support
        inside = (t >= lo) & (t <= hi)
        if self.kind == "gaussian_train":
            out = np.zeros_like(t)
            norm = 1.0 / (self.sigma * math.sqrt(2.0 * math.pi))
            for c in self.centers[site - 1]:
                d = (t - c) / self.sigma
                mask = np.abs(d) <= WINDOW_SIGMAS
                out = out + np.where(
                    mask, self.area * norm * np.exp(-0.5 * d * d), 0.0
                )
            return np.where(inside, out, 0.0)
        if self.kind == "constant":
            return np.where(inside, self.value, 0.0)
        # tabulated
        interp = np.interp(t, self.sample_times, self.sample_values)
        return np.where(inside, interp, 0.0)

    def __call__(self, t: float) -> np.ndarray:
        """Per-site coupling vector at a single time."""
        return np.array(
            [float(self.site_values(k, t)) for k in range(1, self.n_sites + 1)]
        )

    # -- quadrature support ------------------------------------------------

    @property
    def is_pulse_train(self) -> bool:
        return self.kind == "gaussian_train"

    def site_windows(self, site: int):
        """(center, lo, hi) windows of one site's pulses (train only)."""
        if self.kind != "gaussian_train":
            raise ValueError("windows are defined for gaussian trains only")
        w = WINDOW_SIGMAS * self.sigma
        return [(c, c - w, c + w) for c in self.centers[site - 1]]

    def breakpoints(self) -> list:
        """Times where the profile (or its derivative) changes character."""
        if self.kind == "gaussian_train":
            pts = []
            for row in self.centers:
                for c in row:
                    pts.extend((c - WINDOW_SIGMAS * self.sigma, c,
                                c + WINDOW_SIGMAS * self.sigma))
            return sorted(pts)
        if self.kind == "constant":
            return list(self.support)
        return list(self.sample_times)

    def _check_pulse_areas(self):
        xs, ws = _gauss_leg(_AREA_ORDER)
        norm = 1.0 / (self.sigma * math.sqrt(2.0 * math.pi))
        for row in self.centers:
            for c in row:
                lo, hi = c - WINDOW_SIGMAS * self.sigma, c + WINDOW_SIGMAS * self.sigma
                x = 0.5 * (hi - lo) * xs + 0.5 * (hi + lo)
                w = 0.5 * (hi - lo) * ws
                got = self.area * norm * float(w @ np.exp(-0.5 * ((x - c) / self.sigma) ** 2))
                if self.area > 0 and abs(got - self.area) > _AREA_RTOL * self.area:
                    raise ValueError(
                        f"pulse at {c} integrates to {got!r}, expected {self.area!r}"
                    )
