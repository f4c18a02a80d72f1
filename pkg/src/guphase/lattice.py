"""Mechanical model of the trapped oscillator chain.

Builds the chain Hessian, its normal-mode decomposition with the scaled
transforms used throughout the phase engines, the unequal-time commutator
kernels, and the center-of-mass commutator suppression factor.

Sites are numbered 1..N in every public signature.  All quantities are SI
(kg, s, rad/s) at the interface.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import NumericalFailureError, UnstableChainError

# Relative floor for the smallest Hessian eigenvalue; below it the chain is
# rejected as unstable rather than silently producing near-zero frequencies.
_STABILITY_FLOOR = 1e-12
_ORTHO_TOL = 1e-12


@dataclass(frozen=True)
class ChainSpec:
    """Physical description of an N-site trapped, nearest-neighbor coupled chain.

    Parameters
    ----------
    n_sites : int
        Number of oscillators, >= 1.
    mass : float
        Common mass of every site, kg.
    trap_freq : float
        On-site trap angular frequency Omega, rad/s.
    coupling_freq : float
        Nearest-neighbor coupling angular frequency Omega_c, rad/s (>= 0).
    hessian : np.ndarray, optional
        Explicit N x N symmetric positive-definite matrix in rad^2/s^2,
        overriding the nearest-neighbor construction.
    """

    n_sites: int
    mass: float
    trap_freq: float
    coupling_freq: float = 0.0
    hessian: np.ndarray | None = None

    def __post_init__(self):
        if not isinstance(self.n_sites, (int, np.integer)) or self.n_sites < 1:
            raise ValueError("n_sites must be an integer >= 1")
        if not self.mass > 0:
            raise ValueError("mass must be > 0")
        if not self.trap_freq > 0:
            raise ValueError("trap_freq must be > 0")
        if self.coupling_freq < 0:
            raise ValueError("coupling_freq must be >= 0")
        if self.hessian is not None:
            h = np.array(self.hessian, dtype=float)
            if h.shape != (self.n_sites, self.n_sites):
                raise ValueError("hessian must be N x N")
            scale = np.abs(h).max() or 1.0
            if np.abs(h - h.T).max() > 1e-12 * scale:
                raise ValueError("hessian must be symmetric to 1e-12 relative")
            w = scipy.linalg.eigvalsh(h)
            if w[0] <= _STABILITY_FLOOR * max(w[-1], 0.0):
                raise UnstableChainError("explicit hessian is not positive definite")
            h.setflags(write=False)
            object.__setattr__(self, "hessian", h)


@dataclass(frozen=True)
class NormalModes:
    """Normal-mode data: frequencies, orthogonal transform, scaled transforms.

    ``o_matrix`` maps normal coordinates to positions, ``o_prime_matrix`` maps
    normal momenta to site momenta; their product ``O @ O'.T`` is the identity
    (canonical transformation).
    """

    frequencies: np.ndarray
    p_matrix: np.ndarray
    o_matrix: np.ndarray
    o_prime_matrix: np.ndarray

    def __post_init__(self):
        for name in ("frequencies", "p_matrix", "o_matrix", "o_prime_matrix"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any(self.frequencies <= 0):
            raise UnstableChainError("all normal-mode frequencies must be > 0")
        n = self.n_sites
        eye = np.eye(n)
        if np.abs(self.p_matrix.T @ self.p_matrix - eye).max() > _ORTHO_TOL:
            raise ValueError("p_matrix is not orthogonal to 1e-12")
        if np.abs(self.o_matrix @ self.o_prime_matrix.T - eye).max() > _ORTHO_TOL:
            raise ValueError("O @ O'.T deviates from identity beyond 1e-12")

    @property
    def n_sites(self) -> int:
        return self.frequencies.shape[0]


@dataclass(frozen=True)
class MomentumSample:
    """Per-site momenta (kg m/s) together with the commutator-deformation parameter."""

    momenta: np.ndarray
    beta: float

    def __post_init__(self):
        p = np.asarray(self.momenta, dtype=float)
        if p.ndim != 1 or p.size < 1:
            raise ValueError("momenta must be a vector of length N >= 1")
        p.setflags(write=False)
        object.__setattr__(self, "momenta", p)


def build_hessian(spec: ChainSpec) -> np.ndarray:
    """Nearest-neighbor Hessian: Omega^2 I + Omega_c^2 L, L the open-path Laplacian."""
    if spec.hessian is not None:
        raise ValueError("spec carries an explicit hessian override; use it directly")
    n = spec.n_sites
    h = spec.trap_freq**2 * np.eye(n)
    if n > 1 and spec.coupling_freq > 0:
        lap = 2.0 * np.eye(n)
        lap[0, 0] = lap[-1, -1] = 1.0
        lap -= np.diag(np.ones(n - 1), 1) + np.diag(np.ones(n - 1), -1)
        h += spec.coupling_freq**2 * lap
    return h


def chain_hessian(spec: ChainSpec) -> np.ndarray:
    """The governing Hessian: the explicit override when present, else nearest-neighbor."""
    if spec.hessian is not None:
        return np.array(spec.hessian, dtype=float)
    return build_hessian(spec)


def decompose_normal_modes(h: np.ndarray, mass: float) -> NormalModes:
    """Diagonalize a symmetric positive-definite Hessian into NormalModes.

    Frequencies come out ascending.  Eigenvector signs follow a fixed
    convention (largest-magnitude entry positive, ties broken by lowest
    index) so downstream sums are reproducible bit-for-bit.
    """
    h = np.asarray(h, dtype=float)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError("hessian must be a square matrix")
    scale = np.abs(h).max() or 1.0
    if np.abs(h - h.T).max() > 1e-12 * scale:
        raise ValueError("hessian must be symmetric")
    if not mass > 0:
        raise ValueError("mass must be > 0")
    try:
        w2, p = scipy.linalg.eigh(h)
    except scipy.linalg.LinAlgError as exc:  # pragma: no cover - rare
        raise NumericalFailureError(f"eigensolver did not converge: {exc}") from exc
    if w2[0] <= _STABILITY_FLOOR * max(w2[-1], 0.0):
        raise UnstableChainError(
            f"unstable chain: smallest eigenvalue {w2[0]:.3e} below stability floor"
        )
    # deterministic sign convention per eigenvector
    for k in range(p.shape[1]):
        col = p[:, k]
        lead = np.argmax(np.abs(col))
        if col[lead] < 0:
            p[:, k] = -col
    freqs = np.sqrt(w2)
    o = p * (freqs**-0.5) / math.sqrt(mass)
    o_prime = p * (freqs**0.5) * math.sqrt(mass)
    return NormalModes(
        frequencies=freqs, p_matrix=p, o_matrix=o, o_prime_matrix=o_prime
    )


def normal_modes(spec: ChainSpec) -> NormalModes:
    """Decompose the chain described by ``spec`` (explicit Hessian honored)."""
    return decompose_normal_modes(chain_hessian(spec), spec.mass)


def _check_site(modes: NormalModes, idx: int, name: str) -> int:
    if not 1 <= idx <= modes.n_sites:
        raise IndexError(f"{name} must be in 1..{modes.n_sites}, got {idx}")
    return idx - 1


def commutator_kernel(modes: NormalModes, i: int, j: int, dt: float) -> float:
    """Real factor of the unequal-time position-momentum commutator.

    Returns sum_k O[i,k] O'[j,k] cos(w_k dt); the i*hbar prefactor is carried
    symbolically by the phase formulas downstream.  Even in dt, and equal to
    the Kronecker delta at dt = 0.
    """
    ii = _check_site(modes, i, "i")
    jj = _check_site(modes, j, "j")
    return float(
        np.sum(
            modes.o_matrix[ii]
            * modes.o_prime_matrix[jj]
            * np.cos(modes.frequencies * dt)
        )
    )


def coupling_kernel(modes: NormalModes, g, j: int, t: float, t_prime: float) -> float:
    """Drive kernel sum_i g_i(t) K_ij(t - t'), linear in the coupling.

    ``g`` is evaluated at ``t`` and must return the per-site coupling vector
    (length N).  For N = 1 this reduces to g(t) cos(Omega (t - t')).
    """
    jj = _check_site(modes, j, "j")
    gvec = np.asarray(g(t), dtype=float).reshape(-1)
    if gvec.shape[0] != modes.n_sites:
        raise IndexError(
            f"coupling returned {gvec.shape[0]} values for {modes.n_sites} sites"
        )
    cosw = np.cos(modes.frequencies * (t - t_prime))
    return float(gvec @ (modes.o_matrix * cosw) @ modes.o_prime_matrix[jj])


def com_commutator_factor(sample: MomentumSample) -> float:
    """Center-of-mass commutator factor 1 + (b/N^2) P^2 + (b/N) sum(p_k^2 - P^2/N^2).

    With all momenta equal this reduces exactly to the quasi-rigid limit
    1 + beta P^2 / N^2.
    """
    p = sample.momenta
    n = p.size
    total = p.sum()
    variance_part = float(np.sum(p**2 - total**2 / n**2))
    return 1.0 + sample.beta / n**2 * total**2 + sample.beta / n * variance_part
