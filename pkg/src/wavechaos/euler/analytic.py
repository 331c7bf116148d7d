"""Analytic function spaces: the smooth frequency partition and the E_rho norms.

The norm of a band-limited field f is Σ_n e^{ρ|n|} ‖φ_n * f‖_∞, where
φ_n(ξ) = Π_j φ(ξ_j − n_j) and the sup is taken on an oversampled grid.
Window sups are computed once per field; the ρ dependence is then a dot
product, so the time-weighted norm over many (ρ, t) points stays cheap.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import fft

from .spectral import (
    band_of,
    gradient,
    grid_size,
    odd_fast_len,
)


class BandError(ValueError):
    pass


def _s(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def psi_ramp(x) -> np.ndarray:
    """Smooth nondecreasing ramp: 0 on (-inf, 0], 1 on [1, inf)."""
    a = _s(x)
    b = _s(1.0 - np.asarray(x, dtype=float))
    return a / (a + b)


def phi(x) -> np.ndarray:
    """Tent profile: ψ(x+1) on [-1,0], 1-ψ(x) on [0,1], 0 outside."""
    x = np.asarray(x, dtype=float)
    return np.where(x <= 0, psi_ramp(x + 1.0), 1.0 - psi_ramp(x))


def phi_n(xi, n) -> np.ndarray:
    """Π_j φ(ξ_j − n_j) for ``xi`` of shape (..., d)."""
    xi = np.asarray(xi, dtype=float)
    return np.prod(phi(xi - np.asarray(n, dtype=float)), axis=-1)


def chi_1(xi) -> np.ndarray:
    """Radial cutoff: 0 for |ξ| <= 1/2, 1 for |ξ| >= 1."""
    r = np.linalg.norm(np.atleast_1d(np.asarray(xi, dtype=float)), axis=-1)
    return psi_ramp(2.0 * r - 1.0)


def chi(x) -> np.ndarray:
    """Bump equal to 1 on [-1, 1] and 0 outside [-3/2, 3/2]."""
    x = np.asarray(x, dtype=float)
    return psi_ramp(2.0 * (x + 1.5)) * psi_ramp(2.0 * (1.5 - x))


def partition_sum(xi) -> np.ndarray:
    """Σ_n φ_n(ξ) over all windows touching ξ (should be identically 1)."""
    xi = np.asarray(xi, dtype=float)
    d = xi.shape[-1]
    base = np.floor(xi)
    total = np.zeros(xi.shape[:-1])
    for off in itertools.product((0, 1), repeat=d):
        total = total + phi_n(xi, base + np.asarray(off))
    return total


def window_indices(band: int, L: float, d: int) -> list[tuple[int, ...]]:
    """All n with φ_n not identically zero on |k_j| <= band."""
    top = int(math.ceil(band / L - 1e-12))
    rng = range(-top, top + 1)
    return [n for n in itertools.product(rng, repeat=d)]


@dataclass(frozen=True)
class WindowNorms:
    """Per-window sups ‖φ_n * f‖_∞ for a (batch of) field(s)."""

    windows: tuple[tuple[int, ...], ...]
    sups: np.ndarray  # (..., n_windows)
    sup_factor: float

    @property
    def radii(self) -> np.ndarray:
        return np.linalg.norm(np.asarray(self.windows, dtype=float), axis=-1)

    def norm(self, rho) -> np.ndarray:
        """Σ_n e^{ρ|n|} sup_n; broadcasts over an array of ρ appended as last axis."""
        rho = np.asarray(rho, dtype=float)
        weights = np.exp(rho[..., None] * self.radii)
        if rho.ndim == 0:
            return self.sups @ weights
        return self.sups @ weights.T


def sup_safety_factor(band: int, M: int, d: int) -> float:
    """Bernstein-type ratio bounding sup / (grid max) for degree-``band`` trig polynomials."""
    c = math.cos(math.pi * band / M)
    return (1.0 / c) ** d if c > 0 else math.inf


def _full_spectrum(hat: np.ndarray, d: int) -> np.ndarray:
    """Coefficients û(k/L) on the full (not half) lattice, indexed by k mod M."""
    M = grid_size(hat, d)
    axes = tuple(range(-d, 0))
    phys = fft.irfftn(hat, s=(M,) * d, axes=axes)
    return fft.fftn(phys, axes=axes)


@lru_cache(maxsize=256)
def _window_plan(M: int, d: int, L: float, n: tuple, half: int, Ms: int):
    """Source indices (into the full M-grid), target indices (into the Ms-grid) and weights of one window.

    The window φ_n lives on |k_j − n_j L| < L; its coefficients are moved to
    baseband so that a small grid of size ``Ms`` resolves |φ_n(D) f|.
    """
    per_axis = []
    for j in range(d):
        c = n[j] * L
        lo, hi = math.floor(c - L) + 1, math.ceil(c + L) - 1
        ks = np.arange(max(lo, -half), min(hi, half) + 1)
        per_axis.append(ks)
    if any(len(k) == 0 for k in per_axis):
        return None
    grids = np.meshgrid(*per_axis, indexing="ij")
    xi = np.stack([g / L for g in grids], axis=-1)
    w = phi_n(xi, n)
    keep = w != 0
    src = tuple(g[keep] % M for g in grids)
    shift = [int(round(n[j] * L)) for j in range(d)]
    dst = tuple((g[keep] - shift[j]) % Ms for j, g in enumerate(grids))
    return src, dst, w[keep]


def window_norms(hat: np.ndarray, L: float, d: int, oversample: int = 4, band: int | None = None) -> WindowNorms:
    """Window sups ‖φ_n(D) f‖_∞ of a real field with coefficients ``hat`` (..., D, grid).

    Each windowed field is complex; it is demodulated by its centre n·L and
    sampled on a grid ``oversample`` times finer than its frequency width.
    """
    M = grid_size(hat, d)
    if band is None:
        band = band_of(hat, d)
    if band > (M - 1) // 2:
        raise BandError(f"band {band} outside the resolved grid of size {M}")
    windows = tuple(window_indices(band, L, d))
    # demodulated windows carry |k − n·L| <= L − 1 (integer L)
    half = min(math.ceil(L) - (1 if float(L).is_integer() else 0), band)
    Ms = odd_fast_len(max(oversample * (2 * half + 1), 3))
    full = _full_spectrum(hat, d)
    lead = full.shape[:-d]
    scale = Ms**d / (2 * math.pi * L) ** (d / 2)
    axes = tuple(range(-d, 0))
    sups = []
    for n in windows:
        plan = _window_plan(M, d, float(L), n, band, Ms)
        if plan is None:
            sups.append(np.zeros(lead[:-1]))
            continue
        src, dst, w = plan
        small = np.zeros(lead + (Ms,) * d, dtype=complex)
        small[(Ellipsis,) + dst] = full[(Ellipsis,) + src] * w
        field = fft.ifftn(small, axes=axes) * scale
        mag = np.sqrt(np.sum(field.real**2 + field.imag**2, axis=-d - 1))
        sups.append(mag.reshape(mag.shape[: mag.ndim - d] + (-1,)).max(axis=-1))
    return WindowNorms(windows=windows, sups=np.stack(sups, axis=-1), sup_factor=sup_safety_factor(half, Ms, d))


def analytic_norm(hat: np.ndarray, L: float, rho: float, d: int, oversample: int = 4) -> np.ndarray | float:
    """‖f‖_ρ = Σ_n e^{ρ|n|} ‖φ_n * f‖_∞ for grid coefficients ``hat`` (..., D, grid)."""
    out = window_norms(hat, L, d, oversample).norm(rho)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# Kernel constants for the a priori inequalities
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def phi_kernel_l1(derivative: bool = False, half_width: float = 400.0, step: float = 0.02) -> float:
    """‖φ̌‖_{L¹(ℝ)} (or of the kernel of ξ φ(ξ)) by direct quadrature."""
    xi = np.linspace(-1.0, 1.0, 4001)
    dxi = xi[1] - xi[0]
    mult = phi(xi) * (xi if derivative else 1.0)
    x = np.arange(0.0, half_width, step)
    trig = np.sin if derivative else np.cos
    total = 0.0
    for chunk in np.array_split(x, max(1, len(x) // 2000)):
        k = trig(np.outer(chunk, xi)) @ mult * dxi / (2 * math.pi)
        total += np.abs(k).sum() * step
    # kernel is even (or odd) in x; first sample at x = 0 counted once
    k0 = abs(float(np.sum(mult) * dxi / (2 * math.pi))) if not derivative else 0.0
    return 2 * total - k0 * step


def product_constant(rho: float, d: int) -> float:
    """A priori K in ‖fg‖_ρ <= K e^{2ρ} ‖f‖_ρ ‖g‖_ρ: (5 c_φ)^d e^{2ρ(√d − 1)}."""
    return (5 * phi_kernel_l1()) ** d * math.exp(2 * rho * (math.sqrt(d) - 1))


def torus_kernel_l1(multiplier: np.ndarray, d: int) -> float:
    """L¹ norm on the torus of the kernel of a grid multiplier (..., grid), summed over entries."""
    M = multiplier.shape[-1]
    kern = fft.ifftn(multiplier, axes=tuple(range(-d, 0)))
    return float(np.abs(kern).reshape(-1, M**d).sum(axis=-1).sum())


def _full_grid_xi(M: int, d: int, L: float) -> np.ndarray:
    k = np.rint(fft.fftfreq(M) * M)
    return np.stack(np.meshgrid(*([k / L] * d), indexing="ij"), axis=-1)


def derivative_window_constants(L: float, d: int, band: int, refine: int = 8) -> dict:
    """κ_n = Σ_j ‖kernel of i ξ_j φ_n(ξ)‖_{L¹(torus)} for every window."""
    M = odd_fast_len(refine * (2 * band + 1))
    xi = _full_grid_xi(M, d, L)
    out = {}
    for n in window_indices(band, L, d):
        w = phi_n(xi, n)
        out[n] = sum(torus_kernel_l1(xi[..., j] * w, d) for j in range(d))
    return out


def projection_window_constants(L: float, d: int, band: int, refine: int = 8) -> dict:
    """Σ_ij ‖kernel of φ_n(ξ)(δ_ij − ξ_iξ_j/|ξ|²)‖_{L¹(torus)}, zero mode dropped."""
    M = odd_fast_len(refine * (2 * band + 1))
    xi = _full_grid_xi(M, d, L)
    r2 = np.sum(xi * xi, axis=-1)
    safe = np.where(r2 == 0, 1.0, r2)
    out = {}
    for n in window_indices(band, L, d):
        w = phi_n(xi, n) * (r2 > 0)
        total = 0.0
        for i in range(d):
            for j in range(d):
                m = w * ((i == j) - xi[..., i] * xi[..., j] / safe)
                total += torus_kernel_l1(m, d)
        out[n] = total
    return out


def transfer_constant(kappa: dict, rho_in: float, rho_out: float) -> float:
    """max_m e^{-ρ_in|m|} Σ_{|n−m|_∞<=1} e^{ρ_out|n|} κ_n: bound for ‖Tf‖_{ρ_out} / ‖f‖_{ρ_in}."""
    best = 0.0
    for m in kappa:
        rm = math.sqrt(sum(x * x for x in m))
        acc = 0.0
        for off in itertools.product((-1, 0, 1), repeat=len(m)):
            n = tuple(a + b for a, b in zip(m, off))
            if n in kappa:
                acc += math.exp(rho_out * math.sqrt(sum(x * x for x in n))) * kappa[n]
        best = max(best, math.exp(-rho_in * rm) * acc)
    return best


# ---------------------------------------------------------------------------
# Time-weighted norm
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AnalyticNormConfig:
    rho0: float = 1.0
    beta: float = 0.5
    theta: float = 1.0
    oversample: int = 4
    n_rho: int = 48
    n_t: int = 201

    def __post_init__(self):
        if self.rho0 <= 0 or not 0 < self.beta < 1 or self.theta <= 0:
            raise ValueError("need rho0 > 0, 0 < beta < 1, theta > 0")

    def theta_of_rho(self, rho) -> np.ndarray:
        return self.theta * (self.rho0 - np.asarray(rho, dtype=float))

    def rho_grid(self) -> np.ndarray:
        return self.rho0 * (np.arange(self.n_rho) + 0.5) / self.n_rho

    def threshold(self, C: float) -> float:
        """A(θ) = θ^{−β−1} / (2C)."""
        return self.theta ** (-self.beta - 1) / (2 * C)


def homogeneous_m_norm(
    hat: np.ndarray, power: int, L: float, d: int, cfg: AnalyticNormConfig
) -> np.ndarray | float:
    """M-norm of t ↦ t^power U for time-independent coefficients U = ``hat``.

    sup over ρ in (0, ρ0) and 0 <= t < θ(ρ) of
    t^p ‖U‖_ρ + t^p (θ(ρ) − t)^β ‖∇U‖_ρ.
    """
    rho = cfg.rho_grid()
    vals = window_norms(hat, L, d, cfg.oversample).norm(rho)  # (..., n_rho)
    g = _fold_derivative_norm(hat, L, d, cfg.oversample).norm(rho)
    s = np.linspace(0.0, 1.0, cfg.n_t)
    th = cfg.theta_of_rho(rho)  # (n_rho,)
    t = s[:, None] * th[None, :]  # (n_t, n_rho)
    tp = t**power
    damp = (th[None, :] - t) ** cfg.beta
    total = tp * vals[..., None, :] + tp * damp * g[..., None, :]
    out = total.max(axis=(-1, -2))
    return float(out) if np.ndim(out) == 0 else out


def _fold_derivative_norm(hat, L, d, oversample) -> WindowNorms:
    """Window norms of ∇U with the derivative and component axes merged."""
    grad = gradient(hat, L, d)  # (..., d, D, grid)
    shape = grad.shape
    merged = grad.reshape(shape[: -d - 2] + (shape[-d - 2] * shape[-d - 1],) + shape[-d:])
    return window_norms(merged, L, d, oversample)
