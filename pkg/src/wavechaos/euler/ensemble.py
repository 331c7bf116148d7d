"""Random initial data a_L, norm tails, and the grid-point typical-size estimate."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import fft, stats

from ..quasisolution import SpectralEnsemble, is_positive, sample_gaussian_batch
from .analytic import window_norms
from .spectral import odd_fast_len, spectral_shape


def cube_mask(xi) -> bool:
    xi = np.asarray(xi, dtype=float)
    return bool(np.all(xi != 0) and np.all(np.abs(xi) <= 1))


def unit_scalar_profile(xi) -> np.ndarray:
    """1 on ([−1, 1] ∖ {0})^d."""
    return np.array([1.0 if cube_mask(xi) else 0.0])


def tangential_profile(xi) -> np.ndarray:
    """±ξ^⊥/|ξ| on the punctured cube, sign chosen so that a(−ξ) = a(ξ) (d = 2)."""
    xi = np.asarray(xi, dtype=float)
    if not cube_mask(xi):
        return np.zeros(2)
    sign = 1.0 if is_positive(np.sign(xi).astype(int)) else -1.0
    return sign * np.array([-xi[1], xi[0]]) / np.linalg.norm(xi)


PROFILES: dict[str, tuple[Callable, int, int]] = {
    # name: (profile, d, D)
    "unit-1d": (unit_scalar_profile, 1, 1),
    "unit-2d": (unit_scalar_profile, 2, 1),
    "tangential-2d": (tangential_profile, 2, 2),
}


@dataclass(frozen=True)
class EulerEnsembleSpec:
    """a_{L,k} = ε(L) a(k/L) with ε(L) = ε0 / √(ln L), or a fixed ε when ``eps_fixed`` is set."""

    profile: str = "tangential-2d"
    eps0: float = 0.1
    eps_fixed: float | None = None
    radius: float = 1.0

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise ValueError(f"unknown profile {self.profile!r}")

    @property
    def d(self) -> int:
        return PROFILES[self.profile][1]

    @property
    def D(self) -> int:
        return PROFILES[self.profile][2]

    def eps(self, L: float) -> float:
        if self.eps_fixed is not None:
            return self.eps_fixed
        return self.eps0 / math.sqrt(math.log(L))

    def ensemble(self, L: int) -> SpectralEnsemble:
        prof = PROFILES[self.profile][0]
        e = self.eps(L)
        ens = SpectralEnsemble.from_profile(lambda xi: e * prof(xi), L, self.d, self.radius)
        if self.D == self.d and self.d > 1:
            for k, a in zip(ens.support, ens.amplitudes):
                if abs(np.dot(k, a)) > 1e-12 * max(1.0, np.linalg.norm(a)):
                    raise ValueError(f"profile is not divergence free at k={k}")
        return ens

    def band(self, L: int) -> int:
        return int(math.floor(self.radius * L + 1e-9))


class GridScatter:
    """Maps ensemble draws (B, n_support) to rfft grid coefficients (B, D, grid)."""

    def __init__(self, ens: SpectralEnsemble, M: int):
        d = ens.d
        half = (M - 1) // 2
        keep = [i for i, k in enumerate(ens.support) if k[-1] >= 0]
        for i in keep:
            if any(abs(x) > half for x in ens.support[i]):
                raise ValueError("grid too small for the ensemble support")
        self.keep = np.array(keep)
        self.flat = np.array(
            [np.ravel_multi_index(tuple(x % M for x in ens.support[i][:-1]) + (ens.support[i][-1],), spectral_shape(M, d))
             for i in keep]
        )
        self.amps = ens.amplitudes[self.keep].T  # (D, n_keep)
        self.M, self.d, self.D = M, d, ens.D

    def __call__(self, g: np.ndarray) -> np.ndarray:
        B = g.shape[0]
        size = int(np.prod(spectral_shape(self.M, self.d)))
        out = np.zeros((B, self.D, size), dtype=complex)
        out[:, :, self.flat] = g[:, None, self.keep] * self.amps[None]
        return out.reshape((B, self.D) + spectral_shape(self.M, self.d))


def sample_initial_datum(spec: EulerEnsembleSpec, L: int, seed: int, M: int | None = None) -> np.ndarray:
    """Grid coefficients (D, grid) of a_L for one seeded draw."""
    ens = spec.ensemble(L)
    if M is None:
        M = odd_fast_len(2 * spec.band(L) + 1)
    g = sample_gaussian_batch(ens, 1, np.random.default_rng(seed))
    return GridScatter(ens, M)(g)[0]


def chunk_rngs(seed: int, samples: int, chunk: int) -> list[tuple[np.random.Generator, int]]:
    """Independent streams per chunk; the chunking fixes the draws, not the worker count."""
    n_chunks = max(1, math.ceil(samples / chunk))
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    sizes = [min(chunk, samples - i * chunk) for i in range(n_chunks)]
    return [(np.random.default_rng(c), s) for c, s in zip(children, sizes)]


def sample_norms(
    spec: EulerEnsembleSpec, L: int, rho: float, samples: int, seed: int, chunk: int = 1000, oversample: int = 4
) -> np.ndarray:
    """‖a_L‖_ρ for ``samples`` independent draws."""
    ens = spec.ensemble(L)
    band = spec.band(L)
    M = odd_fast_len(2 * band + 1)
    scatter = GridScatter(ens, M)
    out = []
    for rng, size in chunk_rngs(seed, samples, chunk):
        hat = scatter(sample_gaussian_batch(ens, size, rng))
        out.append(window_norms(hat, L, spec.d, oversample, band=band).norm(rho))
    return np.concatenate(out)


# ---------------------------------------------------------------------------
# Tail of the analytic norm
# ---------------------------------------------------------------------------

@dataclass
class TailCurve:
    R: np.ndarray
    probability: np.ndarray
    exceedances: np.ndarray
    eps: float
    median: float
    c: float
    c_lower: float
    c_upper: float
    fit_points: list[int]

    @property
    def stable(self) -> bool:
        return self.c > 0 and all(abs(x / self.c - 1) <= 0.3 for x in (self.c_lower, self.c_upper))

    def rows(self) -> list[list]:
        return [[float(r), float(p), int(n)] for r, p, n in zip(self.R, self.probability, self.exceedances)]


def _fit_c(R2e, logp) -> float:
    if len(R2e) < 2:
        return float("nan")
    return -stats.linregress(R2e, logp).slope


def norm_tail_mc(
    spec: EulerEnsembleSpec,
    L: int,
    rho0: float,
    R_values: Sequence[float],
    samples: int,
    seed: int,
    min_exceed: int = 10,
) -> TailCurve:
    """Empirical P(‖a_L‖_ρ0 >= R) and the Gaussian-tail rate c from ln P ≈ b − c R²/ε².

    The rate is fitted on the upper half of the ladder; the two halves of
    that range are fitted separately to measure stability.
    """
    if samples < 1000:
        raise ValueError("norm tails need at least 10^3 samples")
    norms = sample_norms(spec, L, rho0, samples, seed)
    R = np.asarray(sorted(R_values), dtype=float)
    counts = np.array([(norms >= r).sum() for r in R])
    prob = counts / samples
    eps = spec.eps(L)
    upper = list(range(len(R) // 2, len(R)))
    usable = [i for i in upper if counts[i] >= min_exceed]
    x = (R[usable] / eps) ** 2
    y = np.log(prob[usable])
    c = _fit_c(x, y)
    h = (len(usable) + 1) // 2
    lo, hi = usable[: max(h, 2)], usable[-max(h, 2):]
    c_lo = _fit_c((R[lo] / eps) ** 2, np.log(prob[lo]))
    c_hi = _fit_c((R[hi] / eps) ** 2, np.log(prob[hi]))
    return TailCurve(
        R=R, probability=prob, exceedances=counts, eps=eps, median=float(np.median(norms)),
        c=float(c), c_lower=float(c_lo), c_upper=float(c_hi), fit_points=usable,
    )


# ---------------------------------------------------------------------------
# Typical size on the grid x_n = 2πn
# ---------------------------------------------------------------------------

def grid_point_values(L: int, d: int, g_batch: np.ndarray, support: Sequence[tuple[int, ...]], amps: np.ndarray) -> np.ndarray:
    """a_L(2πn), n ∈ [1, L]^d, for a batch of draws; returns (B, L^d)."""
    B = g_batch.shape[0]
    bins = np.zeros((B,) + (L,) * d, dtype=complex)
    idx = tuple(np.array([k[j] % L for k in support]) for j in range(d))
    flat = np.ravel_multi_index(idx, (L,) * d)
    np.add.at(bins.reshape(B, -1), (slice(None), flat), g_batch * amps)
    vals = fft.ifftn(bins, axes=tuple(range(1, d + 1))) * (L**d / (2 * math.pi * L) ** (d / 2))
    # grid index n in [1, L] is n mod L
    vals = np.roll(vals, shift=-1, axis=tuple(range(1, d + 1)))
    return vals.reshape(B, -1)


def unit_ensemble(L: int, d: int) -> SpectralEnsemble:
    return SpectralEnsemble.from_profile(lambda xi: unit_scalar_profile(xi), L, d, 1.0)


def typical_size_experiment(
    d: int, delta: float, L_values: Sequence[int], samples: int, seed: int, chunk: int = 200
) -> list[dict]:
    """P(max_n |a_L(2πn)| >= δ√ln L), a lower bound for P(‖a_L‖_∞ >= δ√ln L).

    The grid values are independent centred Gaussians of variance π^{-d}, so
    the exact probability 1 − (1 − P(|Z| >= δ√ln L π^{d/2}))^{L^d} is reported
    alongside the Monte Carlo estimate.
    """
    rows = []
    for L in L_values:
        ens = unit_ensemble(L, d)
        amps = ens.amplitudes[:, 0]
        level = delta * math.sqrt(math.log(L))
        hits = 0
        for rng, size in chunk_rngs(seed + L, samples, chunk):
            vals = grid_point_values(L, d, sample_gaussian_batch(ens, size, rng), ens.support, amps).real
            hits += int((np.abs(vals).max(axis=1) >= level).sum())
        p = hits / samples
        tail = 2 * stats.norm.sf(level * math.pi ** (d / 2))
        exact = -math.expm1(L**d * math.log1p(-tail))
        rows.append({
            "L": L, "level": level, "probability": p,
            "se": math.sqrt(p * (1 - p) / samples), "exact": exact,
            "asymptotic_condition": 2 * math.pi ** (-d) * delta**2 < d,
        })
    return rows


def grid_covariance(L: int, d: int, samples: int, seed: int, pairs: Sequence[tuple[int, int]]) -> list[dict]:
    """Empirical E(a_L(x_n) a_L(x_m)) with 4-SE bands for flat grid index pairs."""
    ens = unit_ensemble(L, d)
    g = sample_gaussian_batch(ens, samples, np.random.default_rng(seed))
    vals = grid_point_values(L, d, g, ens.support, ens.amplitudes[:, 0]).real
    out = []
    for n, m in pairs:
        prod = vals[:, n] * vals[:, m]
        out.append({
            "n": n, "m": m, "mean": float(prod.mean()),
            "se": float(prod.std(ddof=1) / math.sqrt(samples)),
            "expected": math.pi ** (-d) if n == m else 0.0,
            "imag_max": float(np.abs(grid_point_values(L, d, g[:8], ens.support, ens.amplitudes[:, 0]).imag).max()),
        })
    return out
