"""Picard iteration for ∂_t u = −P(u·∇u) with time-independent initial data.

With no dispersion every Picard term is a monomial in time, u_n(t) = t^n U_n,
and U_{n+1} = −(n+1)^{-1} Σ_{a+b=n} P(U_a·∇U_b).  The coefficients are
computed pseudo-spectrally on a grid wide enough to be alias free.  A second
path integrates the recursion in time with Gauss–Legendre rules and is kept
as a cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .analytic import AnalyticNormConfig, analytic_norm, homogeneous_m_norm
from .spectral import (
    _transport,
    band_of,
    from_physical,
    gradient,
    grid_size,
    leray_grid,
    odd_fast_len,
    resample,
    to_physical,
)


class SmallnessError(ValueError):
    def __init__(self, message: str, norm: float, threshold: float):
        super().__init__(message)
        self.norm = norm
        self.threshold = threshold


def picard_grid_size(band: int, max_order: int) -> int:
    """Odd grid resolving all products up to ``max_order`` without aliasing."""
    return odd_fast_len(2 * (max_order + 1) * band + 1)


def picard_coefficients(u0_hat: np.ndarray, max_order: int, L: float, d: int) -> list[np.ndarray]:
    """[U_0, ..., U_max_order] for batched data ``u0_hat`` (..., d, grid)."""
    M = grid_size(u0_hat, d)
    phys, grads = [], []
    coeffs = [u0_hat]
    for n in range(max_order):
        phys.append(to_physical(coeffs[n], L, M, d))
        grads.append(to_physical(gradient(coeffs[n], L, d), L, M, d))
        acc = None
        for a in range(n + 1):
            term = _transport(phys[a], grads[n - a], d)
            acc = term if acc is None else acc + term
        nxt = -leray_grid(from_physical(acc, L, d), L, d) / (n + 1)
        coeffs.append(nxt)
    return coeffs


def readout_bands(base: int, max_order: int) -> list[int]:
    """Band of U_n still able to reach modes |k|_∞ <= base by order ``max_order``."""
    return [min(n + 1, max_order - n + 1) * base for n in range(max_order + 1)]


def readout_grid_size(base: int, max_order: int) -> int:
    """Odd grid on which the band-limited recursion is alias free."""
    need = readout_bands(base, max_order)
    worst = 0
    for m in range(1, max_order + 1):
        s = max(need[a] + need[m - 1 - a] for a in range(m))
        worst = max(worst, s + need[m])
    return odd_fast_len(worst + 1)


def picard_coefficients_readout(u0_hat: np.ndarray, max_order: int, L: float, d: int) -> list[np.ndarray]:
    """Picard coefficients exact on |k|_∞ <= band(u0), and only there.

    Each U_n is cut to the modes that can still feed the low band by order
    ``max_order``; the transport is taken in divergence form P∇·(u⊗v),
    valid because every U_n is divergence free.  The grid must have at least
    :func:`readout_grid_size` points.
    """
    from .spectral import wavenumbers

    M = grid_size(u0_hat, d)
    base = band_of(u0_hat, d)
    if M < readout_grid_size(base, max_order):
        raise ValueError("grid too small for the band-limited recursion")
    ks = wavenumbers(M, d)
    kinf = np.max(np.stack(np.broadcast_arrays(*[np.abs(k) for k in ks])), axis=0)
    need = readout_bands(base, max_order)
    k2 = sum(k * k for k in ks).astype(float)
    k2[(0,) * d] = 1.0
    keep = [(kinf <= need[n]).astype(float) for n in range(max_order + 1)]
    for mask in keep:
        mask[(0,) * d] = 0.0
    kl = [1j * k / L for k in ks]
    pairs = [(i, j) for i in range(d) for j in range(i, d)]
    coeffs = [u0_hat]
    phys = np.empty((max_order,) + u0_hat.shape[:-d] + (M,) * d)
    for n in range(max_order):
        phys[n] = to_physical(coeffs[n], L, M, d)
        lo, hi = phys[: n + 1], phys[n::-1]
        tensor = np.stack(
            [np.einsum("a...,a...->...", lo[(slice(None), Ellipsis, i) + (slice(None),) * d],
                       hi[(slice(None), Ellipsis, j) + (slice(None),) * d]) for i, j in pairs],
            axis=-d - 1,
        )
        T = from_physical(tensor, L, d)
        comp = {}
        for idx, (i, j) in enumerate(pairs):
            comp[(i, j)] = comp[(j, i)] = T[(Ellipsis, idx) + (slice(None),) * d]
        # w_c = i Σ_j (k_j/L) T_jc, then project and cut to the readout band
        w = [sum(kl[j] * comp[(j, c)] for j in range(d)) for c in range(d)]
        div = sum(ks[c] * w[c] for c in range(d)) / k2
        scale = -keep[n + 1] / (n + 1)
        coeffs.append(np.stack([(w[c] - ks[c] * div) * scale for c in range(d)], axis=-d - 1))
    return coeffs


def picard_coefficients_quadrature(
    u0_hat: np.ndarray, max_order: int, L: float, d: int, tol: float = 1e-10, t_ref: float = 1.0
) -> tuple[list[np.ndarray], list[int]]:
    """Same coefficients, each obtained from a Gauss–Legendre time integral.

    u_{n+1}(t_ref) = −∫_0^{t_ref} Σ P(u_a(τ)·∇u_b(τ)) dτ with earlier terms
    evaluated from their own quadrature coefficients; the rule order doubles
    until successive values agree to ``tol`` (relative).  Returns the
    coefficients and the rule orders used.
    """
    M = grid_size(u0_hat, d)
    coeffs = [u0_hat]
    orders = []
    for n in range(max_order):
        phys = [to_physical(c, L, M, d) for c in coeffs]
        grads = [to_physical(gradient(c, L, d), L, M, d) for c in coeffs]

        def integrand(tau):
            acc = 0
            for a in range(n + 1):
                acc = acc + tau ** n * _transport(phys[a], grads[n - a], d)
            return -leray_grid(from_physical(acc, L, d), L, d)

        q, prev = 1, None
        while True:
            x, w = np.polynomial.legendre.leggauss(q)
            taus = 0.5 * t_ref * (x + 1.0)
            val = sum(wi * 0.5 * t_ref * integrand(ti) for wi, ti in zip(w, taus))
            if prev is not None:
                scale = max(np.abs(val).max(), 1e-300)
                if np.abs(val - prev).max() <= tol * scale:
                    break
            if q > 64:
                raise RuntimeError("Gauss–Legendre refinement did not converge")
            prev, q = val, 2 * q
        orders.append(q)
        coeffs.append(val / t_ref ** (n + 1))
    return coeffs, orders


def evaluate_terms(coeffs: list[np.ndarray], t: float) -> list[np.ndarray]:
    return [t**n * c for n, c in enumerate(coeffs)]


def _bilinear_m_ratio(u_hat, a, v_hat, b, L, d, cfg: AnalyticNormConfig) -> float:
    """‖B(u,v)‖_M / (θ^{1+β} ‖u‖_M ‖v‖_M) for u = t^a U, v = t^b V, B = ∫_0^t P(u·∇v)."""
    M = grid_size(u_hat, d)
    prod = _transport(to_physical(u_hat, L, M, d), to_physical(gradient(v_hat, L, d), L, M, d), d)
    w = leray_grid(from_physical(prod, L, d), L, d) / (a + b + 1)
    num = homogeneous_m_norm(w, a + b + 1, L, d, cfg)
    den = cfg.theta ** (1 + cfg.beta) * homogeneous_m_norm(u_hat, a, L, d, cfg) * homogeneous_m_norm(v_hat, b, L, d, cfg)
    return float(num / den)


def random_solenoidal(band: int, M: int, L: float, d: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """Random real divergence-free field with modes |k_j| <= band (zero mean)."""
    from .spectral import spectral_shape, wavenumbers

    shape = (d,) + spectral_shape(M, d)
    hat = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    ks = wavenumbers(M, d)
    mask = np.ones(shape[1:], dtype=bool)
    for k in ks:
        mask &= np.abs(k) <= band
    hat *= mask
    # Hermitian completion along the k_last = 0 plane via a physical round trip
    hat = from_physical(to_physical(hat, L, M, d), L, d)
    return scale * leray_grid(hat, L, d)


@dataclass
class BilinearCalibration:
    ratios: list[float]
    safety: float

    @property
    def measured(self) -> float:
        return max(self.ratios)

    @property
    def C_bilinear(self) -> float:
        return self.safety * self.measured

    @property
    def C_picard(self) -> float:
        # Catalan counts of binary trees are bounded by 4^n
        return 4.0 * self.C_bilinear


def calibrate_bilinear_constant(
    cfg: AnalyticNormConfig,
    L: float,
    band: int,
    probes: int = 12,
    seed: int = 0,
    safety: float = 2.0,
    d: int = 2,
) -> BilinearCalibration:
    """Probe the bilinear estimate on random solenoidal inputs of degrees 0..2 in t."""
    rng = np.random.default_rng(seed)
    M = odd_fast_len(4 * band + 1)
    ratios = []
    for i in range(probes):
        u = random_solenoidal(band, M, L, d, rng)
        v = random_solenoidal(band, M, L, d, rng)
        a, b = int(rng.integers(0, 3)), int(rng.integers(0, 3))
        ratios.append(_bilinear_m_ratio(u, a, v, b, L, d, cfg))
    return BilinearCalibration(ratios=ratios, safety=safety)


@dataclass
class PicardReport:
    coefficients: list[np.ndarray]
    m_norms: list[float]
    u0_norm: float
    u0_m_norm: float
    threshold: float
    C: float
    envelope: list[float] = field(default_factory=list)

    @property
    def ratios(self) -> list[float]:
        return [b / a if a > 0 else 0.0 for a, b in zip(self.m_norms, self.m_norms[1:])]

    @property
    def envelope_holds(self) -> bool:
        return all(m <= e * (1 + 1e-9) for m, e in zip(self.m_norms, self.envelope))


def picard_iterate_euler(
    u0_hat: np.ndarray,
    M: int,
    L: float,
    cfg: AnalyticNormConfig,
    C: float,
    d: int = 2,
    enforce_gate: bool = True,
) -> PicardReport:
    """Picard terms u_1..u_M of a single datum with M-norms and the geometric envelope.

    The datum is moved onto a grid wide enough for order M; the gate
    ‖u0‖_{ρ0} < A(θ) is enforced unless ``enforce_gate`` is False.
    """
    band = band_of(u0_hat, d, tol=1e-300)
    G = picard_grid_size(max(band, 1), M)
    u0 = resample(u0_hat, G, d) if G != grid_size(u0_hat, d) else u0_hat
    norm0 = analytic_norm(u0, L, cfg.rho0, d, cfg.oversample)
    A = cfg.threshold(C)
    if enforce_gate and not norm0 < A:
        raise SmallnessError(f"‖u0‖_ρ0 = {norm0:.6g} is not below A(θ) = {A:.6g}", norm0, A)
    coeffs = picard_coefficients(u0, M, L, d)
    m_norms = [float(homogeneous_m_norm(c, n, L, d, cfg)) for n, c in enumerate(coeffs)]
    m0 = m_norms[0]
    env = [cfg.theta ** ((1 + cfg.beta) * n) * C**n * m0 ** (n + 1) for n in range(M + 1)]
    return PicardReport(
        coefficients=coeffs, m_norms=m_norms, u0_norm=norm0, u0_m_norm=m0, threshold=A, C=C, envelope=env
    )


def m_rule(L: float, R: int, d: int, alpha: float = 0.0) -> int:
    """Smallest M with 2 ln2 M / ln L > (R+1)d/2 + Rα."""
    target = ((R + 1) * d / 2 + R * alpha) * math.log(L) / (2 * math.log(2))
    return int(math.floor(target)) + 1
