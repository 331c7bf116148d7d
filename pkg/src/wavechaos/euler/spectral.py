"""Leray projection, the Euler bilinear symbol and grid transforms.

Grid fields are stored as the Fourier coefficients û(k/L) of
u(x) = (2πL)^{-d/2} Σ_k û(k/L) e^{ik·x/L} in ``rfftn`` layout over the last
``d`` axes; a component axis of length D precedes them and any batch axes
come first.  Grid sizes are odd so that no Nyquist mode appears.
"""

from __future__ import annotations

import math
from typing import Mapping

import numpy as np
from scipy import fft

from ..quasisolution import GenericModel, zero_omega


def euler_psi(p, q, X, Y) -> np.ndarray:
    """i (q·X) (Y − (ξ·Y) ξ/|ξ|²) with ξ = p + q: the symbol of P(u·∇v).

    ``p`` and ``q`` are the frequencies of u and v, X and Y their
    coefficients.  Broadcasts over leading axes.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    xi = p + q
    xi2 = np.sum(xi * xi, axis=-1)
    if np.any(xi2 == 0):
        raise ValueError("euler_psi needs a nonzero total frequency")
    X = np.asarray(X)
    Y = np.asarray(Y)
    transport = np.asarray(1j * np.sum(q * X, axis=-1))
    proj = Y - np.asarray(np.sum(xi * Y, axis=-1) / xi2)[..., None] * xi
    return transport[..., None] * proj


def _model_psi(xis, Xs):
    return -euler_psi(xis[0], xis[1], Xs[0], Xs[1])


def euler_model() -> GenericModel:
    """∂_t u = −P(u·∇u) on the 2D torus: ω ≡ 0, Ψ = −euler_psi, r = 1, C_ψ = 1."""
    return GenericModel(
        name="euler-2d", d=2, D=2, N=2, omega=zero_omega, psi=_model_psi, r=1.0, psi_constant=1.0
    )


def leray_project(xi, v) -> np.ndarray:
    """v − (ξ·v) ξ/|ξ|² for frequencies ``xi`` (..., d) and coefficients ``v`` (..., d)."""
    xi = np.asarray(xi, dtype=float)
    v = np.asarray(v)
    xi2 = np.sum(xi * xi, axis=-1)
    if np.any(xi2 == 0):
        raise ValueError("Leray projection is undefined at the zero frequency")
    return v - (np.sum(xi * v, axis=-1) / xi2)[..., None] * xi


def odd_fast_len(n: int) -> int:
    """Smallest odd m >= n whose prime factors are 3, 5 or 7."""
    m = max(int(n), 1)
    if m % 2 == 0:
        m += 1
    while True:
        r = m
        for p in (3, 5, 7):
            while r % p == 0:
                r //= p
        if r == 1:
            return m
        m += 2


def wavenumbers(M: int, d: int) -> list[np.ndarray]:
    """Integer wavenumbers of an rfft grid, one broadcastable array per axis."""
    if M % 2 == 0:
        raise ValueError("grid sizes are odd")
    ks = []
    for j in range(d):
        k = np.rint(fft.rfftfreq(M) * M) if j == d - 1 else np.rint(fft.fftfreq(M) * M)
        shape = [1] * d
        shape[j] = len(k)
        ks.append(k.astype(int).reshape(shape))
    return ks


def spectral_shape(M: int, d: int) -> tuple[int, ...]:
    return (M,) * (d - 1) + (M // 2 + 1,)


def _axes(d: int) -> tuple[int, ...]:
    return tuple(range(-d, 0))


def to_physical(hat: np.ndarray, L: float, M: int, d: int) -> np.ndarray:
    return fft.irfftn(hat, s=(M,) * d, axes=_axes(d)) * (M**d / (2 * math.pi * L) ** (d / 2))


def from_physical(u: np.ndarray, L: float, d: int) -> np.ndarray:
    M = u.shape[-1]
    return fft.rfftn(u, axes=_axes(d)) * ((2 * math.pi * L) ** (d / 2) / M**d)


def physical_grid(L: float, M: int, d: int) -> list[np.ndarray]:
    x = 2 * math.pi * L * np.arange(M) / M
    out = []
    for j in range(d):
        shape = [1] * d
        shape[j] = M
        out.append(x.reshape(shape))
    return out


def leray_grid(hat: np.ndarray, L: float, d: int) -> np.ndarray:
    """Leray projection of a grid field (component axis at -d-1); the mean is removed."""
    ks = wavenumbers(grid_size(hat, d), d)
    k2 = sum(k * k for k in ks).astype(float)
    safe = np.where(k2 == 0, 1.0, k2)
    div = sum(ks[j] * _comp(hat, j, d) for j in range(d))
    out = np.stack([_comp(hat, j, d) - ks[j] * div / safe for j in range(d)], axis=-d - 1)
    out[(Ellipsis, slice(None)) + (0,) * d] = 0
    return out


def grid_size(hat: np.ndarray, d: int) -> int:
    return hat.shape[-1] * 2 - 1


def gradient(hat: np.ndarray, L: float, d: int) -> np.ndarray:
    """Coefficients of ∂_j u, stacked on a new axis right before the component axis."""
    ks = wavenumbers(grid_size(hat, d), d)
    return np.stack([1j * (ks[j] / L) * hat for j in range(d)], axis=-d - 2)


def _comp(a: np.ndarray, j, d: int) -> np.ndarray:
    """Index the axis just before the ``d`` grid axes."""
    return a[(Ellipsis, j) + (slice(None),) * d]


def _transport(u, du, d):
    # sum_j u_j ∂_j v; du carries the derivative axis before the component axis
    out = _comp(u, slice(0, 1), d) * _comp(du, 0, d + 1)
    for j in range(1, d):
        out = out + _comp(u, slice(j, j + 1), d) * _comp(du, j, d + 1)
    return out


def pseudo_spectral_transport(u_hat: np.ndarray, v_hat: np.ndarray, L: float, d: int) -> np.ndarray:
    """Coefficients of P(u·∇v) computed on the grid by pointwise products.

    Exact (no aliasing) when the grid size exceeds twice the sum of the two bands.
    """
    M = grid_size(u_hat, d)
    u = to_physical(u_hat, L, M, d)
    dv = to_physical(gradient(v_hat, L, d), L, M, d)
    return leray_grid(from_physical(_transport(u, dv, d), L, d), L, d)


def convolution_transport(u_modes: Mapping, v_modes: Mapping, L: float) -> dict:
    """P(u·∇v) by the explicit convolution sum over mode pairs, via :func:`euler_psi`."""
    d = len(next(iter(u_modes)))
    pref = (2 * math.pi * L) ** (-d / 2)
    out: dict = {}
    for p, X in u_modes.items():
        for q, Y in v_modes.items():
            k = tuple(a + b for a, b in zip(p, q))
            if not any(k):
                continue
            val = pref * euler_psi(np.asarray(p) / L, np.asarray(q) / L, X, Y)
            out[k] = out[k] + val if k in out else val
    return out


def modes_to_grid(modes: Mapping, M: int, d: int, D: int | None = None) -> np.ndarray:
    """Scatter a Hermitian mode dictionary into an rfft grid (keeps k_last >= 0)."""
    if D is None:
        D = len(np.atleast_1d(next(iter(modes.values()))))
    hat = np.zeros((D,) + spectral_shape(M, d), dtype=complex)
    half = (M - 1) // 2
    for k, v in modes.items():
        if any(abs(x) > half for x in k):
            raise ValueError(f"mode {k} outside the grid band {half}")
        if k[-1] < 0:
            continue
        idx = tuple(x % M for x in k[:-1]) + (k[-1],)
        hat[(slice(None),) + idx] = v
    return hat


def grid_to_modes(hat: np.ndarray, d: int, tol: float = 0.0) -> dict:
    """Inverse of :func:`modes_to_grid`, filling k_last < 0 by Hermitian symmetry."""
    M = grid_size(hat, d)
    ks = np.meshgrid(*[k.ravel() for k in wavenumbers(M, d)], indexing="ij")
    out = {}
    flat = hat.reshape(hat.shape[0], -1)
    kflat = np.stack([k.ravel() for k in ks], axis=1)
    for i, k in enumerate(kflat):
        v = flat[:, i]
        if np.abs(v).max() <= tol or not np.any(k):
            continue
        k = tuple(int(x) for x in k)
        out[k] = v
        if k[-1] > 0:
            out[tuple(-x for x in k)] = np.conj(v)
    return out


def band_of(hat: np.ndarray, d: int, tol: float = 0.0) -> int:
    """Largest |k_j| carrying a coefficient above ``tol``."""
    M = grid_size(hat, d)
    ks = wavenumbers(M, d)
    mask = np.abs(hat).reshape((-1,) + hat.shape[-d:]).max(axis=0) > tol
    if not mask.any():
        return 0
    return int(max(np.abs(np.broadcast_to(k, mask.shape)[mask]).max() for k in ks))


def resample(hat: np.ndarray, M_to: int, d: int) -> np.ndarray:
    """Copy coefficients onto an odd grid of size ``M_to`` (zero padding or truncation)."""
    M_from = grid_size(hat, d)
    if M_to % 2 == 0:
        raise ValueError("grid sizes are odd")
    h = min(M_from, M_to) // 2
    out = np.zeros(hat.shape[: hat.ndim - d] + spectral_shape(M_to, d), dtype=hat.dtype)
    idx_full = np.r_[0 : h + 1, -h:0]
    src = [np.where(idx_full < 0, idx_full + M_from, idx_full) for _ in range(d - 1)]
    dst = [np.where(idx_full < 0, idx_full + M_to, idx_full) for _ in range(d - 1)]
    src.append(np.arange(h + 1))
    dst.append(np.arange(h + 1))
    out[(Ellipsis,) + np.ix_(*dst)] = hat[(Ellipsis,) + np.ix_(*src)]
    return out


def divergence(hat: np.ndarray, L: float, d: int) -> np.ndarray:
    ks = wavenumbers(grid_size(hat, d), d)
    return sum((ks[j] / L) * _comp(hat, j, d) for j in range(d))


def energy(hat: np.ndarray, d: int) -> np.ndarray:
    """Σ_k |û(k/L)|² over the full lattice (rfft half counted twice)."""
    w = np.full(hat.shape[-1], 2.0)
    w[0] = 1.0
    return np.sum(np.abs(hat) ** 2 * w, axis=tuple(range(-d - 1, 0)))
