"""Conditioned two-point moments of truncated Euler solutions across an L-ladder."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from ..moments import MomentAccumulator
from ..quasisolution import sample_gaussian_batch
from .analytic import AnalyticNormConfig, window_norms
from .ensemble import EulerEnsembleSpec, GridScatter, chunk_rngs
from .picard import calibrate_bilinear_constant, m_rule, picard_coefficients_readout, readout_grid_size


class ExperimentAbort(RuntimeError):
    def __init__(self, message: str, diagnostics: dict):
        super().__init__(message)
        self.diagnostics = diagnostics


def lattice_vector(xi: Sequence, L: int) -> tuple[int, ...]:
    k = [Fraction(x).limit_denominator(10**6) * L for x in xi]
    if any(v.denominator != 1 for v in k):
        raise ValueError(f"frequency {xi} is not on the lattice of scale {L}")
    return tuple(int(v) for v in k)


def grid_mode(hat: np.ndarray, k: Sequence[int]) -> np.ndarray:
    """û(k/L) from batched rfft coefficients (..., D, grid); conjugates when k_last < 0."""
    M = hat.shape[-2]
    if k[-1] < 0:
        k = tuple(-x for x in k)
        return np.conj(hat[(Ellipsis, slice(None)) + tuple(x % M for x in k[:-1]) + (k[-1],)])
    return hat[(Ellipsis, slice(None)) + tuple(x % M for x in k[:-1]) + (k[-1],)]


@dataclass
class Theorem2Config:
    xi: tuple = (0.5, 0.25)
    eta: tuple = (0.25, 0.5)
    components: tuple = (0, 0)
    t: float = 0.5
    L_values: tuple = (4, 8)
    samples: int = 100_000
    seed: int = 0
    chunk: int = 100
    M_fixed: int | None = None
    alpha: float = 0.0
    smallness: float = 0.5
    min_acceptance: float = 0.9
    calibration_probes: int = 12
    norm: AnalyticNormConfig = field(default_factory=AnalyticNormConfig)


def theorem2_experiment(spec: EulerEnsembleSpec, cfg: Theorem2Config) -> list[dict]:
    """Mixed-mode moment E(1_E û(ξ)û(η)) at truncation M(L) and M(L)+1 per L.

    Reports the estimate, its standard error, the ratio to ε(L)² L^{-d/2}, and
    the difference between the two truncation orders.
    """
    d = spec.d
    if spec.eps0 > cfg.smallness and spec.eps_fixed is None:
        raise ExperimentAbort(
            f"ε(L)√ln L = {spec.eps0} exceeds the smallness constant {cfg.smallness}",
            {"eps0": spec.eps0, "smallness": cfg.smallness},
        )
    if not cfg.t < cfg.norm.theta * cfg.norm.rho0:
        raise ValueError("time must lie below θ ρ0")
    rows = []
    for L in cfg.L_values:
        ens = spec.ensemble(L)
        band = spec.band(L)
        kx, ke = lattice_vector(cfg.xi, L), lattice_vector(cfg.eta, L)
        if not any(a + b for a, b in zip(kx, ke)):
            raise ValueError("ξ + η must be nonzero")
        M = cfg.M_fixed if cfg.M_fixed is not None else m_rule(L, 2, d, cfg.alpha)
        cal = calibrate_bilinear_constant(cfg.norm, L, band, probes=cfg.calibration_probes, seed=cfg.seed + L, d=d)
        A = cfg.norm.threshold(cal.C_picard)
        G = readout_grid_size(band, M + 1)
        scatter = GridScatter(ens, G)
        acc_M, acc_M1, acc_diag = MomentAccumulator(), MomentAccumulator(), MomentAccumulator()
        accepted = 0
        max_norm = 0.0
        i1, i2 = cfg.components
        for rng, size in chunk_rngs(cfg.seed * 1_000_003 + L, cfg.samples, cfg.chunk):
            g = sample_gaussian_batch(ens, size, rng)
            u0 = scatter(g)
            norms = window_norms(u0, L, d, cfg.norm.oversample, band=band).norm(cfg.norm.rho0)
            keep = norms <= A
            accepted += int(keep.sum())
            max_norm = max(max_norm, float(norms.max()))
            coeffs = picard_coefficients_readout(u0, M + 1, L, d)
            ux = [grid_mode(c, kx)[:, i1] * cfg.t**n for n, c in enumerate(coeffs)]
            ue = [grid_mode(c, ke)[:, i2] * cfg.t**n for n, c in enumerate(coeffs)]
            fx, fe = sum(ux[: M + 1]), sum(ue[: M + 1])
            fx1, fe1 = fx + ux[M + 1], fe + ue[M + 1]
            mx = [grid_mode(c, tuple(-x for x in kx))[:, i1] * cfg.t**n for n, c in enumerate(coeffs[: M + 1])]
            acc_M.add(np.where(keep, fx * fe, 0))
            acc_M1.add(np.where(keep, fx1 * fe1, 0))
            acc_diag.add(np.where(keep, fx * sum(mx), 0))
        frac = accepted / cfg.samples
        diag = {"L": L, "acceptance": frac, "A_theta": A, "max_norm": max_norm, "C_picard": cal.C_picard}
        if frac < cfg.min_acceptance:
            raise ExperimentAbort(f"conditioning event holds for only {frac:.3f} of draws at L={L}", diag)
        eps = spec.eps(L)
        scale = eps**2 * L ** (-d / 2)
        est, se = acc_M.mean, acc_M.se
        rows.append({
            **diag,
            "M": M, "grid": G, "eps": eps,
            "estimate_re": est.real, "estimate_im": est.imag, "se": se,
            "estimate_M1_re": acc_M1.mean.real, "estimate_M1_im": acc_M1.mean.imag,
            "truncation_diff": abs(acc_M1.mean - est),
            "ratio": abs(est) / scale, "ratio_upper": (abs(est) + 4 * se) / scale,
            "diag_re": acc_diag.mean.real, "diag_im": acc_diag.mean.imag, "diag_se": acc_diag.se,
            "C_bilinear_measured": cal.measured,
        })
    return rows
