import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from wavechaos.euler.analytic import (
    AnalyticNormConfig,
    BandError,
    analytic_norm,
    chi,
    chi_1,
    derivative_window_constants,
    homogeneous_m_norm,
    partition_sum,
    phi,
    phi_kernel_l1,
    phi_n,
    product_constant,
    projection_window_constants,
    psi_ramp,
    transfer_constant,
    window_norms,
)
from wavechaos.euler.picard import random_solenoidal
from wavechaos.euler.spectral import (
    from_physical,
    gradient,
    leray_grid,
    modes_to_grid,
    odd_fast_len,
    resample,
    to_physical,
)


def test_profile_values():
    assert phi(0.0) == 1.0 and phi(1.0) == 0.0 and phi(-1.0) == 0.0
    assert psi_ramp(-0.3) == 0.0 and psi_ramp(1.2) == 1.0
    assert chi_1([0.4, 0.0]) == 0.0 and chi_1([1.0, 0.2]) == 1.0
    assert chi(1.0) == 1.0 and chi(1.6) == 0.0


def test_partition_of_unity_dense():
    g = np.linspace(-4.3, 4.3, 701)
    xi = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1)
    assert np.abs(partition_sum(xi) - 1).max() <= 1e-12
    assert np.abs(partition_sum(g[:, None]) - 1).max() <= 1e-12


@given(st.floats(-5, 5), st.integers(-4, 4))
def test_window_support(x, n):
    if abs(x - n) >= 1:
        assert phi_n([x], [n]) == 0


def test_norm_of_zero_and_single_mode():
    L, d = 1.0, 1
    zero = np.zeros((1, 5 // 2 + 1), complex)
    assert analytic_norm(zero, L, 0.7, d) == 0
    for n in (1, 2, 3):
        M = 2 * n + 3
        c = math.sqrt(2 * math.pi * L) / 2  # û chosen so that u(x) = cos(n x)
        hat = modes_to_grid({(n,): np.array([c]), (-n,): np.array([c])}, M, d)
        for rho in (0.0, 0.5, 1.3):
            assert analytic_norm(hat, L, rho, d) == pytest.approx(math.exp(rho * n), rel=1e-12)


def test_band_guard():
    hat = np.zeros((1, 3, 2), complex)
    with pytest.raises(BandError):
        window_norms(hat, 1.0, 2, band=4)


def scalar_fields(count, band, M, d, rng):
    """Real band-limited scalar fields (count, 1, grid) with random exponential decay."""
    from wavechaos.euler.spectral import wavenumbers

    shape = (count, 1) + (M,) * (d - 1) + (M // 2 + 1,)
    hat = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    decay = rng.uniform(0.2, 1.5, size=(count, 1) + (1,) * d)
    for k in wavenumbers(M, d):
        hat = hat * (np.abs(k) <= band) * np.exp(-decay * np.abs(k) / 4)
    hat[(Ellipsis,) + (0,) * d] = 0
    return from_physical(to_physical(hat, 4.0, M, d), 4.0, d)


def test_inequalities_on_random_fields(capsys):
    rng = np.random.default_rng(0)
    L, d, band, count = 4.0, 2, 8, 200
    M = odd_fast_len(2 * 2 * band + 1)
    rho, rho_p = 0.8, 0.4
    K_der = transfer_constant(derivative_window_constants(L, d, 2 * band), rho, rho_p) * (rho - rho_p) * math.exp(-rho_p)
    K_proj = transfer_constant(projection_window_constants(L, d, 2 * band), rho, rho)
    K_prod = product_constant(rho, d)

    f, g = scalar_fields(count, band, M, d, rng), scalar_fields(count, band, M, d, rng)
    nf, ng = window_norms(f, L, d), window_norms(g, L, d)
    fac = nf.sup_factor * ng.sup_factor
    # pointwise product; the grid normalisation contributes (2πL)^{d/2}
    fg = from_physical(to_physical(f, L, M, d) * to_physical(g, L, M, d), L, d) * (2 * math.pi * L) ** (d / 2)
    prod = window_norms(fg, L, d).norm(rho) / (math.exp(2 * rho) * nf.norm(rho) * ng.norm(rho))
    assert np.all(prod <= K_prod * fac)

    grad = gradient(f, L, d).reshape((count, d) + f.shape[2:])
    der = window_norms(grad, L, d).norm(rho_p) * (rho - rho_p) * math.exp(-rho_p) / nf.norm(rho)
    assert np.all(der <= K_der * nf.sup_factor)

    v = np.concatenate([f, g], axis=1)
    nv = window_norms(v, L, d)
    proj = window_norms(leray_grid(v, L, d), L, d).norm(rho) / nv.norm(rho)
    assert np.all(proj <= K_proj * nv.sup_factor)
    with capsys.disabled():
        print(
            f"\nmeasured constants over {count} fields: product {prod.max():.3f} (a priori {K_prod:.3f}), "
            f"derivative {der.max():.3f} (a priori {K_der:.3f}), projection {proj.max():.3f} (a priori {K_proj:.3f})"
        )


def test_kernel_constants():
    assert phi_kernel_l1() == pytest.approx(1.16498, abs=2e-4)
    assert phi_kernel_l1() >= 1.0  # kernel integrates to φ(0) = 1
    assert phi_kernel_l1(derivative=True) == pytest.approx(0.37332, abs=2e-4)


def test_m_norm_monotone_in_power_and_theta():
    rng = np.random.default_rng(3)
    hat = random_solenoidal(4, 17, 4.0, 2, rng, scale=0.05)
    cfg = AnalyticNormConfig()
    m0 = homogeneous_m_norm(hat, 0, 4.0, 2, cfg)
    assert m0 >= analytic_norm(hat, 4.0, cfg.rho_grid()[-1], 2)
    assert homogeneous_m_norm(hat, 1, 4.0, 2, cfg) <= m0 * cfg.theta * cfg.rho0 * 2
    big = AnalyticNormConfig(theta=2.0)
    assert homogeneous_m_norm(hat, 1, 4.0, 2, big) >= homogeneous_m_norm(hat, 1, 4.0, 2, cfg)


def test_config_validation():
    with pytest.raises(ValueError):
        AnalyticNormConfig(beta=1.5)
    cfg = AnalyticNormConfig(theta=2.0, beta=0.5)
    assert cfg.threshold(0.5) == pytest.approx(2.0**-1.5)


def test_resample_invariance_of_norm():
    rng = np.random.default_rng(4)
    hat = random_solenoidal(3, 9, 2.0, 2, rng)
    a = analytic_norm(hat, 2.0, 0.5, 2)
    b = analytic_norm(resample(hat, 31, 2), 2.0, 0.5, 2)
    assert a == pytest.approx(b, rel=1e-12)
