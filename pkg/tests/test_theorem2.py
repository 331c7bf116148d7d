import numpy as np
import pytest

from wavechaos.euler.ensemble import EulerEnsembleSpec
from wavechaos.euler.theorem2 import ExperimentAbort, Theorem2Config, grid_mode, lattice_vector, theorem2_experiment


def small_cfg(**kw):
    base = dict(L_values=(4,), samples=300, chunk=100, calibration_probes=3, seed=1)
    base.update(kw)
    return Theorem2Config(**base)


def test_small_run_is_bounded_and_reproducible():
    spec = EulerEnsembleSpec(eps0=0.1)
    rows = theorem2_experiment(spec, small_cfg())
    assert len(rows) == 1
    r = rows[0]
    for key in ("L", "M", "acceptance", "estimate_re", "estimate_im", "se", "ratio", "ratio_upper",
                "truncation_diff", "A_theta", "max_norm", "C_picard"):
        assert key in r
    assert r["acceptance"] == 1.0
    assert r["max_norm"] < r["A_theta"]
    assert r["M"] == 4
    assert r["truncation_diff"] < r["se"]
    assert np.isfinite(r["ratio_upper"])
    assert theorem2_experiment(spec, small_cfg()) == rows


def test_abort_when_smallness_fails():
    with pytest.raises(ExperimentAbort) as exc:
        theorem2_experiment(EulerEnsembleSpec(eps0=0.9), small_cfg())
    assert exc.value.diagnostics["eps0"] == 0.9


def test_abort_when_conditioning_is_rare():
    with pytest.raises(ExperimentAbort) as exc:
        theorem2_experiment(EulerEnsembleSpec(eps0=0.1, eps_fixed=3.0), small_cfg(samples=100))
    assert exc.value.diagnostics["acceptance"] < 0.9


def test_config_validation():
    spec = EulerEnsembleSpec(eps0=0.1)
    with pytest.raises(ValueError):
        theorem2_experiment(spec, small_cfg(t=2.0))
    with pytest.raises(ValueError):
        theorem2_experiment(spec, small_cfg(xi=(0.5, 0.25), eta=(-0.5, -0.25)))


def test_lattice_vector():
    assert lattice_vector((0.5, 0.25), 8) == (4, 2)
    assert lattice_vector((-0.75,), 4) == (-3,)
    with pytest.raises(ValueError):
        lattice_vector((0.3, 0.25), 4)


def test_grid_mode_conjugates_negative_last_index():
    hat = np.zeros((1, 2, 5, 3), complex)
    hat[0, :, 4, 2] = [1 + 2j, 3 - 1j]
    assert np.array_equal(grid_mode(hat, (-1, 2))[0], [1 + 2j, 3 - 1j])
    assert np.array_equal(grid_mode(hat, (1, -2))[0], [1 - 2j, 3 + 1j])
