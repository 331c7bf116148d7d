import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wavechaos.moments import (
    MomentQuery,
    mc_moment,
    mc_moments,
    mixed_mode_decay,
    ensemble_ladder,
    oracle_moment,
    query_family,
    residual_bound,
    structural_moment,
    theorem1_residual,
    toy_ensemble,
    toy_profile,
    wick_prediction,
)
from wavechaos.pairing import maximal_zero_sum_partitions
from wavechaos.quasisolution import BudgetError, TreeCoefficients, toy_model, zero_omega

# value of E(û_1(1/4) û_1(-1/4)) at t = 0.5 on the L = 4 toy ensemble, from
# explicit one-node coefficients and hand-coded Isserlis sums
TOY_SECOND_MOMENT = 0.03904049733938804 + 0.007407099321944209j

TOY = toy_model()
STATIC = toy_model(omega=zero_omega)
ENS = toy_ensemble(4)
TC = TreeCoefficients(TOY, ENS)


def q(orders, ks, t=0.5):
    return MomentQuery(tuple(orders), (0,) * len(orders), tuple((k,) for k in ks), t)


def close(a, b, rel=1e-10):
    return abs(a - b) <= rel * max(abs(a), abs(b))


def test_linear_second_moment_static():
    for k in (1, 2):
        assert structural_moment(q((0, 0), (k, -k)), STATIC, ENS) == pytest.approx(1.0)
        assert oracle_moment(q((0, 0), (k, -k)), STATIC, ENS) == pytest.approx(1.0)


@pytest.mark.parametrize("orders,ks", [((0, 0, 0), (1, 1, -2)), ((1, 1, 0), (2, -1, -1)), ((1, 0, 0, 0), (1, 1, -1, -1))])
def test_odd_index_sets_vanish_exactly(orders, ks):
    query = q(orders, ks)
    assert structural_moment(query, TOY, ENS) == 0
    assert oracle_moment(query, TOY, ENS) == 0
    assert wick_prediction(query, TOY, ENS) == 0
    assert mc_moment(query, TOY, ENS, 2000, 0, antithetic=True).mean == 0


def test_frozen_toy_value():
    query = q((1, 1), (1, -1))
    s = structural_moment(query, TOY, ENS)
    o = oracle_moment(query, TOY, ENS)
    assert close(s, TOY_SECOND_MOMENT) and close(o, TOY_SECOND_MOMENT)


def test_linear_fourth_moment():
    query = q((0, 0, 0, 0), (1, -1, 2, -2))
    phase = np.exp(2j * 0.5 * ((1 / 4) ** 2 + (2 / 4) ** 2))
    assert close(oracle_moment(query, TOY, ENS), phase)
    assert close(structural_moment(query, TOY, ENS), phase)


def test_monte_carlo_examples():
    lin = mc_moment(q((0, 0), (1, -1)), STATIC, ENS, 100_000, 1)
    assert lin.within(1.0)
    a = mc_moment(q((1, 1), (1, -1)), TOY, ENS, 20_000, 3)
    b = mc_moment(q((1, 1), (1, -1)), TOY, ENS, 20_000, 3)
    assert a == b
    assert mc_moment(q((1, 1), (1, -1)), TOY, ENS, 100_000, 4).within(TOY_SECOND_MOMENT)


def test_wick_prediction_examples():
    two = q((1, 1), (1, -1))
    assert wick_prediction(two, TOY, ENS) == structural_moment(two, TOY, ENS)
    assert wick_prediction(q((0, 0, 0), (1, 1, -2)), TOY, ENS) == 0
    four = q((0, 1, 0, 1), (1, -1, 2, -2))
    pairs = [((0, 1), (2, 3)), ((0, 2), (1, 3)), ((0, 3), (1, 2))]
    expected = sum(
        structural_moment(four.sub(a), TOY, ENS) * structural_moment(four.sub(b), TOY, ENS) for a, b in pairs
    )
    assert wick_prediction(four, TOY, ENS) == pytest.approx(expected, rel=1e-14)


def test_residual_examples():
    r = theorem1_residual(q((1, 1), (2, -2)), TOY, ENS)
    assert r.residual == 0
    r = theorem1_residual(q((1, 1), (2, 1)), TOY, ENS)
    assert r.structural == 0 and r.residual == 0 and r.zero_sum_partitions == []
    assert r.to_json()["bound"] == r.bound


FAMILY = query_family([-3, -2, -1, 1, 2, 3], max_R=4, max_order=1)


@settings(max_examples=120)
@given(st.sampled_from(FAMILY))
def test_structural_equals_oracle(query):
    s = structural_moment(query, TOY, ENS, TC)
    o = oracle_moment(query, TOY, ENS, TC)
    assert close(s, o) or s == o == 0
    if len(query.index_set(2)) % 2:
        assert s == 0 and o == 0
    if s != 0:
        assert maximal_zero_sum_partitions(query.ks)


@settings(max_examples=60)
@given(st.sampled_from(FAMILY))
def test_residual_below_bound(query):
    r = theorem1_residual(query, TOY, ENS, with_oracle=False)
    assert r.residual <= r.bound


def test_monte_carlo_agrees_on_a_family():
    fam = query_family([-2, -1, 1, 2], max_R=3, max_order=1)
    est = mc_moments(fam, TOY, ENS, 50_000, 8)
    for query, e in zip(fam, est):
        assert e.within(structural_moment(query, TOY, ENS, TC)), query


def test_antithetic_is_unbiased():
    query = q((1, 1), (1, -1))
    e = mc_moment(query, TOY, ENS, 50_000, 2, antithetic=True)
    assert e.within(TOY_SECOND_MOMENT)


@pytest.mark.parametrize("n", [0, 1, 2])
@pytest.mark.parametrize("k", [1, 2, 3])
def test_hermitian_for_odd_dispersion(n, k):
    model = toy_model(omega=lambda xi: float(xi[0]) ** 3)
    m = structural_moment(q((n, n), (k, -k)), model, ENS)
    assert abs(m.imag) <= 1e-12 * max(abs(m), 1e-300) or m == 0


def test_bound_formula():
    query = q((1, 1), (1, -1))
    a = ENS.l2_linf()
    expected = math.factorial(4) / math.factorial(2) * a**4 * (4 * 2 * 0.5 * ENS.A_L**0) ** 2 / math.sqrt(8 * math.pi)
    assert residual_bound(query, TOY, ENS) == pytest.approx(expected)


def test_residual_slope_three_point():
    Ls = [4, 8, 16, 32]
    res = []
    for L in Ls:
        ens = toy_ensemble(L)
        r = theorem1_residual(q((1, 0, 0), (L // 2, -L // 4, -L // 4)), TOY, ens, with_oracle=False)
        res.append(r.residual)
    slope = np.polyfit(np.log(Ls), np.log(res), 1)[0]
    assert abs(slope + 0.5) <= 0.15


def test_mixed_modes_vanish():
    ladder = ensemble_ladder(toy_profile, [4, 8, 16], 1, 0.5)
    lin = mixed_mode_decay(TOY, ladder, [0.25], [0.5], orders=(0, 0))
    assert lin.identically_zero
    quad = mixed_mode_decay(TOY, ladder, [0.25], [0.5], orders=(1, 1))
    assert quad.identically_zero and quad.values == [0.0, 0.0, 0.0]
    with pytest.raises(ValueError):
        mixed_mode_decay(TOY, ladder, [0.25], [-0.25])


def test_query_validation():
    with pytest.raises(ValueError):
        MomentQuery((0, 0), (0, 0), ((0,), (1,)), 0.5)
    with pytest.raises(ValueError):
        MomentQuery((0,), (0, 0), ((1,), (1,)), 0.5)


def test_budget_guard():
    with pytest.raises(BudgetError):
        structural_moment(q((2, 2), (1, -1)), TOY, ENS, cap=10)
