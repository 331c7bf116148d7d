import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from wavechaos.pairing import (
    BlockIndexSet,
    GeometryConsistencyError,
    Pairing,
    PairingBudgetError,
    bareiss_rank,
    constraint_matrix,
    double_factorial,
    enumerate_pairings,
    is_partition,
    iter_lattice_points,
    lattice_cov,
    maximal_zero_sum_partitions,
    orbit_partition,
    pair_partitions,
    sigma_dimension,
    wick_moment,
)


def brute_force_involutions(n):
    out = []
    for perm in itertools.permutations(range(n)):
        if all(perm[m] != m and perm[perm[m]] == m for m in range(n)):
            out.append(perm)
    return sorted(out)


def pairing_from_pairs(S, pairs):
    partner = [None] * len(S)
    for a, b in pairs:
        fa, fb = S.flat(*a), S.flat(*b)
        partner[fa], partner[fb] = fb, fa
    return Pairing(tuple(partner))


@pytest.mark.parametrize("n,count", [(4, 3), (3, 0), (6, 15), (2, 1), (0, 1)])
def test_pairing_counts(n, count):
    sigmas = enumerate_pairings(n)
    assert len(sigmas) == count
    if n % 2 == 0:
        assert count == double_factorial(n - 1)


@pytest.mark.parametrize("n", [2, 4, 6, 8])
def test_pairings_match_brute_force(n):
    got = sorted(s.partner for s in enumerate_pairings(n))
    assert got == brute_force_involutions(n)
    assert len(set(got)) == len(got)


def test_pairing_cap():
    with pytest.raises(PairingBudgetError):
        enumerate_pairings(16)
    assert len(enumerate_pairings(16, cap=16)) == double_factorial(15)


def test_not_an_involution_rejected():
    with pytest.raises(ValueError):
        Pairing((1, 2, 0))
    with pytest.raises(ValueError):
        Pairing((0, 1))


def test_block_index_set():
    S = BlockIndexSet.from_orders([1, 0, 2], 2)
    assert S.sizes == (2, 1, 3)
    assert len(S) == 6
    assert S.elements[:4] == [(0, 0), (0, 1), (1, 0), (2, 0)]
    assert S.flat(2, 0) == 3


def test_orbit_examples():
    S = BlockIndexSet((1, 1))
    assert orbit_partition(pairing_from_pairs(S, [((0, 0), (1, 0))]), S) == ((0, 1),)
    S = BlockIndexSet((2, 2))
    sigma = pairing_from_pairs(S, [((0, 0), (0, 1)), ((1, 0), (1, 1))])
    assert orbit_partition(sigma, S) == ((0,), (1,))
    S = BlockIndexSet((2, 1, 1))
    sigma = pairing_from_pairs(S, [((0, 0), (1, 0)), ((0, 1), (2, 0))])
    assert orbit_partition(sigma, S) == ((0, 1, 2),)


@pytest.mark.parametrize("sizes", [(1, 1), (2, 2), (1, 3), (2, 1, 1), (1, 1, 1, 1), (3, 1, 1, 1), (3, 3)])
def test_orbits_are_partitions(sizes):
    S = BlockIndexSet(sizes)
    for sigma in enumerate_pairings(S):
        orbits = orbit_partition(sigma, S)
        assert is_partition(orbits, S.R)
        block = S.block_of()
        where = {l: i for i, o in enumerate(orbits) for l in o}
        for m, q in enumerate(sigma.partner):
            assert where[block[m]] == where[block[q]]


def test_sigma_dimension_examples():
    S = BlockIndexSet((1, 1))
    sigma = enumerate_pairings(S)[0]
    g = sigma_dimension(sigma, S, [[3], [-3]])
    assert g.nonempty and g.s_sigma == 0
    assert not sigma_dimension(sigma, S, [[3], [2]]).nonempty

    S = BlockIndexSet((3, 3))
    cross = pairing_from_pairs(S, [((0, j), (1, j)) for j in range(3)])
    g = sigma_dimension(cross, S, [[1], [-1]])
    assert g.nonempty and g.s_sigma == 2 and g.rank_witness == 1


def float_rank_oracle(A):
    return int(np.linalg.matrix_rank(np.array(A, dtype=float))) if A and A[0] else 0


@pytest.mark.parametrize("sizes", [(1, 1), (3, 1), (3, 3), (1, 1, 1, 1), (3, 1, 1, 1), (1, 3, 3, 1)])
def test_rank_complement_matches_formula(sizes):
    S = BlockIndexSet(sizes)
    rng = np.random.default_rng(1)
    for sigma in enumerate_pairings(S):
        A, variables = constraint_matrix(sigma, S)
        assert bareiss_rank(A) == float_rank_oracle(A)
        K = rng.integers(-3, 4, size=(S.R, 1))
        K[K == 0] = 1
        K[-1] = -K[:-1].sum() or 1
        g = sigma_dimension(sigma, S, K)
        if g.nonempty:
            assert g.s_sigma == len(S) // 2 + len(g.orbits) - S.R
            assert g.s_sigma == len(variables) - g.rank_witness


@given(st.lists(st.lists(st.integers(-5, 5), min_size=1, max_size=5), min_size=1, max_size=5))
def test_bareiss_matches_float_rank(rows):
    width = min(len(r) for r in rows)
    A = [r[:width] for r in rows]
    assert bareiss_rank(A) == float_rank_oracle(A)


def test_lattice_points_satisfy_constraints():
    S = BlockIndexSet.from_orders((1, 1), 2)
    support = [(k,) for k in (-2, -1, 1, 2)]
    K = [[1], [-1]]
    for sigma in enumerate_pairings(S):
        g = sigma_dimension(sigma, S, K)
        if not g.nonempty:
            continue
        pts = list(iter_lattice_points(g, sigma, support))
        for k in pts:
            assert all(k[sigma(m)] == tuple(-x for x in k[m]) for m in range(len(S)))
            assert sum(x[0] for x in k[:2]) == 1 and sum(x[0] for x in k[2:]) == -1
        # brute force over the support
        brute = 0
        for k in itertools.product(support, repeat=len(S)):
            if all(k[sigma(m)][0] == -k[m][0] for m in range(len(S))) and sum(x[0] for x in k[:2]) == 1:
                brute += 1
        assert len(pts) == brute


def test_zero_sum_partition_examples():
    assert maximal_zero_sum_partitions([[2], [-2]]) == [((0, 1),)]
    assert maximal_zero_sum_partitions([[2], [4]]) == []
    assert maximal_zero_sum_partitions([[1], [-1], [3], [-3]]) == [((0, 1), (2, 3))]


def test_pair_partitions():
    assert pair_partitions(2) == [((0, 1),)]
    assert pair_partitions(3) == []
    assert len(pair_partitions(4)) == 3


def test_wick_examples():
    assert wick_moment(lattice_cov, [(1,), (-1,)]) == 1
    assert wick_moment(lattice_cov, [(1,), (1,)]) == 0
    assert wick_moment(lattice_cov, [(1,), (-1,), (1,), (-1,)]) == 2
    assert wick_moment(lattice_cov, [(1,), (-1,), (2,)]) == 0


@pytest.mark.parametrize("labels", [[1, -1, 2, -2], [1, -1, 1, -1, 2, -2], [1, 1, -1, -1, 1, -1, 2, -2], [1, 2, -3]])
def test_wick_matches_monte_carlo(labels):
    rng = np.random.default_rng(7)
    n = 200_000
    ks = sorted({abs(k) for k in labels})
    z = (rng.standard_normal((len(ks), n)) + 1j * rng.standard_normal((len(ks), n))) / np.sqrt(2)
    g = {}
    for i, k in enumerate(ks):
        g[k], g[-k] = z[i], np.conj(z[i])
    prod = np.prod([g[k] for k in labels], axis=0)
    exact = wick_moment(lattice_cov, [(k,) for k in labels])
    se = np.std(prod.real) / np.sqrt(n) + np.std(prod.imag) / np.sqrt(n)
    assert abs(prod.mean() - exact) <= 4 * se + 1e-12


def test_inconsistency_is_detected(monkeypatch):
    import wavechaos.pairing as p

    S = BlockIndexSet((1, 1))
    sigma = enumerate_pairings(S)[0]
    monkeypatch.setattr(p, "bareiss_rank", lambda A: 0)
    with pytest.raises(GeometryConsistencyError):
        p.sigma_dimension(sigma, S, [[1], [-1]])
