import itertools
from math import comb, e

import pytest
from hypothesis import given, strategies as st

from wavechaos import ntree
from wavechaos.ntree import (
    InvalidArityError,
    MalformedCodeError,
    TreeBudgetError,
    cardinal_bound,
    count_trees,
    decode_polish,
    encode_polish,
    enumerate_trees,
    first_violation,
    leaf_ranges,
    leaves,
    nodes,
)


def fuss_catalan(N, n):
    return comb(N * n, n) // ((N - 1) * n + 1)


def stack_parse_ok(code, N):
    """Independent membership test: a prefix code parses iff the open-slot counter hits 0 exactly at the end."""
    need = 1
    for i, b in enumerate(code):
        if need == 0:
            return False
        need += N - 1 if b else -1
    return need == 0


def brute_force_codes(N, n):
    length = N * n + 1
    out = []
    for ones in itertools.combinations(range(length), n):
        code = [0] * length
        for i in ones:
            code[i] = 1
        if stack_parse_ok(code, N):
            out.append(tuple(code))
    return sorted(out)


def test_trivial_tree():
    assert enumerate_trees(2, 0) == [()]
    assert count_trees(2, 0) == 1
    assert encode_polish(()) == (0,)
    assert decode_polish((0,), 2) == ()


@pytest.mark.parametrize("N,n,expected", [(2, 3, 5), (3, 2, 3), (2, 4, 14), (2, 1, 1), (3, 3, 12)])
def test_counts_from_examples(N, n, expected):
    assert count_trees(N, n) == expected
    assert len(enumerate_trees(N, n)) == expected


def test_bounds_from_examples():
    assert count_trees(2, 4) <= 4**3 == cardinal_bound(2, 4)
    assert count_trees(3, 3) <= (9 * e) ** 2
    assert cardinal_bound(3, 3) == pytest.approx((9 * e) ** 2)


def test_binary_counts_are_catalan():
    assert [count_trees(2, n) for n in range(7)] == [1, 1, 2, 5, 14, 42, 132]


@pytest.mark.parametrize("N", [2, 3, 4])
def test_codes_match_brute_force(N):
    for n in range(7):
        codes = [encode_polish(A) for A in enumerate_trees(N, n)]
        assert codes == brute_force_codes(N, n)
        assert len(codes) == fuss_catalan(N, n) == count_trees(N, n)
        if n:
            assert count_trees(N, n) <= cardinal_bound(N, n)


@pytest.mark.parametrize("N", [2, 3, 4])
def test_bijection_exhaustive(N):
    for n in range(7):
        trees = enumerate_trees(N, n)
        codes = {encode_polish(A) for A in trees}
        assert len(codes) == len(trees)
        for A in trees:
            code = encode_polish(A)
            assert decode_polish(code, N) == A
            assert leaves(A) == (N - 1) * nodes(A) + 1
            assert nodes(A) == n


def test_encode_examples():
    assert encode_polish(((), ())) == (1, 0, 0)
    assert encode_polish((((), ()), ())) == (1, 1, 0, 0, 0)
    assert decode_polish((1, 0, 0), 2) == ((), ())
    assert ntree.code_to_str((1, 1, 0, 0, 0)) == "11000"
    assert ntree.str_to_code("11000") == (1, 1, 0, 0, 0)


@pytest.mark.parametrize(
    "code,index",
    [((1, 0), 2), ((0, 0), 1), ((1, 0, 0, 0), 3), ((), 1), ((1, 1, 0), 3)],
)
def test_malformed_codes_report_index(code, index):
    assert first_violation(code, 2) == index
    with pytest.raises(MalformedCodeError) as exc:
        decode_polish(code, 2)
    assert exc.value.index == index


def test_invalid_arity_and_budget():
    with pytest.raises(InvalidArityError):
        count_trees(1, 3)
    with pytest.raises(InvalidArityError):
        enumerate_trees(0, 1)
    with pytest.raises(TreeBudgetError):
        enumerate_trees(2, 10, cap=100)


@pytest.mark.parametrize(
    "tree,windows",
    [
        (((), ()), ((1, 1), (2, 2))),
        ((((), ()), ()), ((1, 2), (3, 3))),
        (((), (), ()), ((1, 1), (2, 2), (3, 3))),
        ((), ((1, 1),)),
    ],
)
def test_leaf_windows(tree, windows):
    assert leaf_ranges(tree).windows == windows


@given(st.integers(2, 4), st.integers(0, 5), st.data())
def test_windows_partition_the_leaves(N, n, data):
    trees = enumerate_trees(N, n)
    A = data.draw(st.sampled_from(trees))
    table = leaf_ranges(A)
    covered = [i for lo, hi in table.windows for i in range(lo, hi + 1)]
    assert covered == list(range(1, leaves(A) + 1))
    if A:
        assert [hi - lo + 1 for lo, hi in table.windows] == [leaves(c) for c in A]


@given(st.integers(2, 4), st.integers(0, 6), st.data())
def test_prefix_property_everywhere(N, n, data):
    A = data.draw(st.sampled_from(enumerate_trees(N, n)))
    code = encode_polish(A)
    ones = 0
    for k in range(1, len(code)):
        ones += code[k - 1]
        assert k < ones * N + 1


@given(st.lists(st.integers(0, 1), min_size=1, max_size=16), st.integers(2, 3))
def test_membership_agrees_with_stack_parser(code, N):
    assert (first_violation(code, N) is None) == stack_parse_ok(code, N)
