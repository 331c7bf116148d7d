"""N-ary trees indexing the terms of the Picard expansion.

A tree is a plain nested tuple: ``()`` is the trivial tree (a single leaf)
and an internal node is a tuple of exactly ``N`` subtrees.  The arity is not
stored in the tree, so functions that need it take ``N`` explicitly.

Trees are encoded in Polish (prefix) notation as bit strings: ``0`` for a
leaf, ``1`` followed by the codes of the ``N`` children for a node.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

NTree = tuple
PolishCode = tuple[int, ...]

DEFAULT_TREE_CAP = 10**6


class InvalidArityError(ValueError):
    pass


class MalformedCodeError(ValueError):
    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class TreeBudgetError(RuntimeError):
    pass


def _check_arity(N: int) -> None:
    if not isinstance(N, int) or N < 2:
        raise InvalidArityError(f"arity must be an integer >= 2, got {N!r}")


def nodes(tree: NTree) -> int:
    """Number of internal nodes."""
    if tree == ():
        return 0
    return 1 + sum(nodes(child) for child in tree)


def leaves(tree: NTree) -> int:
    if tree == ():
        return 1
    return sum(leaves(child) for child in tree)


def is_tree(obj, N: int) -> bool:
    if obj == ():
        return True
    return isinstance(obj, tuple) and len(obj) == N and all(is_tree(c, N) for c in obj)


# ---------------------------------------------------------------------------
# Counting
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _count_table(N: int, n: int) -> tuple[int, ...]:
    # counts[m] = |A_m| for m <= n, via c_{m+1} = sum over compositions of m of prod c_{m_j}
    counts = [1]
    for m in range(n):
        # coefficient of x^m in (sum_j c_j x^j)^N
        power = [1] + [0] * m
        for _ in range(N):
            nxt = [0] * (m + 1)
            for i, pi in enumerate(power):
                if pi:
                    for j in range(m + 1 - i):
                        nxt[i + j] += pi * counts[j]
            power = nxt
        counts.append(power[m])
    return tuple(counts)


def count_trees(N: int, n: int) -> int:
    """Number of N-trees with ``n`` nodes, by dynamic programming over compositions."""
    _check_arity(N)
    if n < 0:
        raise ValueError("node count must be non-negative")
    return _count_table(N, n)[n]


def cardinal_bound(N: int, n: int) -> float:
    """Upper bound on the tree count: 4^(n-1) for binary trees, (3eN)^(n-1) otherwise."""
    _check_arity(N)
    if n < 1:
        raise ValueError("the bound is stated for n >= 1")
    if N == 2:
        return 4.0 ** (n - 1)
    return (3 * math.e * N) ** (n - 1)


def count_trees_checked(N: int, n: int) -> int:
    count = count_trees(N, n)
    if n >= 1 and count > cardinal_bound(N, n):
        raise AssertionError(f"|A_{n}| = {count} exceeds the cardinal bound for N={N}")
    return count


# ---------------------------------------------------------------------------
# Polish codes
# ---------------------------------------------------------------------------

def encode_polish(tree: NTree) -> PolishCode:
    out: list[int] = []
    stack = [tree]
    while stack:
        t = stack.pop()
        if t == ():
            out.append(0)
        else:
            out.append(1)
            stack.extend(reversed(t))
    return tuple(out)


def code_to_str(code: Sequence[int]) -> str:
    return "".join(str(b) for b in code)


def str_to_code(text: str) -> PolishCode:
    text = text.strip()
    if not text or any(ch not in "01" for ch in text):
        raise MalformedCodeError(f"not a bit string: {text!r}")
    return tuple(int(ch) for ch in text)


def first_violation(code: Sequence[int], N: int) -> int | None:
    """Return the first 1-based index at which ``code`` fails membership, or None.

    Membership: length nN+1 with n ones, and k < b_k N + 1 for every k < nN+1,
    where b_k counts the ones among the first k bits.
    """
    _check_arity(N)
    if len(code) == 0:
        return 1
    if any(b not in (0, 1) for b in code):
        return next(i + 1 for i, b in enumerate(code) if b not in (0, 1))
    n = sum(code)
    length = n * N + 1
    b = 0
    for k in range(1, len(code) + 1):
        b += code[k - 1]
        if k < length and not k < b * N + 1:
            return k
    if len(code) != length:
        return min(len(code), length)
    return None


def is_polish_code(code: Sequence[int], N: int) -> bool:
    return first_violation(code, N) is None


def decode_polish(code: Sequence[int], N: int) -> NTree:
    """Invert :func:`encode_polish` using the cut-point construction.

    For a code ``1 A_1 ... A_N`` with running sums ``b_k``, the end of the
    m-th child is ``k_m = min{k : k >= (b_k - 1) N + m + 1}``.
    """
    code = tuple(code)
    bad = first_violation(code, N)
    if bad is not None:
        raise MalformedCodeError(
            f"code {code_to_str(code) if all(b in (0, 1) for b in code) else code!r} "
            f"violates the prefix condition at index {bad}",
            index=bad,
        )
    return _decode(code, N)


def _decode(code: PolishCode, N: int) -> NTree:
    if code == (0,):
        return ()
    # 1-based running sums b_1..b_len
    b = [0]
    for bit in code:
        b.append(b[-1] + bit)
    cuts = [1]
    k = 1
    for m in range(1, N + 1):
        while k < (b[k] - 1) * N + m + 1:
            k += 1
        cuts.append(k)
        k += 1
    children = tuple(_decode(code[cuts[m - 1]:cuts[m]], N) for m in range(1, N + 1))
    return children


# ---------------------------------------------------------------------------
# Enumeration
# ---------------------------------------------------------------------------

def enumerate_trees(N: int, n: int, cap: int = DEFAULT_TREE_CAP) -> list[NTree]:
    """All N-trees with ``n`` nodes, ordered lexicographically by Polish code."""
    _check_arity(N)
    if n < 0:
        raise ValueError("node count must be non-negative")
    total = count_trees(N, n)
    if total > cap:
        raise TreeBudgetError(f"|A_{n}| = {total} for N={N} exceeds the cap {cap}")
    return list(_enumerate(N, n))


@lru_cache(maxsize=256)
def _enumerate(N: int, n: int) -> tuple[NTree, ...]:
    if n == 0:
        return ((),)
    trees = []
    for comp in _compositions(n - 1, N):
        pools = [_enumerate(N, m) for m in comp]
        trees.extend(_product(pools))
    # prefix-free codes: lexicographic order on codes is well defined
    trees.sort(key=encode_polish)
    return tuple(trees)


def _product(pools):
    if not pools:
        yield ()
        return
    for head in pools[0]:
        for rest in _product(pools[1:]):
            yield (head,) + rest


def _compositions(total: int, parts: int):
    """Weak compositions of ``total`` into ``parts`` ordered non-negative parts."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


# ---------------------------------------------------------------------------
# Leaf bookkeeping
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LeafRangeTable:
    """Per-child leaf windows of a tree, 1-based and inclusive.

    ``offsets[j]`` is the number of leaves in children ``0..j-1``; the last
    entry equals the total leaf count (N-1)n+1.
    """

    offsets: tuple[int, ...]
    windows: tuple[tuple[int, int], ...]

    def slices(self) -> list[slice]:
        return [slice(lo - 1, hi) for lo, hi in self.windows]


def leaf_ranges(tree: NTree) -> LeafRangeTable:
    if tree == ():
        return LeafRangeTable(offsets=(0, 1), windows=((1, 1),))
    offsets = [0]
    for child in tree:
        offsets.append(offsets[-1] + leaves(child))
    windows = tuple((offsets[j] + 1, offsets[j + 1]) for j in range(len(tree)))
    return LeafRangeTable(offsets=tuple(offsets), windows=windows)
