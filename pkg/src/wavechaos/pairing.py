"""Pairings of the block index set and the lattice geometry they induce.

The index set S is the disjoint union of R blocks; block ``l`` has
``sizes[l]`` elements.  Elements are addressed either as ``(l, j)`` pairs
or by their flat position in the lexicographic order.  All indices in this
module are 0-based.

A pairing is a fixed-point-free involution of S, stored as the tuple of
partners of each flat index.  Frequencies are passed as integer lattice
vectors ``K_l = L * xi_l``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterator, Sequence

import numpy as np

DEFAULT_PAIRING_CAP = 14


class PairingBudgetError(RuntimeError):
    pass


class GeometryConsistencyError(AssertionError):
    """The closed dimension formula disagrees with the exact rank computation."""


@dataclass(frozen=True)
class BlockIndexSet:
    sizes: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        if any(s < 1 for s in self.sizes):
            raise ValueError("block sizes must be positive")

    @classmethod
    def from_orders(cls, orders: Sequence[int], N: int) -> "BlockIndexSet":
        return cls(tuple(n * (N - 1) + 1 for n in orders))

    @property
    def R(self) -> int:
        return len(self.sizes)

    @property
    def offsets(self) -> tuple[int, ...]:
        return tuple(itertools.accumulate((0,) + self.sizes))

    def __len__(self) -> int:
        return sum(self.sizes)

    @property
    def elements(self) -> list[tuple[int, int]]:
        return [(l, j) for l, s in enumerate(self.sizes) for j in range(s)]

    def block_of(self) -> tuple[int, ...]:
        return tuple(l for l, s in enumerate(self.sizes) for _ in range(s))

    def flat(self, l: int, j: int) -> int:
        return self.offsets[l] + j


@dataclass(frozen=True)
class Pairing:
    partner: tuple[int, ...]

    def __post_init__(self):
        p = self.partner
        for m, q in enumerate(p):
            if q == m or p[q] != m:
                raise ValueError(f"not a fixed-point-free involution at index {m}")

    def __call__(self, m: int) -> int:
        return self.partner[m]

    @property
    def lower(self) -> tuple[int, ...]:
        """S_sigma: indices smaller than their partner."""
        return tuple(m for m, q in enumerate(self.partner) if m < q)

    def pairs(self) -> list[tuple[int, int]]:
        return [(m, self.partner[m]) for m in self.lower]

    def to_json(self, S: BlockIndexSet | None = None) -> list:
        if S is None:
            return [list(p) for p in self.pairs()]
        el = S.elements
        return [[list(el[a]), list(el[b])] for a, b in self.pairs()]


def _matchings(items: tuple[int, ...]) -> Iterator[list[tuple[int, int]]]:
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for i, other in enumerate(rest):
        remaining = rest[:i] + rest[i + 1:]
        for tail in _matchings(remaining):
            yield [(first, other)] + tail


def enumerate_pairings(S: BlockIndexSet | int, cap: int = DEFAULT_PAIRING_CAP) -> list[Pairing]:
    """All fixed-point-free involutions of S in canonical order.

    The smallest unmatched index is matched first, so the output has no
    duplicates and a reproducible order.  Odd |S| gives an empty list.
    """
    size = S if isinstance(S, int) else len(S)
    if size > cap:
        raise PairingBudgetError(f"|S| = {size} exceeds the pairing cap {cap}")
    if size % 2:
        return []
    out = []
    for matching in _matchings(tuple(range(size))):
        partner = [0] * size
        for a, b in matching:
            partner[a], partner[b] = b, a
        out.append(Pairing(tuple(partner)))
    return out


def double_factorial(n: int) -> int:
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


# ---------------------------------------------------------------------------
# Orbits
# ---------------------------------------------------------------------------

OrbitPartition = tuple[tuple[int, ...], ...]


def orbit_partition(sigma: Pairing, S: BlockIndexSet) -> OrbitPartition:
    """Blocks connected through the pairing, as a sorted tuple of sorted blocks."""
    parent = list(range(S.R))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    block = S.block_of()
    for m, q in enumerate(sigma.partner):
        a, b = find(block[m]), find(block[q])
        if a != b:
            parent[max(a, b)] = min(a, b)
    groups: dict[int, list[int]] = {}
    for l in range(S.R):
        groups.setdefault(find(l), []).append(l)
    return tuple(sorted(tuple(g) for g in groups.values()))


def is_partition(parts: Sequence[Sequence[int]], R: int) -> bool:
    seen = [x for p in parts for x in p]
    return len(seen) == len(set(seen)) and set(seen) == set(range(R))


# ---------------------------------------------------------------------------
# Exact linear algebra
# ---------------------------------------------------------------------------

def bareiss_rank(matrix: Sequence[Sequence[int]]) -> int:
    """Rank of an integer matrix by fraction-free (Bareiss) elimination."""
    m = [list(map(int, row)) for row in matrix]
    if not m or not m[0]:
        return 0
    rows, cols = len(m), len(m[0])
    rank = 0
    prev = 1
    for c in range(cols):
        pivot = next((r for r in range(rank, rows) if m[r][c] != 0), None)
        if pivot is None:
            continue
        m[rank], m[pivot] = m[pivot], m[rank]
        p = m[rank][c]
        for r in range(rank + 1, rows):
            for cc in range(c + 1, cols):
                m[r][cc] = (m[r][cc] * p - m[rank][cc] * m[r][c]) // prev
            m[r][c] = 0
        prev = p
        rank += 1
        if rank == rows:
            break
    return rank


def _rref(matrix: list[list[Fraction]], rhs: list[list[Fraction]]):
    """Reduced row echelon form over the rationals, carried along several rhs columns."""
    rows = len(matrix)
    cols = len(matrix[0]) if rows else 0
    a = [row[:] for row in matrix]
    b = [row[:] for row in rhs]
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        piv = next((i for i in range(r, rows) if a[i][c] != 0), None)
        if piv is None:
            continue
        a[r], a[piv] = a[piv], a[r]
        b[r], b[piv] = b[piv], b[r]
        inv = 1 / a[r][c]
        a[r] = [x * inv for x in a[r]]
        b[r] = [x * inv for x in b[r]]
        for i in range(rows):
            if i != r and a[i][c] != 0:
                f = a[i][c]
                a[i] = [x - f * y for x, y in zip(a[i], a[r])]
                b[i] = [x - f * y for x, y in zip(b[i], b[r])]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    return a, b, pivots


@dataclass
class SigmaGeometry:
    """Solution set of the frequency constraints for one pairing.

    ``variables`` lists the flat indices of S_sigma (one lattice vector
    each).  When nonempty, ``free`` indexes the free variables and
    ``pivot_rows`` gives each determined variable as
    ``const + sum(coef * free_var)``.
    """

    status: str
    s_sigma: int
    rank_witness: int
    orbits: OrbitPartition
    variables: tuple[int, ...] = ()
    free: tuple[int, ...] = ()
    pivot_rows: list = field(default_factory=list)

    @property
    def nonempty(self) -> bool:
        return self.status == "nonempty"


def constraint_matrix(sigma: Pairing, S: BlockIndexSet) -> tuple[list[list[int]], tuple[int, ...]]:
    """Coefficient matrix of sum_{S+} k_(l,j) - sum_{S-} k_sigma(l,j) = L xi_l.

    Rows are blocks, columns are the variables in S_sigma.  Pairs inside a
    block contribute nothing to their block's frequency.
    """
    variables = sigma.lower
    col = {m: i for i, m in enumerate(variables)}
    block = S.block_of()
    rows = [[0] * len(variables) for _ in range(S.R)]
    for m, q in enumerate(sigma.partner):
        lm, lq = block[m], block[q]
        if lm < lq:
            rows[lm][col[m]] += 1
        elif lm > lq:
            rows[lm][col[q]] -= 1
    return rows, variables


def sigma_dimension(
    sigma: Pairing,
    S: BlockIndexSet,
    frequencies: Sequence[Sequence[int]] | np.ndarray,
) -> SigmaGeometry:
    """Classify Sigma_sigma and compute its free-parameter count two ways.

    ``frequencies`` are the integer vectors L*xi_l (shape (R, d)).  The
    closed formula |S|/2 + #orbits - R is compared with |S_sigma| minus the
    exact rank of the constraint system; emptiness from the orbit zero-sum
    test is compared with the consistency of the augmented system.
    """
    K = np.asarray(frequencies, dtype=np.int64)
    if K.ndim == 1:
        K = K[:, None]
    if K.shape[0] != S.R:
        raise ValueError("one frequency per block is required")
    if np.any(np.all(K == 0, axis=1)):
        raise ValueError("frequencies must be nonzero")
    orbits = orbit_partition(sigma, S)
    zero_sum = all(not np.any(K[list(o)].sum(axis=0)) for o in orbits)

    A, variables = constraint_matrix(sigma, S)
    rank = bareiss_rank(A) if variables else 0
    consistent = all(
        bareiss_rank([row + [int(K[l, c])] for l, row in enumerate(A)]) == rank
        for c in range(K.shape[1])
    )
    if consistent != zero_sum:
        raise GeometryConsistencyError(
            f"orbit zero-sum test ({zero_sum}) disagrees with system consistency ({consistent})"
        )
    if not zero_sum:
        return SigmaGeometry("empty", 0, rank, orbits, variables)

    s_formula = len(S) // 2 + len(orbits) - S.R
    s_rank = len(variables) - rank
    if s_formula != s_rank:
        raise GeometryConsistencyError(
            f"closed formula gives s_sigma={s_formula}, exact rank gives {s_rank}"
        )

    a, b, pivots = _rref(
        [[Fraction(x) for x in row] for row in A],
        [[Fraction(int(x)) for x in K[l]] for l in range(S.R)],
    )
    free = tuple(c for c in range(len(variables)) if c not in pivots)
    pivot_rows = []
    for r, c in enumerate(pivots):
        const = b[r]
        coefs = [-a[r][f] for f in free]
        if any(x.denominator != 1 for x in const + coefs):
            raise GeometryConsistencyError("non-integral parametrization")
        pivot_rows.append((c, tuple(int(x) for x in const), tuple(int(x) for x in coefs)))
    return SigmaGeometry("nonempty", s_formula, rank, orbits, variables, free, pivot_rows)


def iter_lattice_points(
    geom: SigmaGeometry,
    sigma: Pairing,
    support: Sequence[tuple[int, ...]],
    in_support: Callable[[tuple[int, ...]], bool] | None = None,
) -> Iterator[list[tuple[int, ...]]]:
    """Yield full leaf assignments k (indexed by flat S) in Sigma_sigma with every k_m in ``support``.

    Free variables range over ``support``; determined ones are computed from
    the parametrization and rejected when they leave the support.  The
    support is assumed symmetric under k -> -k.
    """
    if not geom.nonempty:
        return
    supp = [tuple(int(x) for x in k) for k in support]
    if in_support is None:
        sset = set(supp)
        in_support = sset.__contains__
    nvar = len(geom.variables)
    size = len(sigma.partner)
    for choice in itertools.product(supp, repeat=len(geom.free)):
        values: list = [None] * nvar
        for f, v in zip(geom.free, choice):
            values[f] = v
        ok = True
        for c, const, coefs in geom.pivot_rows:
            vec = tuple(
                const[i] + sum(cf * choice[j][i] for j, cf in enumerate(coefs) if cf)
                for i in range(len(const))
            )
            if not in_support(vec):
                ok = False
                break
            values[c] = vec
        if not ok:
            continue
        k: list = [None] * size
        for i, m in enumerate(geom.variables):
            k[m] = values[i]
            k[sigma.partner[m]] = tuple(-x for x in values[i])
        yield k


# ---------------------------------------------------------------------------
# Zero-sum partitions
# ---------------------------------------------------------------------------

def set_partitions(items: Sequence[int]) -> Iterator[list[list[int]]]:
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        yield [[first]] + part
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]


def maximal_zero_sum_partitions(frequencies) -> list[tuple[tuple[int, ...], ...]]:
    """Partitions of range(R) into zero-sum blocks with the largest block count.

    Empty output means no zero-sum partition exists (the moment vanishes).
    """
    K = np.asarray(frequencies, dtype=np.int64)
    if K.ndim == 1:
        K = K[:, None]
    if np.any(np.all(K == 0, axis=1)):
        raise ValueError("frequencies must be nonzero")
    best: list = []
    best_count = 0
    for part in set_partitions(range(len(K))):
        if all(not np.any(K[p].sum(axis=0)) for p in part):
            if len(part) > best_count:
                best, best_count = [], len(part)
            if len(part) == best_count:
                best.append(tuple(sorted(tuple(sorted(p)) for p in part)))
    return sorted(best)


def pair_partitions(R: int) -> list[tuple[tuple[int, int], ...]]:
    """Partitions of range(R) into pairs (empty when R is odd)."""
    if R % 2:
        return []
    return [tuple(m) for m in _matchings(tuple(range(R)))]


# ---------------------------------------------------------------------------
# Isserlis
# ---------------------------------------------------------------------------

def wick_moment(cov: Callable[[object, object], complex], indices: Sequence) -> complex:
    """Gaussian moment E(prod X_m) as a sum over pairings of products of ``cov``.

    ``indices`` are labels passed to ``cov``; with ``cov(k, l) = [k == -l]``
    this is E(prod g_k) for the circular lattice Gaussians.
    """
    indices = list(indices)
    if len(indices) % 2:
        return 0j

    def rec(items: list) -> complex:
        if not items:
            return 1.0 + 0j
        first, rest = items[0], items[1:]
        total = 0j
        for i, other in enumerate(rest):
            c = cov(first, other)
            if c != 0:
                total += c * rec(rest[:i] + rest[i + 1:])
        return total

    return complex(rec(indices))


def lattice_cov(k, l) -> float:
    """E(g_k g_l) = 1 if l = -k else 0."""
    return 1.0 if tuple(-x for x in np.atleast_1d(k)) == tuple(np.atleast_1d(l)) else 0.0
