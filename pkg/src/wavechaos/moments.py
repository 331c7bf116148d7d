"""Joint moments of Fourier modes of quasi-solutions, computed three ways.

* structural: sum over trees, pairings and lattice points of the pairing's
  constraint set, using the pairing module;
* oracle: multiply the formal mode polynomials and take expectations with
  a closed-form Gaussian moment count (no pairings involved);
* Monte Carlo over draws of the g_k.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from . import ntree
from .pairing import (
    BlockIndexSet,
    GeometryConsistencyError,
    enumerate_pairings,
    iter_lattice_points,
    maximal_zero_sum_partitions,
    pair_partitions,
    sigma_dimension,
)
from .quasisolution import (
    BudgetError,
    GenericModel,
    SpectralEnsemble,
    TreeCoefficients,
    evaluate_terms,
    mode_polynomials,
    sample_gaussian_batch,
)

DEFAULT_LATTICE_CAP = 10**7
DEFAULT_MONOMIAL_CAP = 10**7


@dataclass(frozen=True)
class MomentQuery:
    """E(Π_l û_{n_l}^{(i_l)}(k_l/L)(t)); components are 0-based."""

    orders: tuple[int, ...]
    components: tuple[int, ...]
    ks: tuple[tuple[int, ...], ...]
    t: float

    def __post_init__(self):
        ks = tuple(tuple(int(x) for x in np.atleast_1d(k)) for k in self.ks)
        object.__setattr__(self, "ks", ks)
        object.__setattr__(self, "orders", tuple(int(n) for n in self.orders))
        object.__setattr__(self, "components", tuple(int(i) for i in self.components))
        if not (len(self.orders) == len(self.components) == len(ks)):
            raise ValueError("orders, components and frequencies must have equal length")
        if any(not any(k) for k in ks):
            raise ValueError("frequencies must be nonzero")
        if any(n < 0 for n in self.orders):
            raise ValueError("orders must be non-negative")

    @property
    def R(self) -> int:
        return len(self.orders)

    def index_set(self, N: int) -> BlockIndexSet:
        return BlockIndexSet.from_orders(self.orders, N)

    def sub(self, blocks: Sequence[int]) -> "MomentQuery":
        return MomentQuery(
            tuple(self.orders[b] for b in blocks),
            tuple(self.components[b] for b in blocks),
            tuple(self.ks[b] for b in blocks),
            self.t,
        )


# ---------------------------------------------------------------------------
# Structural path
# ---------------------------------------------------------------------------

def _block_sum(tc: TreeCoefficients, n: int, component: int, t: float, N: int):
    trees = ntree.enumerate_trees(N, n)
    cache: dict = {}

    def value(kbar: tuple) -> complex:
        if kbar not in cache:
            cache[kbar] = complex(sum(tc.value(A, kbar, t)[component] for A in trees))
        return cache[kbar]

    return value


def lattice_budget(query: MomentQuery, model: GenericModel, ensemble: SpectralEnsemble) -> int:
    """Number of lattice points the structural sum visits (before support pruning)."""
    S = query.index_set(model.N)
    if len(S) % 2:
        return 0
    total = 0
    for sigma in enumerate_pairings(S):
        geom = sigma_dimension(sigma, S, query.ks)
        if geom.nonempty:
            total += len(ensemble.support) ** len(geom.free)
    return total


def structural_moment(
    query: MomentQuery,
    model: GenericModel,
    ensemble: SpectralEnsemble,
    coefficients: TreeCoefficients | None = None,
    cap: int = DEFAULT_LATTICE_CAP,
) -> complex:
    """Σ_trees Σ_σ Σ_{k ∈ Σ_σ ∩ support} Π_l G^{(i_l)} times (2πL)^{-d(N-1)Σn/2}."""
    S = query.index_set(model.N)
    if len(S) % 2:
        return 0j
    tc = coefficients or TreeCoefficients(model, ensemble)
    budget = lattice_budget(query, model, ensemble)
    if budget > cap:
        raise BudgetError(f"structural sum needs {budget} lattice points (cap {cap})", budget)
    blocks = [_block_sum(tc, n, i, query.t, model.N) for n, i in zip(query.orders, query.components)]
    offsets = S.offsets
    index = ensemble._index
    total = 0j
    for sigma in enumerate_pairings(S):
        geom = sigma_dimension(sigma, S, query.ks)
        if not geom.nonempty:
            continue
        for k in iter_lattice_points(geom, sigma, ensemble.support, index.__contains__):
            prod = 1 + 0j
            for l, value in enumerate(blocks):
                kbar = tuple(k[offsets[l]:offsets[l + 1]])
                if tuple(int(sum(v[c] for v in kbar)) for c in range(ensemble.d)) != query.ks[l]:
                    raise GeometryConsistencyError(f"lattice point violates the block-{l} constraint")
                prod *= value(kbar)
                if prod == 0:
                    break
            total += prod
    pref = (2 * math.pi * ensemble.L) ** (-model.d * (model.N - 1) * sum(query.orders) / 2)
    return pref * total


# ---------------------------------------------------------------------------
# Oracle path
# ---------------------------------------------------------------------------

def gaussian_monomial_moment(monomial: Sequence[int], negation: Sequence[int]) -> int:
    """E(Π g_{k_m}) for support indices: Π_k c_k! when c_k = c_{-k} for every k, else 0."""
    counts = Counter(monomial)
    value = 1
    for i, c in counts.items():
        j = negation[i]
        if counts.get(j, 0) != c:
            return 0
        if i < j:
            value *= math.factorial(c)
    return value


def _multiply(p: dict, q: dict) -> dict:
    out: dict = {}
    for m1, c1 in p.items():
        for m2, c2 in q.items():
            m = tuple(sorted(m1 + m2))
            out[m] = out.get(m, 0j) + c1 * c2
    return out


def factor_polynomials(
    query: MomentQuery, model: GenericModel, ensemble: SpectralEnsemble, coefficients: TreeCoefficients | None = None
) -> list[dict]:
    """The scalar polynomial û_{n_l}^{(i_l)}(k_l/L) of each factor."""
    tc = coefficients or TreeCoefficients(model, ensemble)
    out = []
    for n, i, k in zip(query.orders, query.components, query.ks):
        poly = mode_polynomials(model, ensemble, n, query.t, targets=[k], coefficients=tc)[k]
        out.append(poly.component(i))
    return out


def oracle_moment(
    query: MomentQuery,
    model: GenericModel,
    ensemble: SpectralEnsemble,
    coefficients: TreeCoefficients | None = None,
    cap: int = DEFAULT_MONOMIAL_CAP,
) -> complex:
    polys = factor_polynomials(query, model, ensemble, coefficients)
    if not all(polys):
        return 0j
    # mode polynomials are homogeneous, so the product has a single degree
    if sum(len(next(iter(p))) for p in polys) % 2:
        return 0j
    size = math.prod(len(p) for p in polys)
    if size > cap:
        raise BudgetError(f"oracle product has up to {size} monomials (cap {cap})", size)
    prod = {(): 1 + 0j}
    for p in polys:
        prod = _multiply(prod, p)
        if not prod:
            return 0j
    neg = ensemble.negation
    total = 0j
    for mono, c in prod.items():
        if len(mono) % 2:
            continue
        w = gaussian_monomial_moment(mono, neg)
        if w:
            total += w * c
    return total


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------

@dataclass
class MomentAccumulator:
    """Running sums of a complex sample with separate real/imaginary variances."""

    n: int = 0
    s: complex = 0j
    s2_re: float = 0.0
    s2_im: float = 0.0

    def add(self, x: np.ndarray) -> None:
        x = np.asarray(x)
        self.n += x.size
        self.s += complex(x.sum())
        self.s2_re += float(np.sum(x.real**2))
        self.s2_im += float(np.sum(x.imag**2))

    @property
    def mean(self) -> complex:
        return self.s / self.n if self.n else 0j

    def _var(self, s2: float, m: float) -> float:
        if self.n < 2:
            return 0.0
        return max(s2 / self.n - m * m, 0.0) * self.n / (self.n - 1)

    @property
    def se_re(self) -> float:
        return math.sqrt(self._var(self.s2_re, self.mean.real) / max(self.n, 1))

    @property
    def se_im(self) -> float:
        return math.sqrt(self._var(self.s2_im, self.mean.imag) / max(self.n, 1))

    @property
    def se(self) -> float:
        return math.hypot(self.se_re, self.se_im)


@dataclass
class MCEstimate:
    mean: complex
    se_re: float
    se_im: float
    samples: int
    seed: int

    def within(self, value: complex, k: float = 4.0, floor: float = 0.0) -> bool:
        dr, di = abs(self.mean.real - value.real), abs(self.mean.imag - value.imag)
        return dr <= k * self.se_re + floor and di <= k * self.se_im + floor


def _scalar_terms(poly: dict) -> dict:
    return {m: np.array([c]) for m, c in poly.items()}


def mc_moments(
    queries: Sequence[MomentQuery],
    model: GenericModel,
    ensemble: SpectralEnsemble,
    samples: int,
    seed: int,
    antithetic: bool = False,
    chunk: int = 20_000,
) -> list[MCEstimate]:
    """Monte Carlo estimates for several queries sharing the same draws.

    With ``antithetic`` every draw g is paired with −g and the pair average
    counts as one sample.
    """
    if samples < 100:
        raise ValueError("Monte Carlo needs at least 100 samples")
    tc = TreeCoefficients(model, ensemble)
    factors: dict = {}
    for q in queries:
        for n, i, k in zip(q.orders, q.components, q.ks):
            key = (n, i, k, q.t)
            if key not in factors:
                poly = mode_polynomials(model, ensemble, n, q.t, targets=[k], coefficients=tc)[k]
                factors[key] = _scalar_terms(poly.component(i))
    accs = [MomentAccumulator() for _ in queries]
    rng = np.random.default_rng(seed)
    done = 0
    while done < samples:
        size = min(chunk, samples - done)
        g = sample_gaussian_batch(ensemble, size, rng)
        signs = (1, -1) if antithetic else (1,)
        values = []
        for s in signs:
            vals = {key: evaluate_terms(terms, s * g, 1)[:, 0] for key, terms in factors.items()}
            values.append(vals)
        for q, acc in zip(queries, accs):
            x = 0
            for vals in values:
                prod = np.ones(size, dtype=complex)
                for n, i, k in zip(q.orders, q.components, q.ks):
                    prod = prod * vals[(n, i, k, q.t)]
                x = x + prod
            acc.add(x / len(signs))
        done += size
    return [MCEstimate(a.mean, a.se_re, a.se_im, a.n, seed) for a in accs]


def mc_moment(
    query: MomentQuery,
    model: GenericModel,
    ensemble: SpectralEnsemble,
    samples: int,
    seed: int,
    antithetic: bool = False,
) -> MCEstimate:
    return mc_moments([query], model, ensemble, samples, seed, antithetic)[0]


# ---------------------------------------------------------------------------
# Wick prediction and the residual bound
# ---------------------------------------------------------------------------

def wick_prediction(
    query: MomentQuery,
    model: GenericModel,
    ensemble: SpectralEnsemble,
    coefficients: TreeCoefficients | None = None,
) -> complex:
    """Σ over pair partitions of products of second moments (0 when R is odd)."""
    tc = coefficients or TreeCoefficients(model, ensemble)
    seconds: dict = {}
    total = 0j
    for partition in pair_partitions(query.R):
        prod = 1 + 0j
        for pair in partition:
            if pair not in seconds:
                seconds[pair] = structural_moment(query.sub(pair), model, ensemble, tc)
            prod *= seconds[pair]
            if prod == 0:
                break
        total += prod
    return total


def counting_constant(N: int) -> float:
    return 4.0 if N == 2 else 3 * math.e * N


def residual_bound(query: MomentQuery, model: GenericModel, ensemble: SpectralEnsemble, psi_constant: float | None = None) -> float:
    """(#S)!/((#S)/2)! ‖a‖^{#S} (C̄ t A_L^r)^{Σn} (2πL)^{-d/2}, C̄ = (tree count rate)·C_ψ·N."""
    S = len(query.index_set(model.N))
    cpsi = model.psi_constant if psi_constant is None else psi_constant
    cbar = counting_constant(model.N) * cpsi * model.N
    growth = (cbar * abs(query.t) * ensemble.A_L**model.r) ** sum(query.orders)
    comb = math.factorial(S) / math.factorial(S // 2)
    return comb * ensemble.l2_linf() ** S * growth * (2 * math.pi * ensemble.L) ** (-model.d / 2)


@dataclass
class MomentReport:
    query: MomentQuery
    structural: complex
    oracle: complex | None
    wick_prediction: complex
    residual: float
    bound: float
    psi_constant: float
    mc: MCEstimate | None = None
    zero_sum_partitions: list = field(default_factory=list)

    @property
    def within_bound(self) -> bool:
        return self.residual <= self.bound

    def to_json(self) -> dict:
        def c(z):
            return None if z is None else [z.real, z.imag]

        out = {
            "orders": list(self.query.orders),
            "components": list(self.query.components),
            "ks": [list(k) for k in self.query.ks],
            "t": self.query.t,
            "structural": c(self.structural),
            "oracle": c(self.oracle),
            "wick_prediction": c(self.wick_prediction),
            "residual": self.residual,
            "bound": self.bound,
            "psi_constant": self.psi_constant,
            "zero_sum_partitions": [list(map(list, p)) for p in self.zero_sum_partitions],
        }
        if self.mc is not None:
            out["mc"] = {"mean": c(self.mc.mean), "se_re": self.mc.se_re, "se_im": self.mc.se_im,
                         "samples": self.mc.samples, "seed": self.mc.seed}
        return out


def theorem1_residual(
    query: MomentQuery,
    model: GenericModel,
    ensemble: SpectralEnsemble,
    with_oracle: bool = True,
    psi_constant: float | None = None,
) -> MomentReport:
    """Moment, Wick prediction, their gap and the a priori bound on it.

    Raises AssertionError if an odd-|S| query gives a nonzero value or the
    gap exceeds the bound.
    """
    tc = TreeCoefficients(model, ensemble)
    s = structural_moment(query, model, ensemble, tc)
    o = oracle_moment(query, model, ensemble, tc) if with_oracle else None
    w = wick_prediction(query, model, ensemble, tc)
    cpsi = model.psi_constant if psi_constant is None else psi_constant
    report = MomentReport(
        query=query, structural=s, oracle=o, wick_prediction=w, residual=abs(s - w),
        bound=residual_bound(query, model, ensemble, cpsi), psi_constant=cpsi,
        zero_sum_partitions=maximal_zero_sum_partitions(query.ks),
    )
    if len(query.index_set(model.N)) % 2:
        if s != 0 or w != 0 or (o is not None and o != 0):
            raise AssertionError("odd index set with a nonzero moment")
    if not report.within_bound:
        raise AssertionError(f"residual {report.residual:.3e} exceeds the bound {report.bound:.3e}")
    return report


@dataclass
class DecayReport:
    L_values: list[int]
    values: list[float]
    identically_zero: bool
    slope: float | None
    slope_se: float | None


def ensemble_ladder(profile: Callable, L_values: Sequence[int], d: int, radius: float) -> list[SpectralEnsemble]:
    return [SpectralEnsemble.from_profile(profile, L, d, radius) for L in L_values]


def physical_to_lattice(xi: Sequence[float], L: int) -> tuple[int, ...]:
    k = [x * L for x in np.atleast_1d(xi)]
    if any(abs(v - round(v)) > 1e-9 for v in k):
        raise ValueError(f"frequency {xi} is not on the lattice of scale {L}")
    return tuple(int(round(v)) for v in k)


def mixed_mode_decay(
    model: GenericModel,
    ensembles: Sequence[SpectralEnsemble],
    xi: Sequence[float],
    eta: Sequence[float],
    orders: tuple[int, int] = (1, 1),
    components: tuple[int, int] = (0, 0),
    t: float = 0.5,
) -> DecayReport:
    """|E(û_{n1}(ξ) û_{n2}(η))| along an L-ladder, ξ + η ≠ 0.

    Translation invariance makes these cross moments vanish identically for
    the quasi-solution; the report says so instead of fitting a slope to zeros.
    """
    if np.allclose(np.asarray(xi, dtype=float) + np.asarray(eta, dtype=float), 0):
        raise ValueError("ξ + η must be nonzero")
    Ls, vals = [], []
    for ens in ensembles:
        q = MomentQuery(orders, components, (physical_to_lattice(xi, ens.L), physical_to_lattice(eta, ens.L)), t)
        Ls.append(ens.L)
        vals.append(abs(structural_moment(q, model, ens)))
    if all(v == 0 for v in vals):
        return DecayReport(Ls, vals, True, None, None)
    pos = [(L, v) for L, v in zip(Ls, vals) if v > 0]
    if len(pos) < 3:
        return DecayReport(Ls, vals, False, None, None)
    fit = stats.linregress(np.log([p[0] for p in pos]), np.log([p[1] for p in pos]))
    return DecayReport(Ls, vals, False, float(fit.slope), float(fit.stderr))


def toy_profile(xi) -> np.ndarray:
    """a ≡ 1 on 0 < |ξ| <= 1/2: at L = 4 the support is {±1, ±2}."""
    x = float(np.atleast_1d(xi)[0])
    return np.array([1.0 if 0 < abs(x) <= 0.5 else 0.0])


def toy_ensemble(L: int) -> SpectralEnsemble:
    return SpectralEnsemble.from_profile(toy_profile, L, 1, 0.5)


def query_family(ks: Sequence[int], max_R: int = 4, max_order: int = 1, t: float = 0.5) -> list[MomentQuery]:
    """All multisets of (order, k) factors with 1 <= R <= max_R (scalar models, d = 1)."""
    atoms = [(n, k) for n in range(max_order + 1) for k in ks]
    out = []
    for R in range(1, max_R + 1):
        for combo in itertools.combinations_with_replacement(atoms, R):
            out.append(MomentQuery(tuple(a[0] for a in combo), (0,) * R, tuple((a[1],) for a in combo), t))
    return out
