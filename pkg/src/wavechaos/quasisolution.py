"""Tree-labelled Picard coefficients and Fourier modes of quasi-solutions.

Frequencies are handled as integer lattice vectors ``k``; the physical
frequency is ``k / L``.  The coefficient G of a tree is carried in closed
form as an :class:`ExpPolyWave` (a finite sum of ``c t^p e^{i lam t}``),
which the Duhamel kernel maps to itself.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import ntree
from .ntree import NTree

DEFAULT_TERM_CAP = 10**8


class BudgetError(RuntimeError):
    def __init__(self, message: str, budget: int | None = None):
        super().__init__(message)
        self.budget = budget


class ResonanceWarning(RuntimeWarning):
    pass


def japanese(xi) -> float:
    xi = np.asarray(xi, dtype=float)
    return float(np.sqrt(1.0 + np.sum(xi * xi)))


# ---------------------------------------------------------------------------
# Models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GenericModel:
    """The dispersion ``omega`` and N-linear interaction ``psi`` of the equation.

    ``psi(xis, Xs)`` receives the N child frequencies (arrays of shape
    (d,)) and N coefficient arrays of shape (..., D) and must broadcast over
    the leading axes.  ``psi_constant`` is the declared operator-norm bound
    C_psi in |psi| <= C_psi max <xi_j>^r.  The torus scale L lives on the
    ensemble, so one model serves a whole L-ladder.
    """

    name: str
    d: int
    D: int
    N: int
    omega: Callable[[np.ndarray], float]
    psi: Callable[[Sequence[np.ndarray], Sequence[np.ndarray]], np.ndarray]
    r: float
    psi_constant: float = 1.0

    def growth_constant(self) -> float:
        """C = C_psi * N, the constant in the growth bound for G."""
        return self.psi_constant * self.N


def _product_psi(xis, Xs):
    out = Xs[0]
    for X in Xs[1:]:
        out = out * X
    return out


def toy_model(omega: Callable[[np.ndarray], float] | None = None, N: int = 2) -> GenericModel:
    """Scalar model on the line with psi = 1 (pointwise product); omega defaults to xi^2."""
    if omega is None:
        def omega(xi):
            return float(np.sum(np.asarray(xi, dtype=float) ** 2))
    return GenericModel(
        name="toy-1d", d=1, D=1, N=N, omega=omega, psi=_product_psi, r=0.0, psi_constant=1.0
    )


def zero_omega(xi) -> float:
    return 0.0


def model_catalog() -> dict[str, Callable[[], GenericModel]]:
    from .euler.spectral import euler_model

    return {
        "toy-1d": toy_model,
        "toy-1d-static": lambda: toy_model(omega=zero_omega),
        "euler-2d": euler_model,
    }


def get_model(name: str) -> GenericModel:
    catalog = model_catalog()
    if name not in catalog:
        raise KeyError(f"unknown model {name!r}; known: {sorted(catalog)}")
    return catalog[name]()


def probe_multilinearity(model: GenericModel, probes: int = 20, seed: int = 0) -> float:
    """Largest relative defect of psi under random linear combinations in one slot."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(probes):
        xis = [rng.normal(size=model.d) for _ in range(model.N)]
        if np.allclose(np.sum(xis, axis=0), 0):
            continue
        Xs = [rng.normal(size=model.D) + 1j * rng.normal(size=model.D) for _ in range(model.N)]
        Y = rng.normal(size=model.D) + 1j * rng.normal(size=model.D)
        a, b = rng.normal() + 1j * rng.normal(), rng.normal() + 1j * rng.normal()
        slot = int(rng.integers(model.N))
        mixed = list(Xs)
        mixed[slot] = a * Xs[slot] + b * Y
        other = list(Xs)
        other[slot] = Y
        lhs = np.asarray(model.psi(xis, mixed))
        rhs = a * np.asarray(model.psi(xis, Xs)) + b * np.asarray(model.psi(xis, other))
        scale = max(np.abs(lhs).max(), np.abs(rhs).max(), 1e-300)
        worst = max(worst, float(np.abs(lhs - rhs).max() / scale))
    return worst


def calibrate_psi_constant(
    model: GenericModel, probes: int = 2000, seed: int = 0, spread: float = 3.0
) -> float:
    """Largest observed |psi(xis)(X)| / max <xi_j>^r over random unit inputs."""
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(probes):
        xis = [rng.normal(scale=spread, size=model.d) for _ in range(model.N)]
        if np.linalg.norm(np.sum(xis, axis=0)) < 1e-8:
            continue
        Xs = []
        for _ in range(model.N):
            v = rng.normal(size=model.D) + 1j * rng.normal(size=model.D)
            Xs.append(v / np.linalg.norm(v))
        val = np.linalg.norm(model.psi(xis, Xs))
        weight = max(japanese(x) for x in xis) ** model.r
        best = max(best, float(val / weight))
    return best


# ---------------------------------------------------------------------------
# Ensembles and draws
# ---------------------------------------------------------------------------

def is_positive(k: Sequence[int]) -> bool:
    """Half-space rule: first nonzero coordinate is positive."""
    for x in k:
        if x:
            return x > 0
    return False


@dataclass(frozen=True)
class SpectralEnsemble:
    """Deterministic amplitudes a_{L,k} on a finite symmetric support."""

    L: int
    support: tuple[tuple[int, ...], ...]
    amplitudes: np.ndarray  # (len(support), D), real

    def __post_init__(self):
        supp = tuple(tuple(int(x) for x in k) for k in self.support)
        amps = np.asarray(self.amplitudes, dtype=float)
        if amps.ndim == 1:
            amps = amps[:, None]
        if len(supp) != len(amps):
            raise ValueError("one amplitude per support vector")
        order = sorted(range(len(supp)), key=lambda i: supp[i])
        supp = tuple(supp[i] for i in order)
        amps = amps[order]
        index = {k: i for i, k in enumerate(supp)}
        if len(index) != len(supp):
            raise ValueError("duplicate support vectors")
        for k, i in index.items():
            if not any(k):
                raise ValueError("the zero mode is excluded from the support")
            neg = tuple(-x for x in k)
            if neg not in index:
                raise ValueError(f"support not symmetric: {k} present, {neg} missing")
            if not np.array_equal(amps[i], amps[index[neg]]):
                raise ValueError(f"a_(-k) != a_k at k={k}")
        amps.setflags(write=False)
        object.__setattr__(self, "support", supp)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "_index", index)

    @classmethod
    def from_profile(
        cls, profile: Callable[[np.ndarray], np.ndarray], L: int, d: int, radius: float
    ) -> "SpectralEnsemble":
        """Sample a(k/L) on lattice points with |k/L|_inf <= radius, dropping zeros."""
        kmax = int(math.floor(radius * L + 1e-9))
        support, amps = [], []
        for k in itertools.product(range(-kmax, kmax + 1), repeat=d):
            if not any(k):
                continue
            a = np.atleast_1d(np.asarray(profile(np.asarray(k, dtype=float) / L), dtype=float))
            if np.any(a != 0):
                support.append(k)
                amps.append(a)
        if not support:
            raise ValueError("profile vanishes on the lattice")
        return cls(L=L, support=tuple(support), amplitudes=np.array(amps))

    @property
    def d(self) -> int:
        return len(self.support[0])

    @property
    def D(self) -> int:
        return self.amplitudes.shape[1]

    def index(self, k) -> int | None:
        return self._index.get(tuple(int(x) for x in k))

    def amplitude(self, k) -> np.ndarray:
        i = self.index(k)
        if i is None:
            return np.zeros(self.D)
        return self.amplitudes[i]

    def __contains__(self, k) -> bool:
        return tuple(int(x) for x in k) in self._index

    @property
    def negation(self) -> np.ndarray:
        return np.array([self._index[tuple(-x for x in k)] for k in self.support])

    @property
    def A_L(self) -> float:
        return max(japanese(np.asarray(k) / self.L) for k in self.support)

    def linf(self) -> float:
        return float(np.linalg.norm(self.amplitudes, axis=1).max())

    def l2(self) -> float:
        norms2 = np.sum(self.amplitudes**2)
        return float(np.sqrt(norms2) / (2 * math.pi * self.L) ** (self.d / 2))

    def l2_linf(self) -> float:
        return self.linf() + self.l2()


@dataclass(frozen=True)
class GaussianDraw:
    """One realization of the g_k, aligned with ``ensemble.support``."""

    seed: int
    values: np.ndarray


def sample_gaussian_batch(ensemble: SpectralEnsemble, size: int, rng: np.random.Generator) -> np.ndarray:
    """(size, len(support)) complex array with g_(-k) = conj(g_k) and E|g_k|^2 = 1."""
    pos = [i for i, k in enumerate(ensemble.support) if is_positive(k)]
    neg = ensemble.negation[pos]
    z = (rng.standard_normal((size, len(pos))) + 1j * rng.standard_normal((size, len(pos)))) / math.sqrt(2)
    g = np.empty((size, len(ensemble.support)), dtype=complex)
    g[:, pos] = z
    g[:, neg] = np.conj(z)
    return g


def draw_gaussians(ensemble: SpectralEnsemble, seed: int) -> GaussianDraw:
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    g = sample_gaussian_batch(ensemble, 1, np.random.default_rng(seed))[0]
    return GaussianDraw(seed=seed, values=g)


def translate_draw(draw: GaussianDraw, ensemble: SpectralEnsemble, y) -> GaussianDraw:
    """Draw of the datum shifted by ``y`` in physical space: g_k -> g_k e^{-i k.y/L}."""
    K = np.asarray(ensemble.support, dtype=float)
    phase = np.exp(-1j * (K @ np.atleast_1d(np.asarray(y, dtype=float))) / ensemble.L)
    return GaussianDraw(seed=draw.seed, values=draw.values * phase)


# ---------------------------------------------------------------------------
# Closed-form time dependence
# ---------------------------------------------------------------------------

def resonance_tolerance(mu: float) -> float:
    return 1e-9 * max(1.0, abs(mu))


@dataclass
class ExpPolyWave:
    """t -> sum_j c_j t^p_j exp(i lam_j t), with c_j in C^D."""

    coeffs: np.ndarray  # (T, D) complex
    powers: np.ndarray  # (T,) int
    freqs: np.ndarray  # (T,) float

    @classmethod
    def zero(cls, D: int) -> "ExpPolyWave":
        return cls(np.zeros((0, D), complex), np.zeros(0, int), np.zeros(0))

    @classmethod
    def monochromatic(cls, c, freq: float) -> "ExpPolyWave":
        c = np.atleast_1d(np.asarray(c, dtype=complex))
        return cls(c[None, :], np.array([0]), np.array([float(freq)]))

    @property
    def D(self) -> int:
        return self.coeffs.shape[1]

    def __len__(self) -> int:
        return len(self.powers)

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        basis = t[..., None] ** self.powers * np.exp(1j * t[..., None] * self.freqs)
        return basis @ self.coeffs

    def __add__(self, other: "ExpPolyWave") -> "ExpPolyWave":
        return ExpPolyWave(
            np.concatenate([self.coeffs, other.coeffs]),
            np.concatenate([self.powers, other.powers]),
            np.concatenate([self.freqs, other.freqs]),
        ).merged()

    def merged(self) -> "ExpPolyWave":
        """Combine terms whose (power, frequency) agree within the resonance tolerance."""
        if len(self) <= 1:
            return self
        order = np.lexsort((self.freqs, self.powers))
        coeffs, powers, freqs = [], [], []
        for i in order:
            p, lam = int(self.powers[i]), float(self.freqs[i])
            if powers and powers[-1] == p and abs(freqs[-1] - lam) <= resonance_tolerance(lam):
                coeffs[-1] = coeffs[-1] + self.coeffs[i]
            else:
                coeffs.append(self.coeffs[i].copy())
                powers.append(p)
                freqs.append(lam)
        keep = [i for i, c in enumerate(coeffs) if np.any(c != 0)]
        D = self.D
        return ExpPolyWave(
            np.array([coeffs[i] for i in keep], dtype=complex).reshape(len(keep), D),
            np.array([powers[i] for i in keep], dtype=int),
            np.array([freqs[i] for i in keep], dtype=float),
        )

    def duhamel(self, mu: float) -> "ExpPolyWave":
        """t -> int_0^t e^{i(t - tau) mu} w(tau) dtau, in closed form."""
        coeffs, powers, freqs = [], [], []
        for c, p, lam in zip(self.coeffs, self.powers, self.freqs):
            p = int(p)
            nu = lam - mu
            tol = resonance_tolerance(mu)
            if abs(nu) <= tol:
                coeffs.append(c / (p + 1))
                powers.append(p + 1)
                freqs.append(mu)
                continue
            if abs(nu) < 10 * tol:
                warnings.warn(
                    f"near-resonant Duhamel integral: |lambda - mu| = {abs(nu):.3e}",
                    ResonanceWarning,
                    stacklevel=2,
                )
            inu = 1j * nu
            # int_0^t tau^p e^{i nu tau} = sum_j (-1)^j p!/(p-j)! t^{p-j} e^{i nu t}/(i nu)^{j+1}
            #                              - (-1)^p p!/(i nu)^{p+1}
            falling = 1.0
            for j in range(p + 1):
                if j:
                    falling *= p - j + 1
                coeffs.append(c * ((-1) ** j * falling / inu ** (j + 1)))
                powers.append(p - j)
                freqs.append(lam)
            coeffs.append(-c * ((-1) ** p * math.factorial(p) / inu ** (p + 1)))
            powers.append(0)
            freqs.append(mu)
        if not coeffs:
            return ExpPolyWave.zero(self.D)
        return ExpPolyWave(np.array(coeffs), np.array(powers), np.array(freqs)).merged()


def multilinear_product(psi, xis, waves: Sequence[ExpPolyWave]) -> ExpPolyWave:
    """psi(xis)(w_1(t), ..., w_N(t)) expanded term by term."""
    D = waves[0].D
    if any(len(w) == 0 for w in waves):
        return ExpPolyWave.zero(D)
    grids = np.meshgrid(*[np.arange(len(w)) for w in waves], indexing="ij")
    idx = [g.ravel() for g in grids]
    Xs = [w.coeffs[i] for w, i in zip(waves, idx)]
    coeffs = np.asarray(psi(xis, Xs), dtype=complex).reshape(len(idx[0]), -1)
    powers = sum(w.powers[i] for w, i in zip(waves, idx))
    freqs = sum(w.freqs[i] for w, i in zip(waves, idx))
    return ExpPolyWave(coeffs, np.asarray(powers), np.asarray(freqs, dtype=float)).merged()


# ---------------------------------------------------------------------------
# Tree coefficients
# ---------------------------------------------------------------------------

class TreeCoefficients:
    """Evaluator and cache for G_{L,A,k}(t) of one (model, ensemble) pair."""

    def __init__(self, model: GenericModel, ensemble: SpectralEnsemble):
        if ensemble.d != model.d or ensemble.D != model.D:
            raise ValueError("model and ensemble dimensions differ")
        self.model = model
        self.ensemble = ensemble
        self._cache: dict = {}
        self._omega: dict = {}

    def omega(self, ksum: tuple[int, ...]) -> float:
        if ksum not in self._omega:
            self._omega[ksum] = float(self.model.omega(np.asarray(ksum, dtype=float) / self.ensemble.L))
        return self._omega[ksum]

    def wave(self, tree: NTree, kvec: Sequence[Sequence[int]]) -> ExpPolyWave:
        kvec = tuple(tuple(int(x) for x in k) for k in kvec)
        if len(kvec) != ntree.leaves(tree):
            raise ValueError(f"tree has {ntree.leaves(tree)} leaves, got {len(kvec)} vectors")
        return self._wave(tree, kvec)

    def _wave(self, tree: NTree, kvec: tuple) -> ExpPolyWave:
        key = (tree, kvec)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        ens = self.ensemble
        if tree == ():
            k = kvec[0]
            if k not in ens:
                w = ExpPolyWave.zero(ens.D)
            else:
                w = ExpPolyWave.monochromatic(ens.amplitude(k), self.omega(k))
        else:
            total = tuple(int(x) for x in np.sum(np.asarray(kvec), axis=0))
            if not any(total):
                # the zero mode is not a lattice frequency of the equation
                w = ExpPolyWave.zero(ens.D)
            else:
                table = ntree.leaf_ranges(tree)
                parts = [kvec[s] for s in table.slices()]
                children = [self._wave(child, part) for child, part in zip(tree, parts)]
                xis = [np.sum(np.asarray(p, dtype=float), axis=0) / ens.L for p in parts]
                w = multilinear_product(self.model.psi, xis, children).duhamel(self.omega(total))
        self._cache[key] = w
        return w

    def value(self, tree: NTree, kvec, t: float) -> np.ndarray:
        return self.wave(tree, kvec)(t)


def evaluate_G(model: GenericModel, ensemble: SpectralEnsemble, tree: NTree, kvec) -> ExpPolyWave:
    return TreeCoefficients(model, ensemble).wave(tree, kvec)


def check_G_bound(
    model: GenericModel,
    ensemble: SpectralEnsemble,
    tree: NTree,
    kvec,
    t: float,
    coefficients: TreeCoefficients | None = None,
) -> dict:
    """Compare |G(t)| with C^n t^n max<k/L>^{rn} prod |a_k|, C = C_psi N."""
    tc = coefficients or TreeCoefficients(model, ensemble)
    n = ntree.nodes(tree)
    lhs = float(np.linalg.norm(tc.value(tree, kvec, t)))
    C = model.growth_constant()
    bracket = max(japanese(np.asarray(k) / ensemble.L) for k in kvec)
    amp = math.prod(float(np.linalg.norm(ensemble.amplitude(k))) for k in kvec)
    rhs = C**n * abs(t) ** n * bracket ** (model.r * n) * amp
    return {"lhs": lhs, "rhs": rhs, "C_calibrated": C, "nodes": n, "passed": lhs <= rhs * (1 + 1e-12)}


# ---------------------------------------------------------------------------
# Fourier modes as polynomials in the g_k
# ---------------------------------------------------------------------------

@dataclass
class ModePolynomial:
    """Formal polynomial sum_m c_m prod_j g_{k_mj} in commuting indeterminates.

    Monomials are sorted tuples of support indices; coefficients live in C^D.
    """

    ensemble: SpectralEnsemble
    terms: dict = field(default_factory=dict)

    def add(self, monomial: tuple[int, ...], coeff: np.ndarray) -> None:
        if monomial in self.terms:
            self.terms[monomial] = self.terms[monomial] + coeff
        else:
            self.terms[monomial] = np.array(coeff, dtype=complex)

    def component(self, i: int) -> dict:
        return {m: complex(c[i]) for m, c in self.terms.items() if c[i] != 0}

    def degrees(self) -> set[int]:
        return {len(m) for m in self.terms}

    def evaluate(self, g: np.ndarray) -> np.ndarray:
        """Evaluate at draws ``g`` of shape (..., n_support); returns (..., D)."""
        return evaluate_terms(self.terms, g, self.ensemble.D)


def evaluate_terms(terms: Mapping[tuple[int, ...], np.ndarray], g: np.ndarray, D: int) -> np.ndarray:
    g = np.asarray(g)
    out = np.zeros(g.shape[:-1] + (D,), dtype=complex)
    by_degree: dict[int, list] = {}
    for mono, c in terms.items():
        by_degree.setdefault(len(mono), []).append((mono, c))
    for deg, items in by_degree.items():
        idx = np.array([m for m, _ in items], dtype=int).reshape(len(items), deg)
        coeffs = np.array([np.atleast_1d(c) for _, c in items], dtype=complex).reshape(len(items), -1)
        prods = np.prod(g[..., idx], axis=-1) if deg else np.ones(g.shape[:-1] + (len(items),))
        out = out + prods @ coeffs
    return out


def lattice_budget(n_support: int, leaves: int, n_trees: int, targeted: bool) -> int:
    return n_trees * n_support ** (leaves - 1 if targeted else leaves)


def _leaf_tuples_with_sum(support: Sequence[tuple], leaves: int, target, in_support):
    """Ordered leaf tuples from ``support`` whose vector sum is ``target``."""
    target = tuple(target)
    if leaves == 1:
        if in_support(target):
            yield (target,)
        return
    for head in itertools.product(support, repeat=leaves - 1):
        last = tuple(t - sum(h[i] for h in head) for i, t in enumerate(target))
        if in_support(last):
            yield head + (last,)


def mode_polynomials(
    model: GenericModel,
    ensemble: SpectralEnsemble,
    n: int,
    t: float,
    targets: Iterable[Sequence[int]] | None = None,
    coefficients: TreeCoefficients | None = None,
    cap: int = DEFAULT_TERM_CAP,
) -> dict[tuple[int, ...], ModePolynomial]:
    """û_n(k/L) as formal polynomials in the g, keyed by lattice vector k.

    With ``targets`` only those modes are built (lattice sums restricted to
    R(k) = target); otherwise every reachable mode is produced.
    """
    tc = coefficients or TreeCoefficients(model, ensemble)
    trees = ntree.enumerate_trees(model.N, n) if n else [()]
    nleaves = (model.N - 1) * n + 1
    support = ensemble.support
    targets = None if targets is None else [tuple(int(x) for x in k) for k in targets]
    budget = lattice_budget(len(support), nleaves, len(trees), targets is not None)
    if targets is not None:
        budget *= len(targets)
    if budget > cap:
        raise BudgetError(f"lattice sum needs {budget} terms (cap {cap})", budget)
    pref = (2 * math.pi * ensemble.L) ** (-model.d * (model.N - 1) * n / 2)
    index = ensemble._index
    out: dict[tuple[int, ...], ModePolynomial] = {}
    if targets is not None:
        groups = {k: list(_leaf_tuples_with_sum(support, nleaves, k, index.__contains__)) for k in targets}
        for k in targets:
            out[k] = ModePolynomial(ensemble)
    for tree in trees:
        if targets is None:
            iterable = itertools.product(support, repeat=nleaves)
        else:
            iterable = itertools.chain.from_iterable(groups.values())
        for kvec in iterable:
            val = tc.value(tree, kvec, t)
            if not np.any(val):
                continue
            total = tuple(int(sum(k[i] for k in kvec)) for i in range(ensemble.d))
            if not any(total):
                # the zero mode is not part of the lattice of the equation
                continue
            poly = out.setdefault(total, ModePolynomial(ensemble))
            poly.add(tuple(sorted(index[k] for k in kvec)), pref * val)
    return out


def fourier_mode(
    model: GenericModel,
    ensemble: SpectralEnsemble,
    n: int,
    k: Sequence[int],
    t: float,
    draw: GaussianDraw | None = None,
    coefficients: TreeCoefficients | None = None,
    cap: int = DEFAULT_TERM_CAP,
):
    """û_n(k/L)(t): a :class:`ModePolynomial`, or its value at ``draw``."""
    k = tuple(int(x) for x in np.atleast_1d(k))
    if not any(k):
        raise ValueError("the zero frequency is excluded")
    poly = mode_polynomials(model, ensemble, n, t, targets=[k], coefficients=coefficients, cap=cap)[k]
    if draw is None:
        return poly
    return poly.evaluate(draw.values)


@dataclass
class ModeField:
    """Spectral field on a finite set of lattice modes: ks (K, d) and values (K, D)."""

    L: int
    ks: np.ndarray
    values: np.ndarray
    seed: int | None = None

    def as_dict(self) -> dict[tuple[int, ...], np.ndarray]:
        return {tuple(int(x) for x in k): v for k, v in zip(self.ks, self.values)}

    def csv_rows(self) -> list[list]:
        rows = []
        for k, v in zip(self.ks, self.values):
            row = [int(x) for x in k]
            for c in v:
                row += [float(c.real), float(c.imag)]
            rows.append(row)
        return rows

    def csv_header(self) -> list[str]:
        d, D = self.ks.shape[1], self.values.shape[1]
        head = [f"k{i}" for i in range(d)]
        for c in range(D):
            head += [f"re{c}", f"im{c}"]
        return head


def sample_realization(
    model: GenericModel,
    ensemble: SpectralEnsemble,
    M: int,
    t: float,
    draw: GaussianDraw,
    cap: int = DEFAULT_TERM_CAP,
) -> ModeField:
    """Quasi-solution sum_{n<=M} û_n at time t for one draw, on every reachable mode."""
    tc = TreeCoefficients(model, ensemble)
    acc: dict[tuple[int, ...], np.ndarray] = {}
    for n in range(M + 1):
        for k, poly in mode_polynomials(model, ensemble, n, t, coefficients=tc, cap=cap).items():
            val = poly.evaluate(draw.values)
            acc[k] = acc[k] + val if k in acc else val
    keys = sorted(acc)
    return ModeField(
        L=ensemble.L,
        ks=np.array(keys, dtype=int).reshape(len(keys), ensemble.d),
        values=np.array([acc[k] for k in keys]).reshape(len(keys), ensemble.D),
        seed=draw.seed,
    )
