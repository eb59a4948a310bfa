"""Composition types: multiplicity vectors, probabilities, atomic measures.

Length-N words over an m-map IFS are classified by their symbol-count
vector ("type").  All compositions of one type share the contraction
lambda(tau) = prod lambda_k^(N_k), which is what makes the random
infinite-convolution model tick.  This module enumerates the type set,
computes q(tau) = m(tau) p_1^(N_1) ... p_m^(N_m) with m(tau) the exact
multinomial count, builds the per-type uniform atomic measures, and
implements the two s-block re-typings (last-block-only and first-blocks
convolution) together with the similarity dimension of a random model.
"""

import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import CapExceededError, DegenerateModelError
from .ifs_core import IFS
from .measures import AtomicMeasure, atomic, convolve_atomic, dirac, scale_push
from .param_family import ParamIFS

Q_UNDERFLOW = 1e-300


@dataclass(frozen=True)
class TypeVec:
    """Multiplicity vector (N_1,...,N_m); counts[k-1] = occurrences of symbol k."""

    counts: tuple[int, ...]

    def __post_init__(self):
        if any(c < 0 for c in self.counts):
            raise ValueError("counts must be nonnegative")

    @property
    def N(self) -> int:
        return sum(self.counts)

    @property
    def m(self) -> int:
        return len(self.counts)

    def __str__(self):
        return "(" + ",".join(str(c) for c in self.counts) + ")"


def type_of(w, m: int) -> TypeVec:
    """Symbol-frequency vector of a word over {1..m}."""
    counts = [0] * m
    for s in w:
        if not 1 <= s <= m:
            raise ValueError(f"symbol {s} out of range 1..{m}")
        counts[s - 1] += 1
    return TypeVec(tuple(counts))


def enumerate_types(m: int, N: int) -> list[TypeVec]:
    """All of T^N = {(N_1..N_m) : sum = N}, lexicographically."""
    out = []

    def rec(prefix, remaining, slots):
        if slots == 1:
            out.append(TypeVec(prefix + (remaining,)))
            return
        for c in range(remaining + 1):
            rec(prefix + (c,), remaining - c, slots - 1)

    rec((), N, m)
    return out


def n_types(m: int, N: int) -> int:
    """|T^N| = C(N+m-1, m-1)."""
    return math.comb(N + m - 1, m - 1)


def multiplicity(tau: TypeVec) -> int:
    """Number of N-sequences of this type: N!/(N_1! ... N_m!), exact."""
    out = math.factorial(tau.N)
    for c in tau.counts:
        out //= math.factorial(c)
    return out


def type_probability(tau: TypeVec, p) -> float:
    """q(tau) = m(tau) p_1^(N_1) ... p_m^(N_m)."""
    p = np.asarray(p, dtype=float)
    if len(p) != tau.m:
        raise ValueError(f"{len(p)} probabilities for m={tau.m}")
    mult = multiplicity(tau)
    logprod = float(np.dot(tau.counts, np.log(p)))
    if mult < 1e290 and logprod > -700.0:
        q = float(mult) * float(np.prod(p ** np.array(tau.counts)))
    else:
        # log-space fallback for large N, where the exact multinomial
        # overflows doubles and the probability product underflows
        q = math.exp(math.lgamma(tau.N + 1)
                     - math.fsum(math.lgamma(c + 1) for c in tau.counts)
                     + logprod)
    if q < Q_UNDERFLOW:
        warnings.warn(f"q({tau}) = {q:.3e} underflows below {Q_UNDERFLOW:.0e}",
                      RuntimeWarning, stacklevel=2)
    return q


class TypedSystem:
    """The type pool T^N of a fixed IFS (or family), with q, m, lambda per type.

    The base may be a frozen IFS or a ParamIFS; per-type atoms of a family
    are evaluated at the requested parameter value u.
    """

    def __init__(self, base: IFS | ParamIFS, N: int, atom_cap: int = 1_000_000):
        if N < 1:
            raise ValueError("block length N must be >= 1")
        self.base = base
        self.N = N
        self.atom_cap = atom_cap
        m = base.m
        lams = np.asarray(base.lambdas, dtype=float)
        p = np.asarray(base.weights, dtype=float)
        self.types = enumerate_types(m, N)
        self._mult = {tau: multiplicity(tau) for tau in self.types}
        self._lam = {
            tau: float(np.prod(lams ** np.array(tau.counts))) for tau in self.types
        }
        self._q = {tau: type_probability(tau, p) for tau in self.types}
        total_mult = sum(self._mult.values())
        if total_mult != m ** N:
            raise AssertionError(
                f"multiplicities sum to {total_mult}, expected {m}**{N}")
        qsum = math.fsum(self._q.values())
        if abs(qsum - 1.0) > 1e-12:
            raise AssertionError(f"type probabilities sum to {qsum!r}")
        self._eta_cache: dict = {}

    @property
    def m_base(self) -> int:
        return self.base.m

    def q(self, tau: TypeVec) -> float:
        return self._q[tau]

    def lam(self, tau: TypeVec) -> float:
        return self._lam[tau]

    def mult(self, tau: TypeVec) -> int:
        return self._mult[tau]

    def q_table(self) -> dict:
        """Type -> probability, in the canonical enumeration order."""
        return dict(self._q)

    def lam_sup(self) -> float:
        return max(self._lam.values())

    def _frozen(self, u):
        if isinstance(self.base, ParamIFS):
            if u is None:
                raise ValueError("this system is parametrised; pass u")
            return self.base.freeze(u)
        return self.base

    def eta(self, tau: TypeVec, u: float | None = None) -> AtomicMeasure:
        """eta(tau): uniform measure on the type-tau composition points.

        Coincident compositions coalesce with summed weight; the multiset
        size m(tau) is preserved in the weights.  Results are cached per
        (tau, u); measures are immutable, so sharing is safe.
        """
        cached = self._eta_cache.get((tau, u))
        if cached is not None:
            return cached
        mtau = self._mult[tau]
        if mtau > self.atom_cap:
            raise CapExceededError(
                f"type {tau} has {mtau} compositions, cap {self.atom_cap}",
                needed=mtau, cap=self.atom_cap, suggestion="sample_points")
        ifs = self._frozen(u)
        if ifs.dim != 1:
            raise ValueError("per-type measures are built for 1D systems; "
                             "project planar systems first")
        lams = ifs.lambdas
        ts = ifs.translations
        cache: dict[tuple[int, ...], np.ndarray] = {}

        def points(counts: tuple[int, ...]) -> np.ndarray:
            if sum(counts) == 0:
                return np.zeros(1)
            got = cache.get(counts)
            if got is not None:
                return got
            parts = []
            for k, c in enumerate(counts):
                if c:
                    rest = counts[:k] + (c - 1,) + counts[k + 1:]
                    parts.append(ts[k] + lams[k] * points(rest))
            out = np.concatenate(parts)
            cache[counts] = out
            return out

        pos = points(tau.counts)
        assert len(pos) == mtau
        out = atomic(pos, np.full(mtau, 1.0 / mtau))
        self._eta_cache[(tau, u)] = out
        return out

    def t_sup(self, u: float | None = None) -> float:
        """sup over types and atoms of |position| at this u."""
        cached = self._eta_cache.get(("t_sup", u))
        if cached is None:
            cached = max(float(np.max(np.abs(self.eta(tau, u).positions)))
                         for tau in self.types)
            self._eta_cache[("t_sup", u)] = cached
        return cached

    def tail_diameter_bound(self, u: float | None = None) -> float:
        """Bound on |sum of discarded tail| when truncating the convolution
        after a prefix with contraction L: tail <= L * this value."""
        return self.t_sup(u) / (1.0 - self.lam_sup())


class AtomPool:
    """Abstract random model: explicit types with fixed atoms.

    Entries are (key, q, lam, positions); positions is the translation
    multiset of the type (repetitions allowed), atoms get uniform weight.
    """

    def __init__(self, entries):
        self._keys = []
        self._q = {}
        self._lam = {}
        self._positions = {}
        for key, q, lam, positions in entries:
            if not 0.0 < lam < 1.0:
                raise ValueError(f"lam({key}) = {lam} outside (0,1)")
            if not 0.0 < q <= 1.0:
                raise ValueError(f"q({key}) = {q} outside (0,1]")
            self._keys.append(key)
            self._q[key] = float(q)
            self._lam[key] = float(lam)
            self._positions[key] = np.asarray(positions, dtype=float).ravel()
        if abs(math.fsum(self._q.values()) - 1.0) > 1e-12:
            raise ValueError("type probabilities must sum to 1")

    @property
    def types(self) -> list:
        return list(self._keys)

    def q(self, key) -> float:
        return self._q[key]

    def lam(self, key) -> float:
        return self._lam[key]

    def mult(self, key) -> int:
        return len(self._positions[key])

    def positions(self, key) -> np.ndarray:
        return self._positions[key]

    def q_table(self) -> dict:
        return dict(self._q)

    def lam_sup(self) -> float:
        return max(self._lam.values())

    def eta(self, key, u: float | None = None) -> AtomicMeasure:
        pos = self._positions[key]
        return atomic(pos, np.full(len(pos), 1.0 / len(pos)))

    def t_sup(self, u: float | None = None) -> float:
        return max(float(np.max(np.abs(p))) for p in self._positions.values())

    def tail_diameter_bound(self, u: float | None = None) -> float:
        return self.t_sup(u) / (1.0 - self.lam_sup())


def model_similarity_dimension(triples) -> float:
    """Similarity dimension of a random model from (q, m, lambda) triples:
    sum q log(1/m) / sum q log lambda."""
    triples = list(triples)
    q = np.array([t[0] for t in triples], dtype=float)
    mm = np.array([t[1] for t in triples], dtype=float)
    lam = np.array([t[2] for t in triples], dtype=float)
    if abs(q.sum() - 1.0) > 1e-9:
        raise ValueError(f"q sums to {q.sum()!r}")
    if np.any(mm < 1):
        raise ValueError("atom counts must be >= 1")
    if np.any(lam <= 0) or np.any(lam >= 1):
        raise ValueError("contractions must lie in (0,1)")
    if np.all(mm == 1):
        raise DegenerateModelError(
            "every type is a single atom: similarity dimension 0")
    return float((q @ np.log(1.0 / mm)) / (q @ np.log(lam)))


def system_dimension_triples(sys) -> list[tuple[float, int, float]]:
    """(q, m, lambda) per type, for model_similarity_dimension."""
    return [(sys.q(tau), sys.mult(tau), sys.lam(tau)) for tau in sys.types]


class _Retyped:
    """Common bookkeeping for the two s-block re-typings.

    Types are s-tuples over the base pool; the full set of |T|^s tuples is
    only ever materialised through the lazy iterators.
    """

    def __init__(self, sys, s: int):
        if s < 2:
            raise ValueError("split period s must be >= 2")
        self.base_sys = sys
        self.s = s

    @property
    def types(self):
        return itertools.product(self.base_sys.types, repeat=self.s)

    @property
    def n_types(self) -> int:
        return len(self.base_sys.types) ** self.s

    def q(self, tau_tuple) -> float:
        out = 1.0
        for t in tau_tuple:
            out *= self.base_sys.q(t)
        return out

    def lam(self, tau_tuple) -> float:
        out = 1.0
        for t in tau_tuple:
            out *= self.base_sys.lam(t)
        return out

    def q_table(self) -> dict:
        return {tt: self.q(tt) for tt in self.types}

    def lam_sup(self) -> float:
        return self.base_sys.lam_sup() ** self.s

    def dimension_triples(self):
        for tt in self.types:
            yield (self.q(tt), self.mult(tt), self.lam(tt))


class SmallRetype(_Retyped):
    """Re-typed system whose type (w_1..w_s) keeps only the last block's atoms;
    the contraction is the full s-block product."""

    def mult(self, tau_tuple) -> int:
        return self.base_sys.mult(tau_tuple[-1])

    def eta(self, tau_tuple, u: float | None = None) -> AtomicMeasure:
        return self.base_sys.eta(tau_tuple[-1], u)


class BigRetype(_Retyped):
    """Re-typed system whose type (w_1..w_s) carries the convolution of the
    first s-1 blocks (index set prod_{l<s} {1..m(w_l)}, translations
    sum_l [prod_{j<l} lam(w_j)] t_{i_l}); the last block contributes only
    its contraction factor."""

    def mult(self, tau_tuple) -> int:
        out = 1
        for t in tau_tuple[:-1]:
            out *= self.base_sys.mult(t)
        return out

    def eta(self, tau_tuple, u: float | None = None,
            cap: int = 1_000_000) -> AtomicMeasure:
        if self.mult(tau_tuple) > cap:
            raise CapExceededError(
                f"re-typed atom count {self.mult(tau_tuple)} exceeds cap {cap}",
                needed=self.mult(tau_tuple), cap=cap)
        acc = dirac(0.0)
        prefix = 1.0
        for t in tau_tuple[:-1]:
            acc = convolve_atomic(acc, scale_push(self.base_sys.eta(t, u), prefix),
                                  cap=cap)
            prefix *= self.base_sys.lam(t)
        return acc


def retype_small(sys, s: int) -> SmallRetype:
    return SmallRetype(sys, s)


def retype_big(sys, s: int) -> BigRetype:
    return BigRetype(sys, s)
