"""Sampling of type sequences and truncated random infinite convolutions.

A draw omega = (omega_1, omega_2, ...) of i.i.d. types defines the random
measure as the infinite convolution of the per-type atomic measures, the
n-th factor scaled by the contraction of the first n-1 blocks.  This module
materialises finite truncations as atomic measures, splits them into the
small part (factor indices divisible by s) and the big part (the rest), and
draws Monte Carlo points from the untruncated measure with a certified
geometric tail bound.

Reproducibility contract: every random stream is a counter-based Philox
stream keyed by (seed, purpose, index), so results are independent of
scheduling and a longer draw extends a shorter one with the same seed.
"""

from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox, SeedSequence

from .errors import CapExceededError
from .measures import AtomicMeasure, atomic, convolve_atomic, dirac, scale_push

# purpose tags for stream derivation
_TAG_TYPES = 1
_TAG_POINTS = 2

DEFAULT_ATOM_CAP = 1_000_000


def stream(seed: int, *path: int) -> Generator:
    """Philox generator keyed by (seed, *path); deterministic across runs."""
    return Generator(Philox(SeedSequence((int(seed),) + tuple(int(x) for x in path))))


def derive_seed(seed: int, *path: int) -> int:
    """Stable child seed for an ensemble member or sub-purpose."""
    ss = SeedSequence((int(seed),) + tuple(int(x) for x in path))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class OmegaPrefix:
    """Finite prefix of a type sequence, with its seed lineage.

    Prefixes made by sample_types carry the seed they came from, so that
    consumers needing more blocks (certified Fourier tails, deep sampling)
    can extend the same stream deterministically.  Hand-built prefixes have
    seed None and cannot be extended.
    """

    blocks: tuple
    seed: int | None = None

    def __len__(self):
        return len(self.blocks)

    def __getitem__(self, k):
        return self.blocks[k]


def sample_types(seed: int, n: int, q) -> OmegaPrefix:
    """n i.i.d. draws from the type distribution q (mapping key -> prob).

    Inverse-CDF over the mapping's iteration order on a counter-based
    stream: the same seed always yields the same prefix, and a longer draw
    starts with the shorter one.
    """
    if n < 1:
        raise ValueError("need n >= 1 draws")
    keys = list(q.keys())
    probs = np.array([q[k] for k in keys], dtype=float)
    if np.any(probs <= 0) or abs(probs.sum() - 1.0) > 1e-9:
        raise ValueError("q must be a strictly positive distribution")
    cdf = np.cumsum(probs)
    cdf[-1] = 1.0
    us = stream(seed, _TAG_TYPES).random(n)
    idx = np.searchsorted(cdf, us, side="right")
    return OmegaPrefix(tuple(keys[i] for i in idx), seed=seed)


def extend_prefix(omega: OmegaPrefix, sys, n: int) -> OmegaPrefix:
    """Extend a seeded prefix to length n along its own stream."""
    if n <= len(omega):
        return omega
    if omega.seed is None:
        raise ValueError("cannot extend a prefix without seed lineage; "
                         "build it with sample_types or disable the tail")
    longer = sample_types(omega.seed, n, sys.q_table())
    if longer.blocks[: len(omega)] != omega.blocks:
        raise ValueError("prefix does not match its seed lineage "
                         "(was it built against a different system?)")
    return longer


def _factor_measures(sys, omega: OmegaPrefix, u, keep):
    """(scale, eta) pairs for factors n = 1..len(omega) with keep(n) true.

    The n-th factor of the convolution is eta(omega_n) pushed forward by the
    contraction of blocks 1..n-1 (the empty prefix scales by 1).
    """
    out = []
    prefix = 1.0
    for n, key in enumerate(omega.blocks, start=1):
        if keep is None or keep(n):
            out.append((prefix, sys.eta(key, u)))
        prefix *= sys.lam(key)
    return out


def _convolve_scaled(factors, cap: int) -> AtomicMeasure:
    total = 1
    for _, eta in factors:
        total *= eta.n_atoms
        if total > cap:
            raise CapExceededError(
                f"convolution needs {total}+ atoms, cap {cap}",
                needed=total, cap=cap, suggestion="sample_points")
    acc = dirac(0.0)
    for scale, eta in factors:
        acc = convolve_atomic(acc, scale_push(eta, scale), cap=cap)
    return acc


def eta_omega_atoms(sys, omega: OmegaPrefix, u: float | None = None,
                    cap: int = DEFAULT_ATOM_CAP) -> AtomicMeasure:
    """Finite truncation of the random measure: convolution of the first
    len(omega) factors with their prefix contractions."""
    return _convolve_scaled(_factor_measures(sys, omega, u, None), cap)


def split_small_big(sys, omega: OmegaPrefix, s: int, u: float | None = None,
                    cap: int = DEFAULT_ATOM_CAP) -> tuple[AtomicMeasure, AtomicMeasure]:
    """Split the truncated convolution by divisibility of the factor index.

    Returns (small, big): small collects factors with s | n, big the rest,
    both with the original prefix scalings, so that small * big equals the
    full truncation.  An empty factor set gives the Dirac mass at 0.
    """
    if s < 2:
        raise ValueError("split period s must be >= 2")
    small = _convolve_scaled(_factor_measures(sys, omega, u, lambda n: n % s == 0), cap)
    big = _convolve_scaled(_factor_measures(sys, omega, u, lambda n: n % s != 0), cap)
    return small, big


def sample_points(sys, seed: int, omega_length: int, u: float | None,
                  count: int, tail_tol: float | None,
                  omega: OmegaPrefix | None = None,
                  factor_filter=None) -> np.ndarray:
    """Monte Carlo draws from the random measure of a fixed omega.

    The omega prefix (sampled from `seed` unless given) is shared by all
    draws and always consumed in full; blocks beyond it are drawn per-point
    along independent streams until the discarded tail is certified below
    tail_tol (contraction-of-prefix times the tail diameter bound).
    tail_tol=None disables the extension: draws come from the truncated
    measure of the prefix exactly.  Draw d depends only on (seed, d), so
    parallel evaluation order cannot change the ensemble.

    factor_filter(n) selects which factor indices contribute (to sample the
    small/big split parts); the descent depth is unaffected, and skipped
    factors still consume one stream step so that split samples of the same
    seed share their blocks and atom choices.
    """
    if tail_tol is not None and tail_tol <= 0:
        raise ValueError("tail_tol must be positive (or None to disable)")
    if count < 1:
        raise ValueError("count must be >= 1")
    if omega is None:
        omega = sample_types(seed, omega_length, sys.q_table())
    tail_diam = sys.tail_diameter_bound(u)
    keys = list(sys.q_table().keys())
    qcdf = np.cumsum([sys.q_table()[k] for k in keys])
    qcdf[-1] = 1.0
    table = {}
    for key in keys:
        eta = sys.eta(key, u)
        wcdf = np.cumsum(eta.weights)
        wcdf[-1] = 1.0
        table[key] = (eta.positions, wcdf, sys.lam(key))
    out = np.empty(count)
    for d in range(count):
        rng = stream(seed, _TAG_POINTS, d)
        x = 0.0
        prefix = 1.0
        n = 0
        while True:
            n += 1
            if n <= len(omega):
                key = omega.blocks[n - 1]
            elif tail_tol is not None and prefix * tail_diam >= tail_tol:
                key = keys[int(np.searchsorted(qcdf, rng.random(), side="right"))]
            else:
                break
            positions, wcdf, lam = table[key]
            uniform = rng.random()
            if factor_filter is None or factor_filter(n):
                a = int(np.searchsorted(wcdf, uniform, side="right"))
                x += prefix * positions[min(a, len(positions) - 1)]
            prefix *= lam
        out[d] = x
    return out
