"""Level-n self-similar measures, disintegration checks, density diagnostics.

The flagship identity here is the exact finite-truncation disintegration:
averaging the k-block truncated random measures over all type sequences,
weighted by their probabilities, reproduces the level-(k*N) approximation
of the self-similar measure atom for atom.  Both an exact enumeration and
a Monte Carlo Fourier-side check are provided.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import CapExceededError
from .ifs_core import IFS
from .measures import (AtomicMeasure, MatchReport, atomic, compare_atomic,
                       convolve_atomic, dirac, mixture, scale_push)
from .random_model import OmegaPrefix, eta_omega_atoms, stream

_TAG_MC = 5

DEFAULT_POINT_CAP = 10_000_000


def level_n_ssm(ifs: IFS, n: int, cap: int = DEFAULT_POINT_CAP) -> AtomicMeasure:
    """Level-n approximation: atoms at psi_w(0) with weights prod p_{w_l},
    over all length-n words."""
    if ifs.dim != 1:
        raise ValueError("level-n measures are built for 1D systems; "
                         "project planar systems first")
    if n < 0:
        raise ValueError("n must be >= 0")
    total = ifs.m ** n
    if total > cap:
        raise CapExceededError(f"m^n = {total} atoms exceeds cap {cap}",
                               needed=total, cap=cap)
    pos = np.zeros(1)
    w = np.ones(1)
    for _ in range(n):
        pos = np.concatenate([s.translation + s.ratio * pos for s in ifs.maps])
        w = np.concatenate([pk * w for pk in ifs.weights])
    return atomic(pos, w)


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    masses: np.ndarray

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    def densities(self) -> np.ndarray:
        return self.masses / self.widths


def density_histogram(data, bins: int, span: tuple[float, float] | None = None) -> Histogram:
    """Mass-weighted histogram of an AtomicMeasure or a point sample."""
    if bins < 2:
        raise ValueError("need at least 2 bins")
    if isinstance(data, AtomicMeasure):
        pos, w = data.positions, data.weights
    else:
        pos = np.asarray(data, dtype=float).ravel()
        w = np.full(len(pos), 1.0 / len(pos))
    if span is None:
        span = (float(pos.min()), float(pos.max()))
    masses, edges = np.histogram(pos, bins=bins, range=span, weights=w)
    return Histogram(edges, masses)


def l2_indicator(h: Histogram) -> float:
    """sum (mass_i/width_i)^2 * width_i: an L2-density proxy.

    Stays bounded across shrinking bin widths for measures with an L2
    density, diverges for singular ones.
    """
    return float(np.sum((h.masses / h.widths) ** 2 * h.widths))


def l2_divergence_exponent(data, widths, span: tuple[float, float]) -> float:
    """Slope of log l2_indicator against -log width over the given widths.

    Near 0 for measures whose indicator stabilises (consistent with an L2
    density); near 1 - D2 for singular measures of correlation dimension D2.
    """
    xs, ys = [], []
    lo, hi = span
    for w in widths:
        bins = max(2, int(round((hi - lo) / w)))
        ys.append(np.log(l2_indicator(density_histogram(data, bins, span))))
        xs.append(-np.log((hi - lo) / bins))
    return float(np.polyfit(xs, ys, 1)[0])


def boxdim_of_samples(points, scales) -> float:
    """Box-counting dimension of a 1D point cloud: occupied boxes per scale,
    then the log-log slope.

    Points within 1e-9 of a box edge (in box units) snap right, so clouds
    aligned to an exact fractal grid do not double-count from 1-ulp noise.
    """
    pts = np.asarray(points, dtype=float).ravel()
    if len(pts) < 1000:
        raise ValueError(f"need >= 1000 points, got {len(pts)}")
    lo = pts.min()
    counts = []
    for r in scales:
        idx = np.floor((pts - lo) / r + 1e-9)
        counts.append((float(r), int(len(np.unique(idx)))))
    from .transversality import box_dim_estimate

    return box_dim_estimate(counts)


def verify_disintegration(sys, k: int, mode: str = "exact", S: int = 20_000,
                          xis=None, seed: int = 0, u: float | None = None,
                          cap: int = DEFAULT_POINT_CAP) -> float:
    """Check that averaging k-block truncations reproduces the level-(kN)
    measure.

    exact mode: enumerate all |T|^k type sequences, mix the truncated
    convolutions with weights prod q(omega_i), and compare atom-for-atom
    with level_n_ssm(base, k*N); returns the max atom-weight discrepancy.

    monte_carlo mode: average the Fourier transforms of S sampled
    truncations at the given frequencies against the transform of the
    level-(kN) measure; returns the max modulus error.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    base = sys.base
    if not isinstance(base, IFS):
        if u is None:
            raise ValueError("parametrised system: pass u")
        base = base.freeze(u)
    target = level_n_ssm(base, k * sys.N, cap=cap)
    if mode == "exact":
        n_seq = len(sys.types) ** k
        if n_seq * (sys.m_base ** (k * sys.N)) > cap:
            raise CapExceededError(
                f"{n_seq} sequences of {sys.m_base ** (k * sys.N)} atoms "
                f"exceed cap {cap}", cap=cap, suggestion="mode='monte_carlo'")
        terms = []
        for blocks in itertools.product(sys.types, repeat=k):
            qprod = 1.0
            for tau in blocks:
                qprod *= sys.q(tau)
            terms.append((qprod, eta_omega_atoms(sys, OmegaPrefix(blocks), u, cap=cap)))
        mixed = mixture(terms)
        report = compare_atomic(mixed, target)
        if not report.matched:
            raise AssertionError(f"disintegration supports differ: {report.message}")
        return report.max_weight_diff
    if mode != "monte_carlo":
        raise ValueError(f"unknown mode {mode!r}")
    if S < 100:
        raise ValueError("monte_carlo mode needs S >= 100")
    xi = np.atleast_1d(np.asarray(
        xis if xis is not None else np.linspace(1.0, 100.0, 10), dtype=float))
    keys = list(sys.q_table().keys())
    probs = np.array([sys.q_table()[key] for key in keys])
    cdf = np.cumsum(probs)
    cdf[-1] = 1.0
    draws = stream(seed, _TAG_MC).random((S, k))
    idx = np.searchsorted(cdf, draws, side="right")
    etas = [sys.eta(key, u) for key in keys]
    lams = np.array([sys.lam(key) for key in keys])
    vals = np.ones((S, len(xi)), dtype=complex)
    prefix = np.ones(S)
    for blk in range(k):
        which = idx[:, blk]
        for t, eta in enumerate(etas):
            mask = which == t
            if not np.any(mask):
                continue
            args = prefix[mask, None] * xi[None, :]
            phases = np.exp(-2j * np.pi * eta.positions[None, None, :]
                            * args[:, :, None])
            vals[mask] *= phases @ eta.weights
        prefix *= lams[which]
    avg = vals.mean(axis=0)
    target_ft = np.array([
        np.sum(target.weights * np.exp(-2j * np.pi * target.positions * x))
        for x in xi])
    return float(np.max(np.abs(avg - target_ft)))
