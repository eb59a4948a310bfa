"""Fourier transforms of atomic measures and random infinite convolutions.

The transform of the random measure factorises over the convolution, each
factor being the transform of one per-type atomic measure at a contracted
frequency.  Truncating the product after D factors costs at most
sum_{n>D} 2 pi lam_sup^(n-1) t_sup |xi| in modulus (each factor is within
that distance of 1 and all factors are bounded by 1), so the reported
tail_error is a certified bound, conservative but honest.

Also here: the distance-to-nearest-integer machinery, the three-phase sum
zeta and its certified flatness gap alpha(rho), and the sup-envelope
regression used to estimate a polynomial Fourier decay exponent from
samples.
"""

import math
from dataclasses import dataclass

import numpy as np

from .measures import AtomicMeasure
from .random_model import OmegaPrefix, extend_prefix


def ft_atomic(m: AtomicMeasure, xi) -> complex | np.ndarray:
    """sum_k w_k exp(-2 pi i x_k xi); vectorised over xi."""
    x = np.asarray(xi, dtype=float)
    vals = np.exp(-2j * np.pi * np.multiply.outer(x, m.positions)) @ m.weights
    return complex(vals) if np.isscalar(xi) or x.ndim == 0 else vals


@dataclass(frozen=True)
class FourierSample:
    xi: float
    value: complex
    tail_error: float
    depth: int


def _certified_depth(lam_sup: float, t_sup: float, xi: float, tail_tol: float) -> int:
    """Smallest D with 2 pi t_sup |xi| lam_sup^D / (1 - lam_sup) <= tail_tol."""
    full = 2.0 * math.pi * t_sup * abs(xi) / (1.0 - lam_sup)
    if full <= tail_tol or xi == 0.0:
        return 0
    return max(0, math.ceil(math.log(tail_tol / full) / math.log(lam_sup)))


def _tail_bound(lam_sup: float, t_sup: float, xi: float, depth: int) -> float:
    return 2.0 * math.pi * t_sup * abs(xi) * lam_sup ** depth / (1.0 - lam_sup)


def ft_product(sys, omega: OmegaPrefix, u: float | None, xi: float,
               tail_tol: float | None = None, factor_filter=None) -> FourierSample:
    """Product-formula transform of the random measure at frequency xi.

    With tail_tol set, the product is cut at the certified depth; a prefix
    shorter than that is extended along its own seed stream.  tail_tol=None
    evaluates exactly the given factors (the transform of the truncated
    measure), reporting tail_error 0.

    factor_filter(n) keeps only selected factor indices (e.g. the small or
    big part of a split); dropped factors are 1-bounded, so the same tail
    bound still certifies the truncation.
    """
    lam_sup = sys.lam_sup()
    t_sup = sys.t_sup(u)
    if tail_tol is None:
        depth = len(omega)
        tail_error = 0.0
    else:
        if tail_tol <= 0:
            raise ValueError("tail_tol must be positive (or None to disable)")
        depth = _certified_depth(lam_sup, t_sup, xi, tail_tol)
        tail_error = _tail_bound(lam_sup, t_sup, xi, depth)
        if depth > len(omega):
            omega = extend_prefix(omega, sys, depth)
    value = 1.0 + 0.0j
    prefix = 1.0
    for n, key in enumerate(omega.blocks[:depth], start=1):
        if factor_filter is None or factor_filter(n):
            value *= ft_atomic(sys.eta(key, u), prefix * xi)
        prefix *= sys.lam(key)
    return FourierSample(float(xi), complex(value), tail_error, depth)


def dist_to_int(x) -> float | np.ndarray:
    """||x||: distance from x to the nearest integer, in [0, 1/2]."""
    v = np.abs(np.asarray(x, dtype=float) - np.round(np.asarray(x, dtype=float)))
    return float(v) if np.isscalar(x) else v


def zeta(lam_prefix: float, f1: float, f2: float, xi: float) -> float:
    """|1 + exp(-2 pi i lam f1 xi) + exp(-2 pi i lam f2 xi)|, in [0, 3]."""
    a = np.exp(-2j * np.pi * lam_prefix * f1 * xi)
    b = np.exp(-2j * np.pi * lam_prefix * f2 * xi)
    return float(abs(1.0 + a + b))


def zeta_product_bound(sys, omega: OmegaPrefix, u: float | None, xi: float,
                       tau0, triple=(0, 1, 2)) -> float:
    """Product over factors of the marked type of [zeta/m + (1 - 3/m)].

    Needs the type's explicit translation list (with repetitions), so the
    system must expose positions(key); the triple indexes that list.  The
    truncated transform modulus is bounded by this product.
    """
    i1, i2, i3 = triple
    ts = sys.positions(tau0)
    if len(ts) < 3:
        raise ValueError(f"type {tau0!r} has fewer than 3 translations")
    f1 = float(ts[i2] - ts[i1])
    f2 = float(ts[i3] - ts[i1])
    bound = 1.0
    prefix = 1.0
    for key in omega.blocks:
        if key == tau0:
            m = sys.mult(tau0)
            bound *= zeta(prefix, f1, f2, xi) / m + (1.0 - 3.0 / m)
        prefix *= sys.lam(key)
    return bound


# Spec'd per-variable bound on the modulus derivative used for the
# certified slack; the true Lipschitz constant is 2 pi, this is safe.
_ALPHA_LIPSCHITZ = 4.0 * math.pi


def alpha_of_rho(rho: float, grid: int = 1 << 20) -> float:
    """Certified alpha with: max(||x||, ||y||) >= rho implies
    |1 + e(-2 pi i x) + e(-2 pi i y)| <= 3 - alpha.

    The supremum over the free phase is exact (|A + e(it)| attains |A| + 1),
    which reduces the constrained set to ||x|| in [rho, 1/2]; that segment
    is scanned on a grid with a Lipschitz slack of half a step times the
    derivative bound.  Raises if the certified value is not positive at the
    requested resolution.
    """
    if not 0.0 < rho <= 0.5:
        raise ValueError("rho must lie in (0, 1/2]")
    if grid < 1:
        raise ValueError("grid must be >= 1")
    xs = np.linspace(rho, 0.5, grid + 1)
    step = (0.5 - rho) / grid if grid else 0.0
    profile = 1.0 + np.abs(1.0 + np.exp(-2j * np.pi * xs))
    sup = float(profile.max()) + _ALPHA_LIPSCHITZ * step / 2.0
    alpha = 3.0 - sup
    if alpha <= 0.0:
        raise ValueError(
            f"certified alpha({rho}) = {alpha:.3e} not positive; refine the "
            f"grid (got {grid} cells)")
    return alpha


@dataclass(frozen=True)
class DecayEstimate:
    """|transform| <= C |xi|^(-exponent/2) over the sampled range."""

    exponent: float
    C: float
    xi_range: tuple[float, float]
    n_samples: int


def decay_exponent(samples) -> DecayEstimate:
    """Sup-envelope regression of the decay rate over dyadic frequency bins.

    Pointwise fits are corrupted by the zeros of the transform, so each
    dyadic bin in |xi| contributes its envelope max(|value| + tail_error),
    and the slope of log envelope against log |xi| gives the exponent
    (clamped at 0).  Needs at least 20 samples spanning 3 decades.
    """
    samples = list(samples)
    if len(samples) < 20:
        raise ValueError(f"need >= 20 samples, got {len(samples)}")
    xi = np.array([abs(s.xi) for s in samples])
    if np.any(xi == 0.0):
        raise ValueError("samples must have nonzero frequency")
    mag = np.array([abs(s.value) + s.tail_error for s in samples])
    if xi.max() / xi.min() < 999.99:
        raise ValueError(
            f"insufficient range: |xi| spans {xi.max() / xi.min():.3g}x, "
            "need 3 decades")
    bins = np.floor(np.log2(xi)).astype(int)
    xs, ys = [], []
    for b in np.unique(bins):
        sel = bins == b
        xs.append((b + 0.5) * math.log(2.0))
        ys.append(math.log(float(mag[sel].max())))
    if len(xs) < 3:
        raise ValueError("need at least 3 occupied dyadic bins")
    slope = float(np.polyfit(xs, ys, 1)[0])
    exponent = max(0.0, -2.0 * slope)
    C = float(np.max(mag * xi ** (exponent / 2.0)))
    return DecayEstimate(exponent, C, (float(xi.min()), float(xi.max())),
                         len(samples))
