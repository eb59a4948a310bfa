"""Certification of order-K transversality and related diagnostics.

A family is order-K transversal at word length n with constant c if
max_{k<=K} |d^k/du^k Delta_{i,j}(u)| >= c^n for every u in the interval and
every distinct pair of length-n words.  We certify this on a grid: the
margin observed on the grid must beat the movement a function can make
between grid points, bounded through order-(K+1) jets.  "inconclusive" is
an honest third verdict when the margin is positive but the slack eats it.

Also here: the certified projection transversality constant, the gap-decay
diagnostic for hypothesis (P1), witness search for hypothesis (A2), the
non-constancy test for translation ratios, and sublevel covering counts
with the box-dimension estimator they feed.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CapExceededError
from .ifs_core import IFS, all_points, delta_n
from .param_family import ParamIFS, evaluate

DEFAULT_PAIR_CAP = 2048  # max m^n words in a certification run


def _word_coefficients(lambdas, n: int):
    """Rows A[w] with psi_w(0) = A[w] . t: coefficient of t_j is the sum of
    lambda-prefix products over positions of j in w.  Lexicographic order."""
    m = len(lambdas)
    words = list(itertools.product(range(1, m + 1), repeat=n))
    A = np.zeros((len(words), m))
    for r, w in enumerate(words):
        prefix = 1.0
        for s in w:
            A[r, s - 1] += prefix
            prefix *= lambdas[s - 1]
    return words, A


@dataclass(frozen=True)
class TransversalityCertificate:
    n: int
    K: int
    c: float
    verdict: str  # "certified" | "violated" | "inconclusive"
    margin: float
    grid_step: float
    lipschitz_slack: float
    domain: tuple[float, float]
    worst_u: float
    worst_pair: tuple[tuple[int, ...], tuple[int, ...]]
    n_pairs: int
    grid_points: int

    @property
    def valid(self) -> bool:
        return self.margin > self.lipschitz_slack * self.grid_step / 2.0


def check_order_K(fam: ParamIFS, n: int, K: int, c: float,
                  grid_step: float, cap: int = DEFAULT_PAIR_CAP) -> TransversalityCertificate:
    """Grid certification of order-K transversality at word length n.

    Evaluates the derivative jets of every pairwise difference on a uniform
    grid over the family's domain.  Verdicts:

      certified     min over grid of max_{k<=K} |Delta^(k)| - c^n  exceeds
                    the Lipschitz slack (max |Delta^(k+1)| on the grid)
                    times half a grid step;
      violated      some grid point already fails the bound;
      inconclusive  margin positive but within the slack: refine the grid.
    """
    if fam.dim != 1:
        raise ValueError("transversality checks run on 1D families")
    if c <= 0:
        raise ValueError("c must be positive")
    P = fam.m ** n
    if P > cap:
        raise CapExceededError(f"m^n = {P} words exceeds cap {cap}",
                               needed=P, cap=cap)
    a, b = fam.domain
    npts = max(2, math.ceil((b - a) / grid_step) + 1)
    us = np.linspace(a, b, npts)
    step = (b - a) / (npts - 1)
    words, A = _word_coefficients(fam.lambdas, n)
    # plain derivatives 0..K+1 of each translation at each grid point
    T = np.empty((npts, fam.m, K + 2))
    for g, u in enumerate(us):
        for j, jet in enumerate(fam.translation_jets(u, K + 1)):
            T[g, j] = jet.coeffs
    W = np.einsum("pj,gjk->gpk", A, T)  # word jets per grid point
    threshold = c ** n
    margin = np.inf
    slack = 0.0
    worst = (us[0], 0, min(1, P - 1))
    for i in range(P - 1):
        D = W[:, i + 1:, :] - W[:, i:i + 1, :]  # (npts, P-i-1, K+2)
        g_metric = np.max(np.abs(D[:, :, : K + 1]), axis=2)
        slack = max(slack, float(np.max(np.abs(D[:, :, 1: K + 2]))))
        flat = int(np.argmin(g_metric))
        gi, pj = divmod(flat, P - i - 1)
        val = float(g_metric[gi, pj])
        if val - threshold < margin:
            margin = val - threshold
            worst = (float(us[gi]), i, i + 1 + pj)
    if margin < 0.0:
        verdict = "violated"
    elif margin > slack * step / 2.0:
        verdict = "certified"
    else:
        verdict = "inconclusive"
    return TransversalityCertificate(
        n=n, K=K, c=c, verdict=verdict, margin=float(margin), grid_step=step,
        lipschitz_slack=slack, domain=fam.domain, worst_u=worst[0],
        worst_pair=(tuple(words[worst[1]]), tuple(words[worst[2]])),
        n_pairs=P * (P - 1) // 2, grid_points=npts)


def projection_transversality_constant(grid: int = 1 << 21) -> float:
    """Certified lower bound for inf over directions and unit vectors of
    max(|projection|, |its u-derivative|).

    For a unit vector at angle phi, the projection onto direction u and its
    derivative are cos(u - phi) and -sin(u - phi), whose squares sum to 1;
    the infimum of the max is 1/sqrt(2).  The reduction to the single angle
    difference is exact, so a 1-Lipschitz grid scan over a quarter period
    certifies the bound.
    """
    theta = np.linspace(0.0, math.pi / 2.0, grid + 1)
    h = (math.pi / 2.0) / grid
    vals = np.maximum(np.abs(np.cos(theta)), np.abs(np.sin(theta)))
    return float(vals.min()) - h / 2.0


@dataclass(frozen=True)
class P1Report:
    """Gap-decay table: rows (n, Delta_n, log Delta_n / n)."""

    rows: list
    overlap_at: list
    log_c: float | None
    flag: str | None


def p1_estimate(ifs: IFS, n_max: int, cap: int = 10_000_000) -> P1Report:
    """Delta_n and its decay rate for n = 1..n_max.

    Any exact overlap (Delta_n = 0) is flagged: the limsup hypothesis is
    then undecidable-positive and singular behaviour is likely.  log_c is
    the best observed rate, max_n log Delta_n / n.
    """
    rows = []
    overlap = []
    rates = []
    for n in range(1, n_max + 1):
        d = delta_n(ifs, n, cap=cap)
        if d == 0.0:
            overlap.append(n)
            rows.append((n, 0.0, None))
        else:
            rate = math.log(d) / n
            rates.append(rate)
            rows.append((n, d, rate))
    flag = None
    if overlap:
        flag = (f"exact overlap at n={overlap[0]}: (P1) undecidable-positive "
                "but singular behaviour likely")
    return P1Report(rows=rows, overlap_at=overlap,
                    log_c=max(rates) if rates else None, flag=flag)


def _word_of_index(idx: int, m: int, n: int) -> tuple:
    digits = []
    for _ in range(n):
        digits.append(idx % m + 1)
        idx //= m
    return tuple(reversed(digits))


@dataclass(frozen=True)
class A2Witness:
    words: tuple
    points: np.ndarray = field(compare=False)
    area: float


def a2_witness(planar: IFS, depth: int, cap: int = 1_000_000) -> A2Witness | None:
    """Three depth-M composition points spanning a maximal-area triangle.

    Returns None when every composition point at this depth is collinear.
    The point order inside all_points is lexicographic in the word, so the
    witness indices convert straight back to words.
    """
    if planar.dim != 2:
        raise ValueError("a2 witness needs a planar system")
    pts = all_points(planar, depth, cap=cap)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    diam = float(np.hypot(*(hi - lo)))
    if diam == 0.0:
        return None
    centered = pts - pts.mean(axis=0)
    _, sv, _ = np.linalg.svd(centered, full_matrices=False)
    if sv[-1] <= 1e-12 * max(sv[0], 1.0):
        return None  # numerically collinear cloud
    from scipy.spatial import ConvexHull

    hull = ConvexHull(pts)
    verts = hull.vertices
    best_area = -1.0
    best = None
    for aa, bb, cc in itertools.combinations(range(len(verts)), 3):
        pa, pb, pc = pts[verts[aa]], pts[verts[bb]], pts[verts[cc]]
        area = 0.5 * abs((pb - pa)[0] * (pc - pa)[1] - (pb - pa)[1] * (pc - pa)[0])
        if area > best_area:
            best_area = area
            best = (verts[aa], verts[bb], verts[cc])
    if best is None or best_area <= 1e-10 * diam ** 2:
        return None
    words = tuple(sorted(_word_of_index(int(i), planar.m, depth) for i in best))
    chosen = np.array([pts[i] for i in best])
    return A2Witness(words=words, points=chosen, area=float(best_area))


def ratio_nonconstancy(fam: ParamIFS, i, j, k, u1: float, u2: float,
                       rel_tol: float = 1e-9) -> bool:
    """Is u -> (psi_{u,j}(0) - psi_{u,i}(0)) / (psi_{u,k}(0) - psi_{u,i}(0))
    visibly non-constant between the two sample points?

    Raises when a denominator vanishes at a sample point: pick other points
    (analytic denominators have a discrete zero set).
    """
    def zeta_at(u):
        frozen = fam.freeze(u)
        from .ifs_core import compose_at_zero

        pi_ = compose_at_zero(frozen, tuple(i))
        pj = compose_at_zero(frozen, tuple(j))
        pk = compose_at_zero(frozen, tuple(k))
        den = pk - pi_
        scale = max(abs(pi_), abs(pj), abs(pk), 1.0)
        if abs(den) <= 1e-13 * scale:
            raise ZeroDivisionError(
                f"denominator vanishes at u={u}; choose other sample points")
        return (pj - pi_) / den

    z1, z2 = zeta_at(u1), zeta_at(u2)
    return abs(z1 - z2) > rel_tol * (1.0 + abs(z1))


def sublevel_cover_count(fam: ParamIFS, i, j, threshold: float, r: float) -> int:
    """Number of length-r intervals covering {u : |Delta_{i,j}(u)| < threshold}.

    Scans strictly inside the open parameter interval at step r/4 (a
    documented heuristic: crossings between samples can be missed), then
    covers the flagged points greedily from the left, which is optimal for
    points on a line.
    """
    if r <= 0 or threshold <= 0:
        raise ValueError("r and threshold must be positive")
    a, b = fam.domain
    step = r / 4.0
    flagged = []
    u = a + step
    while u < b:
        frozen = fam.freeze(u)
        from .ifs_core import pairwise_delta

        if abs(pairwise_delta(frozen, tuple(i), tuple(j))) < threshold:
            flagged.append(u)
        u += step
    count = 0
    covered_to = -math.inf
    for u in flagged:
        if u > covered_to:
            count += 1
            covered_to = u + r
    return count


def box_dim_estimate(cover_counts) -> float:
    """Least-squares slope of log N(r) against -log r.

    Needs at least three scales spanning two decades.
    """
    pairs = [(float(r), int(nn)) for r, nn in cover_counts if nn >= 1]
    if len(pairs) < 3:
        raise ValueError("need at least 3 scales with nonzero counts")
    rs = np.array([p[0] for p in pairs])
    ns = np.array([p[1] for p in pairs])
    if rs.max() / rs.min() < 99.999:
        raise ValueError(
            f"insufficient scale range {rs.max() / rs.min():.3g}x, need 2 decades")
    slope = np.polyfit(-np.log(rs), np.log(ns), 1)[0]
    return float(slope)
