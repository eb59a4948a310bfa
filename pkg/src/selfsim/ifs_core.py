"""Deterministic IFS geometry.

Similitudes x -> lambda*x + t on the line or the plane (homotheties only, no
rotation parts), words over the map indices, composition points psi_w(0),
minimal gap statistics Delta_n, and the collinearity test for fixed points.

Words use 1-based symbols (1..m) throughout.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import CapExceededError

# Words with m^n points beyond this are refused rather than truncated.
DEFAULT_POINT_CAP = 10_000_000

# Two points closer than this (relative to the cloud diameter) count as an
# exact overlap; exact coincidence is a different regime than a small gap.
OVERLAP_REL_TOL = 1e-13

COLLINEAR_REL_TOL = 1e-10

Word = tuple[int, ...]


@dataclass(frozen=True)
class Similitude:
    """Contraction x -> ratio*x + translation; translation is a float (1D)
    or a pair (2D)."""

    ratio: float
    translation: float | tuple[float, float]

    def __post_init__(self):
        if not (0.0 < self.ratio < 1.0):
            raise ValueError(f"contraction ratio must be in (0,1), got {self.ratio}")
        t = np.asarray(self.translation, dtype=float)
        if not np.all(np.isfinite(t)):
            raise ValueError("translation must be finite")
        if t.ndim not in (0, 1) or (t.ndim == 1 and t.shape != (2,)):
            raise ValueError("translation must be a scalar or a pair")

    @property
    def dim(self) -> int:
        return 1 if np.isscalar(self.translation) or np.ndim(self.translation) == 0 else 2

    def fixed_point(self):
        t = np.asarray(self.translation, dtype=float)
        return t / (1.0 - self.ratio)

    def __call__(self, x):
        return self.ratio * np.asarray(x, dtype=float) + np.asarray(self.translation, dtype=float)


class IFS:
    """A list of similitudes with a strictly positive probability vector."""

    def __init__(self, maps, weights=None):
        maps = list(maps)
        if not maps:
            raise ValueError("IFS needs at least one map")
        dims = {s.dim for s in maps}
        if len(dims) != 1:
            raise ValueError("all maps must share the ambient dimension")
        self.maps = maps
        self.dim = dims.pop()
        if weights is None:
            weights = [1.0 / len(maps)] * len(maps)
        w = np.asarray(weights, dtype=float)
        if len(w) != len(maps):
            raise ValueError(f"{len(w)} weights for {len(maps)} maps")
        if np.any(w <= 0):
            raise ValueError("weights must be strictly positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {w.sum()!r}, not 1")
        self.weights = w

    @property
    def m(self) -> int:
        return len(self.maps)

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([s.ratio for s in self.maps])

    @property
    def translations(self) -> np.ndarray:
        """(m,) for 1D systems, (m,2) for planar ones."""
        return np.array([s.translation for s in self.maps], dtype=float)

    def similarity_dimension(self) -> float:
        if self.m < 2:
            raise ValueError("similarity dimension needs at least two maps")
        return similarity_dimension(self.lambdas, self.weights)

    def point_bound(self) -> float:
        """Geometric bound: every composition point satisfies |x| <= t_max/(1-l_max)."""
        t_max = float(np.max(np.abs(self.translations)))
        l_max = float(np.max(self.lambdas))
        return t_max / (1.0 - l_max)


def similarity_dimension(lambdas, p) -> float:
    """sum(p_j log p_j) / sum(p_j log lambda_j)."""
    lam = np.asarray(lambdas, dtype=float)
    p = np.asarray(p, dtype=float)
    if lam.shape != p.shape:
        raise ValueError(f"length mismatch: {lam.shape} ratios vs {p.shape} weights")
    if np.any(lam <= 0) or np.any(lam >= 1):
        raise ValueError("ratios must lie in (0,1)")
    if np.any(p <= 0) or abs(p.sum() - 1.0) > 1e-12:
        raise ValueError("p must be a strictly positive probability vector")
    return float((p @ np.log(p)) / (p @ np.log(lam)))


def _check_word(ifs: IFS, w: Word):
    for s in w:
        if not 1 <= s <= ifs.m:
            raise ValueError(f"symbol {s} out of range 1..{ifs.m}")


def compose_at_zero(ifs: IFS, w: Word):
    """psi_{w_1} o ... o psi_{w_n}(0) = sum_l (prod_{j<l} lambda_{w_j}) t_{w_l}.

    The empty word gives 0.  Returns a float (1D) or a length-2 array (2D).
    """
    _check_word(ifs, w)
    acc = 0.0 if ifs.dim == 1 else np.zeros(2)
    prefix = 1.0
    for s in w:
        sim = ifs.maps[s - 1]
        acc = acc + prefix * np.asarray(sim.translation, dtype=float)
        prefix *= sim.ratio
    return float(acc) if ifs.dim == 1 else acc


def pairwise_delta(ifs: IFS, i: Word, j: Word):
    """Delta_{i,j} = psi_i(0) - psi_j(0) for equal-length words."""
    if len(i) != len(j):
        raise ValueError(f"word lengths differ: {len(i)} vs {len(j)}")
    return compose_at_zero(ifs, i) - compose_at_zero(ifs, j)


def all_points(ifs: IFS, n: int, cap: int = DEFAULT_POINT_CAP) -> np.ndarray:
    """Composition points of every length-n word, in lexicographic word order.

    Shape (m^n,) in 1D and (m^n, 2) in 2D.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    total = ifs.m ** n
    if total > cap:
        raise CapExceededError(f"m^n = {total} points exceeds cap {cap}",
                               needed=total, cap=cap)
    if ifs.dim == 1:
        pts = np.zeros(1)
        for _ in range(n):
            # word (j, rest): t_j + lambda_j * psi_rest(0)
            pts = np.concatenate([s.translation + s.ratio * pts for s in ifs.maps])
    else:
        pts = np.zeros((1, 2))
        for _ in range(n):
            pts = np.concatenate(
                [np.asarray(s.translation, dtype=float) + s.ratio * pts for s in ifs.maps])
    return pts


def delta_n(ifs: IFS, n: int, cap: int = DEFAULT_POINT_CAP,
            overlap_tol: float | None = None) -> float:
    """Minimal gap between distinct level-n composition points.

    Returns exactly 0.0 when two distinct words collide, i.e. when the gap is
    below the coincidence tolerance (default OVERLAP_REL_TOL * diameter).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    pts = all_points(ifs, n, cap=cap)
    if ifs.dim == 1:
        pts = np.sort(pts)
        gap = float(np.min(np.diff(pts)))
        diam = float(pts[-1] - pts[0])
    else:
        from scipy.spatial import cKDTree

        tree = cKDTree(pts)
        d, _ = tree.query(pts, k=2)
        gap = float(np.min(d[:, 1]))
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        diam = float(np.hypot(*(hi - lo)))
    tol = OVERLAP_REL_TOL * diam if overlap_tol is None else overlap_tol
    return 0.0 if gap <= tol else gap


def delta_n_bruteforce(ifs: IFS, n: int) -> float:
    """O(m^2n) all-pairs reference for delta_n; only for small n."""
    pts = [compose_at_zero(ifs, w)
           for w in itertools.product(range(1, ifs.m + 1), repeat=n)]
    best = np.inf
    for a in range(len(pts)):
        for b in range(a + 1, len(pts)):
            d = abs(pts[a] - pts[b]) if ifs.dim == 1 else float(np.hypot(*(pts[a] - pts[b])))
            best = min(best, d)
    return float(best)


@dataclass(frozen=True)
class CollinearityResult:
    collinear: bool
    degenerate: bool
    witness: tuple[int, int, int] | None  # 1-based map indices, None if collinear
    max_line_distance: float
    diameter: float


def fixed_points_collinear(ifs: IFS, tol: float = COLLINEAR_REL_TOL) -> CollinearityResult:
    """Do the fixed points t_j/(1-lambda_j) lie on one line?

    Uses a total-least-squares line fit; points within tol * diameter of the
    fitted line count as collinear.  Systems with fewer than three maps are
    reported collinear with the degenerate flag set.  A non-collinear verdict
    carries a witness triple of maximal triangle area.
    """
    if ifs.dim != 2:
        raise ValueError("collinearity test applies to planar systems")
    fixed = np.array([s.fixed_point() for s in ifs.maps])
    lo, hi = fixed.min(axis=0), fixed.max(axis=0)
    diam = float(np.hypot(*(hi - lo)))
    if ifs.m < 3 or diam == 0.0:
        return CollinearityResult(True, True, None, 0.0, diam)
    centered = fixed - fixed.mean(axis=0)
    # smallest singular direction = line normal; residuals along it
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    resid = np.abs(centered @ vt[-1])
    max_dist = float(resid.max())
    if max_dist <= tol * diam:
        return CollinearityResult(True, False, None, max_dist, diam)
    best, best_area = None, -1.0
    for a, b, c in itertools.combinations(range(ifs.m), 3):
        u, v = fixed[b] - fixed[a], fixed[c] - fixed[a]
        area = 0.5 * abs(u[0] * v[1] - u[1] * v[0])
        if area > best_area:
            best, best_area = (a + 1, b + 1, c + 1), area
    return CollinearityResult(False, False, best, max_dist, diam)
