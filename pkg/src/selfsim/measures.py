"""Finitely supported measures on the real line.

Every concrete measure in this package (level-n approximations, per-type
atomic measures, truncated infinite convolutions and their small/big split)
is represented as a weighted point-mass list.  Positions are doubles; atoms
closer than the coalescing tolerance are merged with summed weight, never
dropped, so multisets of coincident compositions keep their full mass.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import CapExceededError

# Relative coalescing tolerance (times the support diameter).
COALESCE_REL_TOL = 1e-12

# Default cap on atom counts produced by convolutions / enumerations.
DEFAULT_ATOM_CAP = 1_000_000


def _coalesce(positions: np.ndarray, weights: np.ndarray, tol: float):
    """Merge runs of atoms whose consecutive gaps are <= tol.

    Positions must be sorted.  Merged position is the weight-average of the
    run; merged weight is the sum (mass is conserved exactly up to rounding).
    """
    if len(positions) == 0:
        return positions, weights
    gaps = np.diff(positions)
    # start of a new group wherever the gap to the previous atom exceeds tol
    new_group = np.concatenate(([True], gaps > tol))
    group_id = np.cumsum(new_group) - 1
    n_groups = group_id[-1] + 1
    w = np.zeros(n_groups)
    np.add.at(w, group_id, weights)
    pw = np.zeros(n_groups)
    np.add.at(pw, group_id, positions * weights)
    return pw / w, w


@dataclass(frozen=True)
class AtomicMeasure:
    """Sorted, coalesced list of (position, weight) atoms with total mass ~1."""

    positions: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    coalesce_tol: float = 0.0

    def __post_init__(self):
        self.positions.flags.writeable = False
        self.weights.flags.writeable = False

    @property
    def n_atoms(self) -> int:
        return len(self.positions)

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    def mean(self) -> float:
        return float(self.positions @ self.weights)

    def support_bounds(self) -> tuple[float, float]:
        return float(self.positions[0]), float(self.positions[-1])

    def diameter(self) -> float:
        return float(self.positions[-1] - self.positions[0])

    def cdf(self, x: np.ndarray) -> np.ndarray:
        """P(X <= x), vectorised over x."""
        cum = np.cumsum(self.weights)
        idx = np.searchsorted(self.positions, np.asarray(x, dtype=float), side="right")
        out = np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)
        return out

    def __eq__(self, other):
        if not isinstance(other, AtomicMeasure):
            return NotImplemented
        return (
            np.array_equal(self.positions, other.positions)
            and np.array_equal(self.weights, other.weights)
        )


def atomic(positions, weights=None, coalesce_tol: float | None = None) -> AtomicMeasure:
    """Build an AtomicMeasure: sort, coalesce, validate.

    coalesce_tol=None uses COALESCE_REL_TOL times the support diameter.
    Weights default to uniform.
    """
    pos = np.asarray(positions, dtype=float).ravel()
    if weights is None:
        w = np.full(len(pos), 1.0 / len(pos))
    else:
        w = np.asarray(weights, dtype=float).ravel()
    if len(pos) != len(w):
        raise ValueError(f"{len(pos)} positions vs {len(w)} weights")
    if len(pos) == 0:
        raise ValueError("measure needs at least one atom")
    if not np.all(np.isfinite(pos)):
        raise ValueError("non-finite atom position")
    if np.any(w <= 0):
        raise ValueError("weights must be strictly positive")
    order = np.argsort(pos, kind="stable")
    pos, w = pos[order], w[order]
    diam = float(pos[-1] - pos[0])
    tol = COALESCE_REL_TOL * diam if coalesce_tol is None else coalesce_tol
    pos, w = _coalesce(pos, w, tol)
    total = w.sum()
    if abs(total - 1.0) > 1e-10:
        raise ValueError(f"total mass {total!r} differs from 1 beyond 1e-10")
    return AtomicMeasure(pos, w, tol)


def dirac(x: float = 0.0) -> AtomicMeasure:
    return atomic([x], [1.0])


def convolve_atomic(a: AtomicMeasure, b: AtomicMeasure,
                    cap: int = DEFAULT_ATOM_CAP) -> AtomicMeasure:
    """Convolution of atomic measures: all pairwise sums, weights multiplied."""
    n = a.n_atoms * b.n_atoms
    if n > cap:
        raise CapExceededError(
            f"convolution would create {n} atoms, cap {cap}",
            needed=n, cap=cap, suggestion="sample_points")
    pos = (a.positions[:, None] + b.positions[None, :]).ravel()
    w = (a.weights[:, None] * b.weights[None, :]).ravel()
    return atomic(pos, w)


def scale_push(a: AtomicMeasure, r: float) -> AtomicMeasure:
    """Push-forward under the dilation x -> r*x, r > 0."""
    if not r > 0:
        raise ValueError(f"dilation factor must be positive, got {r}")
    return atomic(a.positions * r, a.weights)


def mixture(terms) -> AtomicMeasure:
    """Weighted mixture sum(c_i * mu_i); the c_i must sum to 1."""
    pos = np.concatenate([m.positions for _, m in terms])
    w = np.concatenate([c * m.weights for c, m in terms])
    return atomic(pos, w)


@dataclass(frozen=True)
class MatchReport:
    """Result of transport-free atom matching between two measures."""

    matched: bool
    max_weight_diff: float
    max_position_diff: float
    message: str = ""


def compare_atomic(a: AtomicMeasure, b: AtomicMeasure,
                   pos_tol: float | None = None) -> MatchReport:
    """Compare two atomic measures atom-for-atom.

    Both sides are re-coalesced at a common tolerance, then aligned by sorted
    position.  Mismatched supports (different atom counts, or positions apart
    by more than the tolerance) fail immediately with a diff message.
    """
    diam = max(a.diameter(), b.diameter(), 1e-300)
    tol = pos_tol if pos_tol is not None else 10 * COALESCE_REL_TOL * diam
    pa, wa = _coalesce(a.positions, a.weights, tol)
    pb, wb = _coalesce(b.positions, b.weights, tol)
    if len(pa) != len(pb):
        return MatchReport(False, np.inf, np.inf,
                           f"atom counts differ: {len(pa)} vs {len(pb)}")
    dpos = float(np.max(np.abs(pa - pb))) if len(pa) else 0.0
    if dpos > tol:
        k = int(np.argmax(np.abs(pa - pb)))
        return MatchReport(False, np.inf, dpos,
                           f"supports differ at atom {k}: {pa[k]!r} vs {pb[k]!r}")
    dw = float(np.max(np.abs(wa - wb))) if len(pa) else 0.0
    return MatchReport(True, dw, dpos)
