"""Digit-counting machinery for resonant frequency ratios.

A type sequence splits into blocks each ending at a marked type tau0.  The
reciprocal contractions Theta_m of the last m blocks blow up geometrically,
and for frequencies z*nu the integer parts K_m of Theta_m*z*nu obey a
recursion whose residual is controlled by the fractional parts: when all
nearby fractional parts are small, the next digit is forced.  Counting how
many digit sequences survive bounds how many "resonant" ratios z1/z2 can
exist, and a brute-force grid scan of the defining condition provides the
independent cross-check at desk scale.

Unspecified absolute constants (the residual constant C, the initial-count
prefactor, the envelope constant H) are configuration with defaults,
reported as fitted values, never asserted.
"""

import math
from dataclasses import dataclass

import numpy as np

from .fourier import dist_to_int
from .random_model import OmegaPrefix

DEFAULT_C = 2.0
MAX_EXACT_DIGITS = 2.0 ** 53


@dataclass(frozen=True)
class BlockDecomposition:
    """Blocks W_1..W_{M+1}, each ending with the marked type; their
    concatenation reproduces the prefix of omega up to its last mark."""

    tau0: object
    words: tuple  # tuple of tuples of type keys

    @property
    def n_blocks(self) -> int:
        return len(self.words)

    @property
    def M(self) -> int:
        """Number of usable Theta indices: blocks minus the final nu-range block."""
        return len(self.words) - 1

    def concatenation(self) -> tuple:
        out = []
        for w in self.words:
            out.extend(w)
        return tuple(out)


def split_words(omega: OmegaPrefix, tau0) -> BlockDecomposition:
    """Greedy split of omega at every occurrence of tau0.

    Each block is a maximal run of non-marked types followed by one mark;
    trailing unmarked types after the last mark are not part of any block.
    """
    words = []
    cur = []
    for key in omega.blocks:
        cur.append(key)
        if key == tau0:
            words.append(tuple(cur))
            cur = []
    if not words:
        raise ValueError(f"omega contains no occurrence of the marked type {tau0!r}")
    return BlockDecomposition(tau0=tau0, words=tuple(words))


@dataclass(frozen=True)
class ThetaData:
    """Per-type reciprocal contractions and the block products Theta_m.

    theta(tau) = 1/lambda(tau); beta(tau) = log theta(tau)/log theta(tau0).
    Theta_m multiplies theta(tau0) onto the last m blocks, so the sequence
    is nondecreasing in m.  When the linear values overflow doubles, Theta
    is None and only log_Theta is usable (the overflowed flag is set).
    """

    theta: dict
    beta: dict
    theta0: float
    log_Theta: np.ndarray
    Theta: np.ndarray | None
    theta_min: float
    theta_max: float
    beta_max: float
    overflowed: bool

    @property
    def M(self) -> int:
        return len(self.log_Theta)

    @property
    def k_exponent(self) -> int:
        """Smallest integer k with e^(1/k) <= theta_min."""
        return max(1, math.ceil(1.0 / math.log(self.theta_min)))


def theta_sequence(blocks: BlockDecomposition, M: int, sys) -> ThetaData:
    """Theta_m = theta(tau0) * theta(W_{M-m+1} ... W_M), m = 1..M, computed
    in log space; monotonicity is asserted."""
    if M > blocks.M:
        raise ValueError(f"M={M} exceeds available blocks-1 = {blocks.M}")
    if M < 1:
        raise ValueError("M must be >= 1")
    keys = set()
    for w in blocks.words:
        keys.update(w)
    theta = {key: 1.0 / sys.lam(key) for key in sys.types}
    theta0 = theta[blocks.tau0]
    if theta0 <= 1.0:
        raise ValueError("theta(tau0) must exceed 1")
    log_theta0 = math.log(theta0)
    beta = {key: math.log(th) / log_theta0 for key, th in theta.items()}
    log_words = [math.fsum(math.log(theta[key]) for key in w) for w in blocks.words]
    log_Theta = np.empty(M)
    acc = log_theta0
    for m in range(1, M + 1):
        acc += log_words[M - m]  # word W_{M-m+1}
        log_Theta[m - 1] = acc
    if np.any(np.diff(log_Theta) < 0):
        raise AssertionError("Theta sequence is not nondecreasing")
    overflowed = bool(log_Theta[-1] > 700.0)
    Theta = None if overflowed else np.exp(log_Theta)
    th_vals = [theta[key] for key in sys.types]
    return ThetaData(theta=theta, beta=beta, theta0=theta0,
                     log_Theta=log_Theta, Theta=Theta,
                     theta_min=min(th_vals), theta_max=max(th_vals),
                     beta_max=max(beta[key] for key in sys.types),
                     overflowed=overflowed)


@dataclass(frozen=True)
class DigitSequence:
    """K_m + eps_m = Theta_m * z * nu with integer K_m, eps_m in [-1/2, 1/2)."""

    K: np.ndarray
    eps: np.ndarray


def digits(z: float, nu: float, theta) -> DigitSequence:
    """Nearest-integer digits of Theta_m * z * nu; exact reconstruction.

    theta may be a ThetaData or any nondecreasing positive sequence.
    Refuses magnitudes past 2^53 where integer recovery in doubles breaks:
    the counting argument is meaningless without exact digits.
    """
    if isinstance(theta, ThetaData):
        if theta.overflowed or theta.Theta is None:
            raise OverflowError("Theta overflows doubles; digits are not exact")
        Theta = theta.Theta
    else:
        Theta = np.asarray(theta, dtype=float)
    x = Theta * z * nu
    if np.max(np.abs(x)) >= MAX_EXACT_DIGITS:
        raise OverflowError(
            f"|Theta_M z nu| = {np.max(np.abs(x)):.3e} >= 2^53; digits would "
            "lose integrality")
    K = np.floor(x + 0.5)
    return DigitSequence(K=K.astype(np.int64), eps=x - K)


def predicted_next(K_m: int, K_m1: int, beta_ratio: float) -> float:
    """K_{m+1} * (K_{m+1}/K_m)^beta_ratio, the forced candidate for K_{m+2}."""
    if K_m < 1 or K_m1 < 1:
        raise ValueError("digits must be >= 1")
    return K_m1 * (K_m1 / K_m) ** beta_ratio


def recursion_residual(K_m: int, K_m1: int, K_m2: int, beta_pair) -> float:
    """|K_{m+2} - K_{m+1} (K_{m+1}/K_m)^(beta(W_{M-(m+1)})/beta(W_{M-m}))|."""
    b_next, b_cur = beta_pair
    return abs(K_m2 - predicted_next(K_m, K_m1, b_next / b_cur))


def _word_beta(blocks: BlockDecomposition, theta: ThetaData, idx1: int) -> float:
    """beta of block W_idx1 (1-based index into the decomposition)."""
    return math.fsum(theta.beta[key] for key in blocks.words[idx1 - 1])


def beta_pair(blocks: BlockDecomposition, theta: ThetaData, M: int, m: int):
    """(beta(W_{M-(m+1)}), beta(W_{M-m})) for the step at index m."""
    return (_word_beta(blocks, theta, M - (m + 1)), _word_beta(blocks, theta, M - m))


def B_m(blocks: BlockDecomposition, theta: ThetaData, M: int, m: int,
        C: float = DEFAULT_C) -> float:
    """(C theta_max^(k+2))^(beta_max (|W_{M-m}| + |W_{M-(m+1)}|))."""
    if not 1 <= m <= M - 2:
        raise ValueError(f"m must lie in 1..{M - 2}")
    length = len(blocks.words[M - m - 1]) + len(blocks.words[M - m - 2])
    k = theta.k_exponent
    return (C * theta.theta_max ** (k + 2)) ** (theta.beta_max * length)


def rho_m(blocks: BlockDecomposition, theta: ThetaData, M: int, m: int,
          C: float = DEFAULT_C) -> float:
    """rho_m = 1/(2 B_m): fractional parts below this force the next digit."""
    return 0.5 / B_m(blocks, theta, M, m, C=C)


def wordlen_tail_stat(blocks: BlockDecomposition, M: int, delta: float) -> int:
    """Exact max over index sets I in {0..M-2} with |I| <= 4 delta M of
    sum over I of |W_{M-m}| + |W_{M-m-1}|: sort the adjacent-length sums
    descending and take the top floor(4 delta M)."""
    if M > blocks.M:
        raise ValueError(f"M={M} exceeds available blocks-1 = {blocks.M}")
    sums = sorted((len(blocks.words[M - m - 1]) + len(blocks.words[M - m - 2])
                   for m in range(0, M - 1)), reverse=True)
    budget = int(4.0 * delta * M)
    return sum(sums[:budget])


@dataclass(frozen=True)
class EnumerationBound:
    """Branching bound A0 * prod over the worst admissible index set of
    (2 B_m + 1)^2, in log space, plus the exact count of index sets."""

    log_A0: float
    budget: int
    chosen: tuple  # indices m in the worst-case set, largest factors first
    log_max_product: float
    log_bound: float
    n_index_sets: int

    @property
    def bound(self) -> float:
        return math.exp(self.log_bound) if self.log_bound < 700 else math.inf


def enumerate_sequence_count(blocks: BlockDecomposition, M: int, delta: float,
                             rho: float, c: float, sys,
                             C: float = DEFAULT_C,
                             A0_constant: float = 1.0,
                             guard: int = 20) -> EnumerationBound:
    """Worst-case count of digit-pair sequences compatible with the recursion.

    Index sets I of non-forced steps have |I| <= 4 delta M; each non-forced
    step branches into at most (2 B_m + 1)^2 digit pairs and the initial
    quadruple has about A0 = A0_constant * B0^4 choices with
    B0 = theta_max^(|W_{M-1}| + |W_M| + |W_{M+1}|).  The worst set takes the
    largest factors; the number of admissible index sets is the exact
    binomial sum.  rho does not enter the bound; it is accepted for
    interface symmetry with the brute-force scan.
    """
    if M > guard:
        raise ValueError(f"M={M} exceeds the combinatorial guard {guard}")
    theta = theta_sequence(blocks, M, sys)
    if len(blocks.words) < M + 1:
        raise ValueError("need blocks W_1..W_{M+1}")
    len0 = (len(blocks.words[M - 2]) + len(blocks.words[M - 1])
            + len(blocks.words[M]))
    log_B0 = len0 * math.log(theta.theta_max)
    log_A0 = math.log(A0_constant) + 4.0 * log_B0
    budget = min(int(4.0 * delta * M), max(0, M - 2))
    factors = sorted(((2.0 * math.log(2.0 * B_m(blocks, theta, M, m, C=C) + 1.0), m)
                      for m in range(1, M - 1)), reverse=True)
    chosen = tuple(m for _, m in factors[:budget])
    log_max_product = math.fsum(f for f, _ in factors[:budget])
    n_sets = sum(math.comb(max(0, M - 2), i) for i in range(budget + 1))
    return EnumerationBound(log_A0=log_A0, budget=budget, chosen=chosen,
                            log_max_product=log_max_product,
                            log_bound=log_A0 + log_max_product,
                            n_index_sets=n_sets)


def fit_H(entries) -> float:
    """Least-squares H through the origin for
    log(bound/A0) <= H * log(1/delta) * delta M over a sweep of (delta, M).

    entries: iterables of (delta, M, log_bound_minus_log_A0).
    """
    xs, ys = [], []
    for delta, M, y in entries:
        x = math.log(1.0 / delta) * delta * M
        if x > 0:
            xs.append(x)
            ys.append(y)
    if not xs:
        raise ValueError("no usable sweep entries")
    xs = np.array(xs)
    ys = np.array(ys)
    return float(xs @ ys / (xs @ xs))


@dataclass(frozen=True)
class BruteForceE:
    """Grid scan of the resonance condition over (z1, z2, nu)."""

    intervals: tuple          # covering intervals (lo, hi) of length Lambda
    interval_length: float    # Lambda = 2 C_c lambda_max^M
    n_admissible_pairs: int
    admissible: tuple         # (z1, z2, nu) witnesses, one per admissible pair
    grid_shape: tuple


def brute_force_E(blocks: BlockDecomposition, M: int, delta: float, rho: float,
                  c: float, sys, nz: int = 64, nnu: int = 32,
                  C_c: float = DEFAULT_C, guard: int = 8) -> BruteForceE:
    """Scan z_i in [c, 2c], nu in [1, theta(W_{M+1})) for the condition
    that at least (1-delta) M of the Theta_m z_i nu sit within rho of
    integers for both i, collect the admissible ratios z1/z2, and merge
    them into intervals of length Lambda = 2 C_c lambda_max^M.

    Only equal-sign z1, z2 are scanned; the mixed-sign case reduces to this
    one by flipping the sign of one frequency.
    """
    if M > guard:
        raise ValueError(f"M={M} exceeds the brute-force guard {guard}")
    theta = theta_sequence(blocks, M, sys)
    lam_max = 1.0 / theta.theta_min
    Lam = 2.0 * C_c * lam_max ** M
    # worst neighbouring-ratio spacing on the z grid is ~2/(nz-1), near z1/z2 = 2
    spacing = 2.0 / max(nz - 1, 1)
    if spacing > Lam:
        raise ValueError(
            f"grid too coarse: ratio spacing ~{spacing:.3g} exceeds "
            f"interval length {Lam:.3g}; raise nz")
    z = np.linspace(c, 2.0 * c, nz)
    theta_last = math.exp(math.fsum(math.log(theta.theta[key])
                                    for key in blocks.words[M]))
    nus = 1.0 + (theta_last - 1.0) * np.arange(nnu) / nnu
    need = (1.0 - delta) * M
    admissible = np.zeros((nz, nz), dtype=bool)
    witness_nu = np.full((nz, nz), -1.0)
    for nu in nus:
        x = np.multiply.outer(z * nu, theta.Theta)  # (nz, M)
        A = (dist_to_int(x) < rho).astype(np.float64)
        both = A @ A.T  # count of m with both fractional parts small
        hit = both >= need - 1e-12
        fresh = hit & ~admissible
        witness_nu[fresh] = nu
        admissible |= hit
    ii, jj = np.nonzero(admissible)
    ratios = z[ii] / z[jj]
    order = np.argsort(ratios)
    intervals = []
    covered_to = -math.inf
    for r in ratios[order]:
        if r > covered_to:
            intervals.append((float(r), float(r + Lam)))
            covered_to = r + Lam
    witnesses = tuple(
        (float(z[a]), float(z[b]), float(witness_nu[a, b]))
        for a, b in zip(ii, jj))
    return BruteForceE(intervals=tuple(intervals), interval_length=Lam,
                       n_admissible_pairs=int(len(ii)), admissible=witnesses,
                       grid_shape=(nz, nz, nnu))
