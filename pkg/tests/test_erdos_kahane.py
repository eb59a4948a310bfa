import math

import numpy as np
import pytest

from selfsim.erdos_kahane import (B_m, BlockDecomposition, beta_pair,
                                  brute_force_E, digits,
                                  enumerate_sequence_count, fit_H,
                                  predicted_next, recursion_residual, rho_m,
                                  split_words, theta_sequence,
                                  wordlen_tail_stat)
from selfsim.fourier import dist_to_int
from selfsim.random_model import OmegaPrefix, sample_types
from selfsim.type_model import AtomPool


@pytest.fixture
def single_pool():
    return AtomPool([("t0", 1.0, 1 / 3, [0.0, 1.0, 2.0])])


@pytest.fixture
def two_pool():
    return AtomPool([("a", 0.5, 1 / 3, [0.0, 1.0, 2.0]),
                     ("b", 0.5, 0.4, [0.0, 0.7])])


class TestSplitWords:
    def test_all_marked(self):
        dec = split_words(OmegaPrefix(("t0", "t0", "t0")), "t0")
        assert dec.words == (("t0",), ("t0",), ("t0",))

    def test_mixed(self):
        dec = split_words(OmegaPrefix(("x", "t0", "x", "x", "t0")), "t0")
        assert dec.words == (("x", "t0"), ("x", "x", "t0"))

    def test_concatenation_roundtrip(self, two_pool):
        omega = sample_types(3, 60, two_pool.q_table())
        dec = split_words(omega, "a")
        cat = dec.concatenation()
        assert cat == omega.blocks[: len(cat)]
        assert all(w[-1] == "a" for w in dec.words)

    def test_no_marks(self):
        with pytest.raises(ValueError):
            split_words(OmegaPrefix(("x", "x")), "t0")


class TestThetaSequence:
    def test_geometric_single_type(self, single_pool):
        dec = split_words(OmegaPrefix(("t0",) * 8), "t0")
        th = theta_sequence(dec, 5, single_pool)
        assert th.Theta == pytest.approx([3.0 ** (m + 1) for m in range(1, 6)])

    def test_theta1_is_theta0_times_last_block(self, two_pool):
        omega = sample_types(9, 50, two_pool.q_table())
        dec = split_words(omega, "a")
        M = 6
        th = theta_sequence(dec, M, two_pool)
        direct = th.theta0 * math.prod(th.theta[k] for k in dec.words[M - 1])
        assert th.Theta[0] == pytest.approx(direct, rel=1e-12)

    def test_monotone(self, two_pool):
        omega = sample_types(17, 80, two_pool.q_table())
        dec = split_words(omega, "a")
        th = theta_sequence(dec, dec.M, two_pool)
        assert np.all(np.diff(th.log_Theta) >= 0)

    def test_beta_of_mark_is_one(self, two_pool):
        dec = split_words(sample_types(2, 40, two_pool.q_table()), "a")
        th = theta_sequence(dec, 4, two_pool)
        assert th.beta["a"] == pytest.approx(1.0)
        assert th.beta_max <= math.log(th.theta_max) / math.log(th.theta_min) + 1e-12

    def test_overflow_flagged_in_log_space(self, single_pool):
        dec = split_words(OmegaPrefix(("t0",) * 900), "t0")
        th = theta_sequence(dec, 800, single_pool)
        assert th.overflowed and th.Theta is None
        assert th.log_Theta[-1] == pytest.approx(801 * math.log(3.0), rel=1e-12)
        with pytest.raises(OverflowError):
            digits(1.0, 1.0, th)

    def test_reindexing_identity(self, two_pool, rng):
        # Theta_m f nu equals the contraction prefix just before the
        # (M-m)-th mark times f xi, with xi = nu / contraction at mark M
        omega = sample_types(31, 120, two_pool.q_table())
        dec = split_words(omega, "a")
        M = 8
        th = theta_sequence(dec, M, two_pool)
        marks = [i + 1 for i, key in enumerate(omega.blocks) if key == "a"]
        lam_prefix = np.cumprod([two_pool.lam(k) for k in omega.blocks])

        def lam_at(idx):  # lambda(omega|_idx), idx >= 0
            return 1.0 if idx == 0 else float(lam_prefix[idx - 1])

        theta_nM = 1.0 / lam_at(marks[M - 1])
        for _ in range(50):
            nu = float(rng.uniform(1.0, th.theta0))
            f = float(rng.uniform(0.2, 3.0))
            xi = nu * theta_nM
            for m in range(1, M):
                lhs = th.Theta[m - 1] * f * nu
                rhs = lam_at(marks[M - m - 1] - 1) * f * xi
                assert lhs == pytest.approx(rhs, rel=1e-10)


class TestDigits:
    def test_integer_products_have_zero_eps(self):
        d = digits(2.0, 1.0, [3.0, 9.0, 27.0])
        assert list(d.K) == [6, 18, 54]
        assert d.eps == pytest.approx([0.0, 0.0, 0.0], abs=0.0)

    def test_worked_example(self):
        d = digits(1.0, 1.1, [3.0, 9.0, 27.0])
        assert list(d.K) == [3, 10, 30]
        assert d.eps == pytest.approx([0.3, -0.1, -0.3], abs=1e-12)

    def test_reconstruction_one_ulp(self, two_pool, rng):
        dec = split_words(sample_types(5, 60, two_pool.q_table()), "a")
        th = theta_sequence(dec, 6, two_pool)
        for _ in range(200):
            z = float(rng.uniform(1.0, 2.0))
            nu = float(rng.uniform(1.0, 2.0))
            d = digits(z, nu, th)
            x = th.Theta * z * nu
            err = np.abs((d.K + d.eps) - x)
            assert np.all(err <= np.spacing(np.abs(x)))

    def test_eps_half_open_interval(self, rng):
        for _ in range(100):
            d = digits(float(rng.uniform(0.5, 3)), float(rng.uniform(1, 2)),
                       [7.0, 19.0, 53.0])
            assert np.all((-0.5 <= d.eps) & (d.eps < 0.5))

    def test_magnitude_guard(self):
        with pytest.raises(OverflowError):
            digits(1.0, 1.0, [2.0 ** 60])

    def test_digit_lower_bound(self, two_pool, rng):
        # min(K_M, L_M) is at least about c / lambda_max^M
        dec = split_words(sample_types(6, 80, two_pool.q_table()), "a")
        M = 6
        th = theta_sequence(dec, M, two_pool)
        lam_max = 1.0 / th.theta_min
        c = 1.0
        for _ in range(50):
            z1 = float(rng.uniform(c, 2 * c))
            z2 = float(rng.uniform(c, 2 * c))
            nu = float(rng.uniform(1.0, 1.5))
            km = digits(z1, nu, th).K[-1]
            lm = digits(z2, nu, th).K[-1]
            assert min(km, lm) >= 0.9 * c * lam_max ** -M


class TestRecursion:
    def test_geometric_sequence_zero_residual(self):
        assert recursion_residual(3, 9, 27, (1.0, 1.0)) == 0.0

    def test_perturbation_changes_residual_by_one(self):
        base = recursion_residual(3, 9, 27, (1.0, 1.0))
        assert recursion_residual(3, 9, 28, (1.0, 1.0)) == base + 1.0

    def test_residual_bounded_by_window_constant(self, two_pool, rng):
        # generate digits from smooth inputs, check the claimed bound
        dec = split_words(sample_types(13, 90, two_pool.q_table()), "a")
        M = 7
        th = theta_sequence(dec, M, two_pool)
        for _ in range(100):
            z = float(rng.uniform(1.0, 2.0))
            nu = float(rng.uniform(1.0, 1.4))
            d = digits(z, nu, th)
            for m in range(1, M - 1):
                res = recursion_residual(d.K[m - 1], d.K[m], d.K[m + 1],
                                         beta_pair(dec, th, M, m))
                bound = (B_m(dec, th, M, m)
                         * max(abs(d.eps[m - 1]), abs(d.eps[m]), abs(d.eps[m + 1])))
                assert res <= bound + 1e-9

    def test_zero_digit_rejected(self):
        with pytest.raises(ValueError):
            predicted_next(0, 3, 1.0)


class TestRhoM:
    def test_monotone_in_block_length(self, two_pool):
        short = BlockDecomposition("a", (("a",),) * 6)
        longer = BlockDecomposition("a", (("b", "a"), ("b", "b", "a"), ("a",),
                                          ("a",), ("a",), ("a",)))
        M = 4
        th_s = theta_sequence(short, M, two_pool)
        th_l = theta_sequence(longer, M, two_pool)
        # step m = 2 sees blocks W_1 W_2, the two long ones in `longer`
        assert rho_m(longer, th_l, M, 2) < rho_m(short, th_s, M, 2)

    def test_constant_for_unit_blocks(self, single_pool):
        dec = split_words(OmegaPrefix(("t0",) * 9), "t0")
        M = 7
        th = theta_sequence(dec, M, single_pool)
        vals = [rho_m(dec, th, M, m) for m in range(1, M - 1)]
        assert all(v == vals[0] for v in vals)

    def test_k_exponent_inequality(self, two_pool):
        dec = split_words(sample_types(1, 30, two_pool.q_table()), "a")
        th = theta_sequence(dec, 3, two_pool)
        assert math.exp(1.0 / th.k_exponent) <= th.theta_min + 1e-12


class TestCountingConditions:
    def test_count_condition_equals_fractional_rewrite(self, two_pool, rng):
        # the defining count and its fractional-part rewrite agree exactly
        dec = split_words(sample_types(23, 70, two_pool.q_table()), "a")
        M = 6
        th = theta_sequence(dec, M, two_pool)
        for _ in range(300):
            z1, z2 = rng.uniform(1.0, 2.0, 2)
            nu = float(rng.uniform(1.0, 1.3))
            rho = float(rng.uniform(0.02, 0.5))
            d1, d2 = digits(z1, nu, th), digits(z2, nu, th)
            lhs = np.sum(np.maximum(dist_to_int(th.Theta * z1 * nu),
                                    dist_to_int(th.Theta * z2 * nu)) < rho)
            rhs = M - np.sum(np.maximum(np.abs(d1.eps), np.abs(d2.eps)) >= rho)
            assert lhs == rhs
            # the 3-window version is at most three times as large
            window = sum(
                max(abs(d1.eps[m - 1]), abs(d1.eps[m]), abs(d1.eps[m + 1]),
                    abs(d2.eps[m - 1]), abs(d2.eps[m]), abs(d2.eps[m + 1])) >= rho
                for m in range(1, M - 1))
            assert window <= 3 * (M - lhs)


class TestEnumerationBound:
    def test_zero_budget_returns_A0(self, single_pool):
        dec = split_words(OmegaPrefix(("t0",) * 9), "t0")
        eb = enumerate_sequence_count(dec, 6, 0.01, 0.1, 1.0, single_pool)
        assert eb.budget == 0 and eb.chosen == ()
        assert eb.log_bound == eb.log_A0
        assert eb.n_index_sets == 1

    def test_single_type_closed_form(self, single_pool):
        dec = split_words(OmegaPrefix(("t0",) * 12), "t0")
        M, delta = 10, 0.1
        th = theta_sequence(dec, M, single_pool)
        eb = enumerate_sequence_count(dec, M, delta, 0.1, 1.0, single_pool)
        B = B_m(dec, th, M, 1)
        budget = int(4 * delta * M)
        assert eb.budget == budget
        expected = 3 * math.log(3.0) * 4 + budget * 2 * math.log(2 * B + 1)
        assert eb.log_bound == pytest.approx(expected, rel=1e-12)
        assert eb.n_index_sets == sum(math.comb(M - 2, i) for i in range(budget + 1))

    def test_guard(self, single_pool):
        dec = split_words(OmegaPrefix(("t0",) * 40), "t0")
        with pytest.raises(ValueError):
            enumerate_sequence_count(dec, 30, 0.1, 0.1, 1.0, single_pool)

    def test_fitted_H_finite_and_enveloping(self, two_pool):
        omega = sample_types(3, 400, two_pool.q_table())
        dec = split_words(omega, "a")
        entries = []
        for M in (6, 8, 10, 12):
            for delta in (0.05, 0.1, 0.2, 0.3):
                eb = enumerate_sequence_count(dec, M, delta, 0.1, 1.0, two_pool)
                entries.append((delta, M, eb.log_max_product))
        H = fit_H(entries)
        assert math.isfinite(H) and H > 0
        H_env = max(y / (math.log(1 / d) * d * M) for d, M, y in entries if y > 0)
        for d, M, y in entries:
            assert y <= H_env * math.log(1 / d) * d * M + 1e-9


class TestBruteForceE:
    def test_rho_half_covers_everything(self, single_pool):
        dec = split_words(OmegaPrefix(("t0",) * 8), "t0")
        bf = brute_force_E(dec, 5, 0.5, 0.51, 1.0, single_pool, nz=128, nnu=6)
        assert bf.n_admissible_pairs == 128 * 128
        # the covering intervals blanket the ratio range [1/2, 2] up to one
        # interval length (the grid only carries finitely many ratios)
        for r in np.linspace(0.5, 2.0, 101):
            assert any(lo - bf.interval_length <= r <= hi + bf.interval_length
                       for lo, hi in bf.intervals)

    def test_tiny_rho_empty(self, two_pool):
        omega = sample_types(3, 60, two_pool.q_table())
        dec = split_words(omega, "a")
        bf = brute_force_E(dec, 5, 0.1, 1e-7, 1.0, two_pool, nz=64, nnu=8)
        assert bf.n_admissible_pairs == 0 and bf.intervals == ()

    def test_admissible_ratios_near_digit_ratios(self, single_pool):
        # every admissible pair sits within Lambda of its digit ratio
        dec = split_words(OmegaPrefix(("t0",) * 8), "t0")
        M = 5
        th = theta_sequence(dec, M, single_pool)
        bf = brute_force_E(dec, M, 0.4, 0.45, 1.0, single_pool, nz=128, nnu=8)
        assert bf.n_admissible_pairs > 0
        for z1, z2, nu in bf.admissible[:500]:
            kM = digits(z1, nu, th).K[-1]
            lM = digits(z2, nu, th).K[-1]
            assert abs(z1 / z2 - kM / lM) <= bf.interval_length

    def test_interval_count_vs_branching_bound(self, two_pool):
        omega = sample_types(3, 200, two_pool.q_table())
        dec = split_words(omega, "a")
        for M in (4, 5, 6):
            for delta in (0.1, 0.2):
                for rho in (0.05, 0.2):
                    bf = brute_force_E(dec, M, delta, rho, 1.0, two_pool,
                                       nz=128, nnu=8)
                    eb = enumerate_sequence_count(dec, M, delta, rho, 1.0,
                                                  two_pool)
                    assert len(bf.intervals) <= 8 * eb.bound

    def test_grid_too_coarse_rejected(self, single_pool):
        dec = split_words(OmegaPrefix(("t0",) * 10), "t0")
        with pytest.raises(ValueError):
            brute_force_E(dec, 8, 0.1, 0.1, 1.0, single_pool, nz=16, nnu=4)


class TestWordlenStat:
    def test_unit_blocks(self, single_pool):
        dec = split_words(OmegaPrefix(("t0",) * 30), "t0")
        M, delta = 20, 0.1
        assert wordlen_tail_stat(dec, M, delta) == 2 * int(4 * delta * M)

    def test_huge_block_dominates(self):
        words = [("a",)] * 10
        words[4] = ("b",) * 9 + ("a",)
        dec = BlockDecomposition("a", tuple(words))
        # budget 1: the best index set picks an adjacent pair containing
        # the long block
        assert wordlen_tail_stat(dec, 9, 0.05) == 11

    def test_sampled_omega_regression(self, two_pool):
        # fit the envelope constant on one half of an ensemble, then check
        # the other half stays within twice the fit
        M = 50
        stats = {d: [] for d in (0.05, 0.1, 0.2)}
        for seed in range(40):
            omega = sample_types(1000 + seed, 300, two_pool.q_table())
            dec = split_words(omega, "a")
            if dec.M < M:
                continue
            for d in stats:
                stats[d].append(wordlen_tail_stat(dec, M, d)
                                / (d * M * math.log(1 / (4 * d))))
        for d, vals in stats.items():
            assert len(vals) >= 10
            half = len(vals) // 2
            C_fit = max(vals[:half])
            assert max(vals[half:]) <= 2.0 * C_fit
