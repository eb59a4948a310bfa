import math

import numpy as np
import pytest

from selfsim.errors import CapExceededError
from selfsim.fourier import ft_atomic
from selfsim.measures import compare_atomic, convolve_atomic, dirac
from selfsim.random_model import (OmegaPrefix, eta_omega_atoms, extend_prefix,
                                  sample_points, sample_types,
                                  split_small_big)
from selfsim.type_model import TypedSystem, TypeVec


@pytest.fixture
def tsys(twoscale):
    return TypedSystem(twoscale, 2)


class TestSampleTypes:
    def test_deterministic(self, tsys):
        a = sample_types(42, 50, tsys.q_table())
        b = sample_types(42, 50, tsys.q_table())
        assert a.blocks == b.blocks

    def test_prefix_contract(self, tsys):
        long = sample_types(42, 200, tsys.q_table())
        short = sample_types(42, 60, tsys.q_table())
        assert long.blocks[:60] == short.blocks

    def test_seed_changes_stream(self, tsys):
        assert (sample_types(1, 40, tsys.q_table()).blocks
                != sample_types(2, 40, tsys.q_table()).blocks)

    def test_empirical_frequencies_clt(self, tsys):
        n = 100_000
        omega = sample_types(7, n, tsys.q_table())
        counts = {}
        for key in omega.blocks:
            counts[key] = counts.get(key, 0) + 1
        for tau, q in tsys.q_table().items():
            freq = counts.get(tau, 0) / n
            assert abs(freq - q) <= 4 * math.sqrt(q * (1 - q) / n)

    def test_extend_prefix(self, tsys):
        omega = sample_types(9, 10, tsys.q_table())
        longer = extend_prefix(omega, tsys, 25)
        assert longer.blocks[:10] == omega.blocks
        with pytest.raises(ValueError):
            extend_prefix(OmegaPrefix(omega.blocks), tsys, 25)  # no lineage


class TestEtaOmega:
    def test_single_block_is_eta_of_type(self, tsys):
        tau = tsys.types[1]
        got = eta_omega_atoms(tsys, OmegaPrefix((tau,)))
        assert compare_atomic(got, tsys.eta(tau)).matched

    def test_one_atom_types_collapse_to_dirac(self, tsys):
        # pure types have a single composition point
        pure = TypeVec((2, 0))
        got = eta_omega_atoms(tsys, OmegaPrefix((pure, pure, pure)))
        assert got.n_atoms == 1
        assert got.mass == pytest.approx(1.0)

    def test_atom_count_product(self, tsys):
        mixed = TypeVec((1, 1))
        got = eta_omega_atoms(tsys, OmegaPrefix((mixed, mixed)))
        assert got.n_atoms == tsys.mult(mixed) ** 2  # no coincidences here

    def test_fourier_factorisation(self, tsys, rng):
        # transform of the convolution equals the product of factor
        # transforms (independent convolution-theorem oracle)
        omega = sample_types(3, 3, tsys.q_table())
        measure = eta_omega_atoms(tsys, omega)
        for _ in range(10):
            xi = float(rng.uniform(0.5, 40.0))
            product = 1.0 + 0.0j
            prefix = 1.0
            for tau in omega.blocks:
                product *= ft_atomic(tsys.eta(tau), prefix * xi)
                prefix *= tsys.lam(tau)
            assert ft_atomic(measure, xi) == pytest.approx(product, abs=1e-12)

    def test_cap_suggests_sampler(self, tsys):
        omega = OmegaPrefix((TypeVec((1, 1)),) * 40)
        with pytest.raises(CapExceededError) as err:
            eta_omega_atoms(tsys, omega, cap=100)
        assert "sample_points" in str(err.value)

    def test_support_bound(self, tsys):
        omega = sample_types(5, 8, tsys.q_table())
        measure = eta_omega_atoms(tsys, omega)
        bound = tsys.t_sup() / (1 - tsys.lam_sup())
        assert np.all(np.abs(measure.positions) <= bound + 1e-12)


class TestSplit:
    def test_s_larger_than_length(self, tsys):
        omega = sample_types(11, 3, tsys.q_table())
        small, big = split_small_big(tsys, omega, 5)
        assert small.n_atoms == 1 and small.positions[0] == 0.0
        assert compare_atomic(big, eta_omega_atoms(tsys, omega)).matched

    def test_index_bookkeeping_s2(self, tsys):
        omega = sample_types(13, 4, tsys.q_table())
        small, big = split_small_big(tsys, omega, 2)
        # small uses factors 2 and 4 with the original prefix scalings
        lam1 = tsys.lam(omega.blocks[0])
        lam123 = lam1 * tsys.lam(omega.blocks[1]) * tsys.lam(omega.blocks[2])
        direct_small = convolve_atomic(
            *(s for s in [
                _scaled(tsys, omega.blocks[1], lam1),
                _scaled(tsys, omega.blocks[3], lam123)]))
        assert compare_atomic(small, direct_small).matched

    def test_convolution_recovers_full(self, tsys, rng):
        for seed in range(5):
            omega = sample_types(seed, 5, tsys.q_table())
            s = int(rng.integers(2, 4))
            small, big = split_small_big(tsys, omega, s)
            full = eta_omega_atoms(tsys, omega)
            rep = compare_atomic(convolve_atomic(small, big), full)
            assert rep.matched and rep.max_weight_diff < 1e-12


def _scaled(tsys, tau, prefix):
    from selfsim.measures import scale_push

    return scale_push(tsys.eta(tau), prefix)


class TestSamplePoints:
    def test_one_atom_types_deterministic_sum(self, twoscale):
        tsys = TypedSystem(twoscale, 1)
        # N=1 types are single letters: type (1,0) has one atom at t_1
        omega = OmegaPrefix((TypeVec((0, 1)),) * 6)
        pts = sample_points(tsys, 0, 6, None, 20, None, omega=omega)
        expected = eta_omega_atoms(tsys, omega).positions[0]
        assert pts == pytest.approx(np.full(20, expected), abs=1e-14)

    def test_mean_against_exact_clt(self, tsys):
        omega = sample_types(21, 3, tsys.q_table())
        exact = eta_omega_atoms(tsys, omega)
        count = 4000
        pts = sample_points(tsys, 21, 3, None, count, None, omega=omega)
        sigma = math.sqrt(float(
            exact.weights @ (exact.positions - exact.mean()) ** 2))
        assert abs(pts.mean() - exact.mean()) <= 4 * sigma / math.sqrt(count)

    def test_kolmogorov_smirnov_against_atomic_cdf(self, tsys):
        omega = sample_types(33, 4, tsys.q_table())
        exact = eta_omega_atoms(tsys, omega)
        count = 10_000
        pts = np.sort(sample_points(tsys, 33, 4, None, count, None, omega=omega))
        # both CDFs are step functions jumping only at the atoms, so the
        # sup distance is attained there
        atoms = exact.positions
        emp = np.searchsorted(pts, atoms, side="right") / count
        ks = float(np.max(np.abs(emp - exact.cdf(atoms))))
        assert ks < 1.63 / math.sqrt(count)  # 1% critical value

    def test_deterministic_per_seed(self, tsys):
        a = sample_points(tsys, 5, 4, None, 50, 1e-8)
        b = sample_points(tsys, 5, 4, None, 50, 1e-8)
        assert np.array_equal(a, b)

    def test_draws_extend_independently(self, tsys):
        # first 10 draws of a 50-draw run equal a 10-draw run
        a = sample_points(tsys, 5, 4, None, 50, 1e-8)
        b = sample_points(tsys, 5, 4, None, 10, 1e-8)
        assert np.array_equal(a[:10], b)

    def test_tail_within_bound(self, tsys):
        # truncated draws differ from deep draws by at most tail_tol
        tol = 1e-6
        shallow = sample_points(tsys, 8, 2, None, 40, tol)
        deep = sample_points(tsys, 8, 2, None, 40, tol * 1e-6)
        assert np.max(np.abs(shallow - deep)) <= tol
