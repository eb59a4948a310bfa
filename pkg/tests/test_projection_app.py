import itertools
import math

import numpy as np
import pytest

from selfsim.ifs_core import (IFS, Similitude, compose_at_zero, delta_n,
                              fixed_points_collinear, pairwise_delta)
from selfsim.param_family import family_delta_jet
from selfsim.projection_app import (AngleScanRow, ScanConfig, angle_scan,
                                    carpet, project, project_family)


class TestProject:
    def test_angle_zero_takes_x(self, planar_carpet):
        p = project(planar_carpet, 0.0)
        assert p.translations == pytest.approx(
            [s.translation[0] for s in planar_carpet.maps])

    def test_angle_half_pi_takes_y(self, planar_carpet):
        p = project(planar_carpet, math.pi / 2)
        assert p.translations == pytest.approx(
            [s.translation[1] for s in planar_carpet.maps], abs=1e-15)

    def test_projection_commutes_with_composition(self, planar_carpet, rng):
        # psi_{u,w}(0) = pi_u(psi_w(0)), both sides computed independently
        for _ in range(20):
            u = float(rng.uniform(0, 2 * math.pi))
            frozen = project(planar_carpet, u)
            n = int(rng.integers(1, 5))
            w = tuple(rng.integers(1, 9, n))
            planar_point = compose_at_zero(planar_carpet, w)
            projected = planar_point[0] * math.cos(u) + planar_point[1] * math.sin(u)
            assert compose_at_zero(frozen, w) == pytest.approx(projected, abs=1e-12)

    def test_family_freeze_matches_project(self, planar_carpet, rng):
        fam = project_family(planar_carpet)
        for _ in range(10):
            u = float(rng.uniform(0, 2 * math.pi))
            a = fam.freeze(u)
            b = project(planar_carpet, u)
            assert a.translations == pytest.approx(b.translations, abs=1e-14)


class TestCarpetPreset:
    def test_similarity_dimension(self, planar_carpet):
        assert (planar_carpet.similarity_dimension()
                == pytest.approx(math.log(8) / math.log(3), abs=1e-12))

    def test_fixed_points_not_collinear(self, planar_carpet):
        assert not fixed_points_collinear(planar_carpet).collinear

    def test_diagonal_exact_overlap(self, planar_carpet):
        assert delta_n(project(planar_carpet, math.pi / 4), 1) == 0.0


class TestRotationIdentity:
    def test_value_derivative_pythagoras(self, planar_carpet, rng):
        # |Delta(u)|^2 + |Delta'(u)|^2 equals the planar |Delta|^2
        fam = project_family(planar_carpet)
        words = list(itertools.product(range(1, 9), repeat=1))
        for _ in range(15):
            u = float(rng.uniform(0, 2 * math.pi))
            i = words[rng.integers(0, 8)]
            j = words[rng.integers(0, 8)]
            jet = family_delta_jet(fam, i, j, u, 1)
            planar = pairwise_delta(planar_carpet, i, j)
            assert (jet.value ** 2 + jet.deriv(1) ** 2
                    == pytest.approx(float(planar @ planar), abs=1e-10))


class TestAngleScan:
    @pytest.fixture(scope="class")
    def small_cfg(self):
        return ScanConfig(seed=99, N=2, s=2, n_max=3, ensemble=3, points=1200,
                          omega_length=10)

    def test_rational_directions_flagged(self, planar_carpet, small_cfg):
        rows = angle_scan(planar_carpet, [0.0, math.pi / 4, 0.9], small_cfg)
        assert rows[0].overlap_flag       # tan u = 0
        assert rows[1].overlap_flag       # tan u = 1
        assert not rows[2].overlap_flag
        assert rows[0].verdict == "singular-consistent"
        assert rows[2].error is None

    def test_simdim_constant_across_rows(self, planar_carpet, small_cfg):
        rows = angle_scan(planar_carpet, [0.3, 0.7, 1.2], small_cfg)
        vals = {r.simdim for r in rows}
        assert len(vals) == 1

    def test_deterministic(self, planar_carpet, small_cfg):
        a = angle_scan(planar_carpet, [0.5, 1.1], small_cfg)
        b = angle_scan(planar_carpet, [0.5, 1.1], small_cfg)
        assert a == b

    def test_low_dimension_blocks_ac_verdict(self, small_cfg):
        # two-map planar system with similarity dimension below one
        tiny = IFS([Similitude(0.3, (0.0, 0.0)), Similitude(0.3, (1.0, 0.7))],
                   [0.5, 0.5])
        rows = angle_scan(tiny, [0.4, 1.0, 2.2], small_cfg)
        assert all(r.verdict in ("singular-consistent", "inconclusive")
                   for r in rows)

    def test_per_angle_failure_marks_row(self, planar_carpet):
        # xi range below three decades makes the decay fit refuse; the scan
        # must keep going and mark the row failed
        cfg = ScanConfig(seed=5, ensemble=2, points=1200, xi_max=50.0, n_xi=25)
        rows = angle_scan(planar_carpet, [0.9, 1.3], cfg)
        assert all(r.verdict == "failed" for r in rows)
        assert all(r.error and "range" in r.error for r in rows)

    def test_parallel_jobs_match_serial(self, planar_carpet, small_cfg):
        serial = angle_scan(planar_carpet, [0.5, 0.9, 1.3], small_cfg, jobs=1)
        parallel = angle_scan(planar_carpet, [0.5, 0.9, 1.3], small_cfg, jobs=2)
        assert serial == parallel

    def test_ac_consistent_gate(self, planar_carpet, small_cfg):
        # the invariant: a.c.-consistent requires decay, full bigdim, no overlap
        rows = angle_scan(planar_carpet, [0.0, math.pi / 4, 0.9, 1.2], small_cfg)
        for r in rows:
            if r.verdict == "a.c.-consistent":
                assert r.fourier_exponent > small_cfg.decay_threshold
                assert r.bigdim > 1 - small_cfg.bigdim_tol
                assert not r.overlap_flag
