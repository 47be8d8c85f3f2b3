"""Grid scheme, exact subset-path oracle, and analytic bound tests."""

import itertools
import math

import numpy as np
import pytest

from routebench import (
    CapacityError,
    GridDensity,
    PointSet,
    RandomSeed,
    Route,
    Square,
    ktsp_exact,
    ktsp_grid_scheme,
    ktsp_nonuniform_scheme,
    ktsp_rate,
    ktsp_tail_bound,
    route_length,
    sample_points,
)
from routebench.ktsp import _grid_resolution


def brute_force_kpath(ps, k):
    """Exact shortest open path over k points: all subsets, all orders."""
    n = len(ps)
    best = math.inf
    for subset in itertools.combinations(range(n), k):
        for perm in itertools.permutations(subset):
            if perm[0] > perm[-1]:
                continue  # reversal symmetry
            best = min(best, route_length(Route(perm, closed=False), ps))
    return best


class TestGridResolution:
    def test_formula_example(self):
        assert _grid_resolution(alpha=1, k=2, n=16, area=1.0) == 16

    def test_clamped_to_one(self):
        assert _grid_resolution(alpha=1000, k=2, n=4, area=1.0) == 1

    def test_decreasing_in_alpha(self):
        values = [_grid_resolution(a, 3, 500, 1.0) for a in range(1, 10)]
        assert values == sorted(values, reverse=True)


class TestGridScheme:
    def test_route_has_exactly_k_points(self):
        ps = sample_points(GridDensity.uniform(1), 300, RandomSeed(1))
        for k in (2, 3, 7):
            result = ktsp_grid_scheme(ps, k)
            assert len(result.route) == k
            assert not result.route.closed
            assert len(set(result.route.order)) == k
            assert result.length == pytest.approx(route_length(result.route, ps), rel=1e-12)

    def test_k_equals_n_whole_square(self):
        ps = sample_points(GridDensity.uniform(1), 40, RandomSeed(2))
        result = ktsp_grid_scheme(ps, 40)
        side = ps.square.side
        assert sorted(result.route.order) == list(range(40))
        assert result.length <= (2 * math.sqrt(40) + 4) * side + side

    def test_invalid_k(self):
        ps = sample_points(GridDensity.uniform(1), 10, RandomSeed(3))
        with pytest.raises(ValueError):
            ktsp_grid_scheme(ps, 1)
        with pytest.raises(ValueError):
            ktsp_grid_scheme(ps, 11)

    def test_chosen_points_share_a_cell(self):
        ps = sample_points(GridDensity.uniform(1), 500, RandomSeed(4))
        result = ktsp_grid_scheme(ps, 4)
        m = _grid_resolution(result.alpha_used, 4, 500, 1.0)
        from routebench.core import cell_ids

        ids = cell_ids(ps.coords[list(result.route.order)], ps.square, m)
        assert np.all(ids == result.cell_chosen)

    def test_never_below_exact(self):
        d = GridDensity.uniform(1)
        for trial in range(30):
            ps = sample_points(d, 11, RandomSeed(700, trial))
            k = 2 + trial % 4
            scheme = ktsp_grid_scheme(ps, k)
            exact = ktsp_exact(ps, k)
            assert scheme.length >= exact.length - 1e-9

    def test_beats_naive_rate_smoke(self):
        # subset routing should clearly beat a share of the full tour
        from routebench import strip_tour

        d = GridDensity.uniform(1)
        k, n = 5, 1000
        scheme_lengths, naive = [], []
        for trial in range(60):
            ps = sample_points(d, n, RandomSeed(701, trial))
            scheme_lengths.append(ktsp_grid_scheme(ps, k).length)
            naive.append((k - 1) / n * strip_tour(ps).length)
        assert np.mean(scheme_lengths) < 0.8 * np.mean(naive)


class TestExactOracle:
    def test_k2_is_closest_pair(self):
        ps = sample_points(GridDensity.uniform(1), 60, RandomSeed(5))
        result = ktsp_exact(ps, 2)
        diff = ps.coords[:, None] - ps.coords[None, :]
        dist = np.hypot(diff[..., 0], diff[..., 1]) + np.eye(60) * 1e9
        assert result.length == pytest.approx(float(dist.min()), rel=1e-12)

    def test_collinear_k3(self):
        ps = PointSet.from_points([(0, 0), (1, 0), (2, 0), (10, 0)], Square((0.0, 0.0), 10.0))
        result = ktsp_exact(ps, 3)
        assert result.length == pytest.approx(2.0)
        assert sorted(result.route.order) == [0, 1, 2]

    def test_k_equals_n_open_path_below_tour(self):
        from routebench import tsp_exact

        ps = sample_points(GridDensity.uniform(1), 9, RandomSeed(6))
        path = ktsp_exact(ps, 9)
        tour = tsp_exact(ps)
        assert path.length <= tour.length + 1e-12

    def test_matches_brute_force(self):
        d = GridDensity.uniform(1)
        rng = np.random.default_rng(11)
        for trial in range(30):
            n = int(rng.integers(4, 8))
            k = int(rng.integers(2, n + 1))
            ps = sample_points(d, n, RandomSeed(702, trial))
            assert ktsp_exact(ps, k).length == pytest.approx(brute_force_kpath(ps, k), abs=1e-9)

    def test_monotone_in_k(self):
        ps = sample_points(GridDensity.uniform(1), 10, RandomSeed(7))
        lengths = [ktsp_exact(ps, k).length for k in range(2, 11)]
        assert all(a <= b + 1e-12 for a, b in zip(lengths, lengths[1:]))

    def test_capacity_error_large_k(self):
        ps = sample_points(GridDensity.uniform(1), 20, RandomSeed(8))
        with pytest.raises(CapacityError):
            ktsp_exact(ps, 5)
        # closed-form paths stay available above the DP cap
        assert ktsp_exact(ps, 2).length > 0
        assert ktsp_exact(ps, 3).length > 0


class TestNonuniformScheme:
    def test_single_cell_density_identical_to_grid(self):
        d = GridDensity.uniform(1)
        ps = sample_points(d, 200, RandomSeed(9))
        plain = ktsp_grid_scheme(ps, 5)
        restricted = ktsp_nonuniform_scheme(ps, d, 5)
        assert restricted.route.order == plain.route.order
        assert restricted.length == plain.length

    def test_two_level_density_uses_supported_cell(self):
        d = GridDensity(2, [2.0, 2.0, 0.0, 0.0])
        for trial in range(10):
            ps = sample_points(d, 200, RandomSeed(703, trial))
            result = ktsp_nonuniform_scheme(ps, d, 5)
            assert result.density_cell in (0, 1)

    def test_fallback_when_cell_underfilled(self):
        # max-density cell holds 4 points; asking for 6 forces the global scheme
        d = GridDensity(2, [3.0, 1.0, 0.0, 0.0])
        pts = [(0.1, 0.1), (0.2, 0.2), (0.3, 0.1), (0.4, 0.3)] + [
            (0.6 + 0.04 * i, 0.1 + 0.03 * i) for i in range(8)
        ]
        ps = PointSet.from_points(pts)
        result = ktsp_nonuniform_scheme(ps, d, 6)
        assert result.density_cell is None
        assert len(result.route) == 6

    def test_concentration_speedup_matches_substitution(self):
        # a level-f_max cell behaves like f_max * n uniform points
        k = 10
        hi = GridDensity(2, [2.5, 0.5, 0.5, 0.5])
        uni = GridDensity.uniform(2)
        ratios = []
        hi_lengths, uni_lengths = [], []
        for trial in range(300):
            ps_hi = sample_points(hi, 2000, RandomSeed(704, trial))
            ps_uni = sample_points(uni, 2000, RandomSeed(705, trial))
            hi_lengths.append(ktsp_nonuniform_scheme(ps_hi, hi, k).length)
            uni_lengths.append(ktsp_nonuniform_scheme(ps_uni, uni, k).length)
        ratio = np.mean(hi_lengths) / np.mean(uni_lengths)
        predicted = 1.0 / math.sqrt(2.5)
        assert abs(ratio - predicted) <= 0.2 * predicted


class TestRateAndTail:
    def test_rate_examples(self):
        assert ktsp_rate(2, 100, 1.0) == pytest.approx(0.01)
        assert ktsp_rate(3, 16, 1.0) == pytest.approx(0.25)

    def test_rate_area_scaling(self):
        for k, n in ((2, 50), (4, 200), (10, 1000)):
            assert ktsp_rate(k, n, 4.0) == pytest.approx(2 * ktsp_rate(k, n, 1.0))

    def test_rate_exponent_limits(self):
        # exponent is 1 at k=2 and tends to 1/2 as k grows
        assert ktsp_rate(2, 100, 1.0) == pytest.approx(1.0 / 100)
        big_k = 200
        value = ktsp_rate(big_k, 10_000, 1.0)
        assert value == pytest.approx((big_k - 1) / 10_000 ** (0.5 * (1 + 1 / (big_k - 1))))
        exponent = 0.5 * (1 + 1 / (big_k - 1))
        assert abs(exponent - 0.5) < 0.003

    def test_rate_invalid_args(self):
        with pytest.raises(ValueError):
            ktsp_rate(1, 10, 1.0)
        with pytest.raises(ValueError):
            ktsp_rate(3, 2, 1.0)

    def test_tail_bound_zero_threshold(self):
        assert ktsp_tail_bound(2, 10, 1.0, 0.0) == 0.0

    def test_tail_bound_example(self):
        assert ktsp_tail_bound(2, 10, 1.0, 0.05) == pytest.approx(math.pi / 4, rel=1e-12)

    def test_tail_bound_monotone_and_capped(self):
        values = [ktsp_tail_bound(3, 40, 1.0, a) for a in np.linspace(0, 1.0, 30)]
        assert all(a <= b + 1e-15 for a, b in zip(values, values[1:]))
        assert all(0.0 <= v <= 1.0 for v in values)

    def test_tail_bound_no_overflow(self):
        assert ktsp_tail_bound(400, 1000, 1.0, 1e-6) == 0.0
        assert ktsp_tail_bound(400, 1000, 1.0, 100.0) == 1.0

    def test_log_regime_exponential_tail(self):
        # for k of order log n, short paths are exponentially unlikely
        n, k, trials = 10, 5, 800
        threshold = k / (math.e * math.sqrt(math.pi * n))
        d = GridDensity.uniform(1)
        hits = 0
        for trial in range(trials):
            ps = sample_points(d, n, RandomSeed(706, trial))
            if ktsp_exact(ps, k).length <= threshold:
                hits += 1
        freq = hits / trials
        se = math.sqrt(max(freq * (1 - freq), 1.0 / trials) / trials)
        assert freq <= math.exp(-k) + 3 * se
