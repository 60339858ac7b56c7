import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from robustmoments import (
    ConfigError,
    DatabaseTooSmallError,
    MedianParams,
    ValueGrid,
    private_median,
    round_to_grid,
)
from robustmoments.dpmedian import rank_deficit, rank_utilities

# chi-squared 0.999 quantile at 3 degrees of freedom (4 outcomes)
CHI2_999_DF3 = 16.266


def grid_by_enumeration(alpha: float, tau: float) -> list[float]:
    """Independent grid constructor: multiply the ratio until tau."""
    ratio = 1.0 + alpha / 3.0
    points = [0.0]
    g = 1.0
    while g < tau:
        points.append(g)
        g *= ratio
    return points


def naive_utility(values, x) -> float:
    below = sum(1 for s in values if s < x)
    above = sum(1 for s in values if s > x)
    half = len(values) / 2.0
    return -max(0.0, below - half, above - half)


class TestValueGrid:
    @pytest.mark.parametrize("alpha,tau", [(0.3, 100.0), (0.5, 17.0), (0.1, 2.0), (0.9, 1e6)])
    def test_matches_enumeration(self, alpha, tau):
        grid = ValueGrid(alpha, tau)
        expected = grid_by_enumeration(alpha, tau)
        assert len(grid) == len(expected)
        assert np.allclose(grid.values, expected)

    @pytest.mark.parametrize("alpha,tau", [(0.3, 100.0), (0.5, 1000.0), (0.25, 64.0)])
    def test_size_formula(self, alpha, tau):
        grid = ValueGrid(alpha, tau)
        ratio = 1.0 + alpha / 3.0
        assert len(grid) == 1 + math.ceil(math.log(tau) / math.log(ratio) - 1e-12)

    def test_strictly_increasing(self):
        grid = ValueGrid(0.4, 500.0)
        assert np.all(np.diff(grid.values) > 0)

    def test_round_examples(self):
        grid = ValueGrid(0.3, 100.0)
        assert grid.round_up(0.0) == 0.0
        assert grid.round_up(1.0) == 1.0
        assert grid.round_up(1.05) == pytest.approx(1.1)

    def test_round_by_enumeration_oracle(self):
        grid = ValueGrid(0.3, 100.0)
        pts = grid_by_enumeration(0.3, 100.0)
        for x in [0.4, 1.0, 2.7, 31.9, 80.0]:
            expected = min(g for g in pts if g >= x)
            assert grid.round_up(x) == pytest.approx(expected)

    def test_small_positive_rounds_to_one(self):
        assert ValueGrid(0.3, 100.0).round_up(1e-9) == 1.0

    def test_above_tau_truncates_to_top(self):
        grid = ValueGrid(0.3, 100.0)
        assert grid.round_up(1e9) == grid.values[-1]

    def test_negative_rejected(self):
        with pytest.raises(ConfigError):
            ValueGrid(0.3, 100.0).round_up(-1.0)

    @given(xs=st.lists(st.floats(0, 1e4), min_size=1, max_size=30))
    def test_array_round_matches_scalar(self, xs):
        grid = ValueGrid(0.4, 1000.0)
        vec = grid.round_up_array(np.asarray(xs))
        assert list(vec) == [grid.round_up(x) for x in xs]

    def test_round_is_idempotent(self):
        grid = ValueGrid(0.25, 5000.0)
        for x in grid.values:
            assert grid.round_up(float(x)) == x

    def test_round_to_grid_alias(self):
        grid = ValueGrid(0.3, 100.0)
        assert round_to_grid(1.05, grid) == grid.round_up(1.05)


class TestRankUtility:
    @given(
        data=st.lists(st.integers(0, 3), min_size=1, max_size=5),
        extra=st.integers(0, 3),
    )
    def test_matches_naive_and_sensitivity(self, data, extra):
        grid = ValueGrid(0.9, 3.0)  # tiny grid: {0, 1, 1.3, 1.69}
        values = [float(grid.values[i]) for i in data]
        utils = rank_utilities(values, grid)
        for j, x in enumerate(grid.values):
            assert utils[j] == pytest.approx(naive_utility(values, x))
        # add/remove-one adjacency changes the utility by at most 1
        neighbors = [values + [float(grid.values[extra])]]
        neighbors += [values[:i] + values[i + 1 :] for i in range(len(values))]
        for other in neighbors:
            if not other:
                continue
            other_utils = rank_utilities(other, grid)
            assert np.max(np.abs(other_utils - utils)) <= 1.0 + 1e-12


class TestPrivateMedian:
    def test_unanimous_database(self):
        grid = ValueGrid(0.3, 100.0)
        params = MedianParams(0.5, 0.1)
        rng = np.random.default_rng(11)
        v = grid.round_up(5.0)
        hits = sum(private_median([v] * 500, grid, params, rng) == v for _ in range(500))
        assert hits / 500 >= 1 - params.delta

    def test_two_point_database_lands_in_interval(self):
        grid = ValueGrid(0.3, 100.0)
        params = MedianParams(0.5, 0.1)
        rng = np.random.default_rng(12)
        a = grid.round_up(2.0)
        b = grid.round_up(20.0)
        db = [a] * 250 + [b] * 250
        hits = 0
        for _ in range(500):
            out = private_median(db, grid, params, rng)
            hits += a <= out <= b
        assert hits / 500 >= 1 - params.delta

    def test_output_always_on_grid(self):
        grid = ValueGrid(0.5, 50.0)
        params = MedianParams(1.0, 0.2)
        rng = np.random.default_rng(13)
        db = list(grid.round_up_array(np.linspace(0, 60, 40)))
        for _ in range(200):
            assert private_median(db, grid, params, rng) in grid.values

    def test_database_too_small(self):
        grid = ValueGrid(0.3, 100.0)
        params = MedianParams(0.5, 0.1)
        with pytest.raises(DatabaseTooSmallError):
            private_median([1.0] * 10, grid, params, np.random.default_rng(0))

    def test_rank_error_bound(self):
        grid = ValueGrid(0.5, 200.0)
        params = MedianParams(0.5, 0.1)
        rng = np.random.default_rng(14)
        data = list(grid.round_up_array(np.geomspace(1, 150, 400)))
        gamma = params.gamma_bound(len(grid))
        bad = sum(
            rank_deficit(private_median(data, grid, params, rng), data) > gamma
            for _ in range(300)
        )
        assert bad / 300 <= params.delta + 0.03

    def test_gumbel_argmax_matches_softmax(self):
        # 4-point grid with fixed utilities: the noisy argmax must follow
        # the exponential-mechanism softmax distribution
        grid = ValueGrid(0.9, 2.0)
        assert len(grid) == 4
        epsilon = 1.0
        db = [float(grid.values[1])] * 6 + [float(grid.values[2])] * 14
        scores = rank_utilities(db, grid) * (epsilon / 2.0)
        probs = np.exp(scores - scores.max())
        probs /= probs.sum()
        rng = np.random.default_rng(15)
        trials = 40000
        counts = np.zeros(len(grid))
        params = MedianParams(epsilon, 0.3, c_s=0.0001)
        for _ in range(trials):
            out = private_median(db, grid, params, rng)
            counts[list(grid.values).index(out)] += 1
        expected = probs * trials
        chi2 = float(np.sum((counts - expected) ** 2 / np.maximum(expected, 1e-9)))
        assert chi2 < CHI2_999_DF3

    def test_determinism(self):
        grid = ValueGrid(0.3, 100.0)
        params = MedianParams(0.5, 0.1)
        db = [grid.round_up(3.0)] * 300 + [grid.round_up(9.0)] * 200
        a = [private_median(db, grid, params, np.random.default_rng(99)) for _ in range(10)]
        b = [private_median(db, grid, params, np.random.default_rng(99)) for _ in range(10)]
        assert a == b


class TestMedianParams:
    def test_bounds_formulas(self):
        params = MedianParams(0.5, 0.1, c_gamma=4.0, c_s=8.0)
        assert params.gamma_bound(64) == pytest.approx(8 * math.log(640))
        assert params.min_db_size(64) == math.ceil(16 * math.log(640))

    def test_validation(self):
        with pytest.raises(ConfigError):
            MedianParams(0.0, 0.1)
        with pytest.raises(ConfigError):
            MedianParams(0.5, 1.0)
