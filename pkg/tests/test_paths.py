import itertools

import numpy as np
import pytest

from mrbsde import (
    EmptyCloud,
    ForwardSDESpec,
    KappaSpec,
    LengthMismatch,
    SimulationError,
    TerminalSpec,
    TimeGrid,
    empirical_moments,
    empirical_w2_1d,
    simulate_forward,
    w2_dirac_bound,
)
from tests.util import zero_problem


class TestTimeGrid:
    def test_nodes(self):
        grid = TimeGrid(2.0, 4)
        np.testing.assert_allclose(grid.times, [0.0, 0.5, 1.0, 1.5, 2.0])
        assert grid.dt == 0.5
        assert np.all(np.diff(grid.times) > 0)

    def test_invalid(self):
        with pytest.raises(ValueError):
            TimeGrid(0.0, 4)
        with pytest.raises(ValueError):
            TimeGrid(1.0, 0)


class TestSimulateForward:
    def test_deterministic_replay(self):
        spec = zero_problem()
        grid = TimeGrid(1.0, 8)
        a = simulate_forward(spec, grid, 64, seed=42)
        b = simulate_forward(spec, grid, 64, seed=42)
        assert np.array_equal(a.dB, b.dB)
        assert np.array_equal(a.kappa, b.kappa)
        assert np.array_equal(a.xi, b.xi)
        c = simulate_forward(spec, grid, 64, seed=43)
        assert not np.array_equal(a.dB, c.dB)

    def test_zero_kappa(self):
        cloud = simulate_forward(zero_problem(), TimeGrid(1.0, 8), 32, seed=0)
        assert np.all(cloud.kappa == 0.0)
        assert np.all(cloud.mean_kappa == 0.0)

    def test_linear_kappa_terminal_value(self):
        spec = zero_problem(kappa=KappaSpec("linear", rate=2.0))
        cloud = simulate_forward(spec, TimeGrid(1.0, 10), 16, seed=0)
        assert np.allclose(cloud.kappa[:, -1], 2.0)
        assert np.all(cloud.kappa[:, 0] == 0.0)
        assert np.all(np.diff(cloud.mean_kappa) >= 0)

    def test_integral_kappa_nonnegative_nondecreasing(self):
        spec = zero_problem(
            kappa=KappaSpec("integral", h_kind="square", h_scale=0.5),
            forward=ForwardSDESpec(x0=1.0, sigma=0.3),
        )
        cloud = simulate_forward(spec, TimeGrid(1.0, 16), 64, seed=5)
        assert np.all(cloud.kappa[:, 0] == 0.0)
        assert np.all(np.diff(cloud.kappa, axis=1) >= 0.0)

    def test_forward_state_reduces_to_brownian(self):
        spec = zero_problem(
            terminal=TerminalSpec("functional-of-forward", payoff="identity", declared_mean=0.0),
            forward=ForwardSDESpec(x0=0.0, drift_const=0.0, drift_lin=0.0, sigma=1.0),
        )
        cloud = simulate_forward(spec, TimeGrid(1.0, 8), 32, seed=1)
        np.testing.assert_allclose(cloud.forward_state, cloud.brownian[:, :, 0], atol=1e-14)
        np.testing.assert_allclose(cloud.xi, cloud.brownian[:, -1, 0])

    def test_direct_sampler_matches_declared_law(self):
        spec = zero_problem(terminal=TerminalSpec("direct-sampler", mean=1.5, std=2.0, declared_mean=1.5))
        cloud = simulate_forward(spec, TimeGrid(4.0, 8), 200_000, seed=9)
        assert abs(cloud.xi.mean() - 1.5) < 5 * 2.0 / np.sqrt(200_000)
        assert abs(cloud.xi.std() - 2.0) < 0.02

    def test_nonfinite_forward_raises(self):
        spec = zero_problem(
            terminal=TerminalSpec("functional-of-forward", payoff="identity"),
            forward=ForwardSDESpec(x0=1.0, drift_lin=1e200, sigma=0.0),
        )
        with np.errstate(over="ignore"), pytest.raises(SimulationError):
            simulate_forward(spec, TimeGrid(1.0, 4), 8, seed=0)

    def test_debug_checks_accept_healthy_cloud(self):
        cloud = simulate_forward(zero_problem(), TimeGrid(1.0, 16), 20_000, seed=3, debug_checks=True)
        assert cloud.M == 20_000

    def test_minimum_sizes(self):
        with pytest.raises(ValueError):
            simulate_forward(zero_problem(), TimeGrid(1.0, 8), 1, seed=0)
        with pytest.raises(ValueError):
            simulate_forward(zero_problem(), TimeGrid(1.0, 1), 8, seed=0)

    def test_with_terminal_replaces_only_xi(self):
        cloud = simulate_forward(zero_problem(), TimeGrid(1.0, 8), 32, seed=0)
        shifted = cloud.with_terminal(cloud.xi + 1.0)
        assert np.array_equal(shifted.dB, cloud.dB)
        np.testing.assert_allclose(shifted.xi, cloud.xi + 1.0)


class TestEmpiricalMoments:
    def test_all_zero(self):
        mv = empirical_moments(np.zeros(5), np.zeros((5, 1)))
        assert mv.m_y == 0.0 and mv.m_y2 == 0.0
        np.testing.assert_allclose(mv.m_z, [0.0])

    def test_two_point(self):
        mv = empirical_moments(np.array([1.0, 3.0]), np.zeros((2, 1)))
        assert mv.m_y == 2.0
        assert mv.m_y2 == 5.0
        assert mv.m_y2 >= mv.m_y**2

    def test_law_of_large_numbers_band(self):
        rng = np.random.default_rng(7)
        y = rng.standard_normal(1_000_000)
        mv = empirical_moments(y, np.zeros((y.size, 1)))
        assert abs(mv.m_y) < 5e-3
        assert abs(mv.m_y2 - 1.0) < 1e-2

    def test_empty_raises(self):
        with pytest.raises(EmptyCloud):
            empirical_moments(np.array([]), np.zeros((0, 1)))


class TestW2DiracBound:
    def test_zero_cloud(self):
        assert w2_dirac_bound(np.zeros(4), np.zeros((4, 1))) == 0.0

    def test_single_particle_euclidean(self):
        assert w2_dirac_bound(np.array([3.0]), np.array([[4.0]])) == 5.0

    def test_unit_cloud(self):
        assert w2_dirac_bound(np.array([1.0, 1.0]), np.zeros((2, 1))) == 1.0

    def test_dominates_marginal_distance(self):
        rng = np.random.default_rng(21)
        for _ in range(50):
            y = rng.normal(0, 2, 16)
            z = rng.normal(0, 2, (16, 2))
            assert w2_dirac_bound(y, z) >= empirical_w2_1d(y, np.zeros(16)) - 1e-12


class TestEmpiricalW2:
    def test_identical_samples(self):
        a = np.array([0.3, -1.2, 2.0])
        assert empirical_w2_1d(a, a.copy()) == 0.0

    def test_translated_point_mass(self):
        assert empirical_w2_1d(np.array([0.0, 0.0]), np.array([1.0, 1.0])) == 1.0

    def test_brute_force_matching_oracle(self):
        # exact W2 at M = 2 is the best of the two pairings
        a = np.array([0.0, 1.0])
        b = np.array([0.0, 2.0])
        best = min(
            np.sqrt(np.mean((a - np.array(perm)) ** 2)) for perm in itertools.permutations(b)
        )
        assert abs(empirical_w2_1d(a, b) - best) < 1e-15
        assert abs(empirical_w2_1d(a, b) - np.sqrt(0.5)) < 1e-12

    def test_brute_force_on_random_clouds(self):
        rng = np.random.default_rng(4)
        for _ in range(25):
            a, b = rng.normal(0, 1, (2, 5))
            best = min(
                np.sqrt(np.mean((np.sort(a) - np.array(perm)) ** 2))
                for perm in itertools.permutations(b)
            )
            assert abs(empirical_w2_1d(a, b) - best) < 1e-12

    def test_metric_properties_on_small_sets(self):
        rng = np.random.default_rng(17)
        for _ in range(100):
            a, b, c = rng.normal(0, 1, (3, 8))
            dab = empirical_w2_1d(a, b)
            assert dab == empirical_w2_1d(b, a)
            assert dab <= empirical_w2_1d(a, c) + empirical_w2_1d(c, b) + 1e-12
        a = rng.normal(0, 1, 8)
        assert empirical_w2_1d(a, np.sort(a)) == 0.0

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            empirical_w2_1d(np.zeros(3), np.zeros(4))
