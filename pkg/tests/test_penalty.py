import math

import numpy as np
import pytest

from pucc.model import Configuration, Instance, generate_instance, verify_solution
from oracles import central_difference
from pucc.penalty import (
    boundary_depth,
    build_adjacency,
    energy,
    energy_gradient,
    full_energy,
    is_feasible,
    pair_depth,
)


def inst(*radii):
    return Instance("t", np.array(radii, dtype=float))


def cfg(centers, R):
    return Configuration(np.array(centers, dtype=float), R)


def random_state(rng, n=None):
    n = n or int(rng.integers(2, 16))
    instance = Instance("r", rng.uniform(0.2, 2.0, n))
    R = math.sqrt(np.sum(instance.radii**2) / rng.uniform(0.5, 1.1))
    return instance, Configuration(rng.uniform(-R, R, (n, 2)), R)


class TestAdjacency:
    def test_close_pair(self):
        assert build_adjacency(inst(1, 1), cfg([[0, 0], [2.5, 0]], 5)).neighbors == [[1], [0]]

    def test_far_pair(self):
        assert build_adjacency(inst(1, 1), cfg([[0, 0], [3.5, 0]], 5)).neighbors == [[], []]

    def test_largest_radius_branch(self):
        # threshold max(0.5, 8/4) + 1 = 3
        a = build_adjacency(inst(0.5, 0.5, 8), cfg([[0, 0], [2.99, 0], [100, 0]], 200))
        b = build_adjacency(inst(0.5, 0.5, 8), cfg([[0, 0], [3.01, 0], [100, 0]], 200))
        assert a.neighbors[0] == [1] and b.neighbors[0] == []

    def test_threshold_is_strict(self):
        assert build_adjacency(inst(1, 1), cfg([[0, 0], [3.0, 0]], 5)).neighbors == [[], []]

    def test_symmetric_no_self_loops_and_dominates_overlap(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            instance, config = random_state(rng)
            nb = build_adjacency(instance, config).neighbors
            for i, lst in enumerate(nb):
                assert i not in lst
                assert all(i in nb[j] for j in lst)
            c, r = config.centers, instance.radii
            for i in range(instance.n):
                for j in range(i + 1, instance.n):
                    if pair_depth(c[i], r[i], c[j], r[j]) > 0:
                        assert j in nb[i]


class TestDepths:
    def test_coincident(self):
        assert pair_depth((0, 0), 1, (0, 0), 1) == 2

    def test_boundary(self):
        assert boundary_depth((2, 0), 1, 2) == 1

    def test_tangent(self):
        assert pair_depth((0, 0), 1, (2, 0), 1) == 0


class TestEnergy:
    def _e(self, instance, config):
        return energy(instance, config, build_adjacency(instance, config))

    def test_single_contained(self):
        assert self._e(inst(1), cfg([[0, 0]], 1)) == 0

    def test_coincident_pair(self):
        assert self._e(inst(1, 1), cfg([[0, 0], [0, 0]], 2)) == 4

    def test_pair_and_boundary(self):
        assert self._e(inst(1, 1), cfg([[-0.5, 0], [0.5, 0]], 1.2)) == pytest.approx(1.18, abs=1e-14)

    def test_fresh_adjacency_matches_full_loop_exactly(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            instance, config = random_state(rng)
            assert full_energy(instance, config) == verify_solution(instance, config).energy

    def test_rigid_motion_invariance(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            instance, config = random_state(rng)
            t = rng.uniform(0, 2 * math.pi)
            rot = np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])
            flip = np.diag([1.0, -1.0]) if rng.random() < 0.5 else np.eye(2)
            moved = Configuration(config.centers @ (rot @ flip).T, config.container_radius)
            a, b = full_energy(instance, config), full_energy(instance, moved)
            assert abs(a - b) <= 1e-12 * max(a, 1e-300)


class TestGradient:
    def test_boundary_only(self):
        instance, config = inst(1), cfg([[2, 0]], 2)
        np.testing.assert_array_equal(energy_gradient(instance, config, build_adjacency(instance, config)), [2, 0])

    def test_feasible_is_zero(self):
        instance, config = inst(1, 1), cfg([[-1, 0], [1, 0]], 2)
        assert not np.any(energy_gradient(instance, config, build_adjacency(instance, config)))

    def test_degenerate_points_give_zero(self):
        instance, config = inst(1, 1), cfg([[0, 0], [0, 0]], 0.5)
        assert not np.any(energy_gradient(instance, config, build_adjacency(instance, config)))

    def test_pair_term_formula(self):
        instance, config = inst(1, 1), cfg([[-0.5, 0], [0.5, 0]], 10)
        g = energy_gradient(instance, config, build_adjacency(instance, config))
        # d = 1, unit vector from j to i is (-1, 0)
        np.testing.assert_allclose(g, [2, 0, -2, 0])

    def test_finite_differences(self):
        rng = np.random.default_rng(4)
        checked = 0
        for _ in range(500):
            instance, config = random_state(rng, n=10)
            adj = build_adjacency(instance, config)

            def f(x):
                return energy(instance, Configuration.from_flat(x, config.container_radius), adj)

            x = config.flat()
            g = energy_gradient(instance, config, adj)
            fd = central_difference(f, x)
            assert np.linalg.norm(g - fd) <= 1e-5 * max(np.linalg.norm(fd), 1e-8)
            checked += 1
        assert checked == 500


class TestFeasible:
    def test_tangent(self):
        assert is_feasible(inst(1, 1), cfg([[-1, 0], [1, 0]], 2))

    def test_depth_1e12_rejected(self):
        assert not is_feasible(inst(1, 1), cfg([[-1 + 1e-12, 0], [1, 0]], 3))

    def test_depth_1e13_accepted(self):
        assert is_feasible(inst(1, 1), cfg([[-1 + 1e-13, 0], [1, 0]], 3))


def test_shipped_family_energy_zero_when_spread():
    instance = generate_instance("linear", 4)
    config = cfg([[-30, 0], [30, 0], [0, 30], [0, -30]], 40)
    assert full_energy(instance, config) == 0
