import math

import numpy as np
import pytest

from oracles import central_difference
from pucc.model import Configuration, Instance, SolverParams, generate_instance, sample_disk, verify_solution
from pucc.optimizer import (
    AamState,
    LbfgsConfig,
    aam_step,
    augmented_energy,
    container_optimize,
    inflate_to_feasible,
    layout_optimize,
    optimize_layout,
    penalty_objective,
    quadratic_objective,
)
from pucc.penalty import adjacent_pairs, energy_value, full_energy

P = SolverParams()


def inst(*radii):
    return Instance("t", np.array(radii, dtype=float))


def fresh_grad_norm(instance, x, R):
    obj = penalty_objective(instance, R)
    _, g = obj.value_and_grad(x)
    return float(np.linalg.norm(g))


class TestLayoutOptimize:
    def test_feasible_input_unchanged(self):
        x0 = np.array([-1.0, 0.0, 1.0, 0.0])
        res = optimize_layout(inst(1, 1), x0, 2.0, P)
        np.testing.assert_array_equal(res.x, x0)
        assert res.f == 0 and res.iterations <= 1 and res.converged

    def test_two_circles_separate(self):
        res = optimize_layout(inst(1, 1), np.array([-0.1, 0.0, 0.1, 0.0]), 3.0, P)
        assert res.f == 0.0

    def test_quadratic(self):
        a = np.linspace(-3, 4, 12)
        res = layout_optimize(quadratic_objective(a), np.zeros(12), LbfgsConfig())
        assert np.max(np.abs(res.x - a)) < 1e-8
        assert res.iterations <= 24

    def test_stops_with_small_fresh_gradient(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            instance = generate_instance("linear", int(rng.integers(3, 12)))
            R = math.sqrt(np.sum(instance.radii**2) / 0.85)
            res = optimize_layout(instance, sample_disk(rng, instance.n, R).ravel(), R, P)
            if res.converged:
                assert fresh_grad_norm(instance, res.x, R) <= P.eps0

    def test_deterministic(self):
        instance = generate_instance("sqrt", 9)
        x0 = sample_disk(np.random.default_rng(8), 9, 4.0).ravel()
        a = optimize_layout(instance, x0, 4.0, P)
        b = optimize_layout(instance, x0, 4.0, P)
        assert np.array_equal(a.x, b.x) and a.f == b.f

    def test_iteration_cap_flags_unconverged(self):
        instance = generate_instance("linear", 8)
        x0 = sample_disk(np.random.default_rng(0), 8, 5.0).ravel()
        res = layout_optimize(penalty_objective(instance, 5.0), x0, LbfgsConfig(max_iters=2))
        assert res.status_text == "unconverged"

    def test_energy_never_increases(self):
        rng = np.random.default_rng(9)
        instance = generate_instance("inv_sqrt", 10)
        for _ in range(20):
            x0 = sample_disk(rng, 10, 1.5).ravel()
            e0 = full_energy(instance, Configuration.from_flat(x0, 1.5))
            assert optimize_layout(instance, x0, 1.5, P).f <= e0

    def test_bad_config(self):
        with pytest.raises(ValueError):
            LbfgsConfig(wolfe_c1=0.9, wolfe_c2=0.1)


class TestAam:
    def _state(self, cnt, length):
        instance = inst(1, 1)
        xy = np.array([0.0, 0.0, 2.5, 0.0])
        start = AamState.start(instance, xy)
        return instance, xy, AamState(cnt, length, start.gamma)

    def test_defer(self):
        instance, xy, s = self._state(0, 4)
        out = aam_step(s, instance, xy)
        assert (out.cnt, out.length) == (1, 4)

    def test_unchanged_doubles(self):
        instance, xy, s = self._state(3, 4)
        out = aam_step(s, instance, xy)
        assert (out.cnt, out.length) == (0, 8)

    def test_changed_resets(self):
        instance, xy, s = self._state(3, 4)
        moved = np.array([0.0, 0.0, 9.0, 0.0])
        out = aam_step(s, instance, moved)
        assert (out.cnt, out.length) == (0, 1)
        assert out.gamma.shape == (0, 2)

    def test_rebuild_matches_direct_construction(self):
        rng = np.random.default_rng(10)
        instance = generate_instance("linear", 10)
        xy = sample_disk(rng, 10, 12.0).ravel()
        s = AamState.start(instance, xy)
        for _ in range(200):
            xy = xy + rng.normal(0, 0.3, xy.size)
            rebuilt = s.cnt + 1 >= s.length
            s = aam_step(s, instance, xy)
            assert 0 <= s.cnt <= s.length and s.length & (s.length - 1) == 0
            if rebuilt:
                np.testing.assert_array_equal(s.gamma, adjacent_pairs(xy, instance.radii, instance.r_max))


class TestAugmented:
    def test_value(self):
        f, _ = augmented_energy(inst(1), np.array([0.0, 0.0, 2.0]), 1e-3)
        assert f == pytest.approx(4e-3, abs=1e-18)

    def test_radius_derivative_without_overlap(self):
        _, g = augmented_energy(inst(1), np.array([0.0, 0.0, 2.0]), 1e-3)
        assert g[-1] == pytest.approx(2 * 1e-3 * 2.0)

    def test_dimension(self):
        with pytest.raises(ValueError):
            augmented_energy(inst(1, 2), np.zeros(4), 1e-3)

    def test_finite_differences(self):
        rng = np.random.default_rng(11)
        for _ in range(500):
            instance = Instance("r", rng.uniform(0.2, 2.0, 8))
            R = math.sqrt(np.sum(instance.radii**2) / rng.uniform(0.5, 1.1))
            z = np.append(rng.uniform(-R, R, 16), R)
            rho = float(rng.uniform(1e-4, 1.0))
            adj = adjacent_pairs(z[:-1].copy(), instance.radii, instance.r_max)
            _, g = augmented_energy(instance, z, rho, adj)
            fd = central_difference(lambda v: augmented_energy(instance, v, rho, adj)[0], z)
            assert np.linalg.norm(g - fd) <= 1e-5 * max(np.linalg.norm(fd), 1e-8)


class TestContainer:
    def test_single(self):
        res = container_optimize(inst(1), np.array([0.3, 0.0]), 2.0, P)
        assert not res.fallback and res.energy <= P.eps1
        assert 1.0 <= res.R <= 1.0 + 1e-4

    def test_two_tangent(self):
        res = container_optimize(inst(1, 1), np.array([-0.7, 0.01, 0.6, -0.02]), 2.5, P)
        assert 2.0 - 1e-12 <= res.R <= 2.0 + 1e-4

    def test_already_feasible(self):
        res = container_optimize(inst(1, 1), np.array([-1.0, 0.0, 1.0, 0.0]), 2.0, P)
        assert res.R <= 2.0 and res.energy <= P.eps1

    def test_result_feasible_from_random_starts(self):
        rng = np.random.default_rng(12)
        for _ in range(10):
            instance = generate_instance("linear", int(rng.integers(2, 9)))
            R = math.sqrt(np.sum(instance.radii**2) / 0.8)
            xy = optimize_layout(instance, sample_disk(rng, instance.n, R).ravel(), R, P).x
            res = container_optimize(instance, xy, R, P)
            c = Configuration.from_flat(res.xy, res.R)
            assert verify_solution(instance, c).feasible
            assert verify_solution(instance, c).max_depth <= math.sqrt(P.eps1)
            assert res.R >= math.sqrt(np.sum(instance.radii**2))

    def test_energy_matches_fresh_evaluation(self):
        instance = generate_instance("linear", 5)
        rng = np.random.default_rng(1)
        res = container_optimize(instance, sample_disk(rng, 5, 9.5).ravel(), 9.5, P)
        pairs = adjacent_pairs(res.xy, instance.radii, instance.r_max)
        assert res.energy == energy_value(res.xy, instance.radii, res.R, pairs)

    def test_inflate(self):
        instance = inst(1, 2, 3)
        xy, R = inflate_to_feasible(instance, np.zeros(6))
        rep = verify_solution(instance, Configuration.from_flat(xy, R))
        assert rep.max_depth == 0.0

    def test_round_cap_falls_back(self):
        tight = SolverParams(sumt_max_rounds=1)
        instance = generate_instance("linear", 6)
        xy = sample_disk(np.random.default_rng(3), 6, 3.0).ravel()
        res = container_optimize(instance, xy, 3.0, tight)
        assert res.fallback
        assert verify_solution(instance, Configuration.from_flat(res.xy, res.R)).max_depth == 0.0
