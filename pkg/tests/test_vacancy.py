import math
from importlib import resources

import numpy as np
import pytest

from oracles import P, central_difference, compact_layout, relative_error
from pucc.model import Configuration, Instance, read_instance, read_solution
from pucc.penalty import probe_pairs
from pucc.vacancy import (
    VacancyCircle,
    build_voronoi,
    clearance,
    detect_all,
    detect_vacancy,
    merge_vacancies,
    probe_vacancy,
    seed_points,
    vacancy_energy,
)

SODDY = 2 / math.sqrt(3) - 1


def triangle(side=2.0, shift=(0.0, 0.0)):
    h = side / math.sqrt(3)
    pts = np.array([[h * math.cos(a), h * math.sin(a)] for a in (math.pi / 2, 7 * math.pi / 6, 11 * math.pi / 6)])
    return pts + np.asarray(shift)


def depths(centers, radii, R, v):
    c = np.asarray(centers).reshape(-1, 2)
    pair = np.maximum(0.0, v.radius + radii - np.hypot(c[:, 0] - v.center[0], c[:, 1] - v.center[1]))
    wall = max(0.0, math.hypot(*v.center) + v.radius - R)
    return max(float(pair.max()) if pair.size else 0.0, wall)


class TestObjective:
    def test_empty_container(self):
        f, g = vacancy_energy(np.empty((0, 2)), np.empty(0), 5.0, [0.0, 0.0, 0.0], 0.3)
        assert f == 0.0 and g[2] == -0.3

    def test_coincident_circle(self):
        f, _ = vacancy_energy(np.zeros((1, 2)), np.array([1.0]), 5.0, [0.0, 0.0, 0.0], 0.3)
        assert f == 1.0

    def test_finite_differences(self):
        rng = np.random.default_rng(0)
        for _ in range(500):
            n = int(rng.integers(1, 12))
            radii = np.sort(rng.uniform(0.2, 2.0, n))
            R = math.sqrt(np.sum(radii**2) / 0.7)
            centers = rng.uniform(-R, R, (n, 2))
            u = np.array([*rng.uniform(-R, R, 2), rng.uniform(-1.5, 1.5)])
            rho = float(rng.uniform(0.05, 1.0))
            # freeze the neighbor set so differencing sees one smooth function
            adj = probe_pairs(u, centers.ravel(), radii, float(radii.max()))
            _, g = vacancy_energy(centers, radii, R, u, rho, adj)
            fd = central_difference(lambda v: vacancy_energy(centers, radii, R, v, rho, adj)[0], u)
            assert relative_error(g, fd) < 1e-5


class TestVoronoi:
    def test_equilateral(self):
        d = build_voronoi(triangle())
        assert d.vertices.shape == (1, 2)
        np.testing.assert_allclose(d.vertices[0], [0, 0], atol=1e-12)
        assert d.vertex_sites == [(0, 1, 2)]

    def test_two_sites(self):
        d = build_voronoi(np.array([[-1.0, 0.0], [1.0, 0.0]]))
        assert d.vertices.shape == (0, 2) and len(d.edges) == 1 and d.edges[0].sites == (0, 1)

    def test_square(self):
        d = build_voronoi(np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float))
        assert 1 <= len(d.vertices) <= 2
        assert np.all(np.hypot(*(d.vertices - 0.5).T) <= 1e-9)

    def test_collinear(self):
        d = build_voronoi(np.array([[0, 0], [1, 1], [3, 3]], dtype=float))
        assert d.vertices.shape == (0, 2) and len(d.edges) == 2

    def test_equidistance(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            sites = rng.uniform(-10, 10, (int(rng.integers(3, 40)), 2))
            d = build_voronoi(sites)
            for v, owners in zip(d.vertices, d.vertex_sites):
                dist = np.hypot(*(sites - v).T)
                own = dist[list(owners)]
                assert own.max() - own.min() <= 1e-9 * max(1.0, own.max())
                assert dist.min() >= own.min() - 1e-9 * max(1.0, own.max())


class TestSeeds:
    def test_circumcenter(self):
        cfg = Configuration(triangle(), 5.0)
        seeds = seed_points(cfg, 5.0)
        assert any(math.hypot(*s) < 1e-12 for s in seeds)

    def test_outside_vertex_excluded(self):
        cfg = Configuration(triangle(shift=(11.0, 0.0)), 10.0)
        seeds = seed_points(cfg, 10.0)
        assert all(math.hypot(s[0] - 11.0, s[1]) > 1e-6 for s in seeds)

    def test_two_symmetric_sites(self):
        cfg = Configuration([[-1.0, 0.0], [1.0, 0.0]], 3.0)
        seeds = sorted(seed_points(cfg, 3.0), key=lambda s: s[1])
        assert len(seeds) == 2
        np.testing.assert_allclose(seeds, [[0, -3], [0, 3]], atol=1e-12)

    def test_single_circle_ring(self):
        seeds = seed_points(Configuration([[0.0, 0.0]], 3.0), 3.0, r_first=1.0)
        assert len(seeds) == 8
        np.testing.assert_allclose([math.hypot(*s) for s in seeds], 2.0)

    def test_deduplicated(self):
        cfg = Configuration(np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float) - 0.5, 3.0)
        seeds = seed_points(cfg, 3.0)
        for a in range(len(seeds)):
            for b in range(a + 1, len(seeds)):
                assert math.dist(seeds[a], seeds[b]) > 1e-9


class TestDetect:
    def test_annulus(self):
        v = probe_vacancy(np.zeros((1, 2)), np.array([1.0]), 3.0, (2.5, 0.0), P)
        assert math.dist((*v.center, v.radius), (2.0, 0.0, 1.0)) < 1e-2

    def test_soddy(self):
        c = triangle()
        seed = tuple(c.mean(axis=0))
        v = probe_vacancy(c, np.ones(3), 10.0, seed, P)
        assert abs(v.radius - SODDY) < 1e-2
        assert math.hypot(*v.center) < 1e-2

    def test_empty_container(self):
        v = probe_vacancy(np.empty((0, 2)), np.empty(0), 3.0, (0.0, 0.0), P)
        assert abs(v.radius - 3.0) < 1e-2

    def test_detect_vacancy_wrapper(self):
        instance = Instance("one", np.array([1.0]))
        v = detect_vacancy(instance, Configuration([[0.0, 0.0]], 3.0), 3.0, (0.0, 2.5), P)
        assert abs(v.radius - 1.0) < 1e-2

    def test_single_circle_all(self):
        instance = Instance("one", np.array([1.0]))
        found = detect_all(instance, Configuration([[0.0, 0.0]], 3.0))
        assert 1 <= len(found) <= 8
        assert all(abs(v.radius - 1.0) < 1e-2 for v in found)

    def test_shipped_solution_largest_hole_matches_grid_search(self):
        base = resources.files("pucc") / "data"
        instance = read_instance(base / "linear_5.txt")
        _, cfg = read_solution(base / "linear_5.sol")
        found = detect_all(instance, cfg)
        R = cfg.container_radius
        g = np.linspace(-R, R, 2001)
        X, Y = np.meshgrid(g, g)
        best = R - np.hypot(X, Y)
        for (cx, cy), r in zip(cfg.centers, instance.radii):
            best = np.minimum(best, np.hypot(X - cx, Y - cy) - r)
        assert abs(found[0].radius - best.max()) < 1e-2

    def test_reported_holes_do_not_overlap(self):
        rng = np.random.default_rng(2)
        for k in range(20):
            instance, cfg = compact_layout(rng, ("linear", "inv_sqrt", "sqrt")[k % 3], int(rng.integers(3, 15)), 0.7)
            found = detect_all(instance, cfg)
            radii = [v.radius for v in found]
            assert radii == sorted(radii, reverse=True)
            for v in found:
                assert v.radius > 0
                assert depths(cfg.centers, instance.radii, cfg.container_radius, v) <= 1e-6

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        instance, cfg = compact_layout(rng, "linear", 9, 0.75)
        assert detect_all(instance, cfg) == detect_all(instance, cfg)


def test_clearance():
    c = np.array([[0.0, 0.0]])
    assert clearance(c, np.array([1.0]), 3.0, (2.0, 0.0)) == pytest.approx(1.0)
    assert clearance(c, np.array([1.0]), 3.0, (0.5, 0.0)) == pytest.approx(-0.5)


def test_merge_orders_and_dedupes():
    vs = [
        VacancyCircle((1.0, 0.0), 0.5),
        VacancyCircle((1.0 + 1e-8, 0.0), 0.5),
        VacancyCircle((-1.0, 0.0), 0.5),
        VacancyCircle((0.0, 3.0), 0.9),
    ]
    out = merge_vacancies(vs)
    assert [v.center for v in out] == [(0.0, 3.0), (-1.0, 0.0), (1.0, 0.0)]
