"""Swap and insert neighborhoods and the hash-deduplicated intensification loops.

Circle indices here are 0-based positions in the ascending radius order.
Every candidate solution is a local minimum of the overlap energy at a fixed
container radius, stored as ``(xy, energy)``.
"""

from __future__ import annotations

import heapq
import itertools
import math
import time
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np

from .graphhash import ExploredSet, Hasher, HashPair, radius_ranking, rattler_mask
from .model import Configuration, Instance, SolverParams
from .optimizer import optimize_layout
from .vacancy import VacancyCircle, detect_all

Solution = Tuple[np.ndarray, float]


class Budget:
    """Wall-clock and/or layout-optimization budget shared by one solver run.

    ``iter_limit`` counts layout optimizations and makes runs reproducible;
    ``target`` lets a run stop as soon as a radius at or below it is reached.
    """

    def __init__(
        self,
        time_limit: Optional[float] = None,
        iter_limit: Optional[int] = None,
        target: Optional[float] = None,
        clock: Callable[[], float] = time.perf_counter,
    ) -> None:
        self.time_limit = time_limit
        self.iter_limit = iter_limit
        self.target = target
        self.clock = clock
        self.start = clock()
        self.optimizations = 0
        self.best_radius = math.inf

    def elapsed(self) -> float:
        return self.clock() - self.start

    def tick(self) -> None:
        self.optimizations += 1

    def reached_target(self) -> bool:
        return self.target is not None and self.best_radius <= self.target

    def expired(self) -> bool:
        if self.reached_target():
            return True
        if self.iter_limit is not None and self.optimizations >= self.iter_limit:
            return True
        return self.time_limit is not None and self.elapsed() >= self.time_limit


def unlimited() -> Budget:
    return Budget()


def build_swap_list(instance: Instance, rattler_set: Iterable[int] = ()) -> List[Tuple[int, int]]:
    """Pairs ``(i, j)``, ``i < j``, whose radius ranks differ by exactly one.

    Pairs of two rattlers are left out.
    """
    ranks = radius_ranking(instance.radii)
    loose = set(rattler_set)
    out = []
    for i, j in itertools.combinations(range(instance.n), 2):
        if abs(ranks[i] - ranks[j]) == 1 and not (i in loose and j in loose):
            out.append((i, j))
    return out


def build_insert_ops(n: int, vacancy_count: int, rattler_set: Iterable[int] = ()) -> List[Tuple[int, int]]:
    """``(circle, vacancy)`` pairs over the smallest ``ceil(n/3)`` circles and largest holes."""
    k = math.ceil(n / 3)
    loose = set(rattler_set)
    return [(i, j) for i in range(k) if i not in loose for j in range(min(k, vacancy_count))]


@dataclass
class SearchStats:
    layout_optimizations: int = 0
    shs_calls: int = 0
    core_calls: int = 0
    ishs_calls: int = 0


class Searcher:
    """Neighborhood moves and intensification for one instance."""

    def __init__(
        self,
        instance: Instance,
        params: SolverParams = SolverParams(),
        budget: Optional[Budget] = None,
        record_admissions: bool = False,
    ) -> None:
        self.instance = instance
        self.params = params
        self.budget = budget if budget is not None else Budget()
        self.hasher = Hasher(instance, params)
        self.stats = SearchStats()
        self.admitted: Optional[List[HashPair]] = [] if record_admissions else None

    # -- basic moves ---------------------------------------------------

    def optimize(self, xy: np.ndarray, R: float) -> Solution:
        self.budget.tick()
        self.stats.layout_optimizations += 1
        res = optimize_layout(self.instance, xy, R, self.params)
        return res.x, res.f

    def rattlers(self, xy: np.ndarray, R: float) -> Set[int]:
        mask = rattler_mask(self.hasher.edges(xy, R), self.instance.n)
        return set(np.flatnonzero(mask).tolist())

    def swap_neighbor(self, xy: np.ndarray, R: float, i: int, j: int) -> Solution:
        out = np.array(xy, dtype=float)
        out[2 * i : 2 * i + 2], out[2 * j : 2 * j + 2] = xy[2 * j : 2 * j + 2], xy[2 * i : 2 * i + 2]
        return self.optimize(out, R)

    def insert_neighbor(self, xy: np.ndarray, R: float, i: int, vacancy: VacancyCircle) -> Solution:
        out = np.array(xy, dtype=float)
        out[2 * i : 2 * i + 2] = vacancy.center
        return self.optimize(out, R)

    def swap_neighborhood(self, xy: np.ndarray, R: float) -> List[Solution]:
        out = []
        for i, j in build_swap_list(self.instance, self.rattlers(xy, R)):
            if self.budget.expired():
                break
            out.append(self.swap_neighbor(xy, R, i, j))
        return out

    def insert_neighborhood(self, xy: np.ndarray, R: float) -> List[Solution]:
        holes = detect_all(self.instance, Configuration.from_flat(xy, R), R, self.params)
        out = []
        for i, j in build_insert_ops(self.instance.n, len(holes), self.rattlers(xy, R)):
            if self.budget.expired():
                break
            out.append(self.insert_neighbor(xy, R, i, holes[j]))
        return out

    # -- intensification ----------------------------------------------

    def shs_core(self, x0: np.ndarray, e0: float, R: float, explored: ExploredSet) -> Solution:
        """Best-first exploration of swap neighborhoods, never admitting a known hash pair."""
        self.stats.core_calls += 1
        eps1 = self.params.eps1
        best_x, best_e = x0, e0
        queue: list = []
        order = itertools.count()
        if self._admit(self.hasher(x0, R), explored):
            heapq.heappush(queue, (e0, next(order), x0))
        unimproved = 0
        while unimproved < self.instance.n and queue:
            e, _, x = heapq.heappop(queue)
            if e < best_e:
                best_x, best_e = x, e
                unimproved = 0
            else:
                unimproved += 1
            if best_e <= eps1 or self.budget.expired():
                break
            for xs, es in self.swap_neighborhood(x, R):
                if self._admit(self.hasher(xs, R), explored):
                    heapq.heappush(queue, (es, next(order), xs))
        return best_x, best_e

    def _admit(self, pair: HashPair, explored: ExploredSet) -> bool:
        if not explored.check_and_insert(pair):
            return False
        if self.admitted is not None:
            self.admitted.append(pair)
        return True

    def shs(self, x0: np.ndarray, e0: float, R: float, explored: ExploredSet) -> Solution:
        """Greedy swap, then greedy insert, then the core; restart from swap after any gain."""
        self.stats.shs_calls += 1
        eps1 = self.params.eps1
        best_x, best_e = x0, e0
        while best_e > eps1 and not self.budget.expired():
            cand = _argmin(self.swap_neighborhood(best_x, R))
            if cand is not None and cand[1] < best_e:
                best_x, best_e = cand
                continue
            if self.budget.expired():
                break
            cand = _argmin(self.insert_neighborhood(best_x, R))
            if cand is not None and cand[1] < best_e:
                best_x, best_e = cand
                continue
            if not self.params.enable_shs_core or self.budget.expired():
                break
            x, e = self.shs_core(best_x, best_e, R, explored)
            if e < best_e:
                best_x, best_e = x, e
                continue
            break
        return best_x, best_e


def _argmin(solutions: Sequence[Solution]) -> Optional[Solution]:
    best = None
    for sol in solutions:
        if best is None or sol[1] < best[1]:
            best = sol
    return best


# thin functional wrappers


def swap_neighbor(instance: Instance, config: Configuration, i: int, j: int, params: SolverParams = SolverParams()) -> Tuple[Configuration, float]:
    xy, e = Searcher(instance, params).swap_neighbor(config.flat(), config.container_radius, i, j)
    return Configuration.from_flat(xy, config.container_radius), e


def insert_neighbor(
    instance: Instance, config: Configuration, i: int, vacancy: VacancyCircle, params: SolverParams = SolverParams()
) -> Tuple[Configuration, float]:
    xy, e = Searcher(instance, params).insert_neighbor(config.flat(), config.container_radius, i, vacancy)
    return Configuration.from_flat(xy, config.container_radius), e
