"""Shrink-perturb-restart driver, run logs and run-time distributions."""

from __future__ import annotations

import bisect
import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .graphhash import ExploredSet
from .model import (
    Configuration,
    Instance,
    SolverParams,
    estimate_initial_radius,
    sample_disk,
    verify_solution,
)
from .optimizer import container_optimize
from .search import Budget, Searcher


@dataclass(frozen=True)
class Event:
    t: float
    radius: float


@dataclass
class RunLog:
    """Improvements of one run, in order; radii strictly decrease."""

    run_id: str = ""
    seed: int = 0
    events: List[Event] = field(default_factory=list)

    def add(self, t: float, radius: float) -> None:
        if self.events and not radius < self.events[-1].radius:
            raise ValueError("run log radii must strictly decrease")
        self.events.append(Event(t, radius))

    def first_time_at_or_below(self, target: float) -> Optional[float]:
        for ev in self.events:
            if ev.radius <= target:
                return ev.t
        return None


LOG_COLUMNS = ("run_id", "seed", "t_seconds", "radius")


def write_run_logs(logs: Iterable[RunLog], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(LOG_COLUMNS)
        for log in logs:
            for ev in log.events:
                w.writerow([log.run_id, log.seed, repr(ev.t), repr(ev.radius)])


def read_run_logs(path) -> List[RunLog]:
    logs: Dict[str, RunLog] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            log = logs.setdefault(row["run_id"], RunLog(row["run_id"], int(row["seed"])))
            log.events.append(Event(float(row["t_seconds"]), float(row["radius"])))
    return list(logs.values())


@dataclass
class RunResult:
    best_radius: float
    best_configuration: Configuration
    elapsed_seconds: float
    seed: int
    ishs_calls: int
    shs_calls: int
    layout_optimizations: int
    log: RunLog
    fallback: bool = False

    @property
    def time_to_best(self) -> float:
        return self.log.events[-1].t if self.log.events else 0.0


def perturb(instance: Instance, xy: np.ndarray, R: float, rng: np.random.Generator) -> np.ndarray:
    """Move between 1 and ``ceil(n/6)`` random circles to uniform spots in the container."""
    n = instance.n
    m = int(rng.integers(1, math.ceil(n / 6) + 1))
    chosen = rng.choice(n, size=m, replace=False)
    out = np.array(xy, dtype=float).reshape(-1, 2)
    out[chosen] = sample_disk(rng, m, R)
    return out.ravel()


class Solver:
    """One run of the restart framework; owns the RNG, the explored set and the incumbent."""

    def __init__(
        self,
        instance: Instance,
        params: SolverParams = SolverParams(),
        budget: Optional[Budget] = None,
        seed: int = 0,
        record_admissions: bool = False,
        on_improvement: Optional[Callable[[float, float], None]] = None,
    ) -> None:
        self.instance = instance
        self.params = params
        self.budget = budget if budget is not None else Budget()
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.search = Searcher(instance, params, self.budget, record_admissions)
        self.explored = ExploredSet()
        self.log = RunLog(f"{instance.name}#{seed}", seed)
        self.on_improvement = on_improvement
        self.best_xy: Optional[np.ndarray] = None
        self.best_R = math.inf
        self.best_fallback = False

    # -- helpers -------------------------------------------------------

    def _random(self, R: float) -> np.ndarray:
        return sample_disk(self.rng, self.instance.n, R).ravel()

    def _contain(self, xy: np.ndarray, R: float):
        self.budget.tick()
        return container_optimize(self.instance, xy, R, self.params)

    def _offer(self, res) -> bool:
        """Adopt a container-optimization result as the run's best if it is feasible and smaller."""
        if not res.R < self.best_R:
            return False
        report = verify_solution(self.instance, Configuration.from_flat(res.xy, res.R), eps1=self.params.eps1)
        if not report.feasible:
            return False
        self.best_xy = res.xy.copy()
        self.best_R = res.R
        self.best_fallback = res.fallback
        self.budget.best_radius = res.R
        t = self.budget.elapsed()
        self.log.add(t, res.R)
        if self.on_improvement is not None:
            self.on_improvement(t, res.R)
        return True

    # -- phases --------------------------------------------------------

    def i_shs(self, R0: float, alpha: float) -> Tuple[Optional[np.ndarray], float]:
        """Shrink, intensify and perturb from a fresh random start.

        Returns the best feasible solution of this call, ``(None, inf)`` if the
        budget ran out before the first one.
        """
        self.search.stats.ishs_calls += 1
        opt = self.search.optimize

        X, _ = opt(self._random(R0), R0)
        first = self._contain(X, R0)
        local_best = first
        self._offer(first)
        R_star = first.R
        R_c = (1.0 - alpha) * min(R0, R_star)
        X, E = opt(X, R_c)
        Xc, Ec = X, E
        unimproved = 0
        while unimproved < self.params.maxiter and not self.budget.expired():
            X, E = self.search.shs(X, E, R_c, self.explored)
            if E < Ec:
                unimproved = 0
                Xc, Ec = X, E
                res = self._contain(X, R_c)
                if res.R < R_star:
                    local_best = res
                    R_star = res.R
                    self._offer(res)
                    R_c = (1.0 - alpha) * min(R0, R_star)
                    X, E = opt(X, R_c)
                    Xc, Ec = X, E
            else:
                unimproved += 1
            if self.budget.expired():
                break
            X, E = opt(perturb(self.instance, Xc, R_c, self.rng), R_c)
        return local_best.xy, local_best.R

    def _rapid(self, R: float):
        X, E = self.search.optimize(self._random(R), R)
        X, E = self.search.shs(X, E, R, self.explored)
        return self._contain(X, R)

    def run(self) -> RunResult:
        p = self.params
        alpha = p.alpha0
        # initialization stage
        R = estimate_initial_radius(self.instance, p.rho0)
        self._offer(self._rapid(R))
        while not self.budget.expired():
            if not self._offer(self._rapid((1.0 - alpha) * self.best_R)):
                break
        # restarting stage
        while not self.budget.expired():
            self.i_shs(self.best_R, alpha)
            alpha = max(p.alpha_min, alpha * p.beta)
        stats = self.search.stats
        return RunResult(
            best_radius=self.best_R,
            best_configuration=Configuration.from_flat(self.best_xy, self.best_R),
            elapsed_seconds=self.budget.elapsed(),
            seed=self.seed,
            ishs_calls=stats.ishs_calls,
            shs_calls=stats.shs_calls,
            layout_optimizations=stats.layout_optimizations,
            log=self.log,
            fallback=self.best_fallback,
        )


def solve(
    instance: Instance,
    params: SolverParams = SolverParams(),
    budget: Optional[Budget] = None,
    seed: int = 0,
    **kwargs,
) -> RunResult:
    """Best feasible packing found within the budget (at least the first feasible one)."""
    return Solver(instance, params, budget, seed, **kwargs).run()


def i_shs(
    instance: Instance,
    R0: float,
    alpha: float,
    explored: Optional[ExploredSet] = None,
    budget: Optional[Budget] = None,
    rng: Optional[np.random.Generator] = None,
    params: SolverParams = SolverParams(),
):
    """Standalone call of one shrink-perturb cycle; returns ``(xy, R, explored)``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    solver = Solver(instance, params, budget)
    if rng is not None:
        solver.rng = rng
    if explored is not None:
        solver.explored = explored
    xy, R = solver.i_shs(R0, alpha)
    return xy, R, solver.explored


# ------------------------------------------------------------------ RTD


class RunTimeDistribution:
    """Fraction of ``n_runs`` runs that succeeded by time ``t`` (right-continuous)."""

    def __init__(self, success_times: Sequence[float], n_runs: int) -> None:
        if n_runs < 1:
            raise ValueError("n_runs must be at least 1")
        if len(success_times) > n_runs:
            raise ValueError("more successes than runs")
        self.times = sorted(float(t) for t in success_times)
        self.n_runs = n_runs

    def __call__(self, t: float) -> float:
        return bisect.bisect_right(self.times, t) / self.n_runs

    def table(self) -> List[Tuple[float, float]]:
        """``(t, P(t))`` at every jump."""
        out: List[Tuple[float, float]] = []
        for k, t in enumerate(self.times, start=1):
            if out and out[-1][0] == t:
                out[-1] = (t, k / self.n_runs)
            else:
                out.append((t, k / self.n_runs))
        return out


def rtd(success_times: Sequence[float], n_runs: int) -> RunTimeDistribution:
    return RunTimeDistribution(success_times, n_runs)
