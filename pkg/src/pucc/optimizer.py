"""L-BFGS with adaptive adjacency maintenance, and penalty-driven container shrinking.

The compiled minimizer handles a small closed set of objectives, selected by
an integer kind so that everything stays cacheable. Every objective is
described by the same four arrays:

=========  ===============  ======================  =====================
kind       radii            consts                  fixed
=========  ===============  ======================  =====================
LAYOUT     circle radii     ``[R, r_max]``          unused
CONTAINER  circle radii     ``[rho, r_max]``        unused (``R = x[-1]``)
PROBE      packed radii     ``[R, rho, r_max]``     packed centers (flat)
QUADRATIC  unused           unused                  target point
=========  ===============  ======================  =====================

Neighbor structures are ``(m, 2)`` int64 arrays. They are refreshed on an
exponential back-off schedule: a rebuild that changes nothing doubles the
wait before the next one, a rebuild that changes something resets it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from numba import njit

from .model import Instance, SolverParams
from .penalty import adjacent_pairs, energy_grad_into, energy_value, probe_fg, probe_pairs

LAYOUT = 0
CONTAINER = 1
PROBE = 2
QUADRATIC = 3

CONVERGED = 0
MAX_ITERS = 1
LINE_SEARCH_FAILED = 2

_STATUS_TEXT = {CONVERGED: "converged", MAX_ITERS: "unconverged", LINE_SEARCH_FAILED: "stalled"}

_EMPTY = np.empty(0)


@njit(cache=True)
def objective_fg(kind, x, radii, consts, fixed, adj):
    if kind == LAYOUT:
        g = np.zeros_like(x)
        e, _ = energy_grad_into(x, radii, consts[0], adj, g)
        return e, g
    if kind == CONTAINER:
        rho = consts[0]
        last = x.shape[0] - 1
        R = x[last]
        g = np.zeros_like(x)
        e, boundary_sum = energy_grad_into(x, radii, R, adj, g)
        g[last] = 2.0 * rho * R - 2.0 * boundary_sum
        return e + rho * R * R, g
    if kind == PROBE:
        return probe_fg(x, fixed, radii, consts[0], consts[1], adj)
    diff = x - fixed
    return np.dot(diff, diff), 2.0 * diff


@njit(cache=True)
def objective_build(kind, x, radii, consts, fixed):
    if kind == LAYOUT or kind == CONTAINER:
        return adjacent_pairs(x, radii, consts[1])
    if kind == PROBE:
        return probe_pairs(x, fixed, radii, consts[2])
    return np.empty((0, 2), dtype=np.int64)


@njit(cache=True)
def objective_project(kind, x, radii, consts):
    """Clamp ``x`` in place; True when it changed. Keeps ``R >= r_max``."""
    if kind == CONTAINER:
        last = x.shape[0] - 1
        if x[last] < consts[1]:
            x[last] = consts[1]
            return True
    return False


@njit(cache=True)
def same_adjacency(a, b):
    if a.shape != b.shape:
        return False
    return np.all(a == b)


@njit(cache=True)
def aam_update(cnt, length, adj, x, kind, radii, consts, fixed):
    """One deferred-maintenance tick. Returns (cnt, length, adj, changed)."""
    cnt += 1
    if cnt >= length:
        fresh = objective_build(kind, x, radii, consts, fixed)
        if same_adjacency(fresh, adj):
            return 0, 2 * length, adj, False
        return 0, 1, fresh, True
    return cnt, length, adj, False


@njit(cache=True)
def _cubic_min(a, fa, da, b, fb, db):
    """Minimizer of the cubic through (a, fa, da) and (b, fb, db), or nan."""
    d1 = da + db - 3.0 * (fa - fb) / (a - b)
    disc = d1 * d1 - da * db
    if disc < 0.0:
        return np.nan
    d2 = math.sqrt(disc)
    if b < a:
        d2 = -d2
    denom = db - da + 2.0 * d2
    if denom == 0.0:
        return np.nan
    return b - (b - a) * (db + d2 - d1) / denom


@njit(cache=True)
def _wolfe_search(x, f0, g0, d, step, kind, radii, consts, fixed, adj, c1, c2):
    """Strong Wolfe line search with cubic interpolation.

    Returns (ok, alpha, f, g). If the bracket collapses, the best point with
    sufficient decrease is accepted instead.
    """
    dphi0 = np.dot(g0, d)
    a_prev = 0.0
    f_prev = f0
    dphi_prev = dphi0
    g_prev = g0
    a = step
    lo = 0.0
    hi = 0.0
    flo = f0
    fhi = 0.0
    dlo = dphi0
    dhi = 0.0
    glo = g0
    bracketed = False
    for it in range(40):
        fa, ga = objective_fg(kind, x + a * d, radii, consts, fixed, adj)
        dphi = np.dot(ga, d)
        if fa > f0 + c1 * a * dphi0 or (it > 0 and fa >= f_prev):
            lo, flo, dlo, glo = a_prev, f_prev, dphi_prev, g_prev
            hi, fhi, dhi = a, fa, dphi
            bracketed = True
            break
        if abs(dphi) <= -c2 * dphi0:
            return True, a, fa, ga
        if dphi >= 0.0:
            lo, flo, dlo, glo = a, fa, dphi, ga
            hi, fhi, dhi = a_prev, f_prev, dphi_prev
            bracketed = True
            break
        a_prev, f_prev, dphi_prev, g_prev = a, fa, dphi, ga
        a = 4.0 * a
    if not bracketed:
        if f_prev < f0:
            return True, a_prev, f_prev, g_prev
        return False, 0.0, f0, g0
    for _ in range(40):
        if abs(hi - lo) <= 1e-16 * max(1.0, abs(lo)):
            break
        t = _cubic_min(lo, flo, dlo, hi, fhi, dhi)
        left = min(lo, hi)
        right = max(lo, hi)
        margin = 0.1 * (right - left)
        if not (t > left + margin and t < right - margin):
            t = 0.5 * (lo + hi)
        ft, gt = objective_fg(kind, x + t * d, radii, consts, fixed, adj)
        dt = np.dot(gt, d)
        if ft > f0 + c1 * t * dphi0 or ft >= flo:
            hi, fhi, dhi = t, ft, dt
        else:
            if abs(dt) <= -c2 * dphi0:
                return True, t, ft, gt
            if dt * (hi - lo) >= 0.0:
                hi, fhi, dhi = lo, flo, dlo
            lo, flo, dlo, glo = t, ft, dt, gt
    if lo > 0.0 and flo < f0:
        return True, lo, flo, glo
    return False, 0.0, f0, g0


@njit(cache=True)
def _slope_search(x, f0, g0, d, kind, radii, consts, fixed, adj, c2):
    """Line search on the directional derivative alone.

    Used once value comparisons have drowned in rounding noise: accepts a
    step whose slope satisfies the curvature condition, as long as the value
    has not risen by more than a relative 1e-12.
    """
    dphi0 = np.dot(g0, d)
    slack = 1e-12 * max(abs(f0), 1e-300)
    lo = 0.0
    hi = -1.0
    a = 1.0
    for _ in range(80):
        fa, ga = objective_fg(kind, x + a * d, radii, consts, fixed, adj)
        dphi = np.dot(ga, d)
        if fa <= f0 + slack and abs(dphi) <= -c2 * dphi0:
            return True, a, fa, ga
        if fa > f0 + slack or dphi > 0.0:
            hi = a
        else:
            lo = a
        a = 0.5 * (lo + hi) if hi > 0.0 else 4.0 * a
    return False, 0.0, f0, g0


@njit(cache=True)
def _backtrack(x, f0, g0, kind, radii, consts, fixed, adj, c1):
    """Steepest-descent step with Armijo backtracking. Returns (ok, d, alpha, f, g)."""
    d = -g0
    gg = np.dot(g0, g0)
    a = 1.0
    for _ in range(80):
        fa, ga = objective_fg(kind, x + a * d, radii, consts, fixed, adj)
        if fa <= f0 - c1 * a * gg and fa < f0:
            return True, d, a, fa, ga
        a *= 0.5
    return False, d, 0.0, f0, g0


@njit(cache=True)
def minimize(x0, kind, radii, consts, fixed, history, c1, c2, max_iters, gtol):
    """L-BFGS from ``x0``. Returns (x, f, status, iterations).

    The returned ``f`` is evaluated under a freshly built neighbor structure.
    """
    dim = x0.shape[0]
    x = x0.copy()
    objective_project(kind, x, radii, consts)
    adj = objective_build(kind, x, radii, consts, fixed)
    f, g = objective_fg(kind, x, radii, consts, fixed, adj)
    cnt = 0
    length = 1

    S = np.zeros((history, dim))
    Y = np.zeros((history, dim))
    rho = np.zeros(history)
    alpha = np.zeros(history)
    stored = 0
    head = 0
    status = CONVERGED
    iters = 0

    while True:
        if math.sqrt(np.dot(g, g)) <= gtol:
            # the test may have run under a stale structure
            fresh = objective_build(kind, x, radii, consts, fixed)
            if same_adjacency(fresh, adj):
                break
            adj = fresh
            cnt = 0
            length = 1
            f, g = objective_fg(kind, x, radii, consts, fixed, adj)
            if math.sqrt(np.dot(g, g)) <= gtol:
                break
        if iters >= max_iters:
            status = MAX_ITERS
            break
        iters += 1

        # two-loop recursion
        q = g.copy()
        for k in range(stored):
            idx = (head - 1 - k) % history
            alpha[idx] = rho[idx] * np.dot(S[idx], q)
            q -= alpha[idx] * Y[idx]
        if stored > 0:
            last = (head - 1) % history
            q *= np.dot(S[last], Y[last]) / np.dot(Y[last], Y[last])
        for k in range(stored - 1, -1, -1):
            idx = (head - 1 - k) % history
            beta = rho[idx] * np.dot(Y[idx], q)
            q += (alpha[idx] - beta) * S[idx]
        d = -q
        if not np.dot(g, d) < 0.0:
            d = -g
            stored = 0

        ok, step, f_new, g_new = _wolfe_search(x, f, g, d, 1.0, kind, radii, consts, fixed, adj, c1, c2)
        if not ok:
            ok, step, f_new, g_new = _slope_search(x, f, g, d, kind, radii, consts, fixed, adj, c2)
        if not ok:
            stored = 0
            ok, d, step, f_new, g_new = _backtrack(x, f, g, kind, radii, consts, fixed, adj, c1)
            if not ok:
                status = LINE_SEARCH_FAILED
                break
        x_new = x + step * d
        if objective_project(kind, x_new, radii, consts):
            f_new, g_new = objective_fg(kind, x_new, radii, consts, fixed, adj)

        s = x_new - x
        y = g_new - g
        sy = np.dot(s, y)
        if sy > 1e-300 and np.dot(y, y) > 0.0:
            S[head] = s
            Y[head] = y
            rho[head] = 1.0 / sy
            head = (head + 1) % history
            if stored < history:
                stored += 1
        x = x_new
        f = f_new
        g = g_new

        cnt, length, adj, changed = aam_update(cnt, length, adj, x, kind, radii, consts, fixed)
        if changed:
            f, g = objective_fg(kind, x, radii, consts, fixed, adj)

    fresh = objective_build(kind, x, radii, consts, fixed)
    f, _ = objective_fg(kind, x, radii, consts, fixed, fresh)
    return x, f, status, iters


@njit(cache=True)
def fresh_energy(xy, radii, R, r_max):
    return energy_value(xy, radii, R, adjacent_pairs(xy, radii, r_max))


# ----------------------------------------------------------------- Python API


@dataclass(frozen=True)
class LbfgsConfig:
    history: int = 7
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9
    max_iters: int = 10_000
    grad_tol: float = 1e-10

    def __post_init__(self) -> None:
        if not 0.0 < self.wolfe_c1 < self.wolfe_c2 < 1.0:
            raise ValueError("need 0 < c1 < c2 < 1")
        if self.history < 1 or self.max_iters < 0:
            raise ValueError("history must be positive and max_iters non-negative")

    @classmethod
    def from_params(cls, params: SolverParams, grad_tol: Optional[float] = None) -> "LbfgsConfig":
        return cls(
            params.lbfgs_history,
            params.wolfe_c1,
            params.wolfe_c2,
            params.lbfgs_max_iters,
            params.eps0 if grad_tol is None else grad_tol,
        )


@dataclass(frozen=True)
class Objective:
    """One of the compiled objectives; see the module docstring for the array layout."""

    kind: int
    radii: np.ndarray = _EMPTY
    consts: np.ndarray = _EMPTY
    fixed: np.ndarray = _EMPTY

    def value_and_grad(self, x: np.ndarray, adj: Optional[np.ndarray] = None) -> Tuple[float, np.ndarray]:
        x = np.ascontiguousarray(x, dtype=float)
        if adj is None:
            adj = self.build(x)
        f, g = objective_fg(self.kind, x, self.radii, self.consts, self.fixed, adj)
        return float(f), g

    def build(self, x: np.ndarray) -> np.ndarray:
        return objective_build(self.kind, np.ascontiguousarray(x, dtype=float), self.radii, self.consts, self.fixed)


def penalty_objective(instance: Instance, R: float) -> Objective:
    return Objective(LAYOUT, instance.radii, np.array([float(R), instance.r_max]))


def container_objective(instance: Instance, rho: float) -> Objective:
    return Objective(CONTAINER, instance.radii, np.array([float(rho), instance.r_max]))


def quadratic_objective(target: np.ndarray) -> Objective:
    """``f(x) = |x - target|^2``; a sanity check for the minimizer."""
    return Objective(QUADRATIC, fixed=np.ascontiguousarray(target, dtype=float))


@dataclass(frozen=True)
class OptResult:
    x: np.ndarray
    f: float
    status: int
    iterations: int

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED

    @property
    def status_text(self) -> str:
        return _STATUS_TEXT[self.status]


def layout_optimize(objective: Objective, x0: np.ndarray, config: LbfgsConfig = LbfgsConfig()) -> OptResult:
    """Run L-BFGS with adaptive adjacency maintenance until the gradient norm is at most ``grad_tol``."""
    x, f, status, iters = minimize(
        np.ascontiguousarray(x0, dtype=float),
        objective.kind,
        objective.radii,
        objective.consts,
        objective.fixed,
        config.history,
        config.wolfe_c1,
        config.wolfe_c2,
        config.max_iters,
        config.grad_tol,
    )
    return OptResult(x, float(f), int(status), int(iters))


def optimize_layout(instance: Instance, xy: np.ndarray, R: float, params: SolverParams) -> OptResult:
    """Local minimum of the overlap energy at a fixed container radius."""
    return layout_optimize(penalty_objective(instance, R), xy, LbfgsConfig.from_params(params))


@dataclass
class AamState:
    cnt: int
    length: int
    gamma: np.ndarray

    @classmethod
    def start(cls, instance: Instance, xy: np.ndarray) -> "AamState":
        xy = np.ascontiguousarray(xy, dtype=float)
        return cls(0, 1, adjacent_pairs(xy, instance.radii, instance.r_max))


def aam_step(state: AamState, instance: Instance, xy: np.ndarray) -> AamState:
    """Advance the maintenance schedule by one optimizer iteration."""
    consts = np.array([0.0, instance.r_max])
    cnt, length, gamma, _ = aam_update(
        state.cnt, state.length, state.gamma, np.ascontiguousarray(xy, dtype=float), LAYOUT, instance.radii, consts, _EMPTY
    )
    return AamState(int(cnt), int(length), gamma)


def augmented_energy(
    instance: Instance, z: np.ndarray, rho: float, adj: Optional[np.ndarray] = None
) -> Tuple[float, np.ndarray]:
    """Value and gradient of energy + rho R^2 over ``(x1, y1, ..., xn, yn, R)``."""
    z = np.ascontiguousarray(z, dtype=float)
    if z.shape != (2 * instance.n + 1,):
        raise ValueError(f"expected {2 * instance.n + 1} variables, got {z.shape}")
    if adj is not None:
        adj = np.asarray(adj, dtype=np.int64).reshape(-1, 2)
    return container_objective(instance, rho).value_and_grad(z, adj)


@dataclass(frozen=True)
class ContainerResult:
    xy: np.ndarray
    R: float
    energy: float
    rounds: int
    fallback: bool


def inflate_to_feasible(instance: Instance, xy: np.ndarray) -> Tuple[np.ndarray, float]:
    """Scale the centers apart until no pair overlaps, then fit the container around them."""
    c = np.asarray(xy, dtype=float).reshape(-1, 2).copy()
    r = instance.radii
    n = instance.n
    for _ in range(100):
        scale = 1.0
        for i in range(n - 1):
            dx = c[i, 0] - c[i + 1 :, 0]
            dy = c[i, 1] - c[i + 1 :, 1]
            dist = np.sqrt(dx * dx + dy * dy)
            need = r[i] + r[i + 1 :]
            hit = dist < need
            if not np.any(hit):
                continue
            zero = np.flatnonzero(hit & (dist == 0.0))
            if zero.size:
                # coincident centers have no direction to push along
                c[i + 1 + zero[0], 0] += need[zero[0]]
                scale = max(scale, 1.0 + 1e-12)
            else:
                scale = max(scale, float(np.max(need[hit] / dist[hit])))
        if scale == 1.0:
            break
        c *= scale * (1.0 + 1e-14)
    norms = np.sqrt(c[:, 0] * c[:, 0] + c[:, 1] * c[:, 1])
    return c.ravel(), float(np.max(norms + r))


def container_optimize(
    instance: Instance, xy0: np.ndarray, R0: float, params: SolverParams = SolverParams()
) -> ContainerResult:
    """Shrink the container by minimizing energy + rho R^2 with rho halved each round.

    Runs at least one round and stops once the overlap energy is at most ``eps1``. Each round stops at
    gradient norm ``eps0 * rho``, which is ``eps0`` on the objective divided
    by rho; an absolute ``eps0`` would freeze the iterates once ``rho * R``
    drops below it.
    """
    if not R0 > 0.0:
        raise ValueError("R0 must be positive")
    radii = instance.radii
    r_max = instance.r_max
    xy = np.ascontiguousarray(xy0, dtype=float).copy()
    R = float(R0)
    rho = params.sumt_rho
    rounds = 0
    # at least one round, so a loose feasible start still shrinks
    while True:
        if rounds >= params.sumt_max_rounds:
            xy, R = inflate_to_feasible(instance, xy)
            return ContainerResult(xy, R, float(fresh_energy(xy, radii, R, r_max)), rounds, True)
        z, _, _, _ = minimize(
            np.append(xy, R),
            CONTAINER,
            radii,
            np.array([rho, r_max]),
            _EMPTY,
            params.lbfgs_history,
            params.wolfe_c1,
            params.wolfe_c2,
            params.lbfgs_max_iters,
            params.eps0 * rho,
        )
        xy = z[:-1].copy()
        R = float(z[-1])
        rho *= 0.5
        E = fresh_energy(xy, radii, R, r_max)
        rounds += 1
        if E <= params.eps1:
            break
    return ContainerResult(xy, R, float(E), rounds, False)
