"""Overlap penalty energy, its gradient, and the circle adjacency set.

The kernels work on a flat coordinate vector ``(x1, y1, ..., xn, yn)`` and an
``(m, 2)`` array of adjacent index pairs sorted ascending, which is the
representation shared with the compiled optimizer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List

import numpy as np
from numba import njit

from .model import Configuration, Instance

# ------------------------------------------------------------ compiled kernels


@njit(cache=True)
def adjacent_pairs(xy, radii, r_max):
    """Index pairs ``i < j`` closer than ``max((ri+rj)/2, r_max/4) + ri + rj``."""
    n = radii.shape[0]
    out = np.empty((n * (n - 1) // 2, 2), dtype=np.int64)
    m = 0
    quarter = 0.25 * r_max
    for i in range(n - 1):
        xi = xy[2 * i]
        yi = xy[2 * i + 1]
        ri = radii[i]
        for j in range(i + 1, n):
            rs = ri + radii[j]
            dx = xi - xy[2 * j]
            dy = yi - xy[2 * j + 1]
            dist = math.sqrt(dx * dx + dy * dy)
            if dist < max(0.5 * rs, quarter) + rs:
                out[m, 0] = i
                out[m, 1] = j
                m += 1
    return out[:m].copy()


@njit(cache=True)
def energy_value(xy, radii, R, pairs):
    """Pair terms in ``pairs`` order, then boundary terms, in one running sum."""
    e = 0.0
    for k in range(pairs.shape[0]):
        i = pairs[k, 0]
        j = pairs[k, 1]
        dx = xy[2 * i] - xy[2 * j]
        dy = xy[2 * i + 1] - xy[2 * j + 1]
        d = radii[i] + radii[j] - math.sqrt(dx * dx + dy * dy)
        if d > 0.0:
            e += d * d
    for i in range(radii.shape[0]):
        x = xy[2 * i]
        y = xy[2 * i + 1]
        d = math.sqrt(x * x + y * y) + radii[i] - R
        if d > 0.0:
            e += d * d
    return e


@njit(cache=True)
def energy_grad_into(xy, radii, R, pairs, g):
    """Accumulate the gradient into ``g[:2n]``; return (energy, sum of boundary depths)."""
    e = 0.0
    for k in range(pairs.shape[0]):
        i = pairs[k, 0]
        j = pairs[k, 1]
        dx = xy[2 * i] - xy[2 * j]
        dy = xy[2 * i + 1] - xy[2 * j + 1]
        dist = math.sqrt(dx * dx + dy * dy)
        d = radii[i] + radii[j] - dist
        if d > 0.0:
            e += d * d
            if dist > 0.0:
                c = -2.0 * d / dist
                g[2 * i] += c * dx
                g[2 * i + 1] += c * dy
                g[2 * j] -= c * dx
                g[2 * j + 1] -= c * dy
    boundary_sum = 0.0
    for i in range(radii.shape[0]):
        x = xy[2 * i]
        y = xy[2 * i + 1]
        norm = math.sqrt(x * x + y * y)
        d = norm + radii[i] - R
        if d > 0.0:
            e += d * d
            boundary_sum += d
            if norm > 0.0:
                c = 2.0 * d / norm
                g[2 * i] += c * x
                g[2 * i + 1] += c * y
    return e, boundary_sum


@njit(cache=True)
def probe_pairs(u, centers, radii, r_max):
    """Packed circles adjacent to the probe circle ``u = (x, y, r)``, as ``(m, 2)`` rows ``[i, i]``."""
    n = radii.shape[0]
    out = np.empty((n, 2), dtype=np.int64)
    a = abs(u[2])
    quarter = 0.25 * r_max
    m = 0
    for i in range(n):
        rs = a + radii[i]
        dx = u[0] - centers[2 * i]
        dy = u[1] - centers[2 * i + 1]
        if math.sqrt(dx * dx + dy * dy) < max(0.5 * rs, quarter) + rs:
            out[m, 0] = i
            out[m, 1] = i
            m += 1
    return out[:m].copy()


@njit(cache=True)
def probe_fg(u, centers, radii, R, rho, adj):
    """Overlap energy of a probe circle against fixed circles, minus ``rho * r``."""
    g = np.zeros(3)
    a = abs(u[2])
    sgn = 0.0
    if u[2] > 0.0:
        sgn = 1.0
    elif u[2] < 0.0:
        sgn = -1.0
    e = 0.0
    for k in range(adj.shape[0]):
        i = adj[k, 0]
        dx = u[0] - centers[2 * i]
        dy = u[1] - centers[2 * i + 1]
        dist = math.sqrt(dx * dx + dy * dy)
        d = a + radii[i] - dist
        if d > 0.0:
            e += d * d
            g[2] += 2.0 * d * sgn
            if dist > 0.0:
                c = -2.0 * d / dist
                g[0] += c * dx
                g[1] += c * dy
    norm = math.sqrt(u[0] * u[0] + u[1] * u[1])
    d = norm + a - R
    if d > 0.0:
        e += d * d
        g[2] += 2.0 * d * sgn
        if norm > 0.0:
            c = 2.0 * d / norm
            g[0] += c * u[0]
            g[1] += c * u[1]
    g[2] -= rho
    return e - rho * u[2], g


# ---------------------------------------------------------------- public API


@dataclass(frozen=True)
class AdjacencySet:
    """Adjacent circle pairs (0-based, ``i < j``, ascending) for one coordinate snapshot."""

    pairs: np.ndarray
    n: int

    @property
    def neighbors(self) -> List[List[int]]:
        out: List[List[int]] = [[] for _ in range(self.n)]
        for i, j in self.pairs:
            out[int(i)].append(int(j))
            out[int(j)].append(int(i))
        for lst in out:
            lst.sort()
        return out

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AdjacencySet):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.pairs, other.pairs)

    def __hash__(self) -> int:
        return hash((self.n, self.pairs.tobytes()))


def _flat(config: Configuration) -> np.ndarray:
    return np.ascontiguousarray(config.centers.ravel())


def build_adjacency(instance: Instance, config: Configuration) -> AdjacencySet:
    pairs = adjacent_pairs(_flat(config), instance.radii, instance.r_max)
    return AdjacencySet(pairs, instance.n)


def pair_depth(ci, ri: float, cj, rj: float) -> float:
    dx = ci[0] - cj[0]
    dy = ci[1] - cj[1]
    return max(0.0, ri + rj - math.sqrt(dx * dx + dy * dy))


def boundary_depth(ci, ri: float, R: float) -> float:
    return max(0.0, math.sqrt(ci[0] * ci[0] + ci[1] * ci[1]) + ri - R)


def energy(instance: Instance, config: Configuration, adjacency: AdjacencySet) -> float:
    """Sum of squared overlap depths over the adjacent pairs plus the boundary terms."""
    return float(energy_value(_flat(config), instance.radii, config.container_radius, adjacency.pairs))


def energy_gradient(instance: Instance, config: Configuration, adjacency: AdjacencySet) -> np.ndarray:
    xy = _flat(config)
    g = np.zeros_like(xy)
    energy_grad_into(xy, instance.radii, config.container_radius, adjacency.pairs, g)
    return g


def full_energy(instance: Instance, config: Configuration) -> float:
    """Energy with a freshly built adjacency set."""
    return energy(instance, config, build_adjacency(instance, config))


def is_feasible(instance: Instance, config: Configuration, eps1: float = 1e-25) -> bool:
    return full_energy(instance, config) <= eps1
