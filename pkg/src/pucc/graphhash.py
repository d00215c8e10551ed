"""Contact graphs of compact packings and the double modular hash used to skip revisits.

Vertices are numbered 1..n for the circles and n+1 for the container. Two
packings that differ by a rotation, a reflection, or a moved rattler produce
the same contact graph and therefore the same hash pair. Swapping two equal
circles does not: indices enter the hash directly, so the key is deliberately
inexact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import FrozenSet, Iterable, Iterator, List, NamedTuple, Sequence, Set, Tuple

import numpy as np
from numba import njit

from .model import Configuration, Instance, SolverParams

CONTAINER_LABEL = -1


def radius_ranking(radii: Sequence[float], rel_tol: float = 1e-12) -> List[int]:
    """Dense 1-based ranks of ascending radii; near-equal values share a rank."""
    ranks: List[int] = []
    rank = 0
    prev = None
    for r in radii:
        if prev is None or not math.isclose(r, prev, rel_tol=rel_tol, abs_tol=0.0):
            rank += 1
            prev = r
        ranks.append(rank)
    return ranks


@dataclass(frozen=True)
class LayoutGraph:
    """Labels for vertices 1..n+1 and undirected edges as 1-based ``(i, j)`` with ``i < j``."""

    labels: Tuple[int, ...]
    edges: FrozenSet[Tuple[int, int]]

    @property
    def n(self) -> int:
        return len(self.labels) - 1

    def degree(self, v: int) -> int:
        return sum(1 for e in self.edges if v in e)


@njit(cache=True)
def _overlap_edges(xy, radii, R, eps):
    n = radii.shape[0]
    out = np.empty((n * (n - 1) // 2 + n, 2), dtype=np.int64)
    m = 0
    for i in range(n - 1):
        for j in range(i + 1, n):
            dx = xy[2 * i] - xy[2 * j]
            dy = xy[2 * i + 1] - xy[2 * j + 1]
            if radii[i] + radii[j] - math.sqrt(dx * dx + dy * dy) > eps:
                out[m, 0] = i + 1
                out[m, 1] = j + 1
                m += 1
    for i in range(n):
        x = xy[2 * i]
        y = xy[2 * i + 1]
        if math.sqrt(x * x + y * y) + radii[i] - R > eps:
            out[m, 0] = i + 1
            out[m, 1] = n + 1
            m += 1
    return out[:m].copy()


def overlap_edges(instance: Instance, xy: np.ndarray, R: float, eps3: float = 1e-8) -> np.ndarray:
    return _overlap_edges(np.ascontiguousarray(xy, dtype=float), instance.radii, float(R), float(eps3))


def layout_to_graph(instance: Instance, config: Configuration, eps3: float = 1e-8) -> LayoutGraph:
    """Edge per circle pair, or circle and container, overlapping deeper than ``eps3``."""
    edges = overlap_edges(instance, config.centers.ravel(), config.container_radius, eps3)
    labels = tuple(radius_ranking(instance.radii)) + (CONTAINER_LABEL,)
    return LayoutGraph(labels, frozenset((int(i), int(j)) for i, j in edges))


def rattlers(graph: LayoutGraph) -> Set[int]:
    """1-based indices of circles with no overlap at all."""
    touched = {v for e in graph.edges for v in e}
    return {i for i in range(1, graph.n + 1) if i not in touched}


def rattler_mask(edges: np.ndarray, n: int) -> np.ndarray:
    """Boolean mask over 0-based circle indices, True for degree zero."""
    mask = np.ones(n, dtype=bool)
    if len(edges):
        ends = np.asarray(edges).ravel()
        ends = ends[ends <= n]
        mask[ends - 1] = False
    return mask


def graph_hash(edges: Iterable[Tuple[int, int]], p: int, q: int, M: int) -> int:
    """Sum of ``p**i * q**j`` over edges ``(i, j)``, ``i < j``, modulo ``M``."""
    h = 0
    for i, j in edges:
        i, j = (i, j) if i < j else (j, i)
        h = (h + pow(p, int(i), M) * pow(q, int(j), M)) % M
    return h


class HashPair(NamedTuple):
    h1: int
    h2: int


def hash_pair(graph_or_edges, params: SolverParams = SolverParams()) -> HashPair:
    edges = graph_or_edges.edges if isinstance(graph_or_edges, LayoutGraph) else graph_or_edges
    edges = [tuple(e) for e in edges]
    return HashPair(graph_hash(edges, *params.hash1), graph_hash(edges, *params.hash2))


class ExploredSet:
    """Exact set of hash pairs; iteration yields them ordered by ``(h1, h2)``."""

    def __init__(self, pairs: Iterable[Tuple[int, int]] = ()) -> None:
        self._members: Set[Tuple[int, int]] = {(int(a), int(b)) for a, b in pairs}

    def __len__(self) -> int:
        return len(self._members)

    def __contains__(self, pair) -> bool:
        return tuple(pair) in self._members

    def __iter__(self) -> Iterator[Tuple[int, int]]:
        return iter(sorted(self._members))

    def check_and_insert(self, pair) -> bool:
        """Insert ``pair``; True if it was new, False (and no change) if already present."""
        key = (int(pair[0]), int(pair[1]))
        if key in self._members:
            return False
        self._members.add(key)
        return True


def explored_check_and_insert(explored: ExploredSet, pair) -> bool:
    return explored.check_and_insert(pair)


class Hasher:
    """Hash pairs of configurations of one instance, with cached power tables."""

    def __init__(self, instance: Instance, params: SolverParams = SolverParams()) -> None:
        self.instance = instance
        self.eps3 = params.eps3
        n1 = instance.n + 2
        self._tables = []
        for p, q, M in (params.hash1, params.hash2):
            pp = [pow(p, i, M) for i in range(n1)]
            qq = [pow(q, j, M) for j in range(n1)]
            self._tables.append((pp, qq, M))

    def edges(self, xy: np.ndarray, R: float) -> np.ndarray:
        return overlap_edges(self.instance, xy, R, self.eps3)

    def pair_from_edges(self, edges: np.ndarray) -> HashPair:
        out = []
        rows = edges.tolist()
        for pp, qq, M in self._tables:
            h = 0
            for i, j in rows:
                h += pp[i] * qq[j]
            out.append(h % M)
        return HashPair(*out)

    def __call__(self, xy: np.ndarray, R: float) -> HashPair:
        return self.pair_from_edges(self.edges(xy, R))
