"""Hole detection: grow a probe circle from Voronoi-derived seeds.

A probe ``u = (x, y, r)`` minimizes its overlap with the packed circles and
the container minus ``rho * r``. Two fixed stages (``rho = 0.5`` then
``rho = 0.1``) give an approximate locally largest hole; the reported radius
is the exact clearance around the probe's final center, so a reported hole
never overlaps anything.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import QhullError, Voronoi

from .model import Configuration, Instance, SolverParams
from .optimizer import PROBE, minimize

STAGE_RHOS = (0.5, 0.1)
MERGE_TOL = 1e-6
SEED_MERGE_TOL = 1e-9


@dataclass(frozen=True)
class VacancyCircle:
    center: Tuple[float, float]
    radius: float


@dataclass(frozen=True)
class VoronoiEdge:
    """Bisector of two sites: a segment, a ray from ``start``, or a full line through ``start``."""

    sites: Tuple[int, int]
    kind: str
    start: np.ndarray
    end: Optional[np.ndarray] = None
    direction: Optional[np.ndarray] = None

    def clipped(self, length: float) -> Tuple[np.ndarray, np.ndarray]:
        """Finite segment; unbounded parts are cut ``length`` away from ``start``."""
        if self.kind == "segment":
            return self.start, self.end
        if self.kind == "ray":
            return self.start, self.start + length * self.direction
        return self.start - length * self.direction, self.start + length * self.direction


@dataclass(frozen=True)
class VoronoiDiagram:
    sites: np.ndarray
    vertices: np.ndarray
    vertex_sites: List[Tuple[int, ...]] = field(default_factory=list)
    edges: List[VoronoiEdge] = field(default_factory=list)


def _unit(v: np.ndarray) -> np.ndarray:
    return v / math.hypot(v[0], v[1])


def _collinear(points: np.ndarray) -> bool:
    if len(points) < 3:
        return True
    base = points[0]
    far = points[np.argmax(np.sum((points - base) ** 2, axis=1))]
    axis = far - base
    scale = math.hypot(axis[0], axis[1])
    if scale == 0.0:
        return True
    rel = points - base
    cross = axis[0] * rel[:, 1] - axis[1] * rel[:, 0]
    return bool(np.max(np.abs(cross)) <= 1e-12 * scale * scale)


def _line_diagram(sites: np.ndarray, ids: np.ndarray) -> VoronoiDiagram:
    """Diagram of collinear sites: parallel bisector lines between neighbors."""
    edges: List[VoronoiEdge] = []
    if len(ids) >= 2:
        base = sites[ids[0]]
        far = sites[ids[np.argmax(np.sum((sites[ids] - base) ** 2, axis=1))]]
        axis = _unit(far - base)
        order = ids[np.argsort((sites[ids] - base) @ axis, kind="stable")]
        normal = np.array([-axis[1], axis[0]])
        for a, b in zip(order[:-1], order[1:]):
            mid = 0.5 * (sites[a] + sites[b])
            edges.append(VoronoiEdge((int(min(a, b)), int(max(a, b))), "line", mid, direction=normal))
    return VoronoiDiagram(sites, np.empty((0, 2)), [], edges)


def build_voronoi(sites: np.ndarray) -> VoronoiDiagram:
    """Voronoi diagram of the points; coincident sites are represented once."""
    sites = np.asarray(sites, dtype=float).reshape(-1, 2)
    # keep the first of any coincident group
    _, first = np.unique(sites, axis=0, return_index=True)
    ids = np.sort(first)
    if len(ids) < 3 or _collinear(sites[ids]):
        return _line_diagram(sites, ids)
    try:
        vor = Voronoi(sites[ids])
    except QhullError:
        return _line_diagram(sites, ids)
    vertices = vor.vertices.copy()
    vsites: List[set] = [set() for _ in range(len(vertices))]
    centroid = sites[ids].mean(axis=0)
    edges: List[VoronoiEdge] = []
    for (pa, pb), (va, vb) in zip(vor.ridge_points, vor.ridge_vertices):
        a, b = int(ids[pa]), int(ids[pb])
        key = (min(a, b), max(a, b))
        for v in (va, vb):
            if v >= 0:
                vsites[v].update(key)
        if va >= 0 and vb >= 0:
            edges.append(VoronoiEdge(key, "segment", vertices[va], end=vertices[vb]))
            continue
        v = vb if va < 0 else va
        tangent = sites[b] - sites[a]
        normal = _unit(np.array([-tangent[1], tangent[0]]))
        mid = 0.5 * (sites[a] + sites[b])
        if np.dot(mid - centroid, normal) < 0.0:
            normal = -normal
        edges.append(VoronoiEdge(key, "ray", vertices[v], direction=normal))
    return VoronoiDiagram(sites, vertices, [tuple(sorted(s)) for s in vsites], edges)


def _segment_circle(p: np.ndarray, q: np.ndarray, R: float) -> List[np.ndarray]:
    d = q - p
    a = float(np.dot(d, d))
    if a == 0.0:
        return []
    b = 2.0 * float(np.dot(p, d))
    c = float(np.dot(p, p)) - R * R
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return []
    root = math.sqrt(disc)
    out = []
    for t in ((-b - root) / (2.0 * a), (-b + root) / (2.0 * a)):
        if 0.0 <= t <= 1.0:
            out.append(p + t * d)
    return out


def _dedupe(points: Sequence[np.ndarray], tol: float) -> List[Tuple[float, float]]:
    kept: List[Tuple[float, float]] = []
    for pt in points:
        if all(math.hypot(pt[0] - k[0], pt[1] - k[1]) > tol for k in kept):
            kept.append((float(pt[0]), float(pt[1])))
    return kept


def seed_points(
    config: Configuration, R: float, diagram: Optional[VoronoiDiagram] = None, r_first: Optional[float] = None
) -> List[Tuple[float, float]]:
    """Start points for hole detection: inner Voronoi vertices, then edge/boundary crossings.

    With a single circle there is no diagram; eight points on the ring of
    radius ``(R + r_first) / 2`` are used instead.
    """
    if config.n == 1:
        ring = 0.5 * (R + (r_first if r_first is not None else 0.0))
        return [(ring * math.cos(k * math.pi / 4), ring * math.sin(k * math.pi / 4)) for k in range(8)]
    if diagram is None:
        diagram = build_voronoi(config.centers)
    pts: List[np.ndarray] = [v for v in diagram.vertices if math.hypot(v[0], v[1]) < R]
    for edge in diagram.edges:
        reach = 4.0 * R + math.hypot(edge.start[0], edge.start[1])
        p, q = edge.clipped(reach)
        pts.extend(_segment_circle(p, q, R))
    return _dedupe(pts, SEED_MERGE_TOL)


# ------------------------------------------------------------------ probing


def vacancy_energy(
    centers: np.ndarray, radii: np.ndarray, R: float, u: Sequence[float], rho: float, adj: Optional[np.ndarray] = None
) -> Tuple[float, np.ndarray]:
    """Probe objective and its gradient over ``(x_u, y_u, r_u)``; packed circles held fixed."""
    from .optimizer import Objective

    radii = np.ascontiguousarray(radii, dtype=float)
    r_max = float(radii.max()) if radii.size else 0.0
    obj = Objective(PROBE, radii, np.array([float(R), float(rho), r_max]), np.ascontiguousarray(centers, dtype=float).ravel())
    if adj is not None:
        adj = np.asarray(adj, dtype=np.int64).reshape(-1, 2)
    return obj.value_and_grad(np.asarray(u, dtype=float), adj)


def clearance(centers: np.ndarray, radii: np.ndarray, R: float, point: Sequence[float]) -> float:
    """Radius of the largest circle at ``point`` overlapping nothing (negative if none fits)."""
    x, y = float(point[0]), float(point[1])
    gap = R - math.sqrt(x * x + y * y)
    if len(radii):
        c = np.asarray(centers, dtype=float).reshape(-1, 2)
        dx = x - c[:, 0]
        dy = y - c[:, 1]
        gap = min(gap, float(np.min(np.sqrt(dx * dx + dy * dy) - radii)))
    return gap


def probe_vacancy(
    centers: np.ndarray,
    radii: np.ndarray,
    R: float,
    seed: Sequence[float],
    params: SolverParams = SolverParams(),
    rhos: Sequence[float] = STAGE_RHOS,
) -> Optional[VacancyCircle]:
    """Grow a probe from ``seed`` through the given penalty stages; None if it escapes or is empty."""
    radii = np.ascontiguousarray(radii, dtype=float)
    flat = np.ascontiguousarray(centers, dtype=float).ravel()
    r_max = float(radii.max()) if radii.size else 0.0
    u = np.array([float(seed[0]), float(seed[1]), 0.0])
    for rho in rhos:
        # each stage starts cold from the previous stage's point
        u, _, _, _ = minimize(
            u,
            PROBE,
            radii,
            np.array([float(R), float(rho), r_max]),
            flat,
            params.lbfgs_history,
            params.wolfe_c1,
            params.wolfe_c2,
            params.lbfgs_max_iters,
            params.eps0,
        )
        if not np.all(np.isfinite(u)) or math.hypot(u[0], u[1]) > 2.0 * R:
            return None
    radius = min(abs(float(u[2])), clearance(flat, radii, R, u))
    if not radius > 0.0:
        return None
    return VacancyCircle((float(u[0]), float(u[1])), radius)


def detect_vacancy(
    instance: Instance, config: Configuration, R: float, seed: Sequence[float], params: SolverParams = SolverParams()
) -> Optional[VacancyCircle]:
    return probe_vacancy(config.centers, instance.radii, R, seed, params)


def merge_vacancies(found: Sequence[VacancyCircle], tol: float = MERGE_TOL) -> List[VacancyCircle]:
    """Largest first (ties by center), dropping any whose center is within ``tol`` of a kept one."""
    ordered = sorted(found, key=lambda v: (-v.radius, v.center[0], v.center[1]))
    kept: List[VacancyCircle] = []
    for v in ordered:
        if all(math.hypot(v.center[0] - k.center[0], v.center[1] - k.center[1]) > tol for k in kept):
            kept.append(v)
    return kept


def detect_all(
    instance: Instance, config: Configuration, R: Optional[float] = None, params: SolverParams = SolverParams()
) -> List[VacancyCircle]:
    """Every distinct hole reachable from the Voronoi seeds, largest first."""
    R = config.container_radius if R is None else float(R)
    seeds = seed_points(config, R, r_first=float(instance.radii[0]))
    found = []
    for seed in seeds:
        v = detect_vacancy(instance, config, R, seed, params)
        if v is not None:
            found.append(v)
    return merge_vacancies(found)
