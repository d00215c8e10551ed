"""Problem instances, configurations, file formats, feasibility checks and SVG output."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

PathLike = Union[str, Path]

FAMILIES = {
    "linear": lambda i: float(i),
    "inv_sqrt": lambda i: i ** -0.5,
    "sqrt": lambda i: i ** 0.5,
    "inv_two_thirds": lambda i: i ** (-2.0 / 3.0),
    "inv_fifth": lambda i: i ** -0.2,
}


class InstanceFormatError(ValueError):
    """Raised when an instance or solution file cannot be parsed."""


@dataclass(frozen=True)
class Instance:
    """An immutable set of circle radii, stored in ascending order."""

    name: str
    radii: np.ndarray

    def __post_init__(self) -> None:
        radii = np.sort(np.asarray(self.radii, dtype=float).ravel())
        if radii.size < 1:
            raise ValueError("an instance needs at least one circle")
        if not np.all(np.isfinite(radii)) or radii[0] <= 0.0:
            raise ValueError("radii must be finite and strictly positive")
        radii.setflags(write=False)
        object.__setattr__(self, "radii", radii)

    @property
    def n(self) -> int:
        return int(self.radii.size)

    @property
    def r_max(self) -> float:
        return float(self.radii[-1])


@dataclass(frozen=True)
class Configuration:
    """Circle centers (shape ``(n, 2)``) plus a container radius."""

    centers: np.ndarray
    container_radius: float

    def __post_init__(self) -> None:
        centers = np.array(self.centers, dtype=float).reshape(-1, 2)
        centers.setflags(write=False)
        object.__setattr__(self, "centers", centers)
        if not self.container_radius > 0.0:
            raise ValueError("container radius must be positive")
        object.__setattr__(self, "container_radius", float(self.container_radius))

    @property
    def n(self) -> int:
        return int(self.centers.shape[0])

    @classmethod
    def from_flat(cls, xy: np.ndarray, radius: float) -> "Configuration":
        return cls(np.asarray(xy, dtype=float).reshape(-1, 2), radius)

    def flat(self) -> np.ndarray:
        """Coordinates as a fresh writable vector ``(x1, y1, ..., xn, yn)``."""
        return self.centers.ravel().copy()


@dataclass(frozen=True)
class FeasibilityReport:
    max_pair_depth: float
    max_boundary_depth: float
    energy: float
    feasible: bool

    @property
    def max_depth(self) -> float:
        return max(self.max_pair_depth, self.max_boundary_depth)


@dataclass(frozen=True)
class SolverParams:
    """Tunable constants of the solver. Defaults are the tuned settings used throughout."""

    eps0: float = 1e-10
    eps1: float = 1e-25
    eps3: float = 1e-8
    hash1: Tuple[int, int, int] = (17, 193, 998244353)
    hash2: Tuple[int, int, int] = (97, 257, 1004535809)
    maxiter: int = 200
    rho0: float = 0.9
    alpha0: float = 1e-2
    alpha_min: float = 1e-4
    beta: float = 0.2
    enable_shs_core: bool = True
    lbfgs_history: int = 7
    lbfgs_max_iters: int = 10_000
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9
    sumt_rho: float = 1e-3
    sumt_max_rounds: int = 200

    def __post_init__(self) -> None:
        for name in ("eps0", "eps1", "eps3"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must lie in (0, 1)")
        if not 0.0 < self.alpha_min <= self.alpha0 < 1.0:
            raise ValueError("need 0 < alpha_min <= alpha0 < 1")
        if not 0.0 < self.rho0 <= 1.0:
            raise ValueError("rho0 must lie in (0, 1]")
        if not 0.0 < self.wolfe_c1 < self.wolfe_c2 < 1.0:
            raise ValueError("need 0 < wolfe_c1 < wolfe_c2 < 1")
        if self.maxiter < 0 or self.lbfgs_history < 1:
            raise ValueError("maxiter must be >= 0 and lbfgs_history >= 1")


# ---------------------------------------------------------------- instances


def generate_instance(family: str, n: int) -> Instance:
    """Benchmark instance ``r_i = f(i)`` for ``i = 1..n`` of a named family."""
    try:
        formula = FAMILIES[family]
    except KeyError:
        raise ValueError(
            f"unknown family {family!r}; expected one of {sorted(FAMILIES)}"
        ) from None
    if n < 1:
        raise ValueError("n must be >= 1")
    return Instance(f"{family}_{n}", np.array([formula(i) for i in range(1, n + 1)]))


def _data_lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line and not line.startswith("#"):
            yield lineno, line


def read_instance(path: PathLike) -> Instance:
    """Parse an instance file: a count line followed by one radius per line."""
    path = Path(path)
    lines = list(_data_lines(path.read_text()))
    if not lines:
        raise InstanceFormatError(f"{path}: empty instance file")
    lineno, head = lines[0]
    try:
        n = int(head)
    except ValueError:
        raise InstanceFormatError(f"{path}:{lineno}: expected circle count, got {head!r}") from None
    if n < 1:
        raise InstanceFormatError(f"{path}:{lineno}: circle count must be positive")
    radii = []
    for lineno, line in lines[1:]:
        try:
            r = float(line)
        except ValueError:
            raise InstanceFormatError(f"{path}:{lineno}: malformed radius {line!r}") from None
        if not (math.isfinite(r) and r > 0.0):
            raise InstanceFormatError(f"{path}:{lineno}: radius must be positive, got {line!r}")
        radii.append(r)
    if len(radii) != n:
        last = lines[-1][0]
        raise InstanceFormatError(
            f"{path}:{last}: count mismatch, header says {n} but found {len(radii)} radii"
        )
    return Instance(path.stem, np.array(radii))


def write_instance(instance: Instance, path: PathLike) -> None:
    lines = [f"# {instance.name}", str(instance.n)]
    lines += [repr(float(r)) for r in instance.radii]
    Path(path).write_text("\n".join(lines) + "\n")


def write_solution(instance: Instance, config: Configuration, path: PathLike) -> None:
    """Write ``n R`` then ``i r_i x_i y_i`` rows, 15 significant digits."""
    _check_bound(instance, config)
    rows = [f"{instance.n} {config.container_radius:.15g}"]
    for i, (r, (x, y)) in enumerate(zip(instance.radii, config.centers), start=1):
        rows.append(f"{i} {r:.15g} {x:.15g} {y:.15g}")
    Path(path).write_text("\n".join(rows) + "\n")


def read_solution(path: PathLike) -> Tuple[np.ndarray, Configuration]:
    """Parse a solution file, returning the radii column and the configuration."""
    path = Path(path)
    lines = list(_data_lines(path.read_text()))
    if not lines:
        raise InstanceFormatError(f"{path}: empty solution file")
    lineno, head = lines[0]
    parts = head.split()
    try:
        n, radius = int(parts[0]), float(parts[1])
        if len(parts) != 2:
            raise ValueError
    except (ValueError, IndexError):
        raise InstanceFormatError(f"{path}:{lineno}: expected 'n R', got {head!r}") from None
    if len(lines) - 1 != n:
        raise InstanceFormatError(f"{path}: count mismatch, header says {n} but found {len(lines) - 1} rows")
    radii = np.empty(n)
    centers = np.empty((n, 2))
    for k, (lineno, line) in enumerate(lines[1:]):
        parts = line.split()
        try:
            if len(parts) != 4:
                raise ValueError
            idx = int(parts[0])
            radii[k], centers[k, 0], centers[k, 1] = map(float, parts[1:])
        except ValueError:
            raise InstanceFormatError(f"{path}:{lineno}: expected 'i r x y', got {line!r}") from None
        if idx != k + 1:
            raise InstanceFormatError(f"{path}:{lineno}: expected circle index {k + 1}, got {idx}")
    try:
        config = Configuration(centers, radius)
    except ValueError as exc:
        raise InstanceFormatError(f"{path}:{lines[0][0]}: {exc}") from None
    return radii, config


# ------------------------------------------------------------------ helpers


def estimate_initial_radius(instance: Instance, density: float) -> float:
    """Container radius at which the circles would fill ``density`` of its area."""
    if not 0.0 < density <= 1.0:
        raise ValueError("density must lie in (0, 1]")
    return math.sqrt(float(np.sum(instance.radii**2)) / density)


def area_lower_bound(instance: Instance) -> float:
    return estimate_initial_radius(instance, 1.0)


def sample_disk(rng: np.random.Generator, count: int, radius: float) -> np.ndarray:
    """``count`` points drawn uniformly from the disk of the given radius."""
    rho = radius * np.sqrt(rng.random(count))
    theta = rng.random(count) * (2.0 * math.pi)
    return np.column_stack((rho * np.cos(theta), rho * np.sin(theta)))


def random_layout(instance: Instance, R: float, rng: np.random.Generator) -> Configuration:
    """Centers drawn uniformly over the whole container; overlaps allowed."""
    if not R > 0.0:
        raise ValueError("R must be positive")
    return Configuration(sample_disk(rng, instance.n, R), R)


def _check_bound(instance: Instance, config: Configuration) -> None:
    if config.n != instance.n:
        raise ValueError(
            f"configuration has {config.n} centers but instance {instance.name!r} has {instance.n} circles"
        )


def verify_solution(
    instance: Instance, config: Configuration, tol: Optional[float] = None, eps1: float = 1e-25
) -> FeasibilityReport:
    """Exact overlap check over every pair, independent of any adjacency set.

    With ``tol`` the verdict is ``max depth <= tol``; otherwise it is
    ``energy <= eps1``.
    """
    _check_bound(instance, config)
    r = instance.radii
    c = config.centers
    R = config.container_radius
    n = instance.n
    energy = 0.0
    max_pair = 0.0
    for i in range(n - 1):
        xi, yi, ri = c[i, 0], c[i, 1], r[i]
        for j in range(i + 1, n):
            dx = xi - c[j, 0]
            dy = yi - c[j, 1]
            d = max(0.0, ri + r[j] - math.sqrt(dx * dx + dy * dy))
            energy += d * d
            max_pair = max(max_pair, d)
    max_bound = 0.0
    for i in range(n):
        x, y = c[i, 0], c[i, 1]
        d = max(0.0, math.sqrt(x * x + y * y) + r[i] - R)
        energy += d * d
        max_bound = max(max_bound, d)
    if tol is None:
        feasible = energy <= eps1
    else:
        feasible = max(max_pair, max_bound) <= tol
    return FeasibilityReport(float(max_pair), float(max_bound), float(energy), bool(feasible))


def render_svg(instance: Instance, config: Configuration, size: int = 640) -> str:
    """Standalone SVG picture of a packing, circles labelled 1..n."""
    _check_bound(instance, config)
    R = config.container_radius
    stroke = R / 400.0
    font = max(min(float(np.min(instance.radii)), R / 10.0), R / 200.0)
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="{-R:.10g} {-R:.10g} {2 * R:.10g} {2 * R:.10g}">',
        f'<circle cx="0" cy="0" r="{R:.15g}" fill="none" stroke="black" stroke-width="{stroke:.6g}"/>',
    ]
    # flip y so the picture reads in the usual mathematical orientation
    for i, (r, (x, y)) in enumerate(zip(instance.radii, config.centers), start=1):
        out.append(
            f'<circle cx="{x:.15g}" cy="{-y:.15g}" r="{r:.15g}" fill="#9ecae1" '
            f'fill-opacity="0.8" stroke="#08519c" stroke-width="{stroke:.6g}"/>'
        )
        out.append(
            f'<text x="{x:.15g}" y="{-y:.15g}" font-size="{font:.6g}" text-anchor="middle" '
            f'dominant-baseline="central">{i}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"
