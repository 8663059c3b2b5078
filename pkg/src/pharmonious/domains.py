"""Analytic bounded domains with distance, projection and exterior-cone data.

Every shape works on batches of points (arrays of shape ``(m, n)``); the
scalar methods ``contains``, ``boundary_distance`` and ``boundary_project``
are thin checked wrappers over the batch versions.

The exterior cone at a boundary point is described by its axis: the unit
vector along which the truncated cone of half-angle ``cone_alpha`` and
length ``cone_r`` opens into the complement of the domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

# Lattice points this close to the boundary (relative to the spacing) are
# treated as boundary points.
BOUNDARY_SNAP = 1e-9


class GeometryError(ValueError):
    """A point or ball is not where an operation requires it to be."""


def _as_points(x: Any, n: int) -> np.ndarray:
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.ndim != 2 or pts.shape[1] != n:
        raise GeometryError(f"expected points of dimension {n}, got shape {np.shape(x)}")
    if not np.all(np.isfinite(pts)):
        raise GeometryError("points must be finite")
    return pts


def _unit(v: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    return v / np.where(norm > 0, norm, 1.0)


@dataclass(frozen=True)
class DomainSpec:
    """Base class for the shipped shapes.

    Subclasses implement the batch primitives ``inside``, ``distance`` and
    ``project``; ``distance`` is the unsigned distance to the boundary and is
    defined for every point in space.
    """

    name: str = field(init=False)
    dimension: int = field(init=False)
    cone_alpha: float = field(init=False)
    cone_r: float = field(init=False)

    # -- batch primitives -------------------------------------------------
    def inside(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def distance(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def project(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Nearest boundary points and the cone axis at each of them."""
        raise NotImplementedError

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def sample_boundary(self, count: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    @property
    def params(self) -> dict[str, Any]:
        raise NotImplementedError

    # -- derived ----------------------------------------------------------
    @property
    def diameter(self) -> float:
        lo, hi = self.bounding_box()
        return float(np.linalg.norm(hi - lo))

    def in_closure(self, pts: np.ndarray, atol: float = 1e-12) -> np.ndarray:
        pts = _as_points(pts, self.dimension)
        return self.inside(pts) | (self.distance(pts) <= atol)

    def contains(self, x: Any) -> bool:
        """True iff ``x`` lies in the open domain."""
        return bool(self.inside(_as_points(x, self.dimension))[0])

    def boundary_distance(self, x: Any) -> float:
        pts = _as_points(x, self.dimension)
        if not self.in_closure(pts)[0]:
            raise GeometryError(f"{np.ravel(x)} lies outside the closure of {self.name}")
        return float(self.distance(pts)[0])

    def boundary_project(self, x: Any) -> tuple[np.ndarray, np.ndarray]:
        pts = _as_points(x, self.dimension)
        if not self.in_closure(pts)[0]:
            raise GeometryError(f"{np.ravel(x)} lies outside the closure of {self.name}")
        xi, axis = self.project(pts)
        return xi[0], axis[0]

    def cone_points(self, xi: np.ndarray, axis: np.ndarray, count: int,
                    rng: np.random.Generator) -> np.ndarray:
        """Uniform samples of the truncated exterior cone ``xi + R(K)``."""
        n = self.dimension
        # uniform directions in the spherical cap of half-angle alpha
        cos_a = math.cos(self.cone_alpha)
        if n == 2:
            ang = rng.uniform(-self.cone_alpha, self.cone_alpha, count)
            local = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        else:
            z = rng.uniform(cos_a, 1.0, count)
            phi = rng.uniform(0.0, 2 * math.pi, count)
            s = np.sqrt(1 - z * z)
            local = np.stack([z, s * np.cos(phi), s * np.sin(phi)], axis=1)
        radius = self.cone_r * rng.uniform(0.0, 1.0, count) ** (1.0 / n)
        frame = _frame(np.asarray(axis, dtype=float))
        return xi + radius[:, None] * (local @ frame)


def _frame(axis: np.ndarray) -> np.ndarray:
    """Orthonormal rows whose first row is ``axis``."""
    n = axis.size
    basis = [axis / np.linalg.norm(axis)]
    for e in np.eye(n):
        v = e - sum(np.dot(e, b) * b for b in basis)
        if np.linalg.norm(v) > 1e-8:
            basis.append(v / np.linalg.norm(v))
        if len(basis) == n:
            break
    return np.array(basis)


def _sphere_points(count: int, n: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=(count, n))
    return _unit(v)


@dataclass(frozen=True)
class Ball(DomainSpec):
    """Open ball (disk when n=2) ``|x - center| < radius``."""

    radius: float = 1.0
    center: tuple[float, ...] = (0.0, 0.0)

    def __post_init__(self) -> None:
        n = len(self.center)
        if n not in (2, 3):
            raise ValueError("balls are supported for n = 2, 3")
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        object.__setattr__(self, "name", "disk" if n == 2 else "ball")
        object.__setattr__(self, "dimension", n)
        object.__setattr__(self, "cone_alpha", math.pi / 4)
        object.__setattr__(self, "cone_r", self.radius / 2)

    @property
    def params(self) -> dict[str, Any]:
        return {"radius": self.radius, "center": self.center}

    def _rel(self, pts):
        return pts - np.asarray(self.center)

    def inside(self, pts):
        return np.linalg.norm(self._rel(pts), axis=1) < self.radius

    def distance(self, pts):
        return np.abs(self.radius - np.linalg.norm(self._rel(pts), axis=1))

    def project(self, pts):
        rel = self._rel(pts)
        norm = np.linalg.norm(rel, axis=1)
        direction = np.zeros_like(rel)
        direction[:, 0] = 1.0  # the centre projects to angle zero
        ok = norm > 0
        direction[ok] = rel[ok] / norm[ok, None]
        return np.asarray(self.center) + self.radius * direction, direction

    def bounding_box(self):
        c = np.asarray(self.center)
        return c - self.radius, c + self.radius

    def sample_boundary(self, count, rng):
        return np.asarray(self.center) + self.radius * _sphere_points(count, self.dimension, rng)


@dataclass(frozen=True)
class Shell(DomainSpec):
    """Annulus (n=2) or spherical shell (n=3) ``inner < |x - center| < outer``."""

    inner: float = 0.25
    outer: float = 1.0
    center: tuple[float, ...] = (0.0, 0.0)

    def __post_init__(self) -> None:
        n = len(self.center)
        if n not in (2, 3):
            raise ValueError("shells are supported for n = 2, 3")
        if not 0 < self.inner < self.outer:
            raise ValueError("need 0 < inner < outer")
        object.__setattr__(self, "name", "annulus" if n == 2 else "shell")
        object.__setattr__(self, "dimension", n)
        object.__setattr__(self, "cone_alpha", math.pi / 4)
        # the cone into the hole has length at most 2 * inner * cos(alpha)
        object.__setattr__(self, "cone_r", min(self.inner, self.outer - self.inner) / 2)

    @property
    def params(self) -> dict[str, Any]:
        return {"inner": self.inner, "outer": self.outer, "center": self.center}

    def inside(self, pts):
        s = np.linalg.norm(pts - np.asarray(self.center), axis=1)
        return (s > self.inner) & (s < self.outer)

    def distance(self, pts):
        s = np.linalg.norm(pts - np.asarray(self.center), axis=1)
        return np.minimum(np.abs(s - self.inner), np.abs(self.outer - s))

    def project(self, pts):
        rel = pts - np.asarray(self.center)
        s = np.linalg.norm(rel, axis=1)
        direction = np.zeros_like(rel)
        direction[:, 0] = 1.0
        ok = s > 0
        direction[ok] = rel[ok] / s[ok, None]
        to_inner = np.abs(s - self.inner) <= np.abs(self.outer - s)
        radius = np.where(to_inner, self.inner, self.outer)
        xi = np.asarray(self.center) + radius[:, None] * direction
        axis = np.where(to_inner[:, None], -direction, direction)
        return xi, axis

    def bounding_box(self):
        c = np.asarray(self.center)
        return c - self.outer, c + self.outer

    def sample_boundary(self, count, rng):
        dirs = _sphere_points(count, self.dimension, rng)
        radius = np.where(rng.uniform(size=count) < 0.5, self.inner, self.outer)
        return np.asarray(self.center) + radius[:, None] * dirs


@dataclass(frozen=True)
class Box(DomainSpec):
    """Axis-aligned open box (square when n=2)."""

    lower: tuple[float, ...] = (0.0, 0.0)
    upper: tuple[float, ...] = (1.0, 1.0)

    def __post_init__(self) -> None:
        n = len(self.lower)
        if n not in (2, 3) or len(self.upper) != n:
            raise ValueError("boxes are supported for n = 2, 3")
        if not all(a < b for a, b in zip(self.lower, self.upper)):
            raise ValueError("need lower < upper in every coordinate")
        object.__setattr__(self, "name", "square" if n == 2 else "box")
        object.__setattr__(self, "dimension", n)
        object.__setattr__(self, "cone_alpha", math.pi / 4)
        object.__setattr__(
            self, "cone_r", min(b - a for a, b in zip(self.lower, self.upper)) / 2
        )

    @property
    def params(self) -> dict[str, Any]:
        return {"lower": self.lower, "upper": self.upper}

    def inside(self, pts):
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        return np.all((pts > lo) & (pts < hi), axis=1)

    def distance(self, pts):
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        clamped = np.clip(pts, lo, hi)
        outside = np.linalg.norm(pts - clamped, axis=1)
        inner = np.min(np.minimum(pts - lo, hi - pts), axis=1)
        return np.where(self.inside(pts), inner, outside)

    def project(self, pts):
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        xi = np.clip(pts, lo, hi)
        inner = self.inside(pts)
        if np.any(inner):
            p = pts[inner]
            gaps = np.concatenate([p - lo, hi - p], axis=1)  # lower faces first
            face = np.argmin(gaps, axis=1)  # argmin takes the first tie
            q = p.copy()
            n = self.dimension
            rows = np.arange(len(p))
            ax = face % n
            q[rows, ax] = np.where(face < n, lo[ax], hi[ax])
            xi[inner] = q
        normal = (xi <= lo).astype(float) * -1.0 + (xi >= hi).astype(float)
        return xi, _unit(normal)

    def bounding_box(self):
        return np.asarray(self.lower, float), np.asarray(self.upper, float)

    def sample_boundary(self, count, rng):
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        n = self.dimension
        pts = rng.uniform(lo, hi, size=(count, n))
        ax = rng.integers(0, n, count)
        side = rng.integers(0, 2, count)
        pts[np.arange(count), ax] = np.where(side == 0, lo[ax], hi[ax])
        return pts


@dataclass(frozen=True)
class Polygon(DomainSpec):
    """Simple polygon given by counter-clockwise vertices.

    Boundary points within ``cone_r`` of a reentrant vertex take that vertex's
    exterior-wedge bisector as cone axis; other points use the edge normal, or
    the exterior bisector at a convex vertex.
    """

    vertices: tuple[tuple[float, float], ...] = ((0.0, 0.0), (1.0, 0.0), (0.0, 1.0))
    label: str = "polygon"

    def __post_init__(self) -> None:
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise ValueError("polygon needs at least three 2-D vertices")
        area = 0.5 * np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1])
        if area <= 0:
            raise ValueError("polygon vertices must be counter-clockwise")
        object.__setattr__(self, "name", self.label)
        object.__setattr__(self, "dimension", 2)
        a, b = v, np.roll(v, -1, axis=0)
        edge = b - a
        normals = _unit(np.stack([edge[:, 1], -edge[:, 0]], axis=1))
        # vertex k joins edge k-1 and edge k
        prev_n = np.roll(normals, 1, axis=0)
        bisector = _unit(prev_n + normals)
        cross = np.roll(edge, 1, axis=0)[:, 0] * edge[:, 1] - np.roll(edge, 1, axis=0)[:, 1] * edge[:, 0]
        reentrant = cross < 0
        alpha = math.pi / 4
        for k in np.flatnonzero(reentrant):
            e_in, e_out = -np.roll(edge, 1, axis=0)[k], edge[k]
            cos_int = np.dot(e_in, e_out) / (np.linalg.norm(e_in) * np.linalg.norm(e_out))
            wedge = math.acos(np.clip(cos_int, -1.0, 1.0))  # exterior wedge angle
            alpha = min(alpha, 0.9 * wedge / 2)
        lengths = np.linalg.norm(edge, axis=1)
        clearance = lengths.min()
        m = len(v)
        for i in range(m):
            for j in range(m):
                if j in (i, (i + 1) % m, (i - 1) % m):
                    continue
                d = _segment_distance(v[i:i + 1], a[j], b[j])[0]
                clearance = min(clearance, d)
        object.__setattr__(self, "cone_alpha", alpha)
        object.__setattr__(self, "cone_r", float(clearance) / 2)
        object.__setattr__(self, "_geom", (a, b, normals, bisector, reentrant))

    @property
    def params(self) -> dict[str, Any]:
        return {"vertices": self.vertices}

    def inside(self, pts):
        a, b = self._geom[0], self._geom[1]
        x, y = pts[:, 0:1], pts[:, 1:2]
        crosses = ((a[:, 1] > y) != (b[:, 1] > y))
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = a[:, 0] + (y - a[:, 1]) * (b[:, 0] - a[:, 0]) / (b[:, 1] - a[:, 1])
        odd = np.sum(crosses & (x < xint), axis=1) % 2 == 1
        return odd & (self.distance(pts) > 0)

    def _nearest(self, pts):
        a, b = self._geom[0], self._geom[1]
        best = np.full(len(pts), np.inf)
        which = np.zeros(len(pts), dtype=int)
        tpar = np.zeros(len(pts))
        for k in range(len(a)):
            d, t = _segment_distance(pts, a[k], b[k], with_t=True)
            better = d < best  # strict: the lowest edge index wins ties
            best = np.where(better, d, best)
            which = np.where(better, k, which)
            tpar = np.where(better, t, tpar)
        return best, which, tpar

    def distance(self, pts):
        return self._nearest(pts)[0]

    def project(self, pts):
        a, b, normals, bisector, reentrant = self._geom
        _, which, t = self._nearest(pts)
        xi = a[which] + t[:, None] * (b[which] - a[which])
        axis = normals[which].copy()
        m = len(a)
        at_start = t <= 0.0
        at_end = t >= 1.0
        axis[at_start] = bisector[which[at_start]]
        axis[at_end] = bisector[(which[at_end] + 1) % m]
        for k in np.flatnonzero(reentrant):
            near = np.linalg.norm(xi - a[k], axis=1) < self.cone_r
            axis[near] = bisector[k]
        return xi, axis

    def bounding_box(self):
        v = np.asarray(self.vertices, float)
        return v.min(axis=0), v.max(axis=0)

    def sample_boundary(self, count, rng):
        a, b = self._geom[0], self._geom[1]
        lengths = np.linalg.norm(b - a, axis=1)
        k = rng.choice(len(a), size=count, p=lengths / lengths.sum())
        t = rng.uniform(size=count)
        return a[k] + t[:, None] * (b[k] - a[k])


def _segment_distance(pts, a, b, with_t=False):
    ab = b - a
    t = np.clip(((pts - a) @ ab) / np.dot(ab, ab), 0.0, 1.0)
    d = np.linalg.norm(pts - (a + t[:, None] * ab), axis=1)
    return (d, t) if with_t else d


def l_shape(size: float = 1.0) -> Polygon:
    """``(-size, size)^2`` with the closed upper-right quadrant removed."""
    s = float(size)
    verts = ((-s, -s), (s, -s), (s, 0.0), (0.0, 0.0), (0.0, s), (-s, s))
    return Polygon(vertices=verts, label="l_shape")


def make_domain(name: str, dimension: int = 2, **params: Any) -> DomainSpec:
    """Build a shipped domain from its name and shape parameters."""
    n = int(dimension)
    origin = tuple([0.0] * n)
    if name in ("disk", "ball"):
        return Ball(radius=float(params.get("radius", 1.0)),
                    center=tuple(params.get("center", origin)))
    if name in ("annulus", "shell"):
        return Shell(inner=float(params.get("inner", 0.25)),
                     outer=float(params.get("outer", 1.0)),
                     center=tuple(params.get("center", origin)))
    if name in ("square", "box"):
        return Box(lower=tuple(params.get("lower", origin)),
                   upper=tuple(params.get("upper", tuple([1.0] * n))))
    if name == "l_shape":
        if n != 2:
            raise ValueError("l_shape is two-dimensional")
        return l_shape(float(params.get("size", 1.0)))
    if name == "polygon":
        if n != 2:
            raise ValueError("polygons are two-dimensional")
        verts = tuple(tuple(float(c) for c in v) for v in params["vertices"])
        return Polygon(vertices=verts)
    raise ValueError(f"unknown domain {name!r}")
