"""Uniform lattices over a domain, grid functions and interpolation."""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.spatial import Delaunay, cKDTree

from .domains import BOUNDARY_SNAP, DomainSpec, GeometryError


class ConfigurationError(ValueError):
    """Invalid discretisation or run parameters."""


def _merge_close(points: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Collapse points closer than ``tol``; returns (unique points, labels)."""
    labels = np.arange(len(points))
    if len(points) == 0:
        return points, labels
    pairs = cKDTree(points).query_pairs(tol, output_type="ndarray")
    if len(pairs):
        # union-find on the close pairs, smallest index is the representative
        parent = np.arange(len(points))

        def root(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for i, j in pairs:
            ri, rj = root(i), root(j)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)
        labels = np.array([root(i) for i in range(len(points))])
    keep, inverse = np.unique(labels, return_inverse=True)
    return points[keep], inverse


@dataclass(frozen=True, eq=False)
class Lattice:
    """Nodes ``k * h`` strictly inside the domain plus snapped boundary nodes.

    Node ids run over ``interior_nodes`` first and then ``boundary_nodes``.
    ``node_map`` maps every lattice index of the bounding grid to a node id
    (-1 when the lattice point is not a node); ``snap_map`` maps lattice points
    outside the domain that are corners of partially interior cells to the
    boundary node obtained by projecting them.
    """

    domain: DomainSpec
    h: float
    interior_nodes: np.ndarray
    boundary_nodes: np.ndarray
    boundary_axes: np.ndarray
    kmin: np.ndarray
    shape: tuple[int, ...]
    node_map: np.ndarray
    snap_map: np.ndarray

    @property
    def n(self) -> int:
        return self.domain.dimension

    @property
    def n_interior(self) -> int:
        return len(self.interior_nodes)

    @property
    def n_boundary(self) -> int:
        return len(self.boundary_nodes)

    @cached_property
    def nodes(self) -> np.ndarray:
        return np.concatenate([self.interior_nodes, self.boundary_nodes])

    @cached_property
    def interior_distance(self) -> np.ndarray:
        return self.domain.distance(self.interior_nodes)

    @cached_property
    def triangulation(self) -> Delaunay:
        return Delaunay(self.nodes)

    def stencil(self, points: np.ndarray, chunk: int = 200_000) -> tuple[np.ndarray, np.ndarray]:
        """Node ids and nonnegative weights reproducing the interpolant.

        Cells whose corners carrying weight are all nodes use multilinear
        weights. Points in cells cut by the boundary use linear interpolation
        on the Delaunay triangulation of all nodes, which stays exact on affine
        functions; points outside its hull fall back to multilinear weights
        with missing corners replaced by their snapped boundary nodes.
        """
        points = np.asarray(points, dtype=float)
        m, n = points.shape
        s = 2 ** n
        ids = np.empty((m, s), dtype=np.int32)
        wts = np.empty((m, s), dtype=float)
        for start in range(0, m, chunk):
            sl = slice(start, min(start + chunk, m))
            ids[sl], wts[sl] = self._stencil_chunk(points[sl])
        return ids, wts

    def _stencil_chunk(self, pts):
        n = self.n
        offsets = np.array(list(itertools.product((0, 1), repeat=n)))
        scaled = pts / self.h
        base = np.floor(scaled)
        t = np.clip(scaled - base, 0.0, 1.0)
        cell = base.astype(np.int64) - self.kmin
        corners = cell[:, None, :] + offsets[None, :, :]
        inside = np.all((corners >= 0) & (corners < np.array(self.shape)), axis=2)
        flat = np.ravel_multi_index(
            tuple(np.clip(corners, 0, np.array(self.shape) - 1).transpose(2, 0, 1)), self.shape
        )
        ids = np.where(inside, self.node_map[flat], -1)
        snapped = np.where(inside, self.snap_map[flat], -1)
        wts = np.ones(ids.shape)
        for d in range(n):
            wts *= np.where(offsets[None, :, d] == 1, t[:, None, d], 1.0 - t[:, None, d])
        missing = (ids < 0) & (wts > 0)
        bad = np.flatnonzero(np.any(missing, axis=1))
        ids = np.where(ids < 0, 0, ids)
        if len(bad):
            tri = self.triangulation
            simplex = tri.find_simplex(pts[bad])
            hit = simplex >= 0
            rows = bad[hit]
            if len(rows):
                trans = tri.transform[simplex[hit]]
                delta = pts[rows] - trans[:, n]
                bary = np.einsum("ijk,ik->ij", trans[:, :n], delta)
                bary = np.concatenate([bary, 1 - bary.sum(axis=1, keepdims=True)], axis=1)
                bary = np.clip(bary, 0.0, None)
                bary /= bary.sum(axis=1, keepdims=True)
                ids[rows] = 0
                wts[rows] = 0.0
                ids[rows, : n + 1] = tri.simplices[simplex[hit]]
                wts[rows, : n + 1] = bary
            rows = bad[~hit]
            if len(rows):
                fill = missing[rows]
                sub_ids = ids[rows]
                sub_ids[fill] = snapped[rows][fill]
                if np.any(sub_ids[fill] < 0):
                    raise GeometryError("interpolation point is not covered by the lattice")
                ids[rows] = sub_ids
        return ids, wts


def build_lattice(domain: DomainSpec, h: float) -> Lattice:
    """Lattice of spacing ``h`` over ``domain``."""
    h = float(h)
    if not 0 < h < domain.diameter / 4:
        raise ConfigurationError(f"lattice spacing h={h} must lie in (0, diam/4)")
    n = domain.dimension
    lo, hi = domain.bounding_box()
    kmin = np.floor(lo / h).astype(np.int64) - 1
    kmax = np.ceil(hi / h).astype(np.int64) + 1
    shape = tuple(int(v) for v in kmax - kmin + 1)
    axes = [np.arange(kmin[d], kmax[d] + 1) * h for d in range(n)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    dist = domain.distance(pts)
    on_boundary = dist <= BOUNDARY_SNAP * h
    interior = domain.inside(pts) & ~on_boundary
    if not np.any(interior):
        raise ConfigurationError(f"h={h} is too coarse: no interior lattice nodes")

    grid_int = interior.reshape(shape)
    near = np.zeros(shape, dtype=bool)
    for off in itertools.product((-1, 0, 1), repeat=n):
        near |= np.roll(grid_int, off, axis=tuple(range(n)))
    corner = near.reshape(-1) & ~interior
    close_inside = interior & (dist < h)

    sources = np.concatenate([pts[corner], pts[close_inside]])
    proj, proj_axes = domain.project(sources)
    boundary, labels = _merge_close(proj, 1e-6 * h)
    # axis of the first source hitting each merged node
    first = np.full(len(boundary), -1)
    for i, lab in enumerate(labels):
        if first[lab] < 0:
            first[lab] = i
    axes_b = proj_axes[first]

    n_int = int(interior.sum())
    node_map = np.full(pts.shape[0], -1, dtype=np.int32)
    node_map[interior] = np.arange(n_int, dtype=np.int32)
    snap_map = np.full(pts.shape[0], -1, dtype=np.int32)
    corner_idx = np.flatnonzero(corner)
    snap_map[corner_idx] = n_int + labels[: len(corner_idx)]
    on_b = corner_idx[on_boundary[corner_idx]]
    node_map[on_b] = snap_map[on_b]
    return Lattice(
        domain=domain,
        h=h,
        interior_nodes=pts[interior],
        boundary_nodes=boundary,
        boundary_axes=axes_b,
        kmin=kmin,
        shape=shape,
        node_map=node_map,
        snap_map=snap_map,
    )


@dataclass(frozen=True)
class BoundaryData:
    """Boundary values, either a function of points or per-node samples."""

    func: Callable[[np.ndarray], np.ndarray] | None = None
    samples: np.ndarray | None = None

    def __post_init__(self) -> None:
        if (self.func is None) == (self.samples is None):
            raise ValueError("give exactly one of func or samples")

    @classmethod
    def constant(cls, c: float) -> "BoundaryData":
        return cls(func=lambda pts: np.full(len(pts), float(c)))

    def on(self, lattice: Lattice) -> np.ndarray:
        if self.func is not None:
            values = np.asarray(self.func(lattice.boundary_nodes), dtype=float)
            values = np.broadcast_to(values, (lattice.n_boundary,)).copy()
        else:
            values = np.asarray(self.samples, dtype=float)
            if values.shape != (lattice.n_boundary,):
                raise ValueError("boundary samples do not match the boundary nodes")
        if not np.all(np.isfinite(values)):
            raise ValueError("boundary data must be finite on every boundary node")
        return values

    def at(self, points: np.ndarray, lattice: Lattice) -> np.ndarray:
        """Values at boundary points (nearest boundary node for samples)."""
        if self.func is not None:
            return np.asarray(self.func(points), dtype=float)
        _, k = cKDTree(lattice.boundary_nodes).query(points)
        return self.on(lattice)[k]


@dataclass(frozen=True, eq=False)
class GridFunction:
    lattice: Lattice
    interior_values: np.ndarray
    boundary_values: np.ndarray

    def __post_init__(self) -> None:
        iv = np.array(self.interior_values, dtype=float)
        bv = np.array(self.boundary_values, dtype=float)
        if iv.shape != (self.lattice.n_interior,) or bv.shape != (self.lattice.n_boundary,):
            raise ValueError("value arrays do not match the lattice node counts")
        iv.flags.writeable = False
        bv.flags.writeable = False
        object.__setattr__(self, "interior_values", iv)
        object.__setattr__(self, "boundary_values", bv)

    @classmethod
    def from_values(cls, lattice: Lattice, values: np.ndarray) -> "GridFunction":
        values = np.asarray(values, dtype=float)
        return cls(lattice, values[: lattice.n_interior], values[lattice.n_interior:])

    @classmethod
    def from_function(cls, lattice: Lattice, func: Callable[[np.ndarray], np.ndarray]) -> "GridFunction":
        return cls.from_values(lattice, np.broadcast_to(func(lattice.nodes), (len(lattice.nodes),)))

    @property
    def values(self) -> np.ndarray:
        return np.concatenate([self.interior_values, self.boundary_values])

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def with_interior(self, interior: np.ndarray) -> "GridFunction":
        return GridFunction(self.lattice, interior, self.boundary_values)

    def to_csv(self, path: str | Path) -> None:
        write_node_csv(path, self.lattice.nodes, self.values)


def write_node_csv(path: str | Path, nodes: np.ndarray, values: np.ndarray) -> None:
    n = nodes.shape[1]
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow([f"x{i + 1}" for i in range(n)] + ["value"])
        for x, v in zip(nodes, values):
            out.writerow([f"{c:.17g}" for c in x] + [f"{v:.17g}"])


def extend_boundary_data(lattice: Lattice, f: BoundaryData) -> GridFunction:
    """Norm-preserving extension: boundary value at the projection, clamped."""
    fb = f.on(lattice)
    xi, _ = lattice.domain.project(lattice.interior_nodes)
    inner = np.clip(f.at(xi, lattice), fb.min(), fb.max())
    return GridFunction(lattice, inner, fb)


def sup_norm_diff(u: GridFunction, v: GridFunction) -> float:
    if u.lattice is not v.lattice:
        raise ValueError("grid functions live on different lattices")
    return float(np.max(np.abs(u.values - v.values)))


def interpolate(u: GridFunction, x) -> float:
    lat = u.lattice
    pts = np.asarray(x, dtype=float).reshape(1, -1)
    if pts.shape[1] != lat.n:
        raise GeometryError("dimension mismatch")
    if not lat.domain.in_closure(pts)[0]:
        raise GeometryError(f"{np.ravel(x)} lies outside the closure of the domain")
    ids, wts = lat.stencil(pts)
    return float(np.dot(wts[0], u.values[ids[0]]))
