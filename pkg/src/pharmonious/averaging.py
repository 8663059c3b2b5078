"""Ball means, ball midranges and their convex combination T_{rho,p} on a lattice."""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass
from functools import lru_cache

import numba
import numpy as np
from scipy.optimize import minimize, minimize_scalar
from scipy.spatial.transform import Rotation
from scipy.spatial import cKDTree
from scipy.special import roots_jacobi

from .domains import DomainSpec, GeometryError
from .grid import GridFunction, Lattice
from .radius import RadiusProfile, radius_at
from .reference import DegeneratePointError, SmoothFunction, normalized_p_laplacian

GOLDEN = math.pi * (3.0 - math.sqrt(5.0))


@dataclass(frozen=True)
class OperatorConfig:
    n: int = 2
    p: float = 2.0
    quad_points: int | None = None
    quad_rule: str | None = None

    def __post_init__(self) -> None:
        if self.n not in (2, 3):
            raise ValueError("only n = 2 and n = 3 are supported")
        if not self.p >= 2:
            raise ValueError(f"p must be >= 2 (or inf), got {self.p}")
        q = self.points
        if q < 16 or q % 2:
            raise ValueError("quad_points must be an even integer >= 16")
        if self.quad_rule not in (None, "rings" if self.n == 2 else "shells"):
            raise ValueError(f"quadrature rule {self.quad_rule!r} does not fit n = {self.n}")

    @property
    def points(self) -> int:
        """Off-center samples; the center is always added."""
        if self.quad_points is not None:
            return int(self.quad_points)
        return 64 if self.n == 2 else 128

    @property
    def midrange_weight(self) -> float:
        if math.isinf(self.p):
            return 1.0
        return (self.p - 2.0) / (self.n + self.p)

    @property
    def mean_weight(self) -> float:
        if math.isinf(self.p):
            return 0.0
        return (self.n + 2.0) / (self.n + self.p)


def radau_unit(k: int, b: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Radau rule for the weight ``t^b`` on [0, 1], ``k + 1`` nodes, the first fixed at 0.

    Weights are normalized to sum to one.
    """
    x, w = roots_jacobi(k, 0.0, b + 1.0)
    inner = w / (1.0 + x)
    total = 2.0 ** (b + 1.0) / (b + 1.0)
    nodes = np.concatenate([[0.0], (x + 1.0) / 2.0])
    weights = np.concatenate([[total - inner.sum()], inner]) / total
    return nodes, weights


def _even_counts(raw: np.ndarray, total: int, floor: int) -> np.ndarray:
    counts = np.maximum(floor, 2 * np.round(raw / 2)).astype(int)
    order = np.argsort(-raw)
    i = 0
    while counts.sum() != total:
        j = order[i % len(order)]
        step = 2 if counts.sum() < total else -2
        if counts[j] + step >= floor:
            counts[j] += step
        i += 1
        if i > 100 * len(order):
            raise ValueError(f"cannot split {total} samples over {len(raw)} layers")
    return counts


def _hemisphere(m: int, twist: float) -> np.ndarray:
    k = np.arange(m) + 0.5
    z = k / m
    s = np.sqrt(1.0 - z * z)
    a = GOLDEN * np.arange(m) + twist
    return np.column_stack([s * np.cos(a), s * np.sin(a), z])


def _polyhedra() -> tuple[np.ndarray, np.ndarray]:
    g = (1 + math.sqrt(5)) / 2
    ico = []
    for a in (-1, 1):
        for b in (-g, g):
            ico += [(0, a, b), (a, b, 0), (b, 0, a)]
    dod = [(a, b, c) for a in (-1, 1) for b in (-1, 1) for c in (-1, 1)]
    for a in (-1 / g, 1 / g):
        for b in (-g, g):
            dod += [(0, a, b), (a, b, 0), (b, 0, a)]
    ico, dod = np.array(ico, float), np.array(dod, float)
    return ico / np.linalg.norm(ico, axis=1, keepdims=True), dod / np.linalg.norm(dod, axis=1, keepdims=True)


def _design_split(m: int) -> tuple[int, int]:
    """Icosahedra and dodecahedra with ``12 a + 20 b = m``, preferring dodecahedra."""
    for b in range(m // 20, -1, -1):
        if (m - 20 * b) % 12 == 0:
            return (m - 20 * b) // 12, b
    raise ValueError(m)


def _designable(m: int) -> bool:
    return m % 4 == 0 and m >= 12 and m not in (16, 28)


def _sphere_layer(m: int, j: int, designs: bool) -> np.ndarray:
    if not designs:
        half = _hemisphere(m // 2, j * GOLDEN)
        return np.concatenate([half, -half])
    ico, dod = _polyhedra()
    a, b = _design_split(m)
    parts = [ico] * a + [dod] * b
    out = []
    for c, part in enumerate(parts):
        rot = Rotation.from_euler("zyz", [GOLDEN * (j + 1), 0.7 * (c + 1) + 0.3 * j, GOLDEN * c])
        out.append(rot.apply(part))
    return np.concatenate(out)


def _shell_counts(raw: np.ndarray, total: int) -> np.ndarray | None:
    """Shell sizes near ``raw`` that are unions of rotated icosahedra and dodecahedra."""
    counts = np.maximum(12, 4 * np.round(raw / 4)).astype(int)
    counts = np.array([c + 4 if not _designable(c) else c for c in counts])
    order = np.argsort(-raw)
    for i in range(200 * len(raw)):
        if counts.sum() == total:
            return counts
        j = order[i % len(order)]
        step = 4 if counts.sum() < total else -4
        c = counts[j] + step
        while c >= 12 and not _designable(c):
            c += step
        if c >= 12:
            counts[j] = c
    return None


@lru_cache(maxsize=None)
def ball_quadrature(n: int, count: int) -> tuple[np.ndarray, np.ndarray]:
    """Centrally symmetric sample set in the unit ball and its positive weights.

    Row 0 is the center. Layers sit at Gauss-Radau nodes in ``t = r^2`` for
    the weight ``t^((n-2)/2)``, so sphere averages of polynomials (which are
    polynomials in ``t``) are integrated exactly up to degree ``2K``; each layer carries
    an even number of points closed under ``z -> -z`` with counts
    proportional to its area. Planar rings are equally spaced (exact for
    trigonometric degree below their size); spherical shells are unions of
    rotated icosahedra and dodecahedra (exact through degree 5) when the
    count allows it, and a Fibonacci hemisphere with its antipodes otherwise.
    """
    if n == 2:
        k = max(2, int(round(math.sqrt(count) / 2)))
    else:
        k = max(2, int(round(count ** (1 / 3) / 1.6)))
    t, ws = radau_unit(k, (n - 2) / 2)
    radii = np.sqrt(t[1:])
    raw = count * radii ** (n - 1) / np.sum(radii ** (n - 1))
    designs = False
    if n == 2:
        counts = _even_counts(raw, count, 4)
    else:
        counts = _shell_counts(raw, count) if count % 4 == 0 else None
        designs = counts is not None
        if counts is None:
            counts = _even_counts(raw, count, 6)
    pts = [np.zeros((1, n))]
    wts = [np.array([ws[0]])]
    for j, (r, m) in enumerate(zip(radii, counts)):
        if n == 2:
            a = (j % 2) * math.pi / m + 2 * math.pi * np.arange(m // 2) / m
            half = np.column_stack([np.cos(a), np.sin(a)])
            ring = np.concatenate([half, -half])
        else:
            ring = _sphere_layer(int(m), j, designs)
        pts.append(r * ring)
        wts.append(np.full(len(ring), ws[j + 1] / len(ring)))
    pts = np.concatenate(pts)
    wts = np.concatenate(wts)
    pts.flags.writeable = False
    wts.flags.writeable = False
    return pts, wts


@dataclass(frozen=True, eq=False)
class OperatorPlan:
    """Precomputed sample stencils for every interior node."""

    radius: np.ndarray
    ids: np.ndarray
    wts: np.ndarray
    qw: np.ndarray
    extra_ptr: np.ndarray
    extra_ids: np.ndarray
    midrange_weight: float
    mean_weight: float


_PLANS: "weakref.WeakKeyDictionary[Lattice, dict]" = weakref.WeakKeyDictionary()


def _nodes_in_balls(points, radii, tree_points, exclude_self=True):
    tree = cKDTree(tree_points)
    hits = tree.query_ball_point(points, radii * (1 - 1e-12), return_sorted=True)
    lengths = np.array([len(h) for h in hits], dtype=np.int64)
    ptr = np.zeros(len(points) + 1, dtype=np.int64)
    np.cumsum(lengths, out=ptr[1:])
    ids = np.fromiter((j for h in hits for j in h), dtype=np.int32, count=int(ptr[-1]))
    if exclude_self:
        keep = np.ones(len(ids), dtype=bool)
        row = np.repeat(np.arange(len(points)), lengths)
        keep &= ids != row
        ids = ids[keep]
        ptr = np.zeros(len(points) + 1, dtype=np.int64)
        np.cumsum(np.bincount(row[keep], minlength=len(points)), out=ptr[1:])
    return ptr, ids


def operator_plan(lattice: Lattice, profile: RadiusProfile, cfg: OperatorConfig) -> OperatorPlan:
    """Build (or fetch from cache) the stencils of T on ``lattice``."""
    if cfg.n != lattice.n:
        raise ValueError("operator dimension does not match the lattice")
    cache = _PLANS.setdefault(lattice, {})
    key = (profile, cfg)
    if key in cache:
        return cache[key]
    offsets, qw = ball_quadrature(cfg.n, cfg.points)
    rho = profile.from_distance(lattice.interior_distance)
    x = lattice.interior_nodes
    pts = (x[:, None, :] + rho[:, None, None] * offsets[None, :, :]).reshape(-1, cfg.n)
    ids, wts = lattice.stencil(pts)
    q1, s = len(qw), ids.shape[1]
    ids = ids.reshape(len(x), q1, s)
    wts = wts.reshape(len(x), q1, s)
    if cfg.midrange_weight > 0:
        ptr, extra = _nodes_in_balls(x, rho, x)
    else:
        ptr, extra = np.zeros(len(x) + 1, dtype=np.int64), np.zeros(0, dtype=np.int32)
    plan = OperatorPlan(rho, ids, wts, np.ascontiguousarray(qw), ptr, extra,
                        cfg.midrange_weight, cfg.mean_weight)
    cache[key] = plan
    return plan


@numba.njit(cache=True, inline="always")
def _sample(values, ids, wts, i, q):
    s = 0.0
    lo = np.inf
    hi = -np.inf
    for c in range(ids.shape[2]):
        w = wts[i, q, c]
        if w > 0.0:
            v = values[ids[i, q, c]]
            s += w * v
            lo = min(lo, v)
            hi = max(hi, v)
    return min(max(s, lo), hi)


@numba.njit(parallel=True, cache=True)
def _apply_kernel(values, ids, wts, qw, ptr, extra, cs, cm, out):
    for i in numba.prange(ids.shape[0]):
        acc = 0.0
        lo = np.inf
        hi = -np.inf
        for q in range(ids.shape[1]):
            v = _sample(values, ids, wts, i, q)
            acc += qw[q] * v
            lo = min(lo, v)
            hi = max(hi, v)
        mean = min(max(acc, lo), hi)
        for k in range(ptr[i], ptr[i + 1]):
            v = values[extra[k]]
            lo = min(lo, v)
            hi = max(hi, v)
        if cs == 0.0:
            r = mean
        elif cm == 0.0:
            r = 0.5 * (hi + lo)
        else:
            r = cs * (0.5 * (hi + lo)) + cm * mean
        out[i] = min(max(r, lo), hi)


@numba.njit(parallel=True, cache=True)
def _extremes_kernel(values, ids, wts, qw, ptr, extra, mean_out, lo_out, hi_out):
    for i in numba.prange(ids.shape[0]):
        acc = 0.0
        lo = np.inf
        hi = -np.inf
        for q in range(ids.shape[1]):
            v = _sample(values, ids, wts, i, q)
            acc += qw[q] * v
            lo = min(lo, v)
            hi = max(hi, v)
        mean_out[i] = min(max(acc, lo), hi)
        for k in range(ptr[i], ptr[i + 1]):
            v = values[extra[k]]
            lo = min(lo, v)
            hi = max(hi, v)
        lo_out[i] = lo
        hi_out[i] = hi


def apply_plan(plan: OperatorPlan, values: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
    """Interior values of T u for nodal values ``values`` (interior then boundary)."""
    if out is None:
        out = np.empty(plan.ids.shape[0])
    _apply_kernel(values, plan.ids, plan.wts, plan.qw, plan.extra_ptr, plan.extra_ids,
                  plan.midrange_weight, plan.mean_weight, out)
    return out


def apply_T(u: GridFunction, profile: RadiusProfile, cfg: OperatorConfig) -> GridFunction:
    """T_{rho,p} u: the convex combination at interior nodes, u itself on the boundary."""
    plan = operator_plan(u.lattice, profile, cfg)
    return u.with_interior(apply_plan(plan, np.ascontiguousarray(u.values)))


def nodal_parts(u: GridFunction, profile: RadiusProfile, cfg: OperatorConfig):
    """Per-node ball mean and sample-based inf/sup (with in-ball nodes when midrange is active)."""
    plan = operator_plan(u.lattice, profile, cfg)
    m = len(plan.radius)
    mean, lo, hi = np.empty(m), np.empty(m), np.empty(m)
    ptr, extra = plan.extra_ptr, plan.extra_ids
    if plan.midrange_weight == 0.0:
        ptr, extra = _nodes_in_balls(u.lattice.interior_nodes, plan.radius, u.lattice.interior_nodes)
    _extremes_kernel(np.ascontiguousarray(u.values), plan.ids, plan.wts, plan.qw, ptr, extra,
                     mean, lo, hi)
    return mean, lo, hi


def _check_ball(domain: DomainSpec, x: np.ndarray, radius: float) -> None:
    if radius <= 0:
        raise GeometryError("ball radius must be positive")
    pts = x.reshape(1, -1)
    if not domain.inside(pts)[0] or domain.distance(pts)[0] < radius * (1 - 1e-12):
        raise GeometryError(f"ball of radius {radius} at {x} is not contained in {domain.name}")


def _ball_samples(u: GridFunction, x, radius: float, cfg: OperatorConfig):
    lat = u.lattice
    x = np.asarray(x, dtype=float).ravel()
    _check_ball(lat.domain, x, radius)
    offsets, qw = ball_quadrature(cfg.n, cfg.points)
    ids, wts = lat.stencil(x + radius * offsets)
    vals = u.values
    corner = vals[ids]
    used = wts > 0
    raw = np.sum(wts * corner, axis=1)
    lo = np.where(used, corner, np.inf).min(axis=1)
    hi = np.where(used, corner, -np.inf).max(axis=1)
    return x, np.clip(raw, lo, hi), qw


def ball_mean(u: GridFunction, x, radius: float, cfg: OperatorConfig) -> float:
    _, samples, qw = _ball_samples(u, x, radius, cfg)
    return float(np.clip(qw @ samples, samples.min(), samples.max()))


def ball_extremes(u: GridFunction, x, radius: float, cfg: OperatorConfig) -> tuple[float, float]:
    """(sup, inf) over the samples and every lattice node strictly inside the ball."""
    x, samples, _ = _ball_samples(u, x, radius, cfg)
    nodes = u.lattice.nodes
    inside = np.sum((nodes - x) ** 2, axis=1) < (radius * (1 - 1e-12)) ** 2
    vals = np.concatenate([samples, u.values[inside]])
    return float(vals.max()), float(vals.min())


def sphere_extremes(func, x: np.ndarray, rho: float, n: int) -> tuple[float, float]:
    """Max and min of ``func`` on the sphere ``|y - x| = rho`` (grid search then local refinement)."""
    if n == 2:
        grid = np.linspace(0.0, 2 * math.pi, 1440, endpoint=False)
        vals = func(x + rho * np.column_stack([np.cos(grid), np.sin(grid)]))
        step = grid[1] - grid[0]
        ext = []
        for sign in (1.0, -1.0):
            a0 = grid[np.argmax(sign * vals)]
            res = minimize_scalar(
                lambda a: -sign * func((x + rho * np.array([math.cos(a), math.sin(a)]))[None, :])[0],
                bounds=(a0 - step, a0 + step), method="bounded", options={"xatol": 1e-12},
            )
            ext.append(sign * max(-res.fun, np.max(sign * vals)))
        return ext[0], ext[1]
    dirs = np.concatenate([_hemisphere(2000, 0.0), -_hemisphere(2000, 0.0)])
    vals = func(x + rho * dirs)

    def on_sphere(ang):
        t, f = ang
        return x + rho * np.array([math.sin(t) * math.cos(f), math.sin(t) * math.sin(f), math.cos(t)])

    ext = []
    for sign in (1.0, -1.0):
        d = dirs[np.argmax(sign * vals)]
        start = [math.acos(np.clip(d[2], -1, 1)), math.atan2(d[1], d[0])]
        res = minimize(lambda a: -sign * func(on_sphere(a)[None, :])[0], start, method="Nelder-Mead",
                       options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 4000})
        ext.append(max(-sign * res.fun, np.max(sign * vals)) * sign)
    return ext[0], ext[1]


def continuum_T(phi: SmoothFunction, x, rho: float, cfg: OperatorConfig) -> float:
    """T_{rho,p} phi(x) for a closed-form phi: quadrature mean and refined extremes."""
    x = np.asarray(x, dtype=float).ravel()
    offsets, qw = ball_quadrature(cfg.n, cfg.points)
    samples = phi(x + rho * offsets)
    mean = float(qw @ samples)
    hi, lo = sphere_extremes(phi, x, rho, cfg.n)
    hi = max(hi, float(samples.max()))
    lo = min(lo, float(samples.min()))
    return cfg.midrange_weight * 0.5 * (hi + lo) + cfg.mean_weight * mean


def consistency_residual(phi: SmoothFunction, x, profile: RadiusProfile, cfg: OperatorConfig,
                         domain: DomainSpec) -> float:
    """``T phi(x) - phi(x) - rho(x)^2 / (2(n+p)) * Delta_p^N phi(x)``.

    The mean uses the ball quadrature; sup and inf are located on the sphere by
    a local optimizer (the sample extremes carry an O(rho) bias that would mask
    the second-order term).
    """
    x = np.asarray(x, dtype=float).ravel()
    if math.isinf(cfg.p):
        raise ValueError("the expansion needs a finite p")
    lap = normalized_p_laplacian(phi, x, cfg.p)
    rho = radius_at(profile, domain, x)
    if rho <= 0:
        raise GeometryError("x must be an interior point")
    t = continuum_T(phi, x, rho, cfg)
    return t - float(phi(x[None, :])[0]) - rho ** 2 / (2 * (cfg.n + cfg.p)) * lap


__all__ = [
    "OperatorConfig", "OperatorPlan", "ball_quadrature", "radau_unit", "operator_plan",
    "apply_plan", "apply_T", "nodal_parts", "ball_mean", "ball_extremes", "continuum_T", "sphere_extremes",
    "consistency_residual", "DegeneratePointError",
]
