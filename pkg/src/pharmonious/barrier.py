"""Cone barriers U, w and w_xi, their constants, and numeric certificates for them."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicHermiteSpline
from scipy.special import beta as beta_fn
from scipy.special import betainc

from .averaging import OperatorConfig, apply_T, ball_quadrature, sphere_extremes
from .domains import DomainSpec, GeometryError
from .grid import GridFunction, Lattice
from .radius import RadiusProfile

GAMMA_FACTOR = 0.9
ANGLE_SLACK = 1e-12


def _check_angle(theta) -> np.ndarray:
    t = np.abs(np.asarray(theta, dtype=float))
    if np.any(t >= math.pi):
        raise ValueError("phi is defined for |theta| < pi")
    return t


def sin_power_integral(t, k: float) -> np.ndarray:
    """``int_0^t sin(s)^k ds`` for ``0 <= t <= pi`` through the regularized incomplete beta."""
    t = np.asarray(t, dtype=float)
    a = (k + 1.0) / 2.0
    half = 0.5 * beta_fn(a, 0.5)
    part = half * betainc(a, 0.5, np.sin(t) ** 2)
    return np.where(t <= math.pi / 2, part, 2.0 * half - part)


def phi_prime(theta, n: int) -> np.ndarray:
    """``phi'(theta) = sin(theta)^(2-n) int_0^theta sin(s)^(n-2) ds`` (odd in theta)."""
    t = _check_angle(theta)
    sign = np.sign(np.asarray(theta, dtype=float))
    if n == 2:
        return sign * t
    k = n - 2
    with np.errstate(invalid="ignore", divide="ignore"):
        out = sin_power_integral(t, k) / np.sin(t) ** k
    return sign * np.where(t == 0, 0.0, out)


def phi_second(theta, n: int) -> np.ndarray:
    """``phi'' = 1 - (n-2) phi' cot(theta)``; the limit at 0 is ``1/(n-1)``."""
    t = _check_angle(theta)
    if n == 2:
        return np.ones_like(t)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = 1.0 - (n - 2) * phi_prime(t, n) / np.tan(t)
    return np.where(t == 0, 1.0 / (n - 1), out)


def phi(theta, n: int):
    """``phi(theta) = int_0^|theta| phi'(t) dt`` by adaptive quadrature."""
    t = _check_angle(theta)
    flat = np.array([quad(lambda s: float(phi_prime(s, n)), 0.0, v, epsabs=1e-15, epsrel=1e-13,
                          limit=200)[0] if v > 0 else 0.0 for v in np.ravel(t)])
    out = flat.reshape(t.shape)
    return float(out) if out.ndim == 0 else out


@lru_cache(maxsize=32)
def phi_table(n: int, theta_max: float, panels: int = 4096) -> CubicHermiteSpline:
    """Hermite interpolant of phi on [0, theta_max] exact to about 1e-14.

    Panel integrals use 10-point Gauss-Legendre on the smooth integrand phi'.
    """
    knots = np.linspace(0.0, theta_max, panels + 1)
    g, gw = np.polynomial.legendre.leggauss(10)
    mid = 0.5 * (knots[1:] + knots[:-1])
    half = 0.5 * (knots[1:] - knots[:-1])
    pts = mid[:, None] + half[:, None] * g[None, :]
    panel = half * (phi_prime(pts, n) @ gw)
    vals = np.concatenate([[0.0], np.cumsum(panel)])
    return CubicHermiteSpline(knots, vals, phi_prime(knots, n))


class PhiTable:
    """Vectorized phi, phi', phi'' on ``|theta| <= theta_max``."""

    def __init__(self, n: int, theta_max: float):
        self.n = n
        self.theta_max = float(theta_max)
        self._spline = phi_table(n, self.theta_max)

    def __call__(self, theta) -> np.ndarray:
        t = np.abs(np.asarray(theta, dtype=float))
        if np.any(t > self.theta_max * (1 + 1e-12)):
            raise ValueError("angle beyond the tabulated range")
        return self._spline(np.minimum(t, self.theta_max))

    def prime(self, theta) -> np.ndarray:
        return phi_prime(theta, self.n)

    def second(self, theta) -> np.ndarray:
        return phi_second(theta, self.n)


def phi_upper_bound(n: int, alpha: float) -> float:
    return math.pi ** 2 / 8 + math.pi / (2 * math.sin(alpha) ** (n - 2))


def phi_prime_upper_bound(n: int, alpha: float) -> float:
    return math.pi / math.sin(alpha) ** (n - 2)


def gamma_bound(n: int, alpha: float) -> float:
    """Strict upper bound on the barrier exponent: ``8 sin(alpha)^(n-2) / (n (13 pi^2 + 4 pi))``."""
    return 8 * math.sin(alpha) ** (n - 2) / (n * (13 * math.pi ** 2 + 4 * math.pi))


def A_interval(n: int, alpha: float, gamma: float) -> tuple[float, float]:
    lo = math.pi ** 2 / 8 + (3 * math.pi ** 2 + math.pi) / (2 * math.sin(alpha) ** (n - 2))
    hi = 1.0 / (gamma * (gamma + n - 2))
    return lo, hi


@dataclass(frozen=True)
class BarrierFamily:
    n: int
    alpha: float
    r: float
    gamma: float
    A: float
    m: float

    def __post_init__(self) -> None:
        if not 0 < self.alpha < math.pi / 2:
            raise ValueError("alpha must lie in (0, pi/2)")
        if not self.r > 0:
            raise ValueError("r must be positive")
        if not (0 < self.gamma < gamma_bound(self.n, self.alpha) and self.gamma <= 0.5):
            raise ValueError(f"gamma={self.gamma} violates the exponent constraint")
        lo, hi = A_interval(self.n, self.alpha, self.gamma)
        if not lo <= self.A <= hi:
            raise ValueError(f"A={self.A} lies outside [{lo}, {hi}]")
        if not self.m > 0:
            raise ValueError("plateau level must be positive")

    @property
    def theta_max(self) -> float:
        return math.pi - self.alpha

    @property
    def table(self) -> PhiTable:
        return PhiTable(self.n, self.theta_max)

    def L(self, t) -> np.ndarray:
        """Lower control ``alpha^(2-n) min(t, r)^gamma``."""
        return self.alpha ** (2 - self.n) * np.minimum(np.asarray(t, dtype=float), self.r) ** self.gamma


def choose_constants(n: int, alpha: float, r: float) -> BarrierFamily:
    """gamma at 90% of its bound (capped at 1/2), A at the midpoint of its interval."""
    if not 0 < alpha < math.pi / 2:
        raise ValueError("alpha must lie in (0, pi/2)")
    g = min(GAMMA_FACTOR * gamma_bound(n, alpha), 0.5)
    lo, hi = A_interval(n, alpha, g)
    s = math.sin(alpha) ** (n - 2)
    # 1/(g(g+n-2)) > 1/(g n) > (13 pi^2 + 4 pi)/(8 s) >= lower end
    assert hi > 1.0 / (g * n) > (13 * math.pi ** 2 + 4 * math.pi) / (8 * s) >= lo, "empty interval for A"
    return BarrierFamily(n, alpha, r, g, 0.5 * (lo + hi), alpha ** (2 - n) * r ** g)


def polar(x) -> tuple[np.ndarray, np.ndarray]:
    """``R = |x|`` and the angle to the positive first axis."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    R = np.linalg.norm(x, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        c = np.clip(x[:, 0] / R, -1.0, 1.0)
    return R, np.where(R > 0, np.arccos(c), 0.0)


def _U_polar(fam: BarrierFamily, R, theta, table: PhiTable | None = None):
    table = table or fam.table
    bad = theta > fam.theta_max + ANGLE_SLACK
    if np.any(bad & (R > 0)):
        raise GeometryError("point lies inside the excluded cone")
    th = np.minimum(theta, fam.theta_max)
    with np.errstate(divide="ignore"):
        return np.where(R > 0, R ** fam.gamma * (fam.A - table(th)), 0.0)


def eval_U(family: BarrierFamily, x):
    """``|x|^gamma (A - phi(theta))`` on the closed cone complement."""
    R, th = polar(x)
    out = _U_polar(family, R, th)
    return float(out[0]) if np.ndim(x) == 1 else out


def _w_polar(fam: BarrierFamily, R, theta):
    far = R >= fam.r
    if np.any(~far & (theta > fam.theta_max + ANGLE_SLACK)):
        raise GeometryError("point lies inside the truncated cone")
    U = _U_polar(fam, np.where(far, 0.0, R), np.where(far, 0.0, theta))
    return np.where(far, fam.m, np.minimum(U, fam.m))


def eval_w(family: BarrierFamily, x):
    """``min(U, m)`` inside ``B(0, r)`` and ``m`` outside."""
    R, th = polar(x)
    out = _w_polar(family, R, th)
    return float(out[0]) if np.ndim(x) == 1 else out


def local_polar(xi, axis, x) -> tuple[np.ndarray, np.ndarray]:
    """Polar coordinates of ``x - xi`` in the frame whose negative first axis is ``axis``."""
    d = np.atleast_2d(np.asarray(x, dtype=float)) - np.asarray(xi, dtype=float)
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    R = np.linalg.norm(d, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        c = np.clip(-(d @ a) / R, -1.0, 1.0)
    return R, np.where(R > 0, np.arccos(c), 0.0)


def eval_w_xi(family: BarrierFamily, xi, axis, x):
    """The truncated-cone barrier translated to ``xi`` with its cone along ``axis``."""
    R, th = local_polar(xi, axis, x)
    out = _w_polar(family, R, th)
    return float(out[0]) if np.ndim(x) == 1 else out


def laplacian_U_polar(family: BarrierFamily, R, theta):
    fam = family
    g = fam.A - fam.table(theta)
    out = -np.asarray(R, float) ** (fam.gamma - 2) * (1 - fam.gamma * (fam.gamma + fam.n - 2) * g)
    return float(out) if np.ndim(out) == 0 else out


def infinity_laplacian_U_polar(family: BarrierFamily, R, theta):
    """Bracket form ``-R^(3g-4) [g^3(1-g)(A-phi) + g(1-2g)(A-phi)phi'^2 + phi'^2 phi'']``."""
    fam, g = family, family.gamma
    a = fam.A - fam.table(theta)
    p1, p2 = phi_prime(theta, fam.n), phi_second(theta, fam.n)
    out = -np.asarray(R, float) ** (3 * g - 4) * (g ** 3 * (1 - g) * a + g * (1 - 2 * g) * a * p1 ** 2
                                                 + p1 ** 2 * p2)
    return float(out) if np.ndim(out) == 0 else out


def infinity_laplacian_U_direct(family: BarrierFamily, R, theta):
    """``<D^2U DU, DU>`` from the derivatives of ``R^g (A - phi)``; the first term carries ``(A-phi)^3``.

    The gradient stays in the plane spanned by the axis and x, so the planar
    computation holds in every dimension.
    """
    fam, g = family, family.gamma
    a = fam.A - fam.table(theta)
    p1, p2 = phi_prime(theta, fam.n), phi_second(theta, fam.n)
    out = -np.asarray(R, float) ** (3 * g - 4) * (g ** 3 * (1 - g) * a ** 3 + g * (1 - 2 * g) * a * p1 ** 2
                                                 + p1 ** 2 * p2)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True, eq=False)
class MarginReport:
    """Worst margin over a sample set; ``worst <= tol`` means no violation."""

    name: str
    worst: float
    tol: float
    count: int
    columns: tuple[str, ...]
    rows: np.ndarray
    skipped: int = 0

    @property
    def ok(self) -> bool:
        return bool(self.worst <= self.tol)

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(",".join(self.columns) + "\n")
            for row in self.rows:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def _report(name, margins, tol, columns, params, skipped=0) -> MarginReport:
    margins = np.asarray(margins, dtype=float)
    rows = np.column_stack([np.asarray(params, dtype=float).reshape(len(margins), -1), margins])
    worst = float(np.max(margins)) if len(margins) else -math.inf
    return MarginReport(name, worst, tol, len(margins), tuple(columns), rows, skipped)


def verify_phi(n: int, alphas: Sequence[float] = (0.2, 0.5, math.pi / 4, 1.2), count: int = 2001,
               tol: float = 1e-10) -> list[MarginReport]:
    """Evenness, monotonicity, convexity and the two upper bounds of phi."""
    out = []
    for alpha in alphas:
        tm = math.pi - alpha
        th = np.linspace(-tm, tm, count)
        table = PhiTable(n, tm)
        v = table(th)
        even = np.abs(v - table(-th))
        pos = th[th >= 0]
        vp = table(pos)
        incr = -np.diff(vp)
        conv = -(v[2:] - 2 * v[1:-1] + v[:-2])
        ub = v - phi_upper_bound(n, alpha)
        ubp = phi_prime(th, n) - phi_prime_upper_bound(n, alpha)
        lb = -v
        out += [
            _report(f"phi_even_a{alpha:.4f}", even - 1e-13, 0.0, ("theta", "margin"), th),
            _report(f"phi_increasing_a{alpha:.4f}", incr, 0.0, ("theta", "margin"), pos[1:]),
            _report(f"phi_convex_a{alpha:.4f}", conv - tol, 0.0, ("theta", "margin"), th[1:-1]),
            _report(f"phi_upper_a{alpha:.4f}", ub, 0.0, ("theta", "margin"), th),
            _report(f"phi_prime_upper_a{alpha:.4f}", ubp, 0.0, ("theta", "margin"), th),
            _report(f"phi_nonnegative_a{alpha:.4f}", lb, 0.0, ("theta", "margin"), th),
        ]
    return out


def key_inequality_grid(family: BarrierFamily, counts=(6, 12, 8, 23)):
    """Rows ``(R0, theta0, r, t)`` with ``0 < r < R0``, ``theta0 + asin(r/R0) <= pi - alpha``, ``|t| <= asin(r/R0)``."""
    fam = family
    nR, nth, nr, nt = counts
    rows = []
    skipped = 0
    for R0 in np.geomspace(0.05, 5.0, nR):
        for th0 in np.linspace(0.0, fam.theta_max, nth, endpoint=False):
            for frac in np.linspace(0.02, 0.98, nr):
                r = frac * R0
                tm = math.asin(frac)
                if th0 + tm > fam.theta_max:
                    skipped += 1
                    continue
                for t in np.linspace(-tm, tm, nt):
                    rows.append((R0, th0, r, t))
    return np.array(rows), skipped


def verify_key_inequality(family: BarrierFamily, rows: np.ndarray | None = None, tol: float = 1e-10,
                          phi_func: Callable | None = None) -> MarginReport:
    """``R+^g (A - phi(th0 - t)) + R-^g (A - phi(th0 + t)) - 2 R0^g (A - phi(th0))`` on a grid."""
    fam = family
    skipped = 0
    if rows is None:
        rows, skipped = key_inequality_grid(fam)
    R0, th0, r, t = rows.T
    f = phi_func or fam.table
    root = np.sqrt(np.clip((r / R0) ** 2 - np.sin(t) ** 2, 0.0, None))
    Rp = R0 * (np.cos(t) + root)
    Rm = R0 * (np.cos(t) - root)
    g = fam.gamma
    lhs = Rp ** g * (fam.A - f(th0 - t)) + Rm ** g * (fam.A - f(np.minimum(th0 + t, fam.theta_max)))
    margin = lhs - 2 * R0 ** g * (fam.A - f(th0))
    return _report("key_inequality", margin, tol, ("R0", "theta0", "r", "t", "margin"), rows, skipped)


def verify_polar_signs(family: BarrierFamily, size: int = 200, R_range=(1e-3, 10.0)) -> list[MarginReport]:
    """``Delta U <= 0`` and ``Delta_inf U <= 0`` on a ``size x size`` (R, theta) grid."""
    R = np.geomspace(*R_range, size)
    th = np.linspace(0.0, family.theta_max, size)
    RR, TT = np.meshgrid(R, th, indexing="ij")
    params = np.column_stack([RR.ravel(), TT.ravel()])
    cols = ("R", "theta", "margin")
    return [
        _report("laplacian_U", laplacian_U_polar(family, RR, TT).ravel(), 0.0, cols, params),
        _report("infinity_laplacian_U", infinity_laplacian_U_polar(family, RR, TT).ravel(), 0.0, cols, params),
        _report("infinity_laplacian_U_direct", infinity_laplacian_U_direct(family, RR, TT).ravel(), 0.0,
                cols, params),
    ]


def _cone_complement_points(family: BarrierFamily, count: int, rng: np.random.Generator, rmax: float):
    n = family.n
    R = rmax * rng.random(count) ** (1.0 / n)
    th = family.theta_max * rng.random(count)
    if n == 2:
        s = np.where(rng.random(count) < 0.5, -1.0, 1.0)
        return np.column_stack([R * np.cos(th), s * R * np.sin(th)])
    v = rng.normal(size=(count, 2))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return np.column_stack([R * np.cos(th), (R * np.sin(th))[:, None] * v])


def verify_bounds(family: BarrierFamily, count: int = 20000, seed: int = 0,
                  domain: DomainSpec | None = None, boundary_points: int = 16) -> list[MarginReport]:
    """``alpha^(2-n)|x|^g <= U <= g^-2 |x|^g``, ``L(|x|) <= w <= g^-2 |x|^g``, and the same
    for ``w_xi`` at boundary points of ``domain`` (with the barrier built on its cone constants)."""
    fam = family
    rng = np.random.default_rng(seed)
    x = _cone_complement_points(fam, count, rng, 4 * fam.r)
    R, th = polar(x)
    U = _U_polar(fam, R, th)
    w = _w_polar(fam, R, th)
    up = R ** fam.gamma / fam.gamma ** 2
    out = [
        _report("U_bounds", np.maximum(fam.alpha ** (2 - fam.n) * R ** fam.gamma - U, U - up), 0.0,
                tuple(f"x{i + 1}" for i in range(fam.n)) + ("margin",), x),
        _report("w_bounds", np.maximum(fam.L(R) - w, w - up), 0.0,
                tuple(f"x{i + 1}" for i in range(fam.n)) + ("margin",), x),
    ]
    if domain is not None:
        xis = domain.sample_boundary(boundary_points, rng)
        xis, axes = domain.project(xis)
        inner = domain.sample_boundary(1, rng)
        lo, hi = domain.bounding_box()
        cand = lo + (hi - lo) * rng.random((count, domain.dimension))
        cand = cand[domain.inside(cand)]
        del inner
        margins, params = [], []
        for xi, ax in zip(xis, axes):
            Rl, tl = local_polar(xi, ax, cand)
            wx = _w_polar(fam, Rl, tl)
            m = np.maximum(fam.L(Rl) - wx, wx - Rl ** fam.gamma / fam.gamma ** 2)
            margins.append(m)
            params.append(np.column_stack([np.repeat(xi[None], len(cand), 0), cand]))
        cols = tuple(f"xi{i + 1}" for i in range(fam.n)) + tuple(f"x{i + 1}" for i in range(fam.n)) + ("margin",)
        out.append(_report("w_xi_control", np.concatenate(margins), 0.0, cols, np.concatenate(params)))
    return out


def _section(x: np.ndarray) -> np.ndarray:
    """Planar image ``(x1, |x'|)`` of a point, valid for axially symmetric functions."""
    return np.column_stack([x[:, 0], np.linalg.norm(x[:, 1:], axis=1)])


def _dist_outside_U(fam: BarrierFamily, x2: np.ndarray) -> np.ndarray:
    R, th = polar(x2)
    d = fam.theta_max - th
    return np.where(d >= math.pi / 2, R, R * np.sin(np.clip(d, 0.0, None)))


def _dist_outside_w(fam: BarrierFamily, x2: np.ndarray) -> np.ndarray:
    R, th = polar(x2)
    a = fam.theta_max
    end = fam.r * np.array([math.cos(a), math.sin(a)])
    t = np.clip(x2 @ end / (fam.r ** 2), 0.0, 1.0)
    seg = np.linalg.norm(x2 - t[:, None] * end, axis=1)
    arc = np.where(th >= a, np.abs(R - fam.r), np.inf)
    inside = (th > a) & (R < fam.r)
    return np.where(inside, 0.0, np.minimum(seg, arc))


def supersolution_plan(family: BarrierFamily, count: int = 400, seed: int = 0, which: str = "U"):
    """Deterministic ``(x, rho)`` rows with balls inside the relevant cone complement."""
    rng = np.random.default_rng(seed)
    x = _cone_complement_points(family, count, rng, 2.5 * family.r)
    x2 = _section(x)
    dist = _dist_outside_U(family, x2) if which == "U" else _dist_outside_w(family, x2)
    frac = rng.uniform(0.05, 0.95, count)
    rho = frac * dist
    keep = rho > 1e-9
    return np.column_stack([x[keep], rho[keep]])


def verify_supersolution(family: BarrierFamily, plan: np.ndarray | None = None, which: str = "U",
                         quad_points: int | None = None, tol: float = 1e-6) -> list[MarginReport]:
    """Mean and midrange of U (or w) over each ball against the value at the center.

    Means use a high-order ball quadrature with point evaluation; sup and inf
    are located on the bounding sphere (where both are attained) in the
    planar section through the axis and the center.
    """
    fam = family
    n = fam.n
    if which not in ("U", "w"):
        raise ValueError("which must be 'U' or 'w'")
    if plan is None:
        plan = supersolution_plan(fam, which=which)
    q = quad_points or (1024 if n == 2 else 1024)
    offsets, qw = ball_quadrature(n, q)
    value = (lambda p: _U_polar(fam, *polar(p))) if which == "U" else (lambda p: _w_polar(fam, *polar(p)))
    distf = _dist_outside_U if which == "U" else _dist_outside_w
    mean_m, mid_m, used = [], [], []
    skipped = 0
    for row in plan:
        x, rho = row[:n], float(row[n])
        x2 = _section(x[None, :])
        if distf(fam, x2)[0] < rho * (1 - 1e-12):
            skipped += 1
            continue
        ux = float(value(x[None, :])[0])
        mean = float(qw @ value(x + rho * offsets))
        hi, lo = sphere_extremes(value, x2[0], rho, 2)
        mean_m.append(mean - ux)
        mid_m.append(0.5 * (hi + lo) - ux)
        used.append(row)
    params = np.array(used).reshape(len(used), n + 1)
    cols = tuple(f"x{i + 1}" for i in range(n)) + ("rho", "margin")
    return [
        _report(f"{which}_mean_supersolution", mean_m, tol, cols, params, skipped),
        _report(f"{which}_midrange_supersolution", mid_m, tol, cols, params, skipped),
    ]


def discrete_barrier_residual(lattice: Lattice, family: BarrierFamily, xi, axis, profile: RadiusProfile,
                              cfg: OperatorConfig) -> float:
    """``max (T w_xi - w_xi)`` over interior nodes for the lattice operator."""
    w = GridFunction.from_function(lattice, lambda pts: eval_w_xi(family, xi, axis, pts))
    return float(np.max(apply_T(w, profile, cfg).interior_values - w.interior_values))


def _binomial_series(gamma: float, x: np.ndarray, parity: int, terms: int = 80) -> np.ndarray:
    """``sum_k binom(g, 2k - parity) x^(2k)`` for ``k >= 1`` (parity 1: odd coefficients)."""
    out = np.zeros_like(x)
    x2 = x * x
    power = x2.copy()
    coef = 1.0
    j = 0
    coeffs = {}
    for j in range(1, 2 * terms + 1):
        coef = coef * (gamma - j + 1) / j
        coeffs[j] = coef
    for k in range(1, terms + 1):
        out += coeffs[2 * k - parity] * power
        power = power * x2
    return out


def binomial_ratio(gamma: float, x) -> np.ndarray:
    """``(x/2)[(1+x)^g - (1-x)^g] / (1 - [(1+x)^g + (1-x)^g]/2)``; series for small x avoid cancellation."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    direct = (x / 2) * ((1 + x) ** gamma - (1 - x) ** gamma) / (1 - 0.5 * ((1 + x) ** gamma + (1 - x) ** gamma))
    small = x < 0.5
    xs = np.where(small, x, 0.25)
    series = _binomial_series(gamma, xs, 1) / -_binomial_series(gamma, xs, 0)
    return np.where(small, series, direct)


def power_sum_sides(gamma, T, t, sign: int) -> tuple[np.ndarray, np.ndarray]:
    root = np.sqrt(np.clip(np.sin(T) ** 2 - np.sin(t) ** 2, 0.0, None))
    big = np.cos(t) + root
    # x - sqrt(x^2 - a^2) written as a^2 / (x + sqrt(x^2 - a^2)) on both sides, so
    # the small terms round consistently
    small = np.cos(T) ** 2 / big
    lhs = big ** gamma + sign * small ** gamma
    rhs = (1 + np.sin(T)) ** gamma + sign * (np.cos(T) ** 2 / (1 + np.sin(T))) ** gamma
    return lhs, rhs


def verify_lemmas(gammas=None, Ts=None, t_fracs=None, xs=None, tol: float = 1e-12) -> list[MarginReport]:
    """Both signs of the trigonometric power inequality on a (gamma, T, t) grid and
    the ratio bound ``<= 2/(1-gamma)`` on a (gamma, x) grid (10^4 points each by default)."""
    g2 = np.linspace(0.01, 0.99, 100) if gammas is None else np.asarray(gammas, float)
    gammas = np.linspace(0.01, 0.99, 25) if gammas is None else np.asarray(gammas, float)
    Ts = np.linspace(0.0, math.pi / 2, 20) if Ts is None else np.asarray(Ts, float)
    t_fracs = np.linspace(-1.0, 1.0, 20) if t_fracs is None else np.asarray(t_fracs, float)
    G, TT, F = np.meshgrid(gammas, Ts, t_fracs, indexing="ij")
    G, TT, F = G.ravel(), TT.ravel(), F.ravel()
    t = F * TT
    out = []
    for sign, label in ((1, "plus"), (-1, "minus")):
        lhs, rhs = power_sum_sides(G, TT, t, sign)
        out.append(_report(f"power_sum_{label}", lhs - rhs, tol, ("gamma", "T", "t", "margin"),
                           np.column_stack([G, TT, t])))
    xs = np.geomspace(1e-4, 1.0, 100) if xs is None else np.asarray(xs, float)
    rows, margins = [], []
    for g in g2:
        ratio = binomial_ratio(g, xs)
        margins.append(ratio - 2 / (1 - g))
        rows.append(np.column_stack([np.full(len(xs), g), xs]))
    out.append(_report("binomial_ratio", np.concatenate(margins), tol, ("gamma", "x", "margin"), np.concatenate(rows)))
    return out
