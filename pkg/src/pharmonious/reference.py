"""Closed-form p-harmonic functions and the normalized p-Laplacian."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .domains import Ball, Box, DomainSpec, Shell
from .grid import GridFunction

FD_STEP = 1e-5


class DegeneratePointError(ValueError):
    """The gradient vanishes, so the normalized operator is undefined."""


@dataclass(frozen=True)
class SmoothFunction:
    """A function of points ``(m, n) -> (m,)`` with optional closed-form derivatives.

    ``grad`` and ``hess`` take a single point and return ``(n,)`` and ``(n, n)``.
    When they are missing, central differences with step ``FD_STEP`` are used.
    """

    value: Callable[[np.ndarray], np.ndarray]
    grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    hess: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __call__(self, pts) -> np.ndarray:
        return np.asarray(self.value(np.atleast_2d(np.asarray(pts, dtype=float))), dtype=float)

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.grad is not None:
            return np.asarray(self.grad(x), dtype=float)
        eye = np.eye(len(x)) * FD_STEP
        return (self(x + eye) - self(x - eye)) / (2 * FD_STEP)

    def hessian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.hess is not None:
            return np.asarray(self.hess(x), dtype=float)
        n = len(x)
        e = np.eye(n) * FD_STEP
        H = np.empty((n, n))
        for i in range(n):
            for j in range(i, n):
                pts = np.array([x + e[i] + e[j], x + e[i] - e[j], x - e[i] + e[j], x - e[i] - e[j]])
                v = self(pts)
                H[i, j] = H[j, i] = (v[0] - v[1] - v[2] + v[3]) / (4 * FD_STEP ** 2)
        return H


def normalized_p_laplacian(u: SmoothFunction, x, p: float) -> float:
    """``Delta u + (p - 2) <D^2u Du, Du> / |Du|^2`` at ``x``."""
    g = u.gradient(x)
    g2 = float(g @ g)
    if math.sqrt(g2) < 1e-10:
        raise DegeneratePointError(f"gradient vanishes at {np.ravel(x)}")
    H = u.hessian(x)
    return float(np.trace(H) + (p - 2.0) * (g @ H @ g) / g2)


@dataclass(frozen=True)
class ReferenceSolution:
    name: str
    u: SmoothFunction
    valid_p: Callable[[float], bool]
    domain: DomainSpec
    critical_points: tuple = field(default=())

    def __call__(self, pts) -> np.ndarray:
        return self.u(pts)


def affine(a, b: float = 0.0) -> SmoothFunction:
    a = np.asarray(a, dtype=float)
    n = len(a)
    return SmoothFunction(lambda y: y @ a + b, lambda x: a.copy(), lambda x: np.zeros((n, n)))


def saddle() -> SmoothFunction:
    """``y1^2 - y2^2`` in the plane."""
    return SmoothFunction(
        lambda y: y[:, 0] ** 2 - y[:, 1] ** 2,
        lambda x: np.array([2 * x[0], -2 * x[1]]),
        lambda x: np.diag([2.0, -2.0]),
    )


def squared_distance(y0) -> SmoothFunction:
    y0 = np.asarray(y0, dtype=float)
    n = len(y0)
    return SmoothFunction(
        lambda y: np.sum((y - y0) ** 2, axis=1),
        lambda x: 2 * (x - y0),
        lambda x: 2 * np.eye(n),
    )


def polar_harmonic(k: int) -> SmoothFunction:
    """``r^k cos(k theta) = Re (y1 + i y2)^k``."""

    def value(y):
        return np.real((y[:, 0] + 1j * y[:, 1]) ** k)

    def grad(x):
        z = complex(x[0], x[1])
        d = k * z ** (k - 1) if k else 0j
        return np.array([d.real, -d.imag])

    def hess(x):
        z = complex(x[0], x[1])
        d2 = k * (k - 1) * z ** (k - 2) if k > 1 else 0j
        return np.array([[d2.real, -d2.imag], [-d2.imag, -d2.real]])

    return SmoothFunction(value, grad, hess)


def radial_power(q: float, n: int) -> SmoothFunction:
    """``|y|^q`` away from the origin."""

    def value(y):
        return np.sum(y * y, axis=1) ** (q / 2)

    def grad(x):
        r2 = float(x @ x)
        return q * r2 ** (q / 2 - 1) * x

    def hess(x):
        r2 = float(x @ x)
        return q * r2 ** (q / 2 - 1) * (np.eye(n) + (q - 2) * np.outer(x, x) / r2)

    return SmoothFunction(value, grad, hess)


def radial_log(n: int) -> SmoothFunction:
    def value(y):
        return 0.5 * np.log(np.sum(y * y, axis=1))

    def grad(x):
        return x / float(x @ x)

    def hess(x):
        r2 = float(x @ x)
        return (np.eye(n) - 2 * np.outer(x, x) / r2) / r2

    return SmoothFunction(value, grad, hess)


def radial_exponent(p: float, n: int) -> float:
    """Exponent q with ``|x|^q`` p-harmonic away from 0 (p != n)."""
    if math.isinf(p):
        return 1.0
    return (p - n) / (p - 1)


def radial_solution(p: float, n: int = 2, inner: float = 0.25, outer: float = 1.0) -> ReferenceSolution:
    dom = Shell(inner, outer, (0.0,) * n)
    if p == n:
        return ReferenceSolution("log_radius", radial_log(n), lambda q: q == n, dom)
    q = radial_exponent(p, n)
    return ReferenceSolution(f"radial_power_{q:.6g}", radial_power(q, n), lambda s, p=p: s == p, dom)


def catalog(n: int = 2) -> list[ReferenceSolution]:
    """Shipped closed-form solutions (planar unless noted)."""
    z = (0.0,) * n
    disk = Ball(1.0, z)
    out = [
        ReferenceSolution("affine_square", affine(np.arange(1, n + 1) * 0.5, 0.25),
                          lambda p: True, Box((-0.5,) * n, (0.5,) * n)),
        ReferenceSolution("affine_disk", affine(np.linspace(1.0, -0.5, n), -0.3), lambda p: True, disk),
    ]
    if n == 2:
        out += [
            ReferenceSolution("saddle", saddle(), lambda p: p == 2, disk, ((0.0, 0.0),)),
            ReferenceSolution("x1", polar_harmonic(1), lambda p: True, disk),
            ReferenceSolution("r3_cos3", polar_harmonic(3), lambda p: p == 2, disk, ((0.0, 0.0),)),
            radial_solution(4.0, 2),
            radial_solution(3.0, 2),
            radial_solution(2.0, 2),
        ]
    else:
        out += [radial_solution(5.0, n), radial_solution(float(n), n)]
    return out


def error_vs_reference(solution: GridFunction, ref: ReferenceSolution | Callable) -> tuple[float, float]:
    """Sup-norm and root-mean-square nodal error."""
    lat = solution.lattice
    if isinstance(ref, ReferenceSolution) and ref.domain != lat.domain:
        raise ValueError(f"reference {ref.name} lives on a different domain")
    diff = solution.values - np.asarray(ref(lat.nodes), dtype=float)
    return float(np.max(np.abs(diff))), float(np.sqrt(np.mean(diff ** 2)))
