"""Admissible radius functions rho_eps and the constraints on their constants."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .domains import DomainSpec, GeometryError


@dataclass(frozen=True)
class ConstantsReport:
    ok: bool
    violations: tuple[str, ...]
    lambda_cap_bound: float
    lambda_bound: float


def lambda_cap_bound(n: int, p: float, beta: float) -> float:
    """Supremum of admissible upper constants, ``1 - ((p-2)/(n+p))**(1/beta)``."""
    if math.isinf(p):
        return 0.0
    return 1.0 - ((p - 2.0) / (n + p)) ** (1.0 / beta)


def validate_constants(n: int, p: float, beta: float, lam: float, lam_cap: float,
                       domain: DomainSpec) -> ConstantsReport:
    """Check ``beta >= 1``, ``0 < Lambda < bound(n, p, beta)`` and
    ``0 < lambda <= Lambda * (diam / 2) ** (1 - beta)``."""
    if not p >= 2:
        raise ValueError(f"p must be >= 2, got {p}")
    if not beta >= 1:
        raise ValueError(f"beta must be >= 1, got {beta}")
    cap = lambda_cap_bound(n, p, beta)
    low = lam_cap * (domain.diameter / 2.0) ** (1.0 - beta)
    violations = []
    if not 0 < lam_cap < cap:
        violations.append(f"0 < lambda_cap < {cap:.12g} fails for lambda_cap={lam_cap}")
    if not 0 < lam <= low:
        violations.append(f"0 < lambda <= {low:.12g} fails for lambda={lam}")
    return ConstantsReport(not violations, tuple(violations), cap, low)


@dataclass(frozen=True)
class RadiusProfile:
    """``rho_eps(x) = eps * min(max(base(d), lambda d^beta), Lambda d)``, d = dist(x, boundary).

    ``base`` defaults to the lower envelope ``lambda d^beta``; any other
    continuous function of the distance can be plugged in and is clamped into
    the admissible band.
    """

    beta: float = 1.0
    lambda_: float = 0.5
    lambda_cap: float = 0.5
    epsilon: float = 1.0
    base: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=True)

    def __post_init__(self) -> None:
        if not 0 < self.epsilon <= 1:
            raise ValueError("epsilon must lie in (0, 1]")
        if not 0 < self.lambda_cap < 1:
            raise ValueError("lambda_cap must lie in (0, 1)")
        if self.lambda_ <= 0 or self.beta < 1:
            raise ValueError("need lambda > 0 and beta >= 1")

    def with_epsilon(self, epsilon: float) -> "RadiusProfile":
        return RadiusProfile(self.beta, self.lambda_, self.lambda_cap, epsilon, self.base)

    def from_distance(self, d: np.ndarray) -> np.ndarray:
        d = np.asarray(d, dtype=float)
        lower = self.lambda_ * d ** self.beta
        upper = self.lambda_cap * d
        body = lower if self.base is None else np.asarray(self.base(d), dtype=float)
        return self.epsilon * np.minimum(np.maximum(body, lower), upper)


def default_profile(n: int, p: float, epsilon: float = 1.0) -> RadiusProfile:
    """beta = 1 and lambda = Lambda at 90% of the admissible upper bound."""
    cap = 0.9 * lambda_cap_bound(n, p, 1.0)
    return RadiusProfile(beta=1.0, lambda_=cap, lambda_cap=cap, epsilon=epsilon)


def radius_at(profile: RadiusProfile, domain: DomainSpec, x) -> float:
    """rho_eps(x); zero on the boundary."""
    pts = np.asarray(x, dtype=float).reshape(1, -1)
    if not domain.in_closure(pts)[0]:
        raise GeometryError(f"{np.ravel(x)} lies outside the closure of {domain.name}")
    if not domain.inside(pts)[0]:
        return 0.0
    return float(profile.from_distance(domain.distance(pts))[0])
