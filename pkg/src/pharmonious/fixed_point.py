"""Plain fixed-point iteration of T_{rho,p} and diagnostics built on it."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .averaging import OperatorConfig, apply_plan, apply_T, operator_plan
from .grid import BoundaryData, GridFunction, Lattice, extend_boundary_data, sup_norm_diff
from .radius import RadiusProfile, validate_constants

COMPARISON_SLACK = 1e-12


class HypothesisError(ValueError):
    """Inputs do not satisfy the hypotheses of a check, so it does not apply."""


@dataclass(frozen=True)
class SolveConfig:
    tol: float | None = None
    max_iter: int = 10 ** 6
    record_every: int = 0

    def __post_init__(self) -> None:
        if self.tol is not None and not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.record_every < 0:
            raise ValueError("record_every must be nonnegative")

    def tolerance(self, f_sup: float) -> float:
        return self.tol if self.tol is not None else 1e-8 * max(1.0, f_sup)


@dataclass(frozen=True, eq=False)
class SolveReport:
    solution: GridFunction
    increments: np.ndarray
    iterations: int
    converged: bool
    tol: float
    snapshots: tuple = field(default=())

    def increments_to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("k,d_k\n")
            for k, d in enumerate(self.increments):
                fh.write(f"{k},{d:.17g}\n")


def check_in_Kf(u: GridFunction, fb: np.ndarray, what: str = "extension") -> None:
    """Raise unless ``u`` matches the boundary data and keeps its sup norm."""
    if not np.array_equal(u.boundary_values, fb):
        raise ValueError(f"{what} does not agree with the boundary data on boundary nodes")
    bound = float(np.max(np.abs(fb)))
    if np.max(np.abs(u.interior_values), initial=0.0) > bound:
        raise ValueError(f"{what} exceeds the sup norm of the boundary data")


def solve_dirichlet(f: BoundaryData, lattice: Lattice, profile: RadiusProfile, cfg: OperatorConfig,
                    scfg: SolveConfig = SolveConfig(), initial: GridFunction | None = None) -> SolveReport:
    """Iterate ``u <- T u`` from a sup-norm preserving extension of ``f``.

    The start defaults to ``extend_boundary_data``; any other member of the
    same class (e.g. a solution for nearby parameters) may be passed as
    ``initial``. Stops when the sup-norm increment drops to the tolerance.
    """
    report = validate_constants(cfg.n, cfg.p, profile.beta, profile.lambda_, profile.lambda_cap,
                                lattice.domain)
    if not report.ok:
        raise ValueError("; ".join(report.violations))
    fb = f.on(lattice)
    u0 = extend_boundary_data(lattice, f) if initial is None else initial
    if u0.lattice is not lattice:
        raise ValueError("initial iterate lives on a different lattice")
    check_in_Kf(u0, fb, "initial iterate")
    tol = scfg.tolerance(float(np.max(np.abs(fb))))
    plan = operator_plan(lattice, profile, cfg)
    ni = lattice.n_interior
    values = np.ascontiguousarray(u0.values)
    nxt = values.copy()
    incs = []
    snaps = []
    converged = False
    k = 0
    while k < scfg.max_iter:
        apply_plan(plan, values, nxt[:ni])
        d = float(np.max(np.abs(nxt[:ni] - values[:ni]), initial=0.0))
        values, nxt = nxt, values
        incs.append(d)
        k += 1
        if scfg.record_every and k % scfg.record_every == 0:
            snaps.append((k, GridFunction.from_values(lattice, values)))
        if d <= tol:
            converged = True
            break
    incs = np.array(incs)
    incs.flags.writeable = False
    return SolveReport(GridFunction(lattice, values[:ni].copy(), fb), incs, k, converged, tol, tuple(snaps))


def check_comparison(u: GridFunction, v: GridFunction, profile: RadiusProfile, cfg: OperatorConfig,
                     slack: float = COMPARISON_SLACK) -> bool:
    """Whether ``u <= v`` at interior nodes, for a subsolution ``u`` and a supersolution ``v``.

    The hypotheses (``u <= v`` on the boundary, ``u <= T u`` and ``v >= T v``
    up to ``slack``) are checked first; a failure raises ``HypothesisError``.
    The conclusion is tested with the same slack.
    """
    if u.lattice is not v.lattice:
        raise ValueError("u and v live on different lattices")
    problems = []
    if np.any(u.boundary_values > v.boundary_values):
        problems.append("u > v at a boundary node")
    if np.any(u.interior_values > apply_T(u, profile, cfg).interior_values + slack):
        problems.append("u is not a subsolution")
    if np.any(v.interior_values < apply_T(v, profile, cfg).interior_values - slack):
        problems.append("v is not a supersolution")
    if problems:
        raise HypothesisError("; ".join(problems))
    return bool(np.all(u.interior_values <= v.interior_values + slack))


def extension_independence(f: BoundaryData, lattice: Lattice, profile: RadiusProfile, cfg: OperatorConfig,
                           scfg: SolveConfig, alt_extension: GridFunction) -> float:
    """Sup-norm gap between the limits reached from the default and from ``alt_extension``."""
    check_in_Kf(alt_extension, f.on(lattice), "alternative extension")
    a = solve_dirichlet(f, lattice, profile, cfg, scfg)
    b = solve_dirichlet(f, lattice, profile, cfg, scfg, initial=alt_extension)
    return sup_norm_diff(a.solution, b.solution)


def continuity_scale(points: np.ndarray, values: np.ndarray, eta: float, default: float) -> float:
    """Largest delta with ``|f(a) - f(b)| < eta`` for all sample pairs closer than delta."""
    order = np.argsort(values, kind="stable")
    sv, sp = values[order], points[order]
    best = default
    # every pair with |df| >= eta appears as (i, j >= first index above sv[i] + eta)
    for i in range(len(sv)):
        j = np.searchsorted(sv, sv[i] + eta, side="left")
        if j < len(sv):
            best = min(best, float(np.min(np.linalg.norm(sp[j:] - sp[i], axis=1))))
    return best


def boundary_error_bound(solution: GridFunction, f: BoundaryData, barrier_family, eta: float,
                         max_boundary_samples: int = 4096, chunk: int = 1024) -> float:
    """Worst margin of ``|u(x) - f(xi)| - (C gamma^-2 |x - xi|^gamma + eta)``.

    ``C = 2 ||f|| / L(delta)`` with ``L(t) = alpha^(2-n) min(t, r)^gamma`` and
    ``delta`` the continuity scale of ``f`` at level ``eta`` measured on the
    boundary nodes. ``x`` runs over interior nodes and ``xi`` over boundary
    nodes (thinned to ``max_boundary_samples`` with a fixed stride). A
    nonpositive result means the estimate holds everywhere it was sampled.
    """
    if not eta > 0:
        raise ValueError("eta must be positive")
    lat = solution.lattice
    fam = barrier_family
    fb = f.on(lat)
    xb = lat.boundary_nodes
    f_sup = float(np.max(np.abs(fb)))
    delta = continuity_scale(xb, fb, eta, lat.domain.diameter)
    L = fam.alpha ** (2 - fam.n) * min(delta, fam.r) ** fam.gamma
    C = 2.0 * f_sup / L
    stride = max(1, math.ceil(len(xb) / max_boundary_samples))
    xi, fxi = xb[::stride], fb[::stride]
    x, u = lat.interior_nodes, solution.interior_values
    worst = -math.inf
    for s in range(0, len(x), chunk):
        xs, us = x[s:s + chunk], u[s:s + chunk]
        dist = np.sqrt(np.sum((xs[:, None, :] - xi[None, :, :]) ** 2, axis=2))
        m = np.abs(us[:, None] - fxi[None, :]) - (C / fam.gamma ** 2 * dist ** fam.gamma + eta)
        worst = max(worst, float(m.max()))
    return worst
