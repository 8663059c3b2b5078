import numpy as np
import pytest

from pharmonious.averaging import OperatorConfig
from pharmonious.barrier import choose_constants
from pharmonious.fixed_point import (HypothesisError, SolveConfig, boundary_error_bound, check_comparison,
                                     continuity_scale, extension_independence, solve_dirichlet)
from pharmonious.grid import BoundaryData, GridFunction, build_lattice, extend_boundary_data
from pharmonious.radius import RadiusProfile

PROFILE = RadiusProfile(1.0, 0.5, 0.5, 1.0)
CFG = OperatorConfig(2, 3.0)
SCFG = SolveConfig(tol=1e-10)


@pytest.fixture(scope="module")
def coarse(disk):
    return build_lattice(disk, 1 / 8)


def test_constant_data(disk_lattice):
    rep = solve_dirichlet(BoundaryData.constant(2.0), disk_lattice, PROFILE, CFG)
    assert rep.iterations == 1 and rep.converged
    assert np.all(rep.solution.values == 2.0)


def test_affine_data_square(square):
    lat = build_lattice(square, 1 / 16)
    f = BoundaryData(lambda p: 0.5 * p[:, 0] - 2 * p[:, 1] + 1)
    rep = solve_dirichlet(f, lat, PROFILE, OperatorConfig(2, 4.0), SolveConfig(tol=1e-12))
    exact = 0.5 * lat.nodes[:, 0] - 2 * lat.nodes[:, 1] + 1
    assert np.max(np.abs(rep.solution.values - exact)) <= 1e-10


def test_increments_and_range(coarse):
    f = BoundaryData(lambda p: np.cos(3 * np.arctan2(p[:, 1], p[:, 0])))
    rep = solve_dirichlet(f, coarse, PROFILE, CFG, SCFG)
    assert rep.converged and rep.increments[-1] <= rep.tol
    assert np.all(np.diff(rep.increments) <= 0)
    fb = f.on(coarse)
    assert fb.min() <= rep.solution.values.min() and rep.solution.values.max() <= fb.max()
    assert not rep.increments.flags.writeable


def test_non_convergence_reported(coarse):
    f = BoundaryData(lambda p: p[:, 0] ** 2)
    rep = solve_dirichlet(f, coarse, PROFILE, CFG, SolveConfig(tol=1e-14, max_iter=3))
    assert not rep.converged and rep.iterations == 3


def test_rejects_bad_constants(coarse):
    with pytest.raises(ValueError):
        solve_dirichlet(BoundaryData.constant(0.0), coarse, RadiusProfile(1.0, 0.5, 0.9), OperatorConfig(2, 4.0))


def test_snapshots(coarse):
    f = BoundaryData(lambda p: p[:, 0] ** 2)
    rep = solve_dirichlet(f, coarse, PROFILE, CFG, SolveConfig(tol=1e-6, record_every=5))
    assert [k for k, _ in rep.snapshots] == list(range(5, rep.iterations + 1, 5))


def test_comparison(coarse):
    zero = GridFunction.from_function(coarse, lambda p: np.zeros(len(p)))
    one = GridFunction.from_function(coarse, lambda p: np.ones(len(p)))
    assert check_comparison(zero, one, PROFILE, CFG)
    # sub/supersolution hypotheses are checked to 1e-12, so solve below that
    tight = SolveConfig(tol=1e-13)
    f = BoundaryData(lambda p: np.sin(2 * p[:, 0]) + p[:, 1])
    u = solve_dirichlet(f, coarse, PROFILE, CFG, tight).solution
    assert check_comparison(u, GridFunction.from_values(coarse, u.values + 0.01), PROFILE, CFG)
    g = BoundaryData(lambda p: np.sin(2 * p[:, 0]) + p[:, 1] + 0.1 * (1 + p[:, 0]))
    v = solve_dirichlet(g, coarse, PROFILE, CFG, tight).solution
    assert check_comparison(u, v, PROFILE, CFG)
    with pytest.raises(HypothesisError):
        check_comparison(one, zero, PROFILE, CFG)


def test_extension_independence_same_start(coarse):
    f = BoundaryData(lambda p: p[:, 0] * p[:, 1] + 0.2 * p[:, 0])
    base = extend_boundary_data(coarse, f)
    assert extension_independence(f, coarse, PROFILE, CFG, SolveConfig(tol=1e-11), base) == 0.0


def test_extension_independence(coarse, rng):
    f = BoundaryData(lambda p: p[:, 0] * p[:, 1] + 0.2 * p[:, 0])
    scfg = SolveConfig(tol=1e-11)
    base = extend_boundary_data(coarse, f)
    fb = f.on(coarse)
    mean_ext = base.with_interior(np.full(coarse.n_interior, np.clip(fb.mean(), fb.min(), fb.max())))
    gaps = [extension_independence(f, coarse, PROFILE, CFG, scfg, mean_ext)]
    fs = np.max(np.abs(fb))
    noisy = base.with_interior(np.clip(base.interior_values + rng.uniform(-fs, fs, coarse.n_interior), -fs, fs))
    gaps.append(extension_independence(f, coarse, PROFILE, CFG, scfg, noisy))
    assert max(gaps) <= 2 * 1e-11, gaps


def test_continuity_scale():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]])
    vals = np.array([0.0, 0.5, 2.0])
    assert continuity_scale(pts, vals, 1.0, 10.0) == pytest.approx(2.0)
    assert continuity_scale(pts, vals, 5.0, 10.0) == 10.0


def test_boundary_error_bound(disk, coarse):
    fam = choose_constants(2, disk.cone_alpha, disk.cone_r)
    c = BoundaryData.constant(0.7)
    u = solve_dirichlet(c, coarse, PROFILE, CFG).solution
    assert boundary_error_bound(u, c, fam, 0.1) <= -0.1 + 1e-12
    f = BoundaryData(lambda p: p[:, 0])
    u = solve_dirichlet(f, coarse, PROFILE, CFG, SCFG).solution
    assert boundary_error_bound(u, f, fam, 0.1) <= 0



def test_boundary_error_bound_detects_shift(disk, coarse):
    fam = choose_constants(2, disk.cone_alpha, disk.cone_r)
    f = BoundaryData(lambda p: p[:, 0])
    u = solve_dirichlet(f, coarse, PROFILE, CFG, SCFG).solution
    bad = u.with_interior(u.interior_values + 10.0 * np.max(np.abs(f.on(coarse))))
    assert boundary_error_bound(bad, f, fam, 0.1) > 0
