import math

import numpy as np
import pytest

from pharmonious.grid import GridFunction, build_lattice
from pharmonious.reference import (DegeneratePointError, SmoothFunction, affine, catalog, error_vs_reference,
                                   normalized_p_laplacian, radial_exponent, radial_solution, saddle,
                                   squared_distance)


@pytest.mark.parametrize("p", [2.0, 3.0, 7.5])
def test_affine_is_p_harmonic(p):
    u = affine([0.3, -1.2], 0.4)
    assert normalized_p_laplacian(u, np.array([0.1, 0.7]), p) == 0.0


def test_saddle_harmonic():
    assert normalized_p_laplacian(saddle(), np.array([0.3, -0.4]), 2.0) == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("p", [2.0, 3.0, 6.0])
def test_squared_norm(p):
    u = squared_distance([0.0, 0.0])
    assert normalized_p_laplacian(u, np.array([0.6, -0.2]), p) == pytest.approx(4 + 2 * (p - 2), rel=1e-13)


def test_radial_exponent():
    assert radial_exponent(4.0, 2) == pytest.approx(2 / 3)
    ref = radial_solution(4.0, 2)
    for x in ([0.5, 0.0], [0.3, 0.6], [-0.2, -0.7]):
        assert normalized_p_laplacian(ref.u, np.array(x), 4.0) == pytest.approx(0.0, abs=1e-12)


def test_catalog_solutions_are_harmonic():
    rng = np.random.default_rng(7)
    for n in (2, 3):
        for ref in catalog(n):
            lo, hi = ref.domain.bounding_box()
            pts = rng.uniform(lo, hi, (400, n))
            pts = pts[ref.domain.inside(pts) & (ref.domain.distance(pts) > 0.05)][:10]
            for p in (2.0, 3.0, 4.0, 5.0, float(n)):
                if not ref.valid_p(p):
                    continue
                for x in pts:
                    if any(np.linalg.norm(x - np.array(c)) < 0.1 for c in ref.critical_points):
                        continue
                    val = normalized_p_laplacian(ref.u, x, p)
                    assert abs(val) < 1e-9, (ref.name, p, x, val)


def test_finite_difference_fallback():
    u = SmoothFunction(lambda y: np.sin(y[:, 0]) * np.exp(y[:, 1]))
    x = np.array([0.3, -0.2])
    g = u.gradient(x)
    np.testing.assert_allclose(g, [math.cos(0.3) * math.exp(-0.2), math.sin(0.3) * math.exp(-0.2)], rtol=1e-8)


def test_degenerate_point():
    with pytest.raises(DegeneratePointError):
        normalized_p_laplacian(squared_distance([0.0, 0.0]), np.zeros(2), 3.0)


def test_error_vs_reference(disk_lattice):
    ref = [r for r in catalog(2) if r.name == "x1"][0]
    exact = GridFunction.from_function(disk_lattice, ref)
    assert error_vs_reference(exact, ref) == (0.0, 0.0)
    sup, rms = error_vs_reference(exact.with_interior(exact.interior_values + 0.01), ref)
    assert sup == pytest.approx(0.01)
    assert rms <= 0.01
    shifted = GridFunction.from_values(disk_lattice, exact.values + 0.01)
    sup, rms = error_vs_reference(shifted, ref)
    assert sup == pytest.approx(0.01) and rms == pytest.approx(0.01)
