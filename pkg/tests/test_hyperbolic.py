import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ruellelab.errors import OutsideDomain
from ruellelab.hyperbolic import (
    MetricModel,
    bcond_ratio,
    density,
    density_values,
    ellipk,
    hyperbolic_area,
    lambda_thrice_punctured,
)
from ruellelab.quadrature import Region
from ruellelab.rational_map import INFINITY


def _curvature(f, z, h=1e-4):
    logf = lambda w: math.log(f(w))
    lap = (logf(z + h) + logf(z - h) + logf(z + 1j * h) + logf(z - 1j * h) - 4 * logf(z)) / h ** 2
    return -lap / f(z) ** 2


def test_exact_densities():
    assert density(MetricModel.disk(), 0) == 1.0
    assert density(MetricModel.disk(), 0.5) == pytest.approx(4 / 3)
    assert density(MetricModel.punctured_disk(), math.exp(-1)) == pytest.approx(math.e / 2)
    ann = MetricModel.annulus(0.5, 2)
    # the core geodesic |z| = 1 has density pi / (2 L) with L = log 4
    assert density(ann, 1.0) == pytest.approx(math.pi / (2 * math.log(4)))


@pytest.mark.parametrize("model, z", [
    (MetricModel.disk(), 0.3 + 0.4j),
    (MetricModel.punctured_disk(), 0.2 - 0.5j),
    (MetricModel.annulus(0.5, 2), 1.3j),
])
def test_curvature_minus_four(model, z):
    assert _curvature(lambda w: density(model, w), z) == pytest.approx(-4, abs=1e-4)


def test_elliptic_k_against_mpmath():
    rng = np.random.default_rng(0)
    m = 3 * (rng.normal(size=50) + 1j * rng.normal(size=50))
    ours = ellipk(m)
    ref = np.array([complex(mpmath.ellipk(complex(x))) for x in m])
    assert np.max(np.abs(ours - ref) / np.abs(ref)) < 1e-13


@pytest.mark.parametrize("z", [0.5 + 0.5j, -1 + 2j, 3 - 0.2j, 0.5, -2.0, 5.0, 0.1 + 3j])
def test_thrice_punctured_curvature(z):
    f = lambda w: float(lambda_thrice_punctured(np.array([w]))[0])
    assert _curvature(f, z) == pytest.approx(-4, abs=1e-3)


def test_thrice_punctured_cusp_asymptotics():
    # K(z) -> pi/2 and K(1 - z) ~ log(16/z)/2 as z -> 0, so
    # lambda ~ 1 / (2 |z| log(16/|z|)): the punctured-disk law with a shifted log
    for t in (1e-6, 1e-9j, 1e-12 * (1 + 1j)):
        a = abs(t)
        lam = float(lambda_thrice_punctured(np.array([t]))[0])
        assert lam * 2 * a * math.log(16 / a) == pytest.approx(1, abs=1e-5)
    # and the plain punctured-disk ratio creeps up to 1
    ratios = [float(lambda_thrice_punctured(np.array([t]))[0]) * 2 * t * math.log(1 / t)
              for t in (1e-3, 1e-6, 1e-12)]
    assert ratios[0] < ratios[1] < ratios[2] < 1


def test_thrice_punctured_symmetries():
    z = np.array([0.3 + 0.7j, -1.2 + 0.4j, 2.2 - 1.5j])
    lam = lambda_thrice_punctured
    assert np.allclose(lam(1 - z), lam(z), rtol=1e-12)
    assert np.allclose(lam(np.conj(z)), lam(z), rtol=1e-12)
    assert np.allclose(lam(1 / z) / np.abs(z) ** 2, lam(z), rtol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.complex_numbers(max_magnitude=6, allow_nan=False))
def test_punctured_sphere_bounds_are_ordered(z):
    model = MetricModel.punctured_sphere([0, 1, -1, 2j, INFINITY])
    if min(abs(z - p) for p in (0, 1, -1, 2j)) < 1e-3:
        return
    lo, hi = density(model, z)
    assert 0 < lo <= hi * (1 + 1e-12)


def test_thrice_punctured_bounds_bracket_exact_value():
    model = MetricModel.punctured_sphere([0, 1, INFINITY])
    for z in (0.5 + 0.5j, -2 + 1j, 1e-4):
        lo, hi = density(model, z)
        exact = float(lambda_thrice_punctured(np.array([z]))[0])
        assert lo == pytest.approx(exact, rel=1e-12)
        assert exact <= hi


def test_outside_domain():
    with pytest.raises(OutsideDomain):
        density(MetricModel.disk(), 1.0)
    with pytest.raises(OutsideDomain):
        density(MetricModel.punctured_disk(), 0)
    with pytest.raises(OutsideDomain):
        density(MetricModel.annulus(1, 2), 0.5)


def test_areas():
    assert hyperbolic_area(MetricModel.disk(), Region.disk(0, 0.5), 1e-10).value == pytest.approx(math.pi / 3, abs=1e-8)
    ring = Region.annulus(0, math.exp(-2), math.exp(-1))
    assert hyperbolic_area(MetricModel.punctured_disk(), ring, 1e-10).value == pytest.approx(math.pi / 4, abs=1e-8)
    res = hyperbolic_area(MetricModel.disk(), Region.disk(0, 1), 1e-8)
    assert res.diverged and not res.converged


def test_bcond_ratio_is_finite_and_stable(quad_i):
    a = bcond_ratio(quad_i, resolution=1)
    b = bcond_ratio(quad_i, resolution=2)
    assert math.isfinite(a) and a > 0
    assert abs(a - b) < 0.05 * b
