import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ruellelab.errors import BudgetExceeded, CriticalFiber, CriticalPoint, PoleHit
from ruellelab.lattes import invariant_line_field, q_basis
from ruellelab.quadrature import Region, integrate_l1
from ruellelab.rational_map import RationalMap, postcritical_set
from ruellelab.transfer import (
    LineField,
    QuadDifferential,
    beltrami_pullback,
    cesaro_average,
    cesaro_beltrami,
    combine,
    duality_residual,
    pushforward,
    ruelle_apply,
    ruelle_power,
    ruelle_tree,
)

LAM = (-1 + 1j) / 2  # eigenvalue of R_* on Q for z^2 + i


def brute_force(R, phi, z, n):
    # oracle: recursive fiber sums with numpy companion roots
    if n == 0:
        return complex(phi(np.array([z]))[0])
    num = np.polynomial.polynomial.polysub(R.num, z * np.pad(R.den, (0, len(R.num) - len(R.den))))
    total = 0j
    for y in np.roots(num[::-1]):
        total += brute_force(R, phi, y, n - 1) / complex(R.deriv_values(np.array([y]))[0]) ** 2
    return total


def test_z_squared_pushes_one_to_half():
    R = RationalMap([0, 0, 1])
    one = QuadDifferential(lambda z: np.ones(np.shape(z), dtype=complex))
    # preimages +-1 of 1, each with R' = +-2
    assert ruelle_apply(R, one, 1.0) == pytest.approx(0.5, abs=1e-15)


def test_lattes_canonical_is_fixed(lattes40):
    R, phi = lattes40.map, lattes40.canonical_phi
    for z in (2 + 1j, -0.7 + 1.3j, 0.4 - 2.2j):
        for n in range(4):
            assert abs(ruelle_power(R, phi, n, z) - phi(z)) < 1e-12 * abs(phi(z))


def test_eigenvector_for_quadratic(quad_i):
    phi = q_basis(postcritical_set(quad_i))[0]
    for z in (2.5 + 0.3j, -3 + 1j):
        for n in (1, 2, 5):
            assert ruelle_power(quad_i, phi, n, z) == pytest.approx(LAM ** n * phi(z), rel=1e-11)
        c = cesaro_average(quad_i, phi, 8, z)
        assert c == pytest.approx((1 - LAM ** 8) / (8 * (1 - LAM)) * phi(z), rel=1e-11)


@settings(max_examples=15, deadline=None)
@given(st.complex_numbers(min_magnitude=0.5, max_magnitude=4, allow_nan=False), st.integers(1, 4))
def test_tree_matches_brute_force_recursion(z, n):
    R = RationalMap([0.3, 0, 1], [1, 0.2])
    phi = QuadDifferential.from_poles([0.5, -1, 2j, 1 + 1j])
    try:
        val = ruelle_power(R, phi, n, z)
    except (CriticalFiber, PoleHit):  # near-critical draws are legitimately refused
        return
    assert abs(val - brute_force(R, phi, z, n)) < 1e-8 * max(1, abs(val))


def test_linearity():
    R = RationalMap([1j, 0, 1])
    a = QuadDifferential.from_poles([1j, -1 + 1j, -1j])
    b = QuadDifferential.from_poles([0.5, 2, 3j, 1])
    s = combine([2 - 1j, 0.5], [a, b])
    for z in (3 + 0.2j, -2.2 + 1.1j):
        lhs = ruelle_power(R, s, 3, z)
        rhs = (2 - 1j) * ruelle_power(R, a, 3, z) + 0.5 * ruelle_power(R, b, 3, z)
        assert abs(lhs - rhs) < 1e-12 * max(1, abs(lhs))


def test_tree_levels_do_not_depend_on_threads(quad_i):
    phi = q_basis(postcritical_set(quad_i))[0]
    z = 3 * np.exp(1j * np.linspace(0, 6, 200))
    a = ruelle_tree(quad_i, phi, z, 12, threads=1).levels
    b = ruelle_tree(quad_i, phi, z, 12, threads=8).levels
    assert np.array_equal(a, b)


def test_budget_and_critical_guards(quad_i):
    phi = q_basis(postcritical_set(quad_i))[0]
    with pytest.raises(BudgetExceeded):
        ruelle_power(quad_i, phi, 30, 3.0)
    with pytest.raises(CriticalFiber):
        ruelle_apply(quad_i, phi, 1j + 1e-9)


def test_pruning_reports_dropped_mass(quad_i):
    phi = q_basis(postcritical_set(quad_i))[0]
    exact = ruelle_power(quad_i, phi, 10, 3.0)
    val, dropped = ruelle_power(quad_i, phi, 10, 3.0, prune_eps=1e-3, return_pruned=True)
    assert dropped > 0
    assert abs(val - exact) <= dropped + 1e-12


def test_pushforward_is_a_contraction(lattes40, quad_i):
    tol = 1e-6
    for R, phi in ((lattes40.map, lattes40.canonical_phi), (quad_i, q_basis(postcritical_set(quad_i))[0])):
        before = integrate_l1(phi, Region.sphere(), tol).value
        after = integrate_l1(pushforward(R, phi), Region.sphere(), tol).value
        assert after <= before + 2 * tol


def test_beltrami_invariance_of_lattes_field(lattes40):
    mu = invariant_line_field(lattes40.canonical_phi)
    for z in (0.3 + 0.4j, -2 + 1j, 1.5 - 0.2j):
        assert abs(beltrami_pullback(lattes40.map, mu, z) - mu(np.array([z]))[0]) < 1e-12
    with pytest.raises(CriticalPoint):
        beltrami_pullback(RationalMap([0, 0, 1]), mu, 0.0)


def test_cesaro_beltrami_of_constant_field():
    # for z^2 the pullback phase of (z^2)' = 2z is conj(z)/z; at real z > 0 it is 1
    mu = LineField.constant(0.5)
    assert cesaro_beltrami(RationalMap([0, 0, 1]), mu, 5, 0.9) == pytest.approx(0.5)


def test_duality_on_both_maps(lattes40, quad_i):
    mu = invariant_line_field(lattes40.canonical_phi)
    assert duality_residual(lattes40.map, mu, lattes40.canonical_phi) < 1e-3
    phi = q_basis(postcritical_set(quad_i))[0]
    assert duality_residual(quad_i, LineField.constant(0.3 + 0.4j), phi) < 1e-3


def test_line_field_audit():
    mu = LineField(lambda z: np.exp(1j * np.angle(z)))
    assert mu.audit(2000) == pytest.approx(1.0)
    assert math.isclose(LineField.constant(0.2).audit(100), 0.2)
