import numpy as np
from hypothesis import given, settings, strategies as st

from ruellelab.roots import aberth, backward_error, cluster_roots, poly_roots, trim

coef = st.complex_numbers(min_magnitude=0.1, max_magnitude=10, allow_nan=False, allow_infinity=False)


def _match(a, b):
    # distance between multisets of roots, by greedy pairing
    b = list(b)
    worst = 0.0
    for x in a:
        j = int(np.argmin([abs(x - y) for y in b]))
        worst = max(worst, abs(x - b.pop(j)))
    return worst


@settings(max_examples=60, deadline=None)
@given(st.lists(coef, min_size=3, max_size=9))
def test_aberth_matches_companion_eigenvalues(c):
    c = np.array(c)
    roots, ok = aberth(c[None, :])
    assert ok[0]
    oracle = np.roots(c[::-1])
    scale = max(1.0, np.max(np.abs(oracle)))
    assert _match(roots[0], oracle) < 1e-6 * scale
    assert np.max(backward_error(c[None, :], roots)) < 1e-11


def test_quadratic_fast_path_is_accurate():
    # w^2 - (1e8 + 1e-8) w + 1: roots 1e8 and 1e-8, cancellation-prone
    c = np.array([[1.0, -(1e8 + 1e-8), 1.0]], dtype=complex)
    roots, ok = aberth(c)
    r = np.sort(np.abs(roots[0]))
    assert ok[0]
    assert abs(r[0] - 1e-8) < 1e-20
    assert abs(r[1] - 1e8) < 1e-4


def test_rows_are_batch_independent():
    rng = np.random.default_rng(1)
    c = rng.normal(size=(7, 6)) + 1j * rng.normal(size=(7, 6))
    together, _ = aberth(c)
    for k in range(7):
        alone, _ = aberth(c[k:k + 1])
        assert np.array_equal(alone[0], together[k])


def test_trim_and_roots_at_infinity():
    assert len(trim([1, 2, 0, 1e-20])) == 2
    finite, n_inf = poly_roots([-1, 0, 1, 0, 0])
    assert n_inf == 2
    assert sorted(np.round(finite.real, 12)) == [-1.0, 1.0]


def test_cluster_roots_multiplicity():
    # (w - 1)^3 (w + 2)
    c = np.polynomial.polynomial.polyfromroots([1, 1, 1, -2])
    finite, _ = poly_roots(c)
    groups = cluster_roots(finite, 1e-9)
    mult = {round(p.real): m for p, m in groups}
    assert mult == {1: 3, -2: 1}
