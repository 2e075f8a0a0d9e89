import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ruellelab.errors import IndexOutOfRange
from ruellelab.ergodic import (
    Experiment,
    cesaro_decay,
    hk_constant,
    hk_family,
    hk_line_field,
    hk_sup,
    isometry_ray_audit,
    ray_distance_curves,
    ray_point,
    ray_statement_deviations,
    transfer_matrix,
)
from ruellelab.lattes import q_basis
from ruellelab.quadrature import Region, integrate_l1, pairing
from ruellelab.rational_map import postcritical_set

LAM = (-1 + 1j) / 2
RING = Region.annulus(0, 2, 4)


def cesaro_factor(n):
    # size of the order-n Cesaro average on the eigenline of z^2 + i: |1 - lam^n| / (n |1 - lam|)
    return abs(1 - LAM ** n) / (n * abs(1 - LAM))


def test_experiment_validation():
    with pytest.raises(ValueError):
        Experiment("cesaro-decay", n_schedule=[1, 4, 2])
    with pytest.raises(ValueError):
        Experiment("cesaro-decay", n_schedule=[0, 1])
    with pytest.raises(ValueError):
        Experiment("no-such-thing")


def test_transfer_matrix_of_quadratic(quad_i):
    tm = transfer_matrix(quad_i)
    assert tm.matrix.shape == (1, 1)
    assert tm.matrix[0, 0] == pytest.approx(LAM, abs=1e-12)
    assert tm.residual < 1e-12


def test_lattes_series_is_constant(lattes40):
    s = cesaro_decay(lattes40.map, lattes40.canonical_phi, [1, 2, 4, 8, 16], RING)
    direct = integrate_l1(lattes40.canonical_phi, RING, 1e-8).value
    assert s.method == "basis"
    assert max(s.values) - min(s.values) < 1e-5 * direct
    assert s.values[0] == pytest.approx(direct, rel=1e-6)


def test_tree_and_basis_agree(quad_i, lattes40):
    phi = q_basis(postcritical_set(quad_i))[0]
    a = cesaro_decay(quad_i, phi, [1, 2, 3, 5], RING, method="tree")
    b = cesaro_decay(quad_i, phi, [1, 2, 3, 5], RING, method="basis")
    assert np.allclose(a.values, b.values, rtol=1e-6)
    c = cesaro_decay(lattes40.map, lattes40.canonical_phi, [1, 2, 4], RING, method="tree")
    d = cesaro_decay(lattes40.map, lattes40.canonical_phi, [1, 2, 4], RING, method="basis")
    assert np.allclose(c.values, d.values, rtol=1e-6)


def test_quadratic_series_follows_eigenvalue(quad_i):
    phi = q_basis(postcritical_set(quad_i))[0]
    s = cesaro_decay(quad_i, phi, [1, 2, 4, 8], RING, method="tree")
    base = s.values[0]
    assert base == pytest.approx(integrate_l1(phi, RING, 1e-8).value, rel=1e-6)
    for n, v in zip(s.n_values, s.values):
        assert v / base == pytest.approx(cesaro_factor(n), rel=1e-6)


def test_cesaro_csv(tmp_path, quad_i):
    phi = q_basis(postcritical_set(quad_i))[0]
    s = cesaro_decay(quad_i, phi, [1, 2], RING)
    path = tmp_path / "s.csv"
    s.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "n,re,im,abs,err"
    assert len(lines) == 3


@pytest.mark.parametrize("k", [0, 5, 20])
def test_hk_normalisation(k):
    assert hk_constant(k) == pytest.approx((k + 2) / (2 * math.pi), rel=1e-12)
    phi = hk_family(k)
    assert integrate_l1(phi, Region.disk(0, 1), 1e-10).value == pytest.approx(1, abs=1e-8)
    mu = hk_line_field(k)
    assert pairing(mu, phi, Region.disk(0, 1), 1e-10).value == pytest.approx(1, abs=1e-8)


def test_hk_degenerates_on_compacts():
    assert hk_sup(20, 0.5) < 1e-3
    sups = [hk_sup(k, 0.5) for k in range(2, 30)]
    assert all(b < a for a, b in zip(sups, sups[1:]))


def test_ray_point_examples():
    assert np.array_equal(ray_point(4, 1, 2, 1, 5).vector, np.array([5, 2, 2, 2], dtype=complex))
    assert np.array_equal(ray_point(4, 1, 2, 3, 0).vector, np.zeros(4))
    assert np.array_equal(ray_point(3, 0.5, 2, 2, 1.5).vector, np.full(3, 0.75))
    with pytest.raises(IndexOutOfRange):
        ray_point(4, 1, 2, 5, 1)
    with pytest.raises(IndexOutOfRange):
        ray_point(4, 1, 2, 0, 1)
    with pytest.raises(ValueError):
        ray_point(4, 1, 0.5, 1, 1)


def test_distance_curve_examples():
    ts = [0, 1, 2, 3, 5, 10]
    d = ray_distance_curves(8, 1.0, [((2, 1), (3, 1)), ((2, 1), (2, 2))], ts)
    assert d[0].tolist() == [0, 0, 0, 1, 1, 1]
    assert d[1, -1] == 8
    assert d[:, 0].tolist() == [0, 0]


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 12), st.floats(0, 3), st.floats(0, 4), st.data())
def test_rays_are_unit_speed(N, mu, extra, data):
    r = mu + extra
    i = data.draw(st.integers(1, N))
    ts = data.draw(st.lists(st.floats(0, 30), min_size=2, max_size=8))
    report = isometry_ray_audit([ray_point(N, mu, r, i, t) for t in ts])
    assert report["max_deviation"] <= 1e-12 * max(1, max(ts) * max(mu, 1))


def test_ray_statements_hold_exactly():
    devs = ray_statement_deviations(8, 1.0)
    assert max(devs.values()) < 1e-12
