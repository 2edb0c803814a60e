import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from foasim.geometry import (GeometryError, build_foa_explicit, build_foa_grid, build_foa_quincunx,
                             build_square_array, build_winglet_array, export_geometry_csv,
                             max_element_spacing, wavelength)

LAM = wavelength(2.2e9)


def test_geo_panel_side_length():
    arr = build_square_array(49, 4.5 * LAM, 199.5)
    # (7 - 1) * 4.5 * 0.1363 m
    assert arr.side_length == pytest.approx(3.68, abs=0.005)


def test_single_element_panel():
    arr = build_square_array(1, 0.7, 10.0)
    assert arr.element_count_N_prime == 1
    assert arr.side_length == 0.0
    assert np.all(arr.element_offsets == 0.0)


def test_nine_element_offsets():
    arr = build_square_array(9, 1.0, 10.0)
    yz = {tuple(p) for p in arr.element_offsets[:, 1:]}
    assert yz == {(y, z) for y in (-1.0, 0.0, 1.0) for z in (-1.0, 0.0, 1.0)}
    # y runs fastest
    assert tuple(arr.element_offsets[1, 1:]) == (0.0, -1.0)


@pytest.mark.parametrize("rows, expected", [(0, 49), (1, 77), (3, 133)])
def test_winglet_element_counts(rows, expected):
    arr = build_winglet_array(49, 4.5 * LAM, rows, 199.5)
    assert arr.element_count_N_prime == expected


def test_winglet_rows_zero_matches_square():
    a = build_winglet_array(49, 0.6, 0, 199.5)
    b = build_square_array(49, 0.6, 199.5)
    np.testing.assert_array_equal(a.element_offsets, b.element_offsets)


def test_winglet_rows_limit():
    with pytest.raises(GeometryError):
        build_winglet_array(49, 0.6, 4, 199.5)


def test_formation_grid_centers():
    arr = build_square_array(1, 1.0, 10.0)
    foa = build_foa_grid(9, 2.0, arr)
    yz = {tuple(p) for p in foa.satellite_centers[:, 1:]}
    assert yz == {(y, z) for y in (-2.0, 0.0, 2.0) for z in (-2.0, 0.0, 2.0)}


def test_formation_169_satellites():
    arr = build_square_array(49, 4.5 * LAM, 199.5)
    foa = build_foa_grid(169, 1.25 * arr.side_length, arr)
    assert foa.satellite_count_S == 169
    assert len(np.unique(foa.satellite_centers[:, 1])) == 13


def test_single_satellite_at_origin():
    foa = build_foa_grid(1, 0.0, build_square_array(4, 0.5, 10.0))
    np.testing.assert_array_equal(foa.satellite_centers, np.zeros((1, 3)))


def test_overlapping_formation_rejected():
    arr = build_square_array(49, 0.5, 10.0)
    with pytest.raises(GeometryError):
        build_foa_grid(4, arr.side_length / 2, arr)


def test_quincunx():
    arr = build_square_array(4, 3.76, 10.0)
    foa = build_foa_quincunx(1.25 * 3.76, arr)
    assert foa.satellite_count_S == 5
    vals = set(np.round(foa.satellite_centers[:, 1:].ravel(), 9))
    assert vals == {0.0, 4.7, -4.7}
    with pytest.raises(GeometryError):
        build_foa_quincunx(0.0, arr)


def test_explicit_requires_plane():
    arr = build_square_array(1, 1.0, 10.0)
    with pytest.raises(GeometryError):
        build_foa_explicit([[1.0, 0.0, 0.0], [0.0, 5.0, 0.0]], arr)


@pytest.mark.parametrize("theta, bound", [(4.3, 6.7), (44.8, 0.7)])
def test_spacing_bound_published(theta, bound):
    assert max_element_spacing(theta) == pytest.approx(bound, abs=0.05)


def test_spacing_bound_thirty_degrees():
    assert max_element_spacing(30.0) == pytest.approx(1.0, rel=1e-12)


def test_csv_export(tmp_path):
    arr = build_square_array(4, 0.5, 10.0)
    foa = build_foa_grid(4, 1.0, arr)
    lines = export_geometry_csv(foa, tmp_path / "g.csv").read_text().splitlines()
    assert len(lines) == 1 + 16


@given(n=st.integers(1, 9), s=st.integers(1, 6), d=st.floats(0.05, 3.0),
       gap=st.floats(1.0, 3.0), rows=st.integers(0, 4))
def test_structure_properties(n, s, d, gap, rows):
    rows = min(rows, (n - 1) // 2)
    arr = build_winglet_array(n * n, d, rows, 20.0)
    assert np.all(arr.element_offsets[:, 0] == 0.0)
    assert arr.element_count_N_prime == n * n + 4 * rows * n
    assert arr.element_exponent_q == pytest.approx((20.0 - 2.0) / 4.0)
    foa = build_foa_grid(s * s, (arr.extent + d) * gap, arr)
    pos = foa.element_positions()
    assert pos.shape == (s * s * arr.element_count_N_prime, 3)
    # u_s(n) = r_s + r_n, satellite-major
    k = arr.element_count_N_prime
    np.testing.assert_allclose(pos[k:2 * k] if s > 1 else pos[:k],
                               (foa.satellite_centers[1 if s > 1 else 0] + arr.element_offsets))
    assert len({tuple(p) for p in np.round(pos, 9)}) == pos.shape[0]
