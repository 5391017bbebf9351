import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from amiwav import wavelet1d as w1
from amiwav import wavelet2d as w2
from amiwav.errors import DataError, InvalidArgumentError, StructureError



def one_d_per_axis(m, levels):
    """Same bands built from the 1D transform: within rows first, then down columns."""
    x = np.asarray(m, dtype=float)
    out = []
    for _ in range(levels):
        rows = [w1.decompose(r, 1) for r in x]
        lo = np.stack([p.approximation for p in rows])
        hi = np.stack([p.details[0] for p in rows])
        lo_cols = [w1.decompose(c, 1) for c in lo.T]
        hi_cols = [w1.decompose(c, 1) for c in hi.T]
        ll = np.stack([p.approximation for p in lo_cols]).T
        v = np.stack([p.details[0] for p in lo_cols]).T
        h = np.stack([p.approximation for p in hi_cols]).T
        d = np.stack([p.details[0] for p in hi_cols]).T
        out.append((ll, h, v, d))
        x = ll
    return out


def test_week_matrix_band_shapes():
    m = np.random.default_rng(1).random((31, 168))
    d3 = w2.decompose2d(m, 3)
    assert w2.vertical_coefficients(d3, 3).shape == (4, 21)
    d4 = w2.decompose2d(m, 4)
    assert w2.vertical_coefficients(d4, 4).shape == (2, 11)
    assert [lv.shape for lv in d4.levels] == [(16, 84), (8, 42), (4, 21), (2, 11)]
    assert [(lv.row_pad, lv.col_pad) for lv in d4.levels] == [(1, 0), (0, 0), (0, 0), (0, 1)]


def test_constant_matrix_details_vanish():
    d = w2.decompose2d(np.full((12, 20), 3.0), 3)
    for lv in d.levels:
        for band in (lv.horizontal, lv.vertical, lv.diagonal):
            assert np.all(band == 0)
    assert np.all(w2.vertical_coefficients(d, 2) == 0)


def test_vertical_band_is_row_to_row_change():
    # identical rows, varying columns: nothing changes from row to row
    row = np.arange(16.0) ** 2
    d = w2.decompose2d(np.tile(row, (6, 1)), 1)
    assert np.all(d.level(1).vertical == 0)
    assert np.all(d.level(1).diagonal == 0)
    assert np.any(d.level(1).horizontal != 0)
    # identical columns, varying rows: the vertical band carries it
    d = w2.decompose2d(np.tile(np.arange(6.0)[:, None] ** 2, (1, 16)), 1)
    assert np.all(d.level(1).horizontal == 0)
    assert np.any(d.level(1).vertical != 0)


def test_vertical_fixture_values():
    m = np.array([[1.0, 1.0], [3.0, 3.0]])
    lv = w2.decompose2d(m, 1).level(1)
    # low along the row: [sqrt2, 3 sqrt2]^T, then high down the column: (sqrt2 - 3 sqrt2)/sqrt2 = -2
    np.testing.assert_allclose(lv.vertical, [[-2.0]], atol=1e-15)
    np.testing.assert_allclose(lv.approximation, [[4.0]], atol=1e-15)
    np.testing.assert_allclose(lv.horizontal, [[0.0]], atol=1e-15)


def test_round_trip_8x8():
    m = np.random.default_rng(2).random((8, 8))
    assert np.max(np.abs(w2.reconstruct2d(w2.decompose2d(m, 3)) - m)) < 1e-9


def test_round_trip_week_matrix_with_padding():
    rng = np.random.default_rng(3)
    for _ in range(20):
        m = rng.uniform(0, 5, (31, 168))
        assert np.max(np.abs(w2.reconstruct2d(w2.decompose2d(m, 4)) - m)) < 1e-9


def test_details_zeroed_gives_block_means():
    m = np.random.default_rng(4).random((16, 24))
    img = w2.approximation_image(w2.decompose2d(m, 3))
    want = np.empty_like(m)
    for r in range(0, 16, 8):
        for c in range(0, 24, 8):
            want[r : r + 8, c : c + 8] = m[r : r + 8, c : c + 8].mean()
    np.testing.assert_allclose(img, want, atol=1e-12)


def test_details_zeroed_with_padding_matches_1d_per_axis():
    m = np.random.default_rng(5).random((31, 21))
    img = w2.approximation_image(w2.decompose2d(m, 2))
    along_rows = np.stack([w1.synthesize_approximation(w1.decompose(r, 2)) for r in m])
    want = np.stack([w1.synthesize_approximation(w1.decompose(c, 2)) for c in along_rows.T]).T
    np.testing.assert_allclose(img, want, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 8), st.integers(2, 8), st.integers(1, 3), st.data())
def test_separable_equivalence(rows, cols, levels, data):
    levels = min(levels, int(np.log2(min(rows, cols))))  # keep both axes >= 2 for the 1D route
    m = data.draw(arrays(np.float64, (rows, cols), elements=st.floats(-100, 100)))
    d = w2.decompose2d(m, levels)
    for lv, (ll, h, v, g) in zip(d.levels, one_d_per_axis(m, levels)):
        for got, want in ((lv.approximation, ll), (lv.horizontal, h), (lv.vertical, v), (lv.diagonal, g)):
            np.testing.assert_allclose(got, want, rtol=0, atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 3), st.integers(1, 4), st.integers(1, 4), st.data())
def test_energy_partition_without_padding(levels, rb, cb, data):
    m = data.draw(arrays(np.float64, (rb * 2**levels, cb * 2**levels), elements=st.floats(-100, 100)))
    d = w2.decompose2d(m, levels)
    energy = np.sum(d.levels[-1].approximation ** 2)
    energy += sum(np.sum(lv.horizontal**2) + np.sum(lv.vertical**2) + np.sum(lv.diagonal**2) for lv in d.levels)
    assert energy == pytest.approx(np.sum(m**2), rel=1e-9, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 40), st.integers(2, 40), st.integers(1, 5), st.data())
def test_shape_law_and_round_trip(rows, cols, levels, data):
    m = data.draw(arrays(np.float64, (rows, cols), elements=st.floats(-100, 100)))
    d = w2.decompose2d(m, levels)
    r, c = rows, cols
    for lv in d.levels:
        r, c = (r + 1) // 2, (c + 1) // 2
        for band in (lv.approximation, lv.horizontal, lv.vertical, lv.diagonal):
            assert band.shape == (r, c)
    assert np.max(np.abs(w2.reconstruct2d(d) - m)) < 1e-9


def test_errors():
    with pytest.raises(DataError, match=r"row 1, col 2"):
        w2.decompose2d([[1, 2, 3], [4, 5, np.nan]], 1)
    with pytest.raises(InvalidArgumentError):
        w2.decompose2d(np.ones((1, 5)), 1)
    with pytest.raises(InvalidArgumentError):
        w2.decompose2d(np.ones((4, 4)), 0)
    d = w2.decompose2d(np.ones((8, 8)), 2)
    with pytest.raises(InvalidArgumentError):
        w2.vertical_coefficients(d, 3)
    lv = d.levels[1]
    broken = w2.Decomposition2D(d.shape, (d.levels[0], w2.Level2D(lv.approximation, lv.horizontal[:1], lv.vertical, lv.diagonal, 0, 0)))
    with pytest.raises(StructureError):
        w2.reconstruct2d(broken)


def test_vertical_returns_copy():
    d = w2.decompose2d(np.random.default_rng(0).random((8, 8)), 1)
    v = w2.vertical_coefficients(d, 1)
    v[:] = 0
    assert np.any(d.level(1).vertical != 0)
