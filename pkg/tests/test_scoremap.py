from __future__ import annotations

import numpy as np
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mptrack.scoremap import ScoreMap, bilinear_sample, normalize, upsample

finite_maps = arrays(float, st.tuples(st.integers(2, 8), st.integers(2, 8)),
                     elements=st.floats(-1e3, 1e3, allow_nan=False))


@given(finite_maps)
def test_normalized_range(raw):
    out, degenerate = normalize(raw)
    assert np.all((out >= 0) & (out <= 1))
    if np.ptp(raw) > 0:
        assert not degenerate
        assert out.min() == 0.0 and out.max() == 1.0
    else:
        assert degenerate and not out.any()


def test_non_finite_entries_become_zero():
    out, degenerate = normalize(np.array([[np.nan, 1.0], [3.0, np.inf]]))
    np.testing.assert_array_equal(out, [[0.0, 0.0], [1.0, 0.0]])
    assert not degenerate


def test_all_nan_is_degenerate():
    out, degenerate = normalize(np.full((2, 2), np.nan))
    assert degenerate and not out.any()


def test_peak_ties_go_to_first_row_major():
    m = ScoreMap(np.array([[0.0, 1.0], [1.0, 0.0]]), "audio")
    assert m.peak == (0, 1)
    np.testing.assert_array_equal(m.peak_xy, [1.0, 0.0])


@given(arrays(float, (4, 5), elements=st.floats(0, 1)))
def test_upsample_hits_lattice_nodes_exactly(values):
    H, W = 13, 21  # (H-1)/(h-1) = 4 and (W-1)/(w-1) = 5, integer node spacing
    up = upsample(values, (H, W))
    np.testing.assert_allclose(up[::4, ::5], values, atol=1e-12)
    assert up.min() >= values.min() - 1e-12 and up.max() <= values.max() + 1e-12


def test_upsample_of_linear_ramp_is_linear():
    ramp = np.add.outer(np.arange(3.0), 2 * np.arange(4.0))
    up = upsample(ramp, (5, 7))
    yy, xx = np.mgrid[0:5, 0:7]
    np.testing.assert_allclose(up, yy * 2 / 4 + 2 * xx * 3 / 6, atol=1e-12)


@given(arrays(float, (6, 7), elements=st.floats(0, 1)))
def test_bilinear_sample_at_integer_pixels(values):
    yy, xx = np.mgrid[0:6, 0:7]
    xy = np.stack([xx, yy], axis=-1).astype(float)
    np.testing.assert_allclose(bilinear_sample(values, xy), values, atol=1e-12)


def test_bilinear_sample_midpoint_and_clamping():
    v = np.array([[0.0, 1.0], [2.0, 3.0]])
    assert bilinear_sample(v, np.array([0.5, 0.5])) == 1.5
    assert bilinear_sample(v, np.array([-4.0, 9.0])) == 2.0
