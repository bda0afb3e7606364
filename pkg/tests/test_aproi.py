import numpy as np
import pytest

from aminothread.aproi import AproiConfig, Roi, aproi_backward, aproi_forward, copied_window
from aminothread.checks import check_aproi_adjoint, check_aproi_backward_fd
from aminothread.geometry import Box3
from aminothread.volume import DensityVolume

T8 = AproiConfig((8, 8, 8))


def test_exact_size_is_a_plain_crop(rng):
    x = rng.normal(size=(12, 12, 12))
    out = aproi_forward(x, [Roi((2, 3, 1), (8, 8, 8))], T8)
    np.testing.assert_array_equal(out[0], x[2:10, 3:11, 1:9])


def test_small_roi_is_centered():
    x = np.arange(1, 9, dtype=np.float64).reshape(2, 2, 2)
    out = aproi_forward(x, [Roi((0, 0, 0), (2, 2, 2))], T8)[0]
    assert copied_window(Roi((0, 0, 0), (2, 2, 2)), T8) == [(3, 5)] * 3
    np.testing.assert_array_equal(out[3:5, 3:5, 3:5], x)
    mask = np.ones_like(out, dtype=bool)
    mask[3:5, 3:5, 3:5] = False
    assert not out[mask].any()


def test_large_roi_is_center_cropped(rng):
    x = rng.normal(size=(10, 10, 10))
    out = aproi_forward(x, [Roi((0, 0, 0), (10, 10, 10))], T8)[0]
    assert copied_window(Roi((0, 0, 0), (10, 10, 10)), T8) == [(0, 8)] * 3
    np.testing.assert_array_equal(out, x[1:9, 1:9, 1:9])


def test_aspect_ratio_kept_per_axis(rng):
    x = rng.normal(size=(12, 12, 12))
    out = aproi_forward(x, [Roi((0, 0, 0), (2, 12, 5))], T8)[0]
    np.testing.assert_array_equal(out[3:5, :, 1:6], x[0:2, 2:10, 0:5])
    assert np.count_nonzero(out) == 2 * 8 * 5


def test_roi_past_the_edge_pads_zero(rng):
    x = rng.normal(size=(6, 6, 6))
    out = aproi_forward(x, [Roi((4, 0, 0), (4, 4, 4))], AproiConfig((4, 4, 4)))[0]
    np.testing.assert_array_equal(out[:2], x[4:6, 0:4, 0:4])
    assert not out[2:].any()


def test_backward_of_ones_is_window_indicator():
    roi = Roi((1, 2, 0), (3, 10, 4))
    g = aproi_backward(np.ones((1, 8, 8, 8)), [roi], T8, (12, 12, 12))
    expected = np.zeros((12, 12, 12))
    expected[1:4, 3:11, 0:4] = 1
    np.testing.assert_array_equal(g, expected)


def test_identical_rois_double_gradient(rng):
    roi = Roi((0, 1, 2), (5, 5, 5))
    g = rng.normal(size=(1, 8, 8, 8))
    one = aproi_backward(g, [roi], T8, (9, 9, 9))
    two = aproi_backward(np.concatenate([g, g]), [roi, roi], T8, (9, 9, 9))
    np.testing.assert_array_equal(two, 2 * one)


def test_forward_accepts_volume():
    vol = DensityVolume(np.ones((6, 6, 6), dtype=np.float32))
    out = aproi_forward(vol, [Roi((0, 0, 0), (6, 6, 6))], AproiConfig((6, 6, 6)))
    assert out.dtype == np.float32 and out.sum() == 216


def test_forward_is_norm_non_increasing(rng):
    # output entries are a subset of input entries, one RoI at a time
    x = rng.normal(size=(9, 9, 9))
    for _ in range(20):
        roi = Roi(tuple(rng.integers(-3, 9, 3)), tuple(rng.integers(1, 12, 3)))
        assert np.linalg.norm(aproi_forward(x, [roi], T8)) <= np.linalg.norm(x) + 1e-12


def test_backward_shape_mismatch():
    with pytest.raises(ValueError, match="shape"):
        aproi_backward(np.ones((2, 8, 8, 8)), [Roi((0, 0, 0), (2, 2, 2))], T8, (4, 4, 4))


def test_bad_inputs():
    with pytest.raises(ValueError):
        Roi((0, 0, 0), (0, 1, 1))
    with pytest.raises(ValueError):
        AproiConfig((8, 8))
    with pytest.raises(ValueError):
        aproi_forward(np.zeros((2, 2, 2)), [])


def test_roi_from_box():
    vol = DensityVolume(np.zeros((20, 20, 20)), 0.5, (10.0, 10.0, 10.0))
    roi = Roi.from_box(Box3(11.0, 11.2, 10.0, 2.0, 1.0, 0.5), vol)
    assert roi.corner == (2, 2, 0)
    assert roi.size == (4, 3, 1)


def test_adjoint_and_fd_checks_small():
    assert check_aproi_adjoint(n=10, seed=3).passed
    assert check_aproi_backward_fd(n=5, seed=3).passed
