import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aminothread.geometry import (
    AnchorConfig, Box3, GeometryDomainError, ResidualVec, TemplateSizes, anchor_array,
    assign_anchor_labels, boxes_to_array, decode_residuals, decode_residuals_array,
    encode_residuals, encode_residuals_array, generate_anchors, iou, iou_matrix,
)
from aminothread.residues import AMINO_ACIDS

coord = st.floats(-50, 50, allow_nan=False)
extent = st.floats(0.1, 20, allow_nan=False)
boxes = st.builds(Box3, coord, coord, coord, extent, extent, extent)


def unit(x=0.0, y=0.0, z=0.0):
    return Box3(x, y, z, 1.0, 1.0, 1.0)


class TestBox:
    def test_invalid_extent(self):
        with pytest.raises(ValueError):
            Box3(0, 0, 0, 0.0, 1, 1)
        with pytest.raises(ValueError):
            Box3(0, 0, 0, 1, -1, 1)

    def test_non_finite(self):
        with pytest.raises(ValueError):
            Box3(math.nan, 0, 0, 1, 1, 1)

    def test_center_roundtrip(self):
        b = Box3.from_center((1.0, 2.0, 3.0), (2.0, 4.0, 6.0))
        assert b == Box3(0.0, 0.0, 0.0, 2.0, 4.0, 6.0)
        np.testing.assert_array_equal(b.center, [1.0, 2.0, 3.0])

    def test_bounding(self):
        pts = np.array([[1.0, 5.0, -2.0], [3.0, 4.0, 0.5], [2.0, 6.0, 0.0]])
        b = Box3.bounding(pts)
        np.testing.assert_array_equal(b.corner, pts.min(axis=0))
        np.testing.assert_array_equal(b.corner + b.size, pts.max(axis=0))


class TestIou:
    def test_identity(self):
        b = Box3(1, 2, 3, 4, 5, 6)
        assert iou(b, b) == 1.0

    def test_disjoint(self):
        assert iou(unit(), unit(x=2.0)) == 0.0

    def test_touching_faces(self):
        assert iou(unit(), unit(x=1.0)) == 0.0

    def test_half_shift(self):
        # overlap 0.5, union 2 - 0.5
        assert iou(unit(), unit(x=0.5)) == pytest.approx(1 / 3, abs=1e-15)

    @given(boxes, boxes)
    def test_symmetric_and_bounded(self, a, b):
        v = iou(a, b)
        assert v == iou(b, a)
        assert 0.0 <= v <= 1.0

    @given(boxes)
    def test_self_is_one(self, a):
        assert iou(a, a) == 1.0
        arr = a.as_array()[None, :]
        assert iou_matrix(arr, arr)[0, 0] == 1.0

    def test_matrix_matches_scalar(self, rng):
        a = np.hstack([rng.uniform(0, 10, (15, 3)), rng.uniform(1, 5, (15, 3))])
        b = np.hstack([rng.uniform(0, 10, (9, 3)), rng.uniform(1, 5, (9, 3))])
        m = iou_matrix(a, b)
        for i in range(15):
            for j in range(9):
                assert m[i, j] == pytest.approx(iou(Box3.from_array(a[i]), Box3.from_array(b[j])), abs=1e-14)


def template_zero():
    return np.zeros(3)


class TestResiduals:
    def test_center_offset(self):
        anchor = Box3(10, 0, 0, 4, 4, 4)
        gt = Box3(12, 0, 0, 4, 4, 4)
        assert encode_residuals(gt, anchor, template_zero()).u[0] == 0.5

    def test_size_residual_zero(self):
        anchor = Box3(0, 0, 0, 4, 4, 4)
        gt = Box3(0, 0, 0, 6, 6, 6)
        assert encode_residuals(gt, anchor, np.full(3, 2.0)).v == (0.0, 0.0, 0.0)

    def test_zero_template_same_size(self):
        anchor = Box3(1, 2, 3, 4, 5, 6)
        assert encode_residuals(anchor, anchor, template_zero()).as_array().tolist() == [0.0] * 6

    def test_decode_zero_residual(self):
        anchor = Box3(1, 2, 3, 4, 5, 6)
        out = decode_residuals(ResidualVec((0, 0, 0), (0, 0, 0)), anchor, template_zero())
        assert out == anchor

    def test_decode_inverse_of_example(self):
        anchor = Box3(10, 0, 0, 4, 4, 4)
        res = ResidualVec((0.5, 0.0, 0.0), (0.0, 0.0, 0.0))
        assert decode_residuals(res, anchor, template_zero()).x == 12.0

    @pytest.mark.parametrize("axis,idx", [("w", 3), ("h", 4), ("l", 5)])
    def test_domain_error_names_axis(self, axis, idx):
        vals = [0, 0, 0, 3.0, 3.0, 3.0]
        vals[idx] = 1.5
        with pytest.raises(GeometryDomainError) as exc:
            encode_residuals(Box3(*vals), Box3(0, 0, 0, 4, 4, 4), np.full(3, 2.0))
        assert exc.value.axis == axis

    def test_equal_to_template_is_domain_error(self):
        with pytest.raises(GeometryDomainError):
            encode_residuals(Box3(0, 0, 0, 2, 3, 3), Box3(0, 0, 0, 4, 4, 4), np.full(3, 2.0))

    def test_random_roundtrip(self, rng):
        worst = 0.0
        for _ in range(1000):
            anchor = Box3(*rng.uniform(-50, 50, 3), *rng.uniform(1, 10, 3))
            template = rng.uniform(0.1, 3.0, 3)
            gt = Box3(*rng.uniform(-50, 50, 3), *(template + rng.uniform(0.05, 8, 3)))
            back = decode_residuals(encode_residuals(gt, anchor, template), anchor, template)
            g, d = gt.as_array(), back.as_array()
            worst = max(worst, float(np.max(np.abs(d - g) / np.abs(g))))
        assert worst < 1e-9

    def test_array_forms_agree(self, rng):
        n = 50
        anchors = np.hstack([rng.uniform(-5, 5, (n, 3)), rng.uniform(1, 6, (n, 3))])
        templates = rng.uniform(0.2, 1.0, (n, 3))
        gts = np.hstack([rng.uniform(-5, 5, (n, 3)), templates + rng.uniform(0.1, 4, (n, 3))])
        enc = encode_residuals_array(gts, anchors, templates)
        for i in range(n):
            one = encode_residuals(Box3.from_array(gts[i]), Box3.from_array(anchors[i]), templates[i])
            np.testing.assert_allclose(enc[i], one.as_array(), rtol=0, atol=1e-15)
        np.testing.assert_allclose(decode_residuals_array(enc, anchors, templates), gts, rtol=1e-12)


class TestTemplates:
    def test_file_roundtrip(self, rng, tmp_path):
        t = TemplateSizes(np.round(rng.uniform(0.5, 5, (20, 3)), 6))
        path = tmp_path / "templates.txt"
        t.save(path)
        text = path.read_text(encoding="utf-8")
        assert text.splitlines()[0].split()[0] == "ALA"
        assert all(len(line.split()[1].split(".")[1]) == 6 for line in text.splitlines())
        assert TemplateSizes.load(path) == t

    def test_lookup_by_name(self):
        t = TemplateSizes(np.arange(60, dtype=float).reshape(20, 3) + 1)
        np.testing.assert_array_equal(t["VAL"], t[AMINO_ACIDS.index("VAL")])

    def test_missing_class(self):
        text = "\n".join(f"{n} 1.0 1.0 1.0" for n in AMINO_ACIDS[:-1])
        with pytest.raises(ValueError, match="VAL"):
            TemplateSizes.loads(text)

    def test_rejects_non_positive(self):
        with pytest.raises(ValueError):
            TemplateSizes(np.zeros((20, 3)))

    def test_encodings_valid_on_training_data(self, helix50):
        t = TemplateSizes.from_structures([helix50])
        for res in helix50.residues:
            encode_residuals(res.gt_box, res.gt_box, t[res.class_id])


class TestAnchors:
    def test_k_is_21(self):
        assert AnchorConfig().k == 21

    def test_count_8_cubed(self):
        assert len(generate_anchors((8, 8, 8), AnchorConfig(stride=4))) == 168

    def test_stride_larger_than_volume(self):
        assert len(generate_anchors((3, 3, 3), AnchorConfig(stride=8))) == 21

    @pytest.mark.parametrize("shape,stride", [((5, 9, 12), 4), ((16, 16, 16), 4), ((7, 1, 3), 2)])
    def test_count_is_positions_times_k(self, shape, stride):
        positions = np.prod([math.ceil(n / stride) for n in shape])
        assert anchor_array(shape, AnchorConfig(stride=stride)).shape == (positions * 21, 6)

    def test_deterministic(self):
        a = anchor_array((12, 8, 8)).tobytes()
        assert a == anchor_array((12, 8, 8)).tobytes()

    def test_order_position_major(self):
        arr = anchor_array((8, 8, 8))
        centers = arr[:, :3] + arr[:, 3:] / 2
        np.testing.assert_allclose(centers[:21], np.tile([2.0, 2.0, 2.0], (21, 1)))
        np.testing.assert_allclose(centers[21], [2.0, 2.0, 6.0])
        # within a position: first scale's 7 ratios, then the next scale
        vols = np.prod(arr[:21, 3:], axis=1)
        np.testing.assert_allclose(vols, np.repeat([64.0, 216.0, 512.0], 7))

    def test_aspect_ratio_shape(self):
        shapes = AnchorConfig().shapes()
        assert shapes[1][0] / shapes[1][1] == pytest.approx(2.0)

    def test_empty_shape(self):
        with pytest.raises(ValueError):
            generate_anchors((0, 4, 4))

    def test_config_counts_validated(self):
        with pytest.raises(ValueError):
            AnchorConfig(aspect_ratios=((1, 1, 1),))
        with pytest.raises(ValueError):
            AnchorConfig(scales=(4.0, 6.0))


class TestLabels:
    def test_identical_is_positive(self):
        g = [Box3(0, 0, 0, 4, 4, 4), Box3(10, 0, 0, 4, 4, 4)]
        assert assign_anchor_labels([g[1]], g, 0.8).tolist() == [1]

    def test_disjoint_is_negative(self):
        assert assign_anchor_labels([unit(100, 0, 0)], [unit()], 0.8).tolist() == [-1]

    def test_exact_threshold_is_negative(self):
        a, g = Box3(0, 0, 0, 1, 1, 1), Box3(0, 0, 0, 1, 1, 0.8)
        assert iou(a, g) == 0.8
        assert assign_anchor_labels([a], [g], 0.8).tolist() == [-1]

    def test_tie_goes_to_lowest_gt(self):
        g = [unit(0.05, 0, 0), unit(-0.05, 0, 0)]
        assert iou(unit(), g[0]) == iou(unit(), g[1])
        assert assign_anchor_labels([unit()], g, 0.5).tolist() == [0]

    def test_no_gts(self):
        assert assign_anchor_labels([unit()], [], 0.5).tolist() == [-1]

    @settings(max_examples=50)
    @given(st.lists(boxes, min_size=1, max_size=6), st.lists(boxes, min_size=1, max_size=4),
           st.floats(0.05, 0.9), st.floats(0.0, 0.09))
    def test_raising_threshold_never_adds_positives(self, anchors, gts, lo, delta):
        low = assign_anchor_labels(anchors, gts, lo)
        high = assign_anchor_labels(anchors, gts, lo + delta)
        assert np.all((high < 0) | (low >= 0))

    def test_array_input(self):
        a = boxes_to_array([unit(), unit(5, 5, 5)])
        assert assign_anchor_labels(a, a, 0.8).tolist() == [0, 1]
