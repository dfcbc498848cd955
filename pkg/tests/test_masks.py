import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import ndimage

from framebank.masks import (
    AttentionRecord,
    BinaryMask,
    MaskConfig,
    WordSelection,
    aggregate,
    attention_prob,
    contours,
    extract_mask,
    fill,
    temporal_overlap,
    upsample_nearest,
)
from oracles import flood_fill_reference, softmax_rows


def record(q, k, shape, frame=0, step=0, layer="ca.0", head=0):
    return AttentionRecord(
        frame_index=frame,
        step_index=step,
        layer_id=layer,
        head_index=head,
        q=np.asarray(q, dtype=float),
        k=np.asarray(k, dtype=float),
        spatial_shape=shape,
    )


def mask_from_rows(rows):
    return BinaryMask(np.array(rows, dtype=bool))


def ring_3x3_on_5x5(missing=None):
    bits = np.zeros((5, 5), dtype=bool)
    bits[1:4, 1:4] = True
    bits[2, 2] = False
    if missing is not None:
        bits[missing] = False
    return BinaryMask(bits)


random_mask = st.builds(
    lambda rows: BinaryMask(np.array(rows, dtype=bool)),
    st.lists(
        st.lists(st.booleans(), min_size=6, max_size=6),
        min_size=6,
        max_size=6,
    ),
)


class TestAttentionProb:
    def test_single_word_rows_are_one(self):
        rec = record(np.random.default_rng(0).standard_normal((4, 3)), np.ones((1, 3)), (2, 2))
        np.testing.assert_allclose(attention_prob(rec), np.ones((4, 1)))

    def test_two_key_example(self):
        rec = record([[1.0, 0.0]], [[10.0, 0.0], [0.0, 10.0]], (1, 1))
        prob = attention_prob(rec)
        expected = softmax_rows(np.array([[10.0 / math.sqrt(2.0), 0.0]]))
        np.testing.assert_allclose(prob, expected, atol=1e-12)
        assert prob[0, 0] == pytest.approx(0.99915, abs=1e-4)
        assert prob[0, 1] == pytest.approx(0.00085, abs=1e-4)

    def test_zero_query_uniform(self):
        rec = record(np.zeros((3, 4)), np.random.default_rng(1).standard_normal((5, 4)), (1, 3))
        np.testing.assert_allclose(attention_prob(rec), np.full((3, 5), 0.2))

    def test_rows_are_distributions(self):
        rng = np.random.default_rng(2)
        rec = record(rng.standard_normal((16, 8)), rng.standard_normal((6, 8)), (4, 4))
        prob = attention_prob(rec)
        assert np.all(prob >= 0)
        np.testing.assert_allclose(prob.sum(axis=1), np.ones(16), atol=1e-6)

    def test_raw_mode_is_plain_product(self):
        rng = np.random.default_rng(3)
        q, k = rng.standard_normal((4, 5)), rng.standard_normal((3, 5))
        rec = record(q, k, (2, 2))
        np.testing.assert_allclose(attention_prob(rec, mode="raw"), q @ k.T)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="key-dim"):
            record(np.zeros((4, 3)), np.zeros((2, 4)), (2, 2))
        with pytest.raises(ValueError, match="spatial"):
            record(np.zeros((4, 3)), np.zeros((2, 3)), (3, 2))


class TestAggregate:
    def cfg(self, **kw):
        defaults = dict(tau=0.3, step_range=(0, 10), layer_set=("ca.0",))
        defaults.update(kw)
        return MaskConfig(**defaults)

    def test_single_record_identity(self):
        rng = np.random.default_rng(4)
        rec = record(rng.standard_normal((4, 3)), rng.standard_normal((2, 3)), (2, 2))
        prob, shape = aggregate([rec], self.cfg())
        np.testing.assert_allclose(prob, attention_prob(rec))
        assert shape == (2, 2)

    def test_mean_of_identical_records(self):
        rng = np.random.default_rng(5)
        q, k = rng.standard_normal((4, 3)), rng.standard_normal((2, 3))
        r1, r2 = record(q, k, (2, 2), step=0), record(q, k, (2, 2), step=1)
        prob, _ = aggregate([r1, r2], self.cfg())
        np.testing.assert_allclose(prob, attention_prob(r1))

    def test_arithmetic_mean_of_cells(self):
        # logits chosen so softmax rows are exactly [0.2, 0.8] and [0.4, 0.6]
        d_k = 1.0
        q1 = np.array([[math.log(0.2), math.log(0.8)]])
        q2 = np.array([[math.log(0.4), math.log(0.6)]])
        k = np.eye(2) * math.sqrt(2.0)  # cancels the 1/sqrt(d_k) scaling
        r1 = record(q1, k, (1, 1), step=0)
        r2 = record(q2, k, (1, 1), step=1)
        prob, _ = aggregate([r1, r2], self.cfg())
        np.testing.assert_allclose(prob, [[0.3, 0.7]], atol=1e-12)

    def test_mixed_resolutions_upsampled(self):
        rng = np.random.default_rng(6)
        small = record(rng.standard_normal((4, 3)), rng.standard_normal((2, 3)), (2, 2))
        big = record(rng.standard_normal((16, 3)), rng.standard_normal((2, 3)), (4, 4), step=1)
        prob, shape = aggregate([small, big], self.cfg())
        assert shape == (4, 4) and prob.shape == (16, 2)

    def test_empty_selection(self):
        rec = record(np.zeros((4, 3)), np.zeros((2, 3)), (2, 2), step=50)
        with pytest.raises(ValueError, match="no attention records"):
            aggregate([rec], self.cfg(step_range=(0, 10)))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            MaskConfig(tau=0.0, step_range=(0, 1), layer_set=("a",))
        with pytest.raises(ValueError):
            MaskConfig(tau=0.3, step_range=(2, 1), layer_set=("a",))
        with pytest.raises(ValueError):
            MaskConfig(tau=0.3, step_range=(0, 1), layer_set=())
        with pytest.raises(ValueError):
            MaskConfig(tau=0.3, step_range=(0, 1), layer_set=("a",), reduce="max")


class TestExtractMask:
    def test_one_hot_sets_single_pixel(self):
        prob = np.full((4, 2), 0.0)
        prob[:, 0] = 1.0  # everything attends to word 0
        prob[2] = [0.0, 1.0]  # except pixel 2, on the selected word
        mask = extract_mask(prob, WordSelection(np.array([0, 1])), 0.3, (2, 2))
        np.testing.assert_array_equal(mask.bits, [[False, False], [True, False]])

    def test_uniform_quarter_mass_below_threshold(self):
        prob = np.full((6, 4), 0.25)
        mask = extract_mask(prob, WordSelection(np.array([0, 1, 0, 0])), 0.3, (2, 3))
        assert mask.pixel_count() == 0

    def test_zero_threshold_sets_everything(self):
        prob = np.full((4, 2), 0.5)
        mask = extract_mask(prob, WordSelection(np.array([1, 0])), 0.0, (2, 2))
        assert mask.pixel_count() == 4

    def test_multi_word_mass_summed(self):
        prob = np.array([[0.2, 0.2, 0.6]])
        sel = WordSelection(np.array([1, 1, 0]))
        assert extract_mask(prob, sel, 0.3, (1, 1)).pixel_count() == 1

    def test_monotone_in_tau(self):
        rng = np.random.default_rng(7)
        logits = rng.standard_normal((16, 4))
        prob = softmax_rows(logits)
        sel = WordSelection(np.array([0, 1, 1, 0]))
        previous = 17
        for tau in (0.1, 0.3, 0.5, 0.7, 0.9):
            count = extract_mask(prob, sel, tau, (4, 4)).pixel_count()
            assert count <= previous
            previous = count

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="rows"):
            extract_mask(np.zeros((4, 2)), WordSelection(np.array([1, 0])), 0.3, (3, 2))
        with pytest.raises(ValueError, match="words"):
            extract_mask(np.zeros((4, 2)), WordSelection(np.array([1, 0, 0])), 0.3, (2, 2))

    def test_word_selection_validation(self):
        with pytest.raises(ValueError):
            WordSelection(np.array([0, 0]))
        with pytest.raises(ValueError):
            WordSelection(np.array([0.5, 1.0]))
        with pytest.raises(ValueError):
            WordSelection.from_indices([5], 3)


class TestContours:
    def test_empty_mask(self):
        assert contours(mask_from_rows([[0, 0], [0, 0]])) == []

    def test_single_pixel(self):
        result = contours(mask_from_rows([[0, 0, 0], [0, 1, 0], [0, 0, 0]]))
        assert result == [{(1, 1)}]

    def test_filled_square_border(self):
        bits = np.zeros((5, 5), dtype=bool)
        bits[1:4, 1:4] = True
        (edge,) = contours(BinaryMask(bits))
        expected = {(y, x) for y in range(1, 4) for x in range(1, 4)} - {(2, 2)}
        assert edge == expected

    def test_border_pixels_are_contour(self):
        bits = np.ones((3, 3), dtype=bool)
        (edge,) = contours(BinaryMask(bits))
        assert edge == {(y, x) for y in range(3) for x in range(3)} - {(1, 1)}

    def test_two_components(self):
        result = contours(mask_from_rows([[1, 0, 1]]))
        assert sorted(map(sorted, result)) == [[(0, 0)], [(0, 2)]]

    @given(random_mask)
    @settings(max_examples=80, deadline=None)
    def test_contours_subset_of_mask(self, mask):
        for edge in contours(mask):
            for y, x in edge:
                assert mask.bits[y, x]

    @given(random_mask)
    @settings(max_examples=80, deadline=None)
    def test_component_count_matches_scipy(self, mask):
        _, count = ndimage.label(mask.bits, structure=ndimage.generate_binary_structure(2, 1))
        assert len(contours(mask)) == count


class TestFill:
    def test_ring_becomes_square(self):
        bits = np.zeros((5, 5), dtype=bool)
        bits[1:4, 1:4] = True
        bits[2, 2] = False
        filled = fill(BinaryMask(bits))
        expected = np.zeros((5, 5), dtype=bool)
        expected[1:4, 1:4] = True
        np.testing.assert_array_equal(filled.bits, expected)

    def test_no_enclosed_region_unchanged(self):
        mask = mask_from_rows([[1, 1, 0], [0, 1, 0], [0, 0, 0]])
        np.testing.assert_array_equal(fill(mask).bits, mask.bits)

    def test_full_grid(self):
        mask = BinaryMask(np.ones((4, 4), dtype=bool))
        np.testing.assert_array_equal(fill(mask).bits, mask.bits)

    @given(random_mask)
    @settings(max_examples=100, deadline=None)
    def test_idempotent_and_matches_references(self, mask):
        filled = fill(mask)
        np.testing.assert_array_equal(fill(filled).bits, filled.bits)
        np.testing.assert_array_equal(filled.bits, flood_fill_reference(mask.bits))
        np.testing.assert_array_equal(
            filled.bits,
            ndimage.binary_fill_holes(
                mask.bits, structure=ndimage.generate_binary_structure(2, 1)
            ),
        )


class TestTemporalOverlap:
    def test_identical_masks_fill_holes(self):
        ring = ring_3x3_on_5x5()
        merged = temporal_overlap(ring, ring)
        np.testing.assert_array_equal(merged.bits, fill(ring).bits)

    def test_gap_ring_recovered(self):
        full_ring = ring_3x3_on_5x5()
        gap_ring = ring_3x3_on_5x5(missing=(1, 2))
        merged = temporal_overlap(full_ring, gap_ring)
        expected = np.zeros((5, 5), dtype=bool)
        expected[1:4, 1:4] = True
        np.testing.assert_array_equal(merged.bits, expected)

    def test_both_empty(self):
        empty = BinaryMask(np.zeros((4, 4), dtype=bool))
        assert temporal_overlap(empty, empty).pixel_count() == 0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            temporal_overlap(
                BinaryMask(np.zeros((3, 3), dtype=bool)),
                BinaryMask(np.zeros((4, 4), dtype=bool)),
            )

    @given(random_mask, random_mask)
    @settings(max_examples=80, deadline=None)
    def test_superset_and_symmetry(self, a, b):
        merged = temporal_overlap(a, b)
        assert np.all(merged.bits[a.bits])
        assert np.all(merged.bits[b.bits])
        np.testing.assert_array_equal(merged.bits, temporal_overlap(b, a).bits)


class TestUpsample:
    def test_blocks(self):
        mask = mask_from_rows([[1, 0], [0, 1]])
        up = upsample_nearest(mask, (4, 4))
        expected = np.kron(mask.bits, np.ones((2, 2), dtype=bool))
        np.testing.assert_array_equal(up.bits, expected)

    def test_identity(self):
        mask = mask_from_rows([[1, 0], [0, 1]])
        np.testing.assert_array_equal(upsample_nearest(mask, (2, 2)).bits, mask.bits)

    def test_single_pixel_block(self):
        bits = np.zeros((16, 16), dtype=bool)
        bits[2, 3] = True
        up = upsample_nearest(BinaryMask(bits), (64, 64))
        assert up.pixel_count() == 16
        assert up.bits[8:12, 12:16].all()

    def test_non_integer_scale(self):
        mask = mask_from_rows([[1, 0], [0, 1]])
        with pytest.raises(ValueError, match="scale"):
            upsample_nearest(mask, (5, 4))
        with pytest.raises(ValueError, match="scale"):
            upsample_nearest(mask, (1, 4))


class TestEightConnectivity:
    def test_diagonal_components_merge(self):
        mask = mask_from_rows([[1, 0], [0, 1]])
        assert len(contours(mask, connectivity=4)) == 2
        assert len(contours(mask, connectivity=8)) == 1

    def test_fill_diagonal_wall_leaks_with_4(self):
        # a diagonal line does not enclose anything under 4-connected flood
        bits = np.eye(5, dtype=bool)
        np.testing.assert_array_equal(fill(BinaryMask(bits)).bits, bits)
