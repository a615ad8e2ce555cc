import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mstsvd.errors import InvariantError
from mstsvd.filtering import FilterParams
from mstsvd.patches import (
    Aggregator,
    MatchContext,
    PatchGroup,
    accumulate,
    finalize,
    match_block,
    reference_grid,
)


def params(**kw):
    base = dict(ps=8, group_size=30, search_radius=20, step=4, sigma=10.0)
    base.update(kw)
    return FilterParams(**base).validate()


class TestReferenceGrid:
    def test_16x16_ps8_step4(self):
        g = reference_grid(16, 16, 8, 4)
        assert g.rows.tolist() == [0, 4, 8]
        assert g.cols.tolist() == [0, 4, 8]
        assert len(g.positions) == 9

    def test_exact_fit_single_position(self):
        g = reference_grid(8, 8, 8, 4)
        assert g.positions.tolist() == [[0, 0]]

    def test_border_inclusion(self):
        g = reference_grid(9, 9, 8, 4)
        assert g.rows.tolist() == [0, 1]

    def test_positions_strictly_increasing(self):
        g = reference_grid(37, 53, 8, 5)
        assert (np.diff(g.rows) > 0).all() and (np.diff(g.cols) > 0).all()
        assert g.rows[-1] == 37 - 8 and g.cols[-1] == 53 - 8

    def test_patch_too_large(self):
        with pytest.raises(ValueError):
            reference_grid(7, 16, 8, 4)

    @given(st.integers(8, 40), st.integers(8, 40), st.integers(1, 8), st.integers(1, 9))
    @settings(max_examples=80, deadline=None)
    def test_full_coverage(self, h, w, ps, step):
        # coverage is only guaranteed when the stride fits inside a patch
        ps = min(ps, h, w)
        step = min(step, ps)
        g = reference_grid(h, w, ps, step)
        covered = np.zeros((h, w), dtype=bool)
        for r in g.rows:
            for c in g.cols:
                covered[r:r + ps, c:c + ps] = True
        assert covered.all()


class TestMatchBlock:
    def test_reference_first(self, rng):
        img = rng.standard_normal((32, 32, 3))
        group = match_block(img, (12, 8), params(search_radius=6, group_size=5))
        assert group.coords[0].tolist() == [12, 8]
        assert np.allclose(group.data[:, :, :, 0], img[12:20, 8:16, :])
        assert group.n_padded == 0

    def test_group_data_matches_coords(self, rng):
        img = rng.standard_normal((40, 40, 3))
        group = match_block(img, (16, 16), params(search_radius=5, group_size=8))
        for k, (r, c) in enumerate(group.coords):
            assert np.array_equal(group.data[:, :, :, k], img[r:r + 8, c:c + 8, :])

    def test_constant_image_tie_break(self):
        img = np.full((24, 24, 3), 7.0)
        group = match_block(img, (0, 0), params(search_radius=20, group_size=6))
        # every candidate ties at zero distance: lexicographically smallest win
        assert group.coords.tolist() == [[0, 0], [0, 1], [0, 2], [0, 3], [0, 4], [0, 5]]

    def test_distances_sorted(self, rng):
        img = rng.standard_normal((40, 40, 3)) * 50
        p = params(search_radius=8, group_size=10)
        group = match_block(img, (16, 16), p)
        ref = img[16:24, 16:24, :]
        d = [np.linalg.norm(img[r:r + 8, c:c + 8, :] - ref) for r, c in group.coords]
        assert d[0] == 0.0
        assert all(d[i] <= d[i + 1] + 1e-9 for i in range(1, len(d) - 1))
        # and no unselected candidate beats a selected one
        worst = max(d)
        for r in range(8, 25):
            for c in range(8, 25):
                if [r, c] not in group.coords.tolist():
                    dist = np.linalg.norm(img[r:r + 8, c:c + 8, :] - ref)
                    assert dist >= worst - 1e-9

    def test_padding_when_window_small(self, rng):
        img = rng.standard_normal((16, 16, 3))
        group = match_block(img, (4, 4), params(search_radius=0, group_size=5))
        assert group.n_padded == 4
        assert (group.coords == [4, 4]).all()

    def test_gray_image_metrics_agree(self, rng):
        gray = rng.standard_normal((40, 40)) * 40 + 120
        img = np.stack([gray, gray, gray], axis=2)
        p = params(search_radius=7, group_size=12)
        full = match_block(img, (16, 12), p, metric="full")
        first = match_block(img, (16, 12), p, metric="first_slice")
        assert np.array_equal(full.coords, first.coords)

    def test_first_slice_uses_channel_sum(self, rng):
        img = rng.standard_normal((30, 30, 3)) * 30
        p = params(search_radius=6, group_size=6)
        got = match_block(img, (10, 10), p, metric="first_slice")
        lum = img.sum(axis=2) / np.sqrt(3)
        ref = lum[10:18, 10:18]
        cands = []
        for r in range(4, 17):
            for c in range(4, 17):
                cands.append((np.linalg.norm(lum[r:r + 8, c:c + 8] - ref) ** 2, r, c))
        cands.sort()
        expected = [(10, 10)] + [(r, c) for _, r, c in cands if (r, c) != (10, 10)][:5]
        assert got.coords.tolist() == [list(t) for t in expected]

    def test_out_of_bounds_reference(self, rng):
        img = rng.standard_normal((20, 20, 3))
        ctx = MatchContext(img, "full", 8, 4, 5)
        with pytest.raises(ValueError):
            ctx.select(13, 0)  # only 13 valid top-left rows (0..12)

    def test_deterministic_across_contexts(self, rng):
        img = rng.standard_normal((32, 32, 3))
        p = params(search_radius=6, group_size=7)
        a = match_block(img, (8, 8), p)
        b = match_block(img.copy(), (8, 8), p)
        assert np.array_equal(a.coords, b.coords)


class TestAggregator:
    def test_single_patch_identity(self):
        agg = Aggregator.for_shape((12, 12, 2))
        data = np.arange(8 * 8 * 2, dtype=float).reshape(8, 8, 2, 1)
        agg.accumulate(PatchGroup(data=data, coords=np.array([[2, 3]])))
        # uncovered pixels have no weight: restrict to the footprint
        num = agg.numerator[2:10, 3:11, :]
        wgt = agg.weight[2:10, 3:11, :]
        assert np.allclose(num / wgt, data[:, :, :, 0])

    def test_overlap_averages(self):
        agg = Aggregator.for_shape((8, 12, 1))
        a = np.full((8, 8, 1, 1), 1.0)
        b = np.full((8, 8, 1, 1), 3.0)
        agg.accumulate(PatchGroup(data=a, coords=np.array([[0, 0]])))
        agg.accumulate(PatchGroup(data=b, coords=np.array([[0, 4]])))
        out = agg.numerator[:, :, 0] / agg.weight[:, :, 0]
        assert np.allclose(out[:, 4:8], 2.0)  # overlap: (1+3)/2
        assert np.allclose(out[:, :4], 1.0)
        assert np.allclose(out[:, 8:], 3.0)

    def test_identical_overlap_unchanged(self):
        agg = Aggregator.for_shape((8, 8, 1))
        patch = np.random.default_rng(1).standard_normal((8, 8, 1, 1))
        agg.accumulate(PatchGroup(data=patch, coords=np.array([[0, 0]])))
        agg.accumulate(PatchGroup(data=patch.copy(), coords=np.array([[0, 0]])))
        assert np.allclose(agg.finalize(), patch[:, :, :, 0])

    def test_scale_invariance_of_ratio(self, rng):
        data = rng.standard_normal((4, 4, 1, 2))
        coords = np.array([[0, 0], [1, 1]])
        a = Aggregator.for_shape((6, 6, 1))
        accumulate(a, PatchGroup(data=data, coords=coords), "uniform")
        b = Aggregator.for_shape((6, 6, 1))
        accumulate(b, PatchGroup(data=data, coords=coords), "sparsity", n_retained=1)
        mask = a.weight > 0
        assert np.allclose((a.numerator / np.where(mask, a.weight, 1))[mask[:, :, 0]],
                           (b.numerator / np.where(mask, b.weight, 1))[mask[:, :, 0]])

    def test_constant_ratio(self):
        agg = Aggregator(numerator=2.0 * np.ones((4, 4, 1)), weight=np.ones((4, 4, 1)))
        assert np.allclose(finalize(agg), 2.0)

    def test_zero_weight_raises(self):
        agg = Aggregator.for_shape((4, 4, 1))
        with pytest.raises(InvariantError):
            agg.finalize()

    def test_unknown_weight_mode(self):
        agg = Aggregator.for_shape((8, 8, 1))
        g = PatchGroup(data=np.zeros((8, 8, 1, 1)), coords=np.array([[0, 0]]))
        with pytest.raises(ValueError):
            agg.accumulate(g, weight_mode="fancy")

    def test_merge_partitions(self, rng):
        data = rng.standard_normal((8, 8, 1, 1))
        whole = Aggregator.for_shape((16, 16, 1))
        part1 = Aggregator.for_shape((16, 16, 1))
        part2 = Aggregator.for_shape((16, 16, 1))
        g1 = PatchGroup(data=data, coords=np.array([[0, 0]]))
        g2 = PatchGroup(data=data, coords=np.array([[8, 8]]))
        whole.accumulate(g1)
        whole.accumulate(g2)
        part1.accumulate(g1)
        part2.accumulate(g2)
        part1.merge(part2)
        assert np.array_equal(part1.numerator, whole.numerator)
        assert np.array_equal(part1.weight, whole.weight)
