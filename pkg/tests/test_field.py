import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latticeviz import (
    constant_field,
    filter_range,
    histogram,
    make_field,
    project,
    slice_field,
    stats,
)

from oracles import all_indices, project_oracle, slice_oracle


def random_field(rng, max_extent=4, allow_masked=True):
    n_axes = int(rng.integers(2, 5))
    dims = tuple(int(d) for d in rng.integers(1, max_extent + 1, size=n_axes))
    n = int(np.prod(dims))
    values = rng.standard_normal(n)
    mask = rng.random(n) > 0.3 if allow_masked else np.ones(n, dtype=bool)
    return make_field(dims, values, mask)


class TestSlice:
    def test_4d_t_slice_shape(self):
        f = constant_field((16, 16, 16, 16), 1.0)
        s = slice_field(f, 3, 0)
        assert s.dims == (16, 16, 16)
        assert s.axis_names == ("x", "y", "z")

    def test_constant_invariance(self):
        f = constant_field((3, 4, 5), 7.25)
        for axis in range(3):
            s = slice_field(f, axis, 1)
            assert np.all(s.values == 7.25)

    def test_2x2x2x2_storage_order(self):
        # brute-force index arithmetic oracle over all 16 voxels
        f = make_field((2, 2, 2, 2), np.arange(16.0))
        s = slice_field(f, 3, 1)
        dims, values, mask = slice_oracle(
            (2, 2, 2, 2), list(range(16)), [True] * 16, 3, 1
        )
        assert s.dims == dims
        assert s.values.tolist() == values == list(range(8, 16))
        assert s.mask.tolist() == mask

    def test_axis_label_resolution(self):
        f = constant_field((2, 2, 2, 2), 0.0)
        assert slice_field(f, "t", 0).dims == (2, 2, 2)

    def test_metadata_preserved(self):
        f = make_field(
            (2, 3, 4),
            np.zeros(24),
            spacing=(1.0, 2.0, 3.0),
            origin=(10.0, 20.0, 30.0),
        )
        s = slice_field(f, 1, 2)
        assert s.spacing == (1.0, 3.0)
        assert s.origin == (10.0, 30.0)
        assert s.axis_names == ("x", "z")

    def test_range_errors_name_offender(self):
        f = constant_field((2, 2), 0.0)
        with pytest.raises(IndexError, match="axis"):
            slice_field(f, 5, 0)
        with pytest.raises(IndexError, match="index"):
            slice_field(f, 0, 9)

    def test_restack_roundtrip(self):
        rng = np.random.default_rng(11)
        for _ in range(25):
            f = random_field(rng)
            for axis in range(f.ndim):
                restacked = np.stack(
                    [slice_field(f, axis, i).grid() for i in range(f.dims[axis])],
                    axis=axis,
                )
                assert np.array_equal(restacked, f.grid())
                remask = np.stack(
                    [slice_field(f, axis, i).mask_grid() for i in range(f.dims[axis])],
                    axis=axis,
                )
                assert np.array_equal(remask, f.mask_grid())


class TestProject:
    def test_constant_max(self):
        f = constant_field((3, 3), 2.5)
        assert np.all(project(f, 0, "max").values == 2.5)

    def test_hand_enumeration_sum(self):
        f = make_field((2, 2), [1.0, 2.0, 3.0, 4.0])
        assert project(f, 1, "sum").values.tolist() == [4.0, 6.0]

    def test_hand_enumeration_mean(self):
        f = make_field((2, 2), [1.0, 2.0, 3.0, 4.0])
        assert project(f, 0, "mean").values.tolist() == [1.5, 3.5]

    def test_mask_semantics(self):
        f = make_field((2, 2), [1.0, 2.0, 3.0, 4.0], mask=[True, False, True, False])
        p = project(f, 1, "mean")
        assert p.values.tolist() == [2.0, 0.0]
        assert p.mask.tolist() == [True, False]

    def test_unknown_reducer(self):
        with pytest.raises(ValueError, match="reducer"):
            project(constant_field((2, 2), 0.0), 0, "median")

    def test_axis_out_of_range(self):
        with pytest.raises(IndexError):
            project(constant_field((2, 2), 0.0), 3, "sum")

    def test_sum_equals_sum_of_slices(self):
        rng = np.random.default_rng(5)
        for _ in range(25):
            f = random_field(rng, allow_masked=False)
            for axis in range(f.ndim):
                total = sum(
                    slice_field(f, axis, i).values for i in range(f.dims[axis])
                )
                assert np.allclose(project(f, axis, "sum").values, total)

    def test_matches_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            f = random_field(rng)
            for axis in range(f.ndim):
                for reducer in ("sum", "mean", "max", "min"):
                    got = project(f, axis, reducer)
                    dims, values, mask = project_oracle(
                        f.dims, f.values.tolist(), f.mask.tolist(), axis, reducer
                    )
                    assert got.dims == dims
                    assert got.mask.tolist() == mask
                    assert np.allclose(got.values, values)


class TestFilterRange:
    def test_direct_comparison(self):
        f = make_field((4,), [1.0, 2.0, 3.0, 4.0])
        g = filter_range(f, lo=2, hi=3)
        assert g.mask.tolist() == [False, True, True, False]
        assert np.array_equal(g.values, f.values)

    def test_no_bounds_rejected(self):
        with pytest.raises(ValueError):
            filter_range(make_field((2,), [0.0, 1.0]))

    def test_lo_above_hi_rejected(self):
        with pytest.raises(ValueError):
            filter_range(make_field((2,), [0.0, 1.0]), lo=2, hi=1)

    def test_idempotent_and_composing(self):
        rng = np.random.default_rng(3)
        f = make_field((4, 4), rng.standard_normal(16))
        once = filter_range(f, lo=-0.5, hi=0.5)
        twice = filter_range(once, lo=-0.5, hi=0.5)
        assert once == twice
        narrower = filter_range(once, lo=0.0)
        assert np.array_equal(
            narrower.mask, once.mask & (f.values >= 0.0)
        )

    def test_source_untouched(self):
        f = make_field((4,), [1.0, 2.0, 3.0, 4.0])
        filter_range(f, lo=2)
        assert f.mask.tolist() == [True] * 4


class TestHistogram:
    def test_hand_count(self):
        f = make_field((4,), [0.0, 0.0, 1.0, 1.0])
        h = histogram(f, 2, (0.0, 2.0))
        assert h.counts.tolist() == [2, 2]
        assert h.total_counted == 4

    def test_all_masked_explicit_range(self):
        f = make_field((4,), [0.0, 0.0, 1.0, 1.0], mask=[False] * 4)
        h = histogram(f, 3, (0.0, 2.0))
        assert h.counts.tolist() == [0, 0, 0]
        assert h.total_counted == 0

    def test_empty_domain_error(self):
        f = make_field((2,), [1.0, 2.0], mask=[False, False])
        with pytest.raises(ValueError, match="valid"):
            histogram(f, 4)

    def test_last_bin_closed(self):
        # bin 0 is [0,1), bin 1 is [1,2] (closed above)
        f = make_field((4,), [0.0, 1.0, 2.0, 2.0])
        h = histogram(f, 2, (0.0, 2.0))
        assert h.counts.tolist() == [1, 3]

    def test_accounting_invariant(self):
        rng = np.random.default_rng(17)
        for _ in range(25):
            n = int(rng.integers(1, 65))
            values = rng.standard_normal(n)
            mask = rng.random(n) > 0.4
            f = make_field((n,), values, mask)
            h = histogram(f, 5, (-0.8, 0.8))
            masked = int((~mask).sum())
            out_of_range = int(
                ((values < -0.8) | (values > 0.8))[mask].sum()
            )
            assert h.total_counted + out_of_range + masked == n

    @given(st.integers(1, 12), st.integers(0, 2**31 - 1))
    @settings(max_examples=50, deadline=None)
    def test_counts_match_membership(self, bins, seed):
        rng = np.random.default_rng(seed)
        values = rng.uniform(-1, 1, size=30)
        f = make_field((30,), values)
        h = histogram(f, bins, (-1.0, 1.0))
        edges = h.bin_edges
        for k in range(bins):
            lo, hi = edges[k], edges[k + 1]
            if k == bins - 1:
                expected = int(((values >= lo) & (values <= hi)).sum())
            else:
                expected = int(((values >= lo) & (values < hi)).sum())
            assert h.counts[k] == expected


class TestStats:
    def test_constant(self):
        s = stats(constant_field((3, 3), 5.0))
        assert (s.min, s.max, s.mean, s.valid_count) == (5.0, 5.0, 5.0, 9)

    def test_hand_oracle_with_mask(self):
        f = make_field((4,), [1.0, 2.0, 3.0, 4.0], mask=[False, True, True, False])
        s = stats(f)
        assert (s.min, s.max, s.mean, s.valid_count) == (2.0, 3.0, 2.5, 2)

    def test_empty_markers(self):
        f = make_field((2,), [1.0, 2.0], mask=[False, False])
        s = stats(f)
        assert (s.min, s.max, s.mean, s.valid_count) == (None, None, None, 0)


class TestInvariantsBySmallBruteForce:
    def test_slice_matches_oracle_everywhere(self):
        rng = np.random.default_rng(23)
        for _ in range(20):
            f = random_field(rng)
            for axis in range(f.ndim):
                for index in range(f.dims[axis]):
                    got = slice_field(f, axis, index)
                    dims, values, mask = slice_oracle(
                        f.dims, f.values.tolist(), f.mask.tolist(), axis, index
                    )
                    assert got.dims == dims
                    assert got.values.tolist() == values
                    assert got.mask.tolist() == mask

    def test_storage_order_definition(self):
        # spot-check the documented flat layout against multi-index access
        f = make_field((3, 2, 2), np.arange(12.0))
        g = f.grid()
        for idx in all_indices((3, 2, 2)):
            i0, i1, i2 = idx
            assert g[i0, i1, i2] == i0 + 3 * (i1 + 2 * i2)
