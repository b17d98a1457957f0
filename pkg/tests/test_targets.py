"""Label assignment checked against closed forms and a brute-force scan."""

import math

import numpy as np
import pytest

from avtad.errors import ContractError
from avtad.targets import (Segment, assign_positives, boundary_labels,
                           centricity_label, default_ranges, one_hot,
                           regression_targets)


class TestSegment:
    def test_rejects_inverted(self):
        with pytest.raises(ContractError):
            Segment(5.0, 3.0, 0, 0)

    def test_rejects_negative_start(self):
        with pytest.raises(ContractError):
            Segment(-1.0, 3.0, 0, 0)

    def test_duration_centre(self):
        g = Segment(2.0, 6.0, 1, 2)
        assert g.duration == 4.0 and g.centre == 4.0


class TestCentricityLabel:
    def test_centre_is_exactly_one(self):
        g = Segment(2.0, 6.0, 0, 0)
        assert centricity_label(4.0, g) == 1.0

    def test_boundary_closed_form(self):
        g = Segment(2.0, 6.0, 0, 0)
        expect = math.exp(-1.0 / (2.0 * 1.7 ** 2))
        assert centricity_label(2.0, g) == pytest.approx(expect, abs=1e-12)
        assert centricity_label(6.0, g) == pytest.approx(expect, abs=1e-12)
        assert abs(expect - 0.8411) < 1e-3

    def test_symmetry_and_monotonicity_sweep(self):
        g = Segment(10.0, 30.0, 0, 0)
        deltas = np.linspace(0.0, 10.0, 1000)
        left = np.array([centricity_label(g.centre - d, g) for d in deltas])
        right = np.array([centricity_label(g.centre + d, g) for d in deltas])
        np.testing.assert_allclose(left, right, atol=1e-12)
        assert np.all(np.diff(right) < 0.0)  # strictly decreasing from centre

    def test_duration_invariance(self):
        # same relative position -> same label, regardless of duration
        short, long = Segment(0.0, 2.0, 0, 0), Segment(0.0, 20.0, 0, 0)
        assert centricity_label(0.5, short) == pytest.approx(
            centricity_label(5.0, long), abs=1e-12)

    def test_outside_segment_rejected(self):
        with pytest.raises(ContractError):
            centricity_label(1.0, Segment(2.0, 6.0, 0, 0))

    def test_bad_sigma_rejected(self):
        with pytest.raises(ContractError):
            centricity_label(3.0, Segment(2.0, 6.0, 0, 0), sigma=0.0)

    def test_labels_bounded_below_by_boundary_value(self):
        g = Segment(3.0, 11.0, 0, 0)
        floor = math.exp(-1.0 / (2.0 * 1.7 ** 2))
        for t in np.linspace(3.0, 11.0, 101):
            assert floor - 1e-12 <= centricity_label(t, g) <= 1.0


class TestBoundaryLabels:
    def test_peaks_at_boundaries(self):
        g = Segment(2.0, 6.0, 0, 0)
        s_at_start, e_at_start = boundary_labels(2.0, g)
        assert s_at_start == 1.0
        s_at_end, e_at_end = boundary_labels(6.0, g)
        assert e_at_end == 1.0
        # the opposite boundary is a full segment-length away: d = 2
        far = math.exp(-4.0 / (2.0 * 1.7 ** 2))
        assert e_at_start == pytest.approx(far, abs=1e-12)
        assert s_at_end == pytest.approx(far, abs=1e-12)

    def test_centre_matches_centricity_boundary_value(self):
        g = Segment(2.0, 6.0, 0, 0)
        s, e = boundary_labels(4.0, g)
        assert s == e == pytest.approx(centricity_label(2.0, g), abs=1e-12)


class TestRegressionTargets:
    def test_at_start(self):
        g = Segment(2.0, 6.0, 0, 0)
        assert regression_targets(2.0, g, 1.0) == (0.0, 4.0)

    def test_at_centre_with_stride(self):
        g = Segment(2.0, 6.0, 0, 0)
        assert regression_targets(4.0, g, 1.0) == (2.0, 2.0)
        assert regression_targets(4.0, g, 2.0) == (1.0, 1.0)

    def test_round_trip(self):
        g = Segment(3.25, 9.5, 0, 0)
        for t in (3.25, 4.0, 7.75, 9.5):
            os_, oe_ = regression_targets(t, g, 0.5)
            assert t - os_ * 0.5 == pytest.approx(g.start, abs=1e-12)
            assert t + oe_ * 0.5 == pytest.approx(g.end, abs=1e-12)


class TestDefaultRanges:
    def test_six_level_ladder(self):
        assert default_ranges(6) == [(0.0, 4.0), (4.0, 8.0), (8.0, 16.0),
                                     (16.0, 32.0), (32.0, 64.0), (64.0, math.inf)]

    def test_single_level_covers_everything(self):
        assert default_ranges(1) == [(0.0, math.inf)]

    def test_contiguous(self):
        ranges = default_ranges(5)
        for (_, hi), (lo, _) in zip(ranges, ranges[1:]):
            assert hi == lo


class TestAssignPositives:
    def test_no_segments_all_negative(self):
        tt = assign_positives([], [(16, 1.0), (8, 2.0)])
        assert tt.num_positives == 0
        for lv in tt.levels:
            assert not lv.is_positive.any()
            assert np.all(lv.matched == -1)
            assert np.all(lv.centricity == 0.0)

    def test_single_segment_single_level(self):
        # one segment [2, 6] s, stride 1 s, max offsets within [0, 4]
        tt = assign_positives([Segment(2.0, 6.0, 1, 2)], [(10, 1.0)],
                              ranges=[(0.0, 4.0)])
        lv = tt.levels[0]
        np.testing.assert_array_equal(np.nonzero(lv.is_positive)[0], [2, 3, 4, 5, 6])
        assert np.all(lv.verb[lv.is_positive] == 1)
        assert np.all(lv.noun[lv.is_positive] == 2)
        assert lv.centricity[4] == 1.0
        np.testing.assert_array_equal(lv.offsets[4], [2.0, 2.0])

    def test_long_segment_lands_on_coarse_level(self):
        # duration 20 s, base stride 1 s: max offset >= 10 everywhere,
        # so the [0,4] level stays empty and the [4,inf) level matches
        tt = assign_positives([Segment(0.0, 20.0, 0, 0)],
                              [(24, 1.0), (12, 2.0)],
                              ranges=[(0.0, 4.0), (4.0, math.inf)])
        assert not tt.levels[0].is_positive.any()
        assert tt.levels[1].is_positive.any()

    def test_nested_inner_segment_wins(self):
        inner, outer = Segment(4.0, 6.0, 1, 1), Segment(0.0, 10.0, 2, 2)
        tt = assign_positives([outer, inner], [(11, 1.0)],
                              ranges=[(0.0, math.inf)])
        lv = tt.levels[0]
        assert lv.matched[5] == 1  # inner
        assert lv.verb[5] == 1
        assert lv.matched[2] == 0  # only outer covers t=2

    def test_equal_duration_tie_earlier_start_wins(self):
        a, b = Segment(0.0, 4.0, 1, 1), Segment(2.0, 6.0, 2, 2)
        tt = assign_positives([b, a], [(7, 1.0)], ranges=[(0.0, math.inf)])
        lv = tt.levels[0]
        # t=2..4 covered by both, same duration -> earlier start (a)
        for t in (2, 3, 4):
            assert lv.verb[t] == 1

    def test_positive_invariants(self):
        segs = [Segment(1.0, 5.0, 0, 1), Segment(8.0, 20.0, 1, 0)]
        tt = assign_positives(segs, [(32, 1.0), (16, 2.0), (8, 4.0)])
        for lv in tt.levels:
            pos = lv.is_positive
            assert np.all(lv.matched[pos] >= 0)
            assert np.all(lv.matched[~pos] == -1)
            assert np.all(lv.centricity[pos] > 0.0)
            assert np.all(lv.centricity[~pos] == 0.0)
            assert np.all(lv.offsets[pos] >= 0.0)
            assert np.all(lv.offsets[~pos] == 0.0)

    def test_ranges_length_mismatch_rejected(self):
        with pytest.raises(ContractError):
            assign_positives([], [(8, 1.0)], ranges=[(0, 4), (4, 8)])

    def test_brute_force_oracle_equivalence(self):
        rng = np.random.default_rng(42)
        for _ in range(25):
            t0 = int(rng.integers(8, 65))
            n_levels = int(rng.integers(1, 4))
            base = float(rng.choice([0.5, 1.0]))
            specs = [((t0 + (1 << lv) - 1) >> lv, base * 2 ** lv)
                     for lv in range(n_levels)]
            horizon = t0 * base
            segs = []
            for _ in range(int(rng.integers(0, 6))):
                s = rng.uniform(0.0, horizon * 0.8)
                e = s + rng.uniform(0.3, horizon * 0.5)
                segs.append(Segment(float(s), float(e),
                                    int(rng.integers(0, 3)), int(rng.integers(0, 3))))
            ranges = default_ranges(n_levels)
            tt = assign_positives(segs, specs, ranges=ranges)
            # literal restatement of the matching rule, scanned longhand
            for li, ((length, stride), (lo, hi)) in enumerate(zip(specs, ranges)):
                for t in range(length):
                    x = t * stride
                    eligible = []
                    for gi, g in enumerate(segs):
                        if g.start <= x <= g.end:
                            m = max(x - g.start, g.end - x) / base
                            if lo <= m <= hi:
                                eligible.append((g.duration, g.start, gi))
                    want = min(eligible)[2] if eligible else -1
                    assert tt.levels[li].matched[t] == want


class TestOneHot:
    def test_basic(self):
        out = one_hot(np.array([0, 2, -1]), 3)
        np.testing.assert_array_equal(out, [[1, 0, 0], [0, 0, 1], [0, 0, 0]])

    def test_out_of_range_rejected(self):
        with pytest.raises(ContractError):
            one_hot(np.array([3]), 3)
