"""Frame pooling, normalization, convex fusion, Gaussian smoothing, score CSVs."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from vadkit.fusion import (
    SCORE_COLUMNS,
    ScoreSeries,
    frame_max_pool,
    fuse,
    gaussian_kernel,
    gaussian_smooth,
    minmax_normalize,
    minmax_normalize_pooled,
    read_scores_csv,
    write_scores_csv,
)


def series(values, kind: str = "static") -> ScoreSeries:
    return ScoreSeries(video_id="v", values=np.asarray(values, dtype=np.float64), kind=kind)


def smooth_oracle(values: np.ndarray, sigma: float) -> np.ndarray:
    """Direct O(n*k) truncated-Gaussian convolution with boundary renormalization."""
    radius = math.ceil(3 * sigma)
    weights = [math.exp(-(i * i) / (2 * sigma * sigma)) for i in range(-radius, radius + 1)]
    out = np.empty_like(values)
    for pos in range(len(values)):
        acc = 0.0
        cov = 0.0
        for off, w in zip(range(-radius, radius + 1), weights):
            j = pos + off
            if 0 <= j < len(values):
                acc += w * values[j]
                cov += w
        out[pos] = acc / cov
    return out


unit_floats = st.floats(0.0, 1.0, allow_nan=False)


class TestFrameMaxPool:
    def test_single_object_passthrough(self):
        out = frame_max_pool(3, [(1, 0.7)])
        assert list(out.values) == [0.0, 0.7, 0.0]

    def test_max_over_objects(self):
        out = frame_max_pool(1, [(0, 0.2), (0, 0.9), (0, 0.5)])
        assert out.values[0] == 0.9

    def test_empty_frames_score_zero(self):
        out = frame_max_pool(4, [])
        assert np.array_equal(out.values, np.zeros(4))

    def test_out_of_range_frame_rejected(self):
        with pytest.raises(ValueError):
            frame_max_pool(2, [(2, 0.5)])

    @given(st.lists(st.tuples(st.integers(0, 9), unit_floats), max_size=12))
    @settings(max_examples=150)
    def test_monotone_in_object_scores(self, pairs):
        base = frame_max_pool(10, pairs)
        if not pairs:
            return
        frame, score = pairs[0]
        raised = [(frame, min(1.0, score + 0.5))] + pairs[1:]
        bumped = frame_max_pool(10, raised)
        assert (bumped.values >= base.values - 1e-15).all()

    @given(
        st.lists(st.tuples(st.integers(0, 9), unit_floats), max_size=12).flatmap(
            lambda pairs: st.tuples(st.just(pairs), st.permutations(pairs))
        )
    )
    @settings(max_examples=150)
    def test_permutation_invariant(self, pairs_and_perm):
        pairs, shuffled = pairs_and_perm
        a = frame_max_pool(10, pairs)
        b = frame_max_pool(10, list(shuffled))
        assert np.array_equal(a.values, b.values)


class TestMinmaxNormalize:
    def test_basic(self):
        out = minmax_normalize(series([0.0, 5.0, 10.0]))
        assert np.array_equal(out.values, [0.0, 0.5, 1.0])

    def test_constant_maps_to_zero(self):
        out = minmax_normalize(series([3.3, 3.3, 3.3]))
        assert np.array_equal(out.values, np.zeros(3))

    def test_shift_invariant(self):
        base = np.array([0.1, 0.9, 0.4, 0.7])
        a = minmax_normalize(series(base))
        b = minmax_normalize(series(base + 100.0))
        assert np.allclose(a.values, b.values, atol=1e-12)

    @given(hnp.arrays(np.float64, st.integers(2, 40),
                      elements=st.floats(-100, 100, allow_nan=False)))
    @settings(max_examples=150)
    def test_preserves_ranking(self, values):
        out = minmax_normalize(series(values)).values
        assert out.min() >= 0.0 and out.max() <= 1.0
        if values.max() > values.min():
            # strictly monotone transform: pairwise order is unchanged
            idx = np.argsort(values, kind="stable")
            assert (np.diff(out[idx]) >= 0).all()


class TestMinmaxNormalizePooled:
    def test_one_affine_map_across_series(self):
        a = series([0.0, 10.0])
        b = series([5.0, 20.0])
        out_a, out_b = minmax_normalize_pooled([a, b])
        # pooled range is [0, 20]
        assert np.allclose(out_a.values, [0.0, 0.5], atol=1e-15)
        assert np.allclose(out_b.values, [0.25, 1.0], atol=1e-15)

    def test_flat_series_keeps_global_level(self):
        flat = series([5.0, 5.0, 5.0])
        spread = series([0.0, 10.0])
        out_flat, _ = minmax_normalize_pooled([flat, spread])
        # per-series normalization would zero this out; pooled keeps its rank
        assert np.allclose(out_flat.values, [0.5, 0.5, 0.5], atol=1e-15)

    def test_globally_constant_maps_to_zero(self):
        outs = minmax_normalize_pooled([series([2.0, 2.0]), series([2.0])])
        for out in outs:
            assert np.array_equal(out.values, np.zeros_like(out.values))

    def test_empty_series_passes_through(self):
        out_empty, out_full = minmax_normalize_pooled([series([]), series([1.0, 3.0])])
        assert out_empty.values.size == 0
        assert np.array_equal(out_full.values, [0.0, 1.0])


class TestFuse:
    def test_endpoints(self):
        s = series([0.1, 0.8], kind="static")
        t = series([0.5, 0.2], kind="temporal")
        assert np.array_equal(fuse(s, t, weight=1.0).values, s.values)
        assert np.array_equal(fuse(s, t, weight=0.0).values, t.values)

    def test_even_blend(self):
        s = series([0.2], kind="static")
        t = series([0.8], kind="temporal")
        assert fuse(s, t, weight=0.5).values[0] == pytest.approx(0.5, abs=1e-15)

    def test_rejects_bad_weight_and_length(self):
        with pytest.raises(ValueError):
            fuse(series([0.1]), series([0.2]), weight=1.5)
        with pytest.raises(ValueError):
            fuse(series([0.1, 0.2]), series([0.2]))

    @given(st.lists(unit_floats, min_size=1, max_size=30), unit_floats)
    @settings(max_examples=150)
    def test_output_in_unit_range(self, values, weight):
        s = series(values)
        t = series(list(reversed(values)))
        fused = fuse(s, t, weight=weight)
        assert (fused.values >= 0.0).all() and (fused.values <= 1.0).all()
        smoothed = gaussian_smooth(fused, sigma=2.0)
        assert (smoothed.values >= -1e-12).all() and (smoothed.values <= 1.0 + 1e-12).all()

    @given(st.lists(unit_floats, min_size=1, max_size=10))
    @settings(max_examples=150)
    def test_monotone_in_each_component(self, values):
        s = series(values)
        t = series([0.5] * len(values))
        low = fuse(s, t, weight=0.5).values
        s_up = series([min(1.0, v + 0.25) for v in values])
        high = fuse(s_up, t, weight=0.5).values
        assert (high >= low - 1e-15).all()


class TestGaussianSmooth:
    def test_kernel_shape(self):
        k = gaussian_kernel(1.0)
        assert k.size == 7  # radius ceil(3*1) on each side
        assert np.array_equal(k, k[::-1])
        assert k[3] == k.max() == 1.0

    def test_constant_unchanged(self):
        out = gaussian_smooth(series([0.4] * 12), sigma=2.0)
        assert np.allclose(out.values, 0.4, atol=1e-12)

    def test_impulse_center_value(self):
        values = np.zeros(21)
        values[10] = 1.0
        out = gaussian_smooth(series(values), sigma=1.0)
        # truncated normalized kernel at the center: g(0) / sum(g)
        weights = [math.exp(-(i * i) / 2.0) for i in range(-3, 4)]
        assert out.values[10] == pytest.approx(1.0 / sum(weights), abs=1e-12)
        assert out.values[10] == pytest.approx(0.3990502796524549, abs=1e-12)

    def test_matches_direct_convolution_oracle(self):
        rng = np.random.default_rng(20)
        for _case in range(100):
            n = int(rng.integers(1, 50))
            sigma = float(rng.uniform(0.3, 4.0))
            values = rng.normal(0, 1, n)
            out = gaussian_smooth(series(values), sigma=sigma)
            assert np.max(np.abs(out.values - smooth_oracle(values, sigma))) <= 1e-12

    def test_rejects_bad_sigma(self):
        with pytest.raises(ValueError):
            gaussian_smooth(series([1.0]), sigma=0.0)

    @given(hnp.arrays(np.float64, st.integers(1, 40),
                      elements=st.floats(-50, 50, allow_nan=False)),
           st.sampled_from([0.5, 1.0, 2.0, 3.0]))
    @settings(max_examples=150)
    def test_output_within_input_range(self, values, sigma):
        out = gaussian_smooth(series(values), sigma=sigma).values
        assert out.min() >= values.min() - 1e-10
        assert out.max() <= values.max() + 1e-10


class TestScoresCsv:
    def test_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(21)
        cols = {k: series(rng.uniform(0, 1, 5), kind=k)
                for k in ("static", "temporal", "fused", "final")}
        path = tmp_path / "v.csv"
        write_scores_csv(path, cols["static"], cols["temporal"], cols["fused"], cols["final"])
        loaded = read_scores_csv(path)
        assert list(loaded) == list(SCORE_COLUMNS)
        assert np.array_equal(loaded["frame"], np.arange(5, dtype=np.float64))
        for name in ("static", "temporal", "fused", "final"):
            # repr round trip keeps every float64 bit
            assert np.array_equal(loaded[name], cols[name].values)

    def test_write_is_byte_stable(self, tmp_path):
        rng = np.random.default_rng(22)
        cols = [series(rng.uniform(0, 1, 4), kind=k)
                for k in ("static", "temporal", "fused", "final")]
        write_scores_csv(tmp_path / "a.csv", *cols)
        write_scores_csv(tmp_path / "b.csv", *cols)
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_header_enforced(self, tmp_path):
        path = tmp_path / "v.csv"
        path.write_text("frame,wrong,temporal,fused,final\n0,0,0,0,0\n")
        with pytest.raises(ValueError, match="unexpected header"):
            read_scores_csv(path)
