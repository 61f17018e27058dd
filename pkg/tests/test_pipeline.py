import math
import random
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from snn_rpn.errors import ConfigError, StreamOrderError
from snn_rpn.neuron import NeuronParams
from snn_rpn.pipeline import (
    ConvGeometry,
    ConvLayer,
    DvsEvent,
    PipelineConfig,
    ProposalBox,
    RefractoryLayer,
    SensorGeometry,
    boxes_touch,
    cluster_frame,
    frame_of,
    frame_start,
    run_pipeline,
)

from oracles import (
    EulerParams,
    enumerate_covering_windows,
    euler_membrane_run,
    euler_window_run,
    summed_synapses,
    unionfind_cluster,
)

SENSOR = SensorGeometry(180, 240)


def make_conv_layer(v_th=1.3, tau_g=5_000.0, w_ff=1.0, dv_scale=0.1,
                    lateral=False, w_lat=0.5, window=16, stride=12):
    geometry = ConvGeometry(SENSOR, window, stride)
    params = NeuronParams(20_000.0, 0.0, v_th, 0.0, 0)
    return ConvLayer(geometry, params, tau_g, w_ff, dv_scale, lateral, w_lat)


class TestConvGeometry:
    def test_paper_scale_grid_dimensions(self):
        g = ConvGeometry(SENSOR, 16, 12)
        assert (g.rows, g.cols) == (15, 20)

    def test_single_window_for_interior_pixel(self):
        g = ConvGeometry(SENSOR, 16, 12)
        assert g.windows_covering(20, 30) == [(2, 1)]
        assert g.window_origin(2, 1) == (24, 12)

    def test_four_windows_in_overlap_zone(self):
        g = ConvGeometry(SENSOR, 16, 12)
        covering = g.windows_covering(13, 14)
        assert covering == [(0, 0), (0, 1), (1, 0), (1, 1)]
        origins = [g.window_origin(i, j) for i, j in covering]
        assert origins == [(0, 0), (0, 12), (12, 0), (12, 12)]

    def test_zero_overlap_partitions(self):
        g = ConvGeometry(SensorGeometry(64, 64), 16, 16)
        for x, y in [(0, 0), (15, 15), (16, 16), (63, 63), (31, 40)]:
            assert len(g.windows_covering(x, y)) == 1

    def test_out_of_bounds_pixel_rejected(self):
        g = ConvGeometry(SENSOR, 16, 12)
        with pytest.raises(ValueError):
            g.windows_covering(240, 0)

    def test_stride_below_half_window_rejected(self):
        with pytest.raises(ConfigError):
            ConvGeometry(SENSOR, 16, 7)

    def test_stride_above_window_rejected(self):
        with pytest.raises(ConfigError):
            ConvGeometry(SENSOR, 16, 17)

    def test_window_larger_than_sensor_rejected(self):
        with pytest.raises(ConfigError):
            ConvGeometry(SensorGeometry(10, 10), 16, 12)

    def test_overcovered_clamp_rejected(self):
        # 180 = 22*8 + 4: clamped row origin lands 4 px after the last
        # regular one, giving triple row coverage next to double column
        # coverage.
        with pytest.raises(ConfigError):
            ConvGeometry(SENSOR, 16, 8)

    @given(
        height=st.integers(8, 60),
        width=st.integers(8, 60),
        window=st.integers(2, 24),
        data=st.data(),
    )
    @settings(max_examples=120)
    def test_covering_matches_exhaustive_enumeration(self, height, width, window, data):
        window = min(window, height, width)
        stride = data.draw(st.integers((window + 1) // 2, window))
        try:
            g = ConvGeometry(SensorGeometry(height, width), window, stride)
        except ConfigError:
            return
        x = data.draw(st.integers(0, width - 1))
        y = data.draw(st.integers(0, height - 1))
        got = set(g.windows_covering(x, y))
        assert got == enumerate_covering_windows(x, y, height, width, window, stride)
        assert 1 <= len(got) <= 4


class TestRefractoryLayer:
    def make_layer(self, t_ref=30_000, v_th=1.0, w_in=1.0):
        params = NeuronParams(10_000.0, 0.0, v_th, 0.0, t_ref)
        return RefractoryLayer(SENSOR, params, w_in)

    def test_first_event_spikes_when_weight_crosses_threshold(self):
        layer = self.make_layer()
        assert layer.step(DvsEvent(5, 3, 4)) == (3, 4, 5)

    def test_polarity_ignored(self):
        layer = self.make_layer()
        assert layer.step(DvsEvent(5, 3, 4, 0)) == (3, 4, 5)

    def test_out_of_bounds_event_rejected(self):
        layer = self.make_layer()
        with pytest.raises(ValueError):
            layer.step(DvsEvent(0, 240, 0))

    def test_one_spike_per_refractory_window(self):
        # 1000 events 1 ms apart against a 50 ms dead time: 20 spikes
        t_ref = 50_000
        layer = self.make_layer(t_ref=t_ref)
        spikes = []
        for k in range(1000):
            out = layer.step(DvsEvent(k * 1_000, 7, 9))
            if out is not None:
                spikes.append(out[2])
        assert len(spikes) == 20
        assert spikes == [k * t_ref for k in range(20)]
        # dense-time oracle over the same drive schedule
        events = [(k * 1_000, 0, 1.0) for k in range(1000)]
        euler = EulerParams(10_000.0, 0.0, 1.0, 0.0, t_ref)
        dense = euler_membrane_run(events, 1, euler, 999_000)
        assert dense[0] == spikes

    def test_empty_stream_leaves_states_untouched(self):
        layer = self.make_layer()
        assert all(s.v == 0.0 and s.t_last_spike is None for s in layer.states)


class TestConvLayer:
    def test_single_spike_below_threshold_emits_nothing(self):
        layer = make_conv_layer(v_th=1.3)
        assert layer.step((0, 0, 1_000)) == []

    def test_burst_crosses_on_final_spike(self):
        # five spikes 100 us apart into one window; threshold 1.3 is crossed
        # on the fifth (cumulative conductance-driven kicks ~1.45)
        layer = make_conv_layer(v_th=1.3)
        times = [1_000 + 100 * k for k in range(5)]
        boxes = []
        for k, t in enumerate(times):
            boxes.extend(layer.step((k, 0, t)))
        assert boxes == [ProposalBox(0, 0, 16, 16, times[-1])]
        spikes = euler_window_run(
            [(t, 0) for t in times],
            1,
            EulerParams(20_000.0, 0.0, 1.3, 0.0, 0),
            5_000.0,
            1.0,
            0.1,
            2_000,
        )
        assert spikes[0] == [times[-1]]

    def test_four_covered_pixel_can_fire_four_windows(self):
        # load each of the four windows around pixel (13, 14) to one drive
        # below threshold through pixels they cover exclusively
        layer = make_conv_layer(v_th=1.3)
        exclusive = {(0, 0): (0, 0), (0, 1): (16, 0), (1, 0): (0, 16), (1, 1): (16, 16)}
        schedule = []
        for n, (win, (px, py)) in enumerate(sorted(exclusive.items())):
            for k in range(4):
                schedule.append((1_000 + 100 * k + 10 * n, px, py, win))
        schedule.sort()
        for t, px, py, _ in schedule:
            assert layer.step((px, py, t)) == []
        boxes = layer.step((13, 14, 1_500))
        assert [(b.x0, b.y0, b.x1, b.y1) for b in boxes] == [
            (0, 0, 16, 16),
            (12, 0, 28, 16),
            (0, 12, 16, 28),
            (12, 12, 28, 28),
        ]
        assert all(b.t == 1_500 for b in boxes)
        # dense oracle: same drive schedule per window plus the shared spike
        win_index = {w: k for k, w in enumerate(sorted(exclusive))}
        events = [(t, win_index[w]) for t, _, _, w in schedule]
        events += [(1_500, k) for k in range(4)]
        events.sort()
        spikes = euler_window_run(
            events, 4, EulerParams(20_000.0, 0.0, 1.3, 0.0, 0), 5_000.0, 1.0, 0.1, 2_000
        )
        assert all(s == [1_500] for s in spikes)

    def test_emitted_boxes_are_window_sized_and_grid_aligned(self):
        layer = make_conv_layer(v_th=0.05)
        geometry = layer.geometry
        rng = random.Random(3)
        for k in range(200):
            x, y = rng.randrange(240), rng.randrange(180)
            for b in layer.step((x, y, k * 50)):
                assert (b.x1 - b.x0, b.y1 - b.y0) == (16, 16)
                assert b.y0 in geometry.row_origins
                assert b.x0 in geometry.col_origins

    def test_lateral_corner_reaches_two_neighbors(self):
        layer = make_conv_layer(lateral=True, w_lat=0.7)
        layer.apply_lateral(0, 0, 1_000)
        cols = layer.geometry.cols
        touched = [k for k, acc in enumerate(layer.conductances) if acc.g_sum > 0]
        assert touched == [1, cols]
        assert all(layer.conductances[k].g_sum == 0.7 for k in touched)

    def test_lateral_disabled_leaves_neighbors_untouched(self):
        layer = make_conv_layer(v_th=0.05, lateral=False)
        layer.step((0, 0, 1_000))  # fires window (0, 0)
        cols = layer.geometry.cols
        assert layer.conductances[1].g_sum == 0.0
        assert layer.conductances[cols].g_sum == 0.0

    def test_lateral_double_fire_accumulates_with_decay(self):
        layer = make_conv_layer(lateral=True, w_lat=0.6, tau_g=5_000.0)
        dt = 2_500
        layer.apply_lateral(5, 5, 10_000)
        layer.apply_lateral(5, 5, 10_000 + dt)
        cols = layer.geometry.cols
        expected = 0.6 * math.exp(-dt / 5_000.0) + 0.6
        for k in (4 * cols + 5, 6 * cols + 5, 5 * cols + 4, 5 * cols + 6):
            assert layer.conductances[k].g_sum == pytest.approx(expected, rel=1e-12)
            assert layer.conductances[k].g_sum == pytest.approx(
                summed_synapses([(10_000, 0.6), (10_000 + dt, 0.6)], 5_000.0, 10_000 + dt),
                rel=1e-9,
            )

    def test_nonzero_refractory_rejected(self):
        geometry = ConvGeometry(SENSOR, 16, 12)
        params = NeuronParams(20_000.0, 0.0, 1.0, 0.0, 10)
        with pytest.raises(ConfigError):
            ConvLayer(geometry, params, 5_000.0, 1.0, 0.1)


def box(x0, y0, x1, y1, t=0):
    return ProposalBox(x0, y0, x1, y1, t)


class TestClusterFrame:
    def test_empty_input(self):
        assert cluster_frame([]) == []

    def test_single_box_returned_unchanged(self):
        b = box(3, 4, 19, 20, 7)
        assert cluster_frame([b]) == [b]

    def test_overlapping_pair_merges_to_bounding_box(self):
        merged = cluster_frame([box(0, 0, 16, 16), box(12, 0, 28, 16)])
        assert merged == [box(0, 0, 28, 16)]

    def test_distant_boxes_stay_apart(self):
        a, b = box(0, 0, 16, 16), box(56, 0, 72, 16)
        assert cluster_frame([a, b]) == [a, b]

    def test_corner_contact_merges(self):
        merged = cluster_frame([box(0, 0, 8, 8), box(8, 8, 16, 16)])
        assert merged == [box(0, 0, 16, 16)]

    def test_merged_timestamp_is_latest_member(self):
        merged = cluster_frame([box(0, 0, 8, 8, 5), box(4, 0, 12, 8, 9)])
        assert merged[0].t == 9

    @staticmethod
    def random_boxes(rng, n):
        out = []
        for _ in range(n):
            x0 = rng.randrange(0, 60)
            y0 = rng.randrange(0, 60)
            out.append(
                box(x0, y0, x0 + rng.randrange(1, 20), y0 + rng.randrange(1, 20),
                    rng.randrange(100))
            )
        return out

    def test_matches_unionfind_oracle_on_random_multisets(self):
        rng = random.Random(1234)
        for _ in range(200):
            boxes = self.random_boxes(rng, rng.randrange(0, 12))
            assert cluster_frame(boxes) == unionfind_cluster(boxes, ProposalBox)

    def test_idempotent_and_outputs_never_touch(self):
        rng = random.Random(99)
        for _ in range(100):
            boxes = self.random_boxes(rng, rng.randrange(0, 10))
            merged = cluster_frame(boxes)
            assert cluster_frame(merged) == merged
            for i, a in enumerate(merged):
                for b in merged[i + 1 :]:
                    assert not boxes_touch(a, b)

    def test_every_input_contained_in_exactly_one_output(self):
        rng = random.Random(5)
        for _ in range(100):
            boxes = self.random_boxes(rng, rng.randrange(1, 10))
            merged = cluster_frame(boxes)
            for b in boxes:
                holders = [
                    m for m in merged
                    if m.x0 <= b.x0 and m.y0 <= b.y0 and b.x1 <= m.x1 and b.y1 <= m.y1
                ]
                assert len(holders) == 1
            # each output is the bounding box of the inputs it contains
            for m in merged:
                inside = [
                    b for b in boxes
                    if m.x0 <= b.x0 and m.y0 <= b.y0 and b.x1 <= m.x1 and b.y1 <= m.y1
                ]
                assert m.x0 == min(b.x0 for b in inside)
                assert m.y0 == min(b.y0 for b in inside)
                assert m.x1 == max(b.x1 for b in inside)
                assert m.y1 == max(b.y1 for b in inside)


class TestFrameBinning:
    @given(t=st.integers(0, 10**9), fps=st.integers(1, 240))
    def test_frame_of_consistent_with_boundaries(self, t, fps):
        f = frame_of(t, fps)
        assert frame_start(f, fps) <= t < frame_start(f + 1, fps)

    def test_thirty_fps_boundaries(self):
        assert frame_of(33_333, 30) == 0
        assert frame_of(33_334, 30) == 1
        assert frame_start(1, 30) == 33_334


class TestRunPipeline:
    def test_empty_stream_with_duration_yields_empty_frames(self):
        config = PipelineConfig(duration_s=1.0)
        frames, counters = run_pipeline([], config)
        assert len(frames) == 30
        assert all(f.boxes == [] for f in frames)
        assert counters.k_inp == 0
        assert counters.proposals_per_frame == [0] * 30

    def test_unordered_stream_names_offending_index(self):
        config = PipelineConfig()
        events = [DvsEvent(10, 0, 0), DvsEvent(20, 1, 0), DvsEvent(15, 2, 0)]
        with pytest.raises(StreamOrderError) as err:
            run_pipeline(events, config)
        assert err.value.index == 2

    def test_out_of_bounds_event_rejected(self):
        with pytest.raises(ValueError):
            run_pipeline([DvsEvent(0, 9_999, 0)], PipelineConfig())

    def test_survivor_count_bounded_by_input(self):
        rng = random.Random(8)
        events = sorted(
            (DvsEvent(rng.randrange(200_000), rng.randrange(240), rng.randrange(180))
             for _ in range(2_000)),
            key=lambda e: e.t,
        )
        _, counters = run_pipeline(events, PipelineConfig())
        assert counters.k_ref <= counters.k_inp
        assert counters.k_inp == 2_000

    def test_absurd_threshold_emits_nothing(self):
        rng = random.Random(8)
        events = sorted(
            (DvsEvent(rng.randrange(200_000), rng.randrange(240), rng.randrange(180))
             for _ in range(2_000)),
            key=lambda e: e.t,
        )
        config = PipelineConfig(conv_v_th=1e12)
        frames, counters = run_pipeline(events, config)
        assert counters.k_conv == 0
        assert all(f.boxes == [] for f in frames)

    def test_deterministic_rerun(self):
        rng = random.Random(21)
        events = sorted(
            (DvsEvent(rng.randrange(400_000), rng.randrange(240), rng.randrange(180))
             for _ in range(3_000)),
            key=lambda e: e.t,
        )
        config = PipelineConfig(conv_v_th=0.5)
        first = run_pipeline(events, config)
        second = run_pipeline(events, config)
        assert first == second

    def test_counter_tallies_follow_accounting(self):
        rng = random.Random(13)
        events = sorted(
            (DvsEvent(rng.randrange(300_000), rng.randrange(240), rng.randrange(180))
             for _ in range(2_500)),
            key=lambda e: e.t,
        )
        config = PipelineConfig(conv_v_th=0.8)
        frames, counters = run_pipeline(events, config)
        assert counters.ops_refractory == 5 * counters.k_inp
        assert counters.ops_conv == (24 * 16 * 16 + 16) * counters.k_ref
        assert counters.ops_cluster == sum(
            r * (r - 1) for r in counters.proposals_per_frame
        )
        assert counters.k_conv == sum(counters.proposals_per_frame)
        assert len(frames) == len(counters.proposals_per_frame)
