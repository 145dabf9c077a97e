import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isacsim import Detection, Track, Tracker, range_rate_consistency
from isacsim.track import STATE_CANDIDATE, STATE_RETIRED, STATE_VALID, TrackPoint


def det(r, v, power=10.0, frame=0):
    return Detection(frame_index=frame, range_m=r, velocity_mps=v,
                     peak_power=power, bin=(0, 0), sinr_db=15.0)


def run_pattern(hits, r0=100.0, v=-5.0, dt=0.01, **tracker_kw):
    """Feed a single constant-velocity target through the tracker with the
    given per-frame hit/miss pattern; returns the tracker."""
    trk = Tracker(frame_duration_s=dt, **tracker_kw)
    for i, hit in enumerate(hits):
        dets = [det(r0 + v * i * dt, v, frame=i)] if hit else []
        trk.update(i, dets)
    return trk


def expected_states(hits, validation_hits=10, max_misses=12):
    """Independent simulation of the validation/retirement state machine.

    Returns a list of (created_frame, validated_frame_or_None,
    retired_frame_or_None) in creation order.
    """
    tracks = []
    current = None   # [created, validated, retired, streak, misses]
    for i, hit in enumerate(hits):
        if hit:
            if current is None:
                current = [i, None, None, 1, 0]
                tracks.append(current)
            else:
                current[3] += 1
                current[4] = 0
            if current[1] is None and current[3] >= validation_hits:
                current[1] = i
        elif current is not None:
            current[4] += 1
            current[3] = 0
            if current[4] > max_misses:
                current[2] = i
                current = None
    return [(t[0], t[1], t[2]) for t in tracks]


class TestValidation:
    def test_valid_after_ten_consecutive_frames(self):
        trk = run_pattern([True] * 10)
        assert len(trk.tracks) == 1
        t = trk.tracks[0]
        assert t.state == STATE_VALID
        assert t.validated_frame == 9   # detected in frames 0..9

    def test_not_valid_after_nine(self):
        trk = run_pattern([True] * 9)
        assert trk.tracks[0].state == STATE_CANDIDATE

    def test_miss_resets_the_streak(self):
        pattern = [True] * 9 + [False] + [True] * 9
        trk = run_pattern(pattern)
        assert trk.tracks[0].state == STATE_CANDIDATE
        trk2 = run_pattern(pattern + [True])
        assert trk2.tracks[0].state == STATE_VALID
        assert trk2.tracks[0].validated_frame == 19

    def test_validation_latency_summary(self):
        trk = run_pattern([False, False] + [True] * 10)
        t = trk.tracks[0]
        assert t.created_frame == 2
        assert t.validated_frame == 11


class TestRetirement:
    def test_survives_exactly_twelve_misses(self):
        # valid track, 12 misses, then re-detected: same id, still alive
        pattern = [True] * 10 + [False] * 12 + [True]
        trk = run_pattern(pattern)
        assert len(trk.tracks) == 1
        t = trk.tracks[0]
        assert t.state == STATE_VALID
        assert t.consecutive_misses == 0
        assert len(t.history) == 11

    def test_retires_on_thirteenth_miss(self):
        pattern = [True] * 10 + [False] * 13
        trk = run_pattern(pattern)
        t = trk.tracks[0]
        assert t.state == STATE_RETIRED
        assert t.retired_frame == 22
        # a later detection spawns a fresh track
        trk2 = run_pattern(pattern + [True])
        assert len(trk2.tracks) == 2
        assert trk2.tracks[1].track_id != trk2.tracks[0].track_id

    def test_beam_sweep_gap_is_bridged(self):
        # covered 5 frames per 300 ms sweep; two uncovered beams = 10 misses
        pattern = ([True] * 10            # validate first
                   + ([True] * 5 + [False] * 10) * 4)
        trk = run_pattern(pattern)
        live = [t for t in trk.tracks if t.state != STATE_RETIRED]
        assert len(trk.tracks) == 1 and len(live) == 1
        assert live[0].state == STATE_VALID


class TestProperties:
    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.booleans(), min_size=1, max_size=60))
    def test_state_machine_matches_reference(self, hits):
        trk = run_pattern(hits, keep_retired_min_hits=0)
        expected = expected_states(hits)
        got = [(t.created_frame, t.validated_frame, t.retired_frame)
               for t in trk.tracks]
        assert got == expected

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.booleans(), min_size=1, max_size=60))
    def test_never_retires_before_thirteenth_miss(self, hits):
        trk = run_pattern(hits)
        for t in trk.tracks:
            if t.retired_frame is not None:
                last_hit = t.history[-1].frame_index
                assert t.retired_frame - last_hit == 13

    def test_determinism(self):
        rng = np.random.default_rng(3)
        hits = list(rng.random(50) < 0.7)
        a = run_pattern(hits)
        b = run_pattern(hits)
        for ta, tb in zip(a.tracks, b.tracks):
            assert ta.track_id == tb.track_id
            assert [(p.frame_index, p.range_m) for p in ta.history] == \
                [(p.frame_index, p.range_m) for p in tb.history]


class TestAssociation:
    def test_no_double_association(self):
        trk = Tracker()
        trk.update(0, [det(100.0, -5.0), det(200.0, 3.0)])
        pairs = trk.update(1, [det(99.95, -5.0)])
        assert len(pairs) == 1
        fed = [t.track_id for t, _ in pairs]
        assert len(fed) == len(set(fed))
        assert len(trk.tracks) == 2

    def test_nearest_neighbour_prefers_smaller_residual(self):
        trk = Tracker()
        trk.update(0, [det(100.0, 0.0)])
        pairs = trk.update(1, [det(101.5, 0.0), det(100.1, 0.0)])
        # the closer detection feeds the track; the other spawns a candidate
        track0 = trk.tracks[0]
        assert track0.history[-1].range_m == pytest.approx(100.1)
        assert len(trk.tracks) == 2

    def test_gate_rejects_far_detections(self):
        trk = Tracker(gate_range_m=3.0, gate_velocity_mps=3.0)
        trk.update(0, [det(100.0, 0.0)])
        trk.update(1, [det(110.0, 0.0)])   # outside the range gate
        assert len(trk.tracks) == 2
        assert trk.tracks[0].consecutive_misses == 1

    def test_frames_must_increase(self):
        trk = Tracker()
        trk.update(5, [])
        with pytest.raises(ValueError):
            trk.update(5, [])


class TestRangeRateConsistency:
    def _track(self, slopes_v):
        t = Track(track_id=0, created_frame=0)
        r = 200.0
        for i, (dr, v) in enumerate(slopes_v):
            r += dr
            t.history.append(TrackPoint(i, r, v, 12.0))
        return t

    def test_consistent_track(self):
        rng = np.random.default_rng(0)
        pts = [(-0.05, -5.0 + float(rng.uniform(-0.1, 0.1))) for _ in range(10)]
        assert range_rate_consistency(self._track(pts), 10) is True

    def test_replica_alias_detected(self):
        # range follows the true target (-5 m/s) but the Doppler is offset
        # by one gap-frequency alias (+8.69 m/s)
        pts = [(-0.05, -5.0 + 8.6896) for _ in range(10)]
        assert range_rate_consistency(self._track(pts), 10) is False

    def test_hovering_track(self):
        pts = [(0.0, 0.0) for _ in range(10)]
        assert range_rate_consistency(self._track(pts), 10) is True

    def test_insufficient_history_is_indeterminate(self):
        pts = [(-0.05, -5.0) for _ in range(4)]
        assert range_rate_consistency(self._track(pts), 10) is None

    def test_tracker_retires_replica_tracks(self):
        trk = Tracker()
        r = 150.0
        for i in range(12):
            r -= 0.05   # true range rate -5 m/s
            trk.update(i, [det(r, -5.0 + 8.6896, frame=i)])
        t = trk.tracks[0]
        assert t.state == STATE_RETIRED
        assert t.replica
        # an honest track with the same geometry survives
        trk2 = Tracker()
        r = 150.0
        for i in range(12):
            r -= 0.05
            trk2.update(i, [det(r, -5.0, frame=i)])
        assert trk2.tracks[0].state == STATE_VALID
