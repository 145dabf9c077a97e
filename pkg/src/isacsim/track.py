"""Frame-to-frame association and target validation/retirement.

A detected peak becomes a valid target after 10 consecutive frames of
gated, consistent movement; a track missing for more than 12 consecutive
frames is retired.  Those constants bridge a 100 ms beam-sweep gap (10
frames) with margin.  Tracks whose measured velocity disagrees with the
observed range rate are retired as probable TDD replicas.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

STATE_CANDIDATE = "candidate"
STATE_VALID = "valid"
STATE_RETIRED = "retired"


@dataclass
class TrackPoint:
    frame_index: int
    range_m: float
    velocity_mps: float
    sinr_db: float | None


@dataclass
class Track:
    track_id: int
    created_frame: int
    state: str = STATE_CANDIDATE
    history: list = field(default_factory=list)   # TrackPoint per associated frame
    consecutive_misses: int = 0
    consecutive_hits: int = 0
    validated_frame: int | None = None
    retired_frame: int | None = None
    replica: bool = False   # retired by the range-rate consistency check

    @property
    def last(self) -> TrackPoint:
        return self.history[-1]

    def predict_range(self, frame_index: int, frame_duration_s: float) -> float:
        """Constant-velocity extrapolation of the last measured range."""
        dt = (frame_index - self.last.frame_index) * frame_duration_s
        return self.last.range_m + self.last.velocity_mps * dt


def range_rate_consistency(track: Track, window: int = 10,
                           threshold_mps: float = 2.0,
                           frame_duration_s: float = 0.01) -> bool | None:
    """Does the track's range history move at its measured velocity?

    Least-squares slope of range vs time over the last ``window`` points
    compared against the mean measured velocity; a disagreement beyond
    ``threshold_mps`` marks the track as a probable TDD replica (its
    Doppler is offset by a gap-frequency alias while the range still
    follows the true target).  Returns None with insufficient history.
    """
    if len(track.history) < window:
        return None
    pts = track.history[-window:]
    t = np.array([p.frame_index for p in pts], dtype=float) * frame_duration_s
    r = np.array([p.range_m for p in pts])
    v = np.array([p.velocity_mps for p in pts])
    t = t - t.mean()
    slope = float(t @ (r - r.mean()) / (t @ t))
    return bool(abs(slope - v.mean()) < threshold_mps)


class Tracker:
    """Nearest-neighbour single-hypothesis tracker over (range, velocity).

    Deterministic: association ties break on the smaller range residual,
    then the lower track id.  Feed frames strictly in order; detections
    must already be replica-filtered.
    """

    def __init__(self, frame_duration_s: float = 0.01,
                 gate_range_m: float = 3.0,
                 gate_velocity_mps: float = 3.0,
                 validation_hits: int = 10,
                 max_misses: int = 12,
                 consistency_window: int = 10,
                 consistency_threshold_mps: float = 2.0,
                 reject_inconsistent: bool = True,
                 keep_retired_min_hits: int = 1):
        self.frame_duration_s = frame_duration_s
        self.gate_range_m = gate_range_m
        self.gate_velocity_mps = gate_velocity_mps
        self.validation_hits = validation_hits
        self.max_misses = max_misses
        self.consistency_window = consistency_window
        self.consistency_threshold_mps = consistency_threshold_mps
        self.reject_inconsistent = reject_inconsistent
        # retired tracks with fewer lifetime hits than this are dropped
        # entirely (keeps a noisy CFAR from accumulating one-hit wonders)
        self.keep_retired_min_hits = keep_retired_min_hits
        self.tracks: list[Track] = []
        self._active: list[Track] = []
        self._next_id = 0
        self._last_frame: int | None = None

    @property
    def active_tracks(self) -> list:
        return list(self._active)

    @property
    def valid_tracks(self) -> list:
        return [t for t in self.tracks if t.state == STATE_VALID]

    def _retire(self, trk: Track, frame_index: int, replica: bool = False) -> None:
        trk.state = STATE_RETIRED
        trk.retired_frame = frame_index
        trk.replica = replica

    def _register(self, trk: Track) -> None:
        # tracks below the keep threshold live only in the active list;
        # they enter the permanent record once they have enough hits
        if len(trk.history) == max(self.keep_retired_min_hits, 1):
            self.tracks.append(trk)

    def update(self, frame_index: int, detections: list) -> list:
        """Associate one frame of detections; returns (track, detection) pairs.

        Unassociated detections spawn candidate tracks; unassociated
        active tracks accumulate misses and retire past ``max_misses``
        consecutive ones.  Candidates promote to valid after
        ``validation_hits`` consecutive gated updates (the spawning
        detection counts as the first).
        """
        if self._last_frame is not None and frame_index <= self._last_frame:
            raise ValueError("frames must be processed in increasing order")
        self._last_frame = frame_index

        active = self._active
        pairs = []
        if active and detections:
            # vectorized gating (hundreds of noise tracks x detections)
            pred = np.array([t.predict_range(frame_index, self.frame_duration_s)
                             for t in active])
            tvel = np.array([t.last.velocity_mps for t in active])
            dr_m = np.array([d.range_m for d in detections])
            dv_m = np.array([d.velocity_mps for d in detections])
            dr = np.abs(dr_m[None, :] - pred[:, None])
            dv = np.abs(dv_m[None, :] - tvel[:, None])
            gated = (dr <= self.gate_range_m) & (dv <= self.gate_velocity_mps)
            for ti, di in zip(*np.nonzero(gated)):
                score = ((dr[ti, di] / self.gate_range_m) ** 2
                         + (dv[ti, di] / self.gate_velocity_mps) ** 2)
                pairs.append((float(score), float(dr[ti, di]),
                              active[ti].track_id, int(ti), int(di)))
        pairs.sort()

        assigned = []
        used_tracks: set = set()
        used_dets: set = set()
        for score, dr, tid, ti, di in pairs:
            if ti in used_tracks or di in used_dets:
                continue
            used_tracks.add(ti)
            used_dets.add(di)
            trk, det = active[ti], detections[di]
            trk.history.append(TrackPoint(frame_index, det.range_m,
                                          det.velocity_mps, det.sinr_db))
            self._register(trk)
            trk.consecutive_misses = 0
            trk.consecutive_hits += 1
            if (trk.state == STATE_CANDIDATE
                    and trk.consecutive_hits >= self.validation_hits):
                trk.state = STATE_VALID
                trk.validated_frame = frame_index
            assigned.append((trk, det))

        for ti, trk in enumerate(active):
            if ti in used_tracks:
                continue
            trk.consecutive_misses += 1
            trk.consecutive_hits = 0
            if trk.consecutive_misses > self.max_misses:
                self._retire(trk, frame_index)

        spawned = []
        for di, det in enumerate(detections):
            if di in used_dets:
                continue
            trk = Track(track_id=self._next_id, created_frame=frame_index)
            self._next_id += 1
            trk.history.append(TrackPoint(frame_index, det.range_m,
                                          det.velocity_mps, det.sinr_db))
            trk.consecutive_hits = 1
            self._register(trk)
            spawned.append(trk)
            assigned.append((trk, det))

        if self.reject_inconsistent:
            for trk, _ in assigned:
                if trk.state == STATE_RETIRED:
                    continue
                ok = range_rate_consistency(
                    trk, self.consistency_window,
                    self.consistency_threshold_mps, self.frame_duration_s)
                if ok is False:
                    self._retire(trk, frame_index, replica=True)

        self._active = ([t for t in active if t.state != STATE_RETIRED]
                        + [t for t in spawned if t.state != STATE_RETIRED])
        return assigned
