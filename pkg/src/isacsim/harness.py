"""Scenario replay: runs the full sensing chain frame by frame, tracks
targets, and scores the result against the scenario's ground truth."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import io as iomod
from .detect import CfarConfig, annotate_sinr, cfar_detect, suppress_tdd_replicas
from .dsp import (WINDOW_RECT, crap_acquire, crap_remove, eca_c_remove,
                  estimate_channel, estimate_noise_floor, exclusion_mask,
                  periodogram)
from .linkbudget import (LinkBudgetParams, expected_sinr_at_range,
                         interference_psd, lin_to_db, max_range, range_window,
                         sinr_curves, watt_to_dbm)
from .scene import Scenario, mask_gap_period_symbols, synthesize_frame
from .track import STATE_VALID, Tracker
from .units import SPEED_OF_LIGHT as C

CLUTTER_ECA_C = "eca-c"
CLUTTER_CRAP = "crap"
CLUTTER_NONE = "none"


@dataclass
class ChainConfig:
    """Processing-chain configuration for :func:`replay`."""

    clutter_removal: str = CLUTTER_ECA_C
    cfar: CfarConfig = field(default_factory=CfarConfig)
    pad_range: int = 2
    pad_doppler: int = 1      # Doppler padding buys nothing against 3 m/s gates
    window: str = WINDOW_RECT
    replica_suppression: bool = True
    crap_acquisition_frames: int = 100
    crap_stale_after: int = 18000
    # noise-floor exclusion: clutter/replica velocity ridges and near range
    noise_exclude_velocity_halfwidth_mps: float = 2.5
    noise_exclude_harmonics: int = 3
    noise_exclude_near_range_m: float = 60.0
    noise_floor_stride: int = 2
    clutter_flag_bands_m: tuple = ()
    # detections faster than any plausible target are noise; keep them out
    # of the tracker (they still appear in the detection artifacts)
    tracker_max_speed_mps: float = 64.0
    # tracker
    gate_range_m: float = 3.0
    gate_velocity_mps: float = 3.0
    validation_hits: int = 10
    max_misses: int = 12
    consistency_window: int = 10
    consistency_threshold_mps: float = 2.0
    tracker_keep_min_hits: int = 5   # forget short noise-spawned candidates
    # metrics
    truth_match_gate_m: float = 5.0
    synth_dtype: type = np.complex64

    @classmethod
    def long_range(cls) -> "ChainConfig":
        """Preset for long-range runs: relaxed false-alarm rate and wide
        clustering so range sidelobes of a strong peak never split off."""
        return cls(
            clutter_removal=CLUTTER_ECA_C,
            cfar=CfarConfig(pfa=1e-4, cluster_range=12, cluster_doppler=8),
            clutter_flag_bands_m=((245.0, 305.0),),
        )

    @classmethod
    def close_range(cls) -> "ChainConfig":
        """Preset for close-range beam-sweep runs with stored-signature
        clutter removal."""
        return cls(
            clutter_removal=CLUTTER_CRAP,
            cfar=CfarConfig(pfa=1e-6, cluster_range=12, cluster_doppler=8),
        )


@dataclass
class RunMetrics:
    n_frames: int
    n_truth_frames: int
    detection_rate: float
    n_matched: int
    bias_m: float
    range_error_q50_m: float
    range_error_q95_m: float
    n_valid_tracks: int
    false_track_count: int
    sinr_curve: list            # (truth_range_m, measured_sinr_db, model_sinr_db)
    frame_seconds_mean: float
    frame_seconds_max: float


def replica_velocity_step(scenario: Scenario) -> float | None:
    """Velocity spacing of TDD Doppler replicas for the scenario's mask.

    None when the mask has no gaps or no sub-frame periodicity (then the
    acquisition holes do not form discrete replica lines).
    """
    period = mask_gap_period_symbols(scenario.dl_mask)
    if period is None or period >= scenario.symbols_per_frame:
        return None
    gap_freq = 1.0 / (period * scenario.t_symbol_s)
    return gap_freq * C / (2.0 * scenario.params.f_c_hz)


def _validate(scenario: Scenario, config: ChainConfig) -> None:
    if config.clutter_removal not in (CLUTTER_ECA_C, CLUTTER_CRAP, CLUTTER_NONE):
        raise ValueError(f"unknown clutter removal {config.clutter_removal!r}")
    if config.clutter_removal == CLUTTER_CRAP and config.crap_acquisition_frames < 1:
        raise ValueError("CRAP clutter removal needs >= 1 acquisition frame")
    nr = scenario.params.n_subcarriers * config.pad_range
    nd = scenario.symbols_per_frame * config.pad_doppler
    cfg = config.cfar
    if (2 * (cfg.train_range + cfg.guard_range) + 1 > nr
            or 2 * (cfg.train_doppler + cfg.guard_doppler) + 1 > nd):
        raise ValueError("CFAR window does not fit the periodogram")


def _noise_exclusion(p, scenario: Scenario, config: ChainConfig,
                     velocity_step: float | None):
    vh = config.noise_exclude_velocity_halfwidth_mps
    vbands = [(-vh, vh)]
    if velocity_step is not None:
        for k in range(1, config.noise_exclude_harmonics + 1):
            vbands.append((k * velocity_step - vh, k * velocity_step + vh))
            vbands.append((-k * velocity_step - vh, -k * velocity_step + vh))
    rbands = [(0.0, config.noise_exclude_near_range_m)]
    rbands += [(c.range_m - 10.0, c.range_m + 10.0) for c in scenario.clutter]
    return exclusion_mask(p, range_bands_m=rbands, velocity_bands_mps=vbands)


def replay(scenario: Scenario, config: ChainConfig | None = None,
           out_dir=None, progress: bool = False) -> RunMetrics:
    """Run synthesize -> estimate -> clutter removal -> periodogram ->
    CFAR -> replica suppression -> tracker over every frame.

    Accuracy quantiles are computed over detections of valid tracks that
    match the ground truth within the gate, after subtracting the median
    range offset (emulating a calibrated, synchronized reference).
    Writes CSV artifacts when ``out_dir`` is given; the CSV content is a
    pure function of scenario + config (timing stays out of the files).
    """
    config = config or ChainConfig()
    _validate(scenario, config)
    p = scenario.params
    window = range_window(p, r_star_m=1.0)
    range_limits = (window.r_low_clamped, window.r_limit)
    velocity_step = replica_velocity_step(scenario)
    t_sym = scenario.t_symbol_s

    clutter_maps = {}
    if config.clutter_removal == CLUTTER_CRAP:
        n_acq = config.crap_acquisition_frames
        for b, beam in enumerate(scenario.beams):
            frames = []
            for j in range(n_acq):
                idx = -((b + 1) * n_acq) + j
                tx, rx, _ = synthesize_frame(scenario, idx, beam=beam,
                                             dtype=config.synth_dtype)
                frames.append(estimate_channel(tx, rx))
            clutter_maps[b] = crap_acquire(frames, stale_after=config.crap_stale_after)

    tracker = Tracker(
        frame_duration_s=scenario.frame_duration_s,
        gate_range_m=config.gate_range_m,
        gate_velocity_mps=config.gate_velocity_mps,
        validation_hits=config.validation_hits,
        max_misses=config.max_misses,
        consistency_window=config.consistency_window,
        consistency_threshold_mps=config.consistency_threshold_mps,
        keep_retired_min_hits=config.tracker_keep_min_hits,
    )

    beam_index = {id(b): i for i, b in enumerate(scenario.beams)}
    detections_log = []     # (frame, time, Detection) for the CSV
    matched = []            # (truth_range, det_range, sinr_db)
    truth_by_frame = {}
    matched_frames = set()
    n_truth_frames = 0
    frame_seconds = []

    for i in range(scenario.n_frames):
        t0 = time.perf_counter()
        beam = scenario.beam_for_frame(i)
        tx, rx, truth = synthesize_frame(scenario, i, beam=beam,
                                         dtype=config.synth_dtype)
        ch = estimate_channel(tx, rx)
        if config.clutter_removal == CLUTTER_ECA_C:
            ch = eca_c_remove(ch)
        elif config.clutter_removal == CLUTTER_CRAP:
            ch = crap_remove(ch, clutter_maps[beam_index[id(beam)]])
        per = periodogram(ch, p.delta_f_hz, t_sym, p.f_c_hz,
                          pad_range=config.pad_range,
                          pad_doppler=config.pad_doppler,
                          window=config.window)
        estimate_noise_floor(
            per, exclude=_noise_exclusion(per, scenario, config, velocity_step),
            stride=config.noise_floor_stride)
        dets = cfar_detect(per, config.cfar, range_limits_m=range_limits,
                           clutter_bands_m=config.clutter_flag_bands_m)
        dets = annotate_sinr(dets, per)
        if config.replica_suppression:
            active = suppress_tdd_replicas(
                dets, velocity_step,
                range_tol_m=C / (2.0 * p.n_subcarriers * p.delta_f_hz))
        else:
            active = list(dets)
        active_set = {id(d) for d in active}
        t_frame = (i + 0.5) * scenario.frame_duration_s
        for d in dets:
            logged = d if id(d) in active_set else replace(d, replica_suppressed=True)
            detections_log.append((i, t_frame, logged))

        trackable = [d for d in active
                     if abs(d.velocity_mps) <= config.tracker_max_speed_mps]
        assignments = tracker.update(i, trackable)

        truth_by_frame[i] = truth
        in_window = [r for r in truth
                     if window.r_low_clamped < r.range_m < window.r_limit]
        if in_window:
            n_truth_frames += 1
        for trk, det in assignments:
            if trk.state != STATE_VALID:
                continue
            for rec in in_window:
                if abs(det.range_m - rec.range_m) <= config.truth_match_gate_m:
                    matched.append((rec.range_m, det.range_m, det.sinr_db))
                    matched_frames.add(i)
                    break
        frame_seconds.append(time.perf_counter() - t0)
        if progress and (i + 1) % 100 == 0:
            print(f"  frame {i + 1}/{scenario.n_frames}")

    # score valid tracks against truth to find false tracks
    false_tracks = 0
    valid_tracks = [t for t in tracker.tracks if t.validated_frame is not None]
    for trk in valid_tracks:
        good = 0
        for pt in trk.history:
            truth = truth_by_frame.get(pt.frame_index, [])
            if any(abs(pt.range_m - r.range_m) <= config.truth_match_gate_m
                   for r in truth):
                good += 1
        if trk.history and good < 0.5 * len(trk.history):
            false_tracks += 1

    if matched:
        truth_r = np.array([m[0] for m in matched])
        det_r = np.array([m[1] for m in matched])
        bias = float(np.median(det_r - truth_r))
        errors = np.abs(det_r - truth_r - bias)
        q50 = float(np.quantile(errors, 0.5))
        q95 = float(np.quantile(errors, 0.95))
    else:
        bias, q50, q95 = math.nan, math.nan, math.nan

    sinr_curve = [(r, s, expected_sinr_at_range(p, r))
                  for r, _, s in matched if s is not None]

    metrics = RunMetrics(
        n_frames=scenario.n_frames,
        n_truth_frames=n_truth_frames,
        detection_rate=(len(matched_frames) / n_truth_frames
                        if n_truth_frames else math.nan),
        n_matched=len(matched),
        bias_m=bias,
        range_error_q50_m=q50,
        range_error_q95_m=q95,
        n_valid_tracks=len(valid_tracks),
        false_track_count=false_tracks,
        sinr_curve=sinr_curve,
        frame_seconds_mean=float(np.mean(frame_seconds)),
        frame_seconds_max=float(np.max(frame_seconds)),
    )

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        iomod.write_truth_csv(scenario, out / "truth.csv")
        iomod.write_detections_csv(detections_log, out / "detections.csv")
        iomod.write_tracks_csv(tracker.tracks, out / "tracks.csv")
        iomod.write_track_summary_csv(tracker.tracks, out / "track_summary.csv")
        _write_metrics_csv(metrics, out / "metrics.csv")
    return metrics


def _write_metrics_csv(m: RunMetrics, path) -> None:
    # timing deliberately excluded: files must be reproducible bit for bit
    rows = [
        ("n_frames", m.n_frames),
        ("n_truth_frames", m.n_truth_frames),
        ("detection_rate", f"{m.detection_rate:.6f}"),
        ("n_matched", m.n_matched),
        ("bias_m", f"{m.bias_m:.6f}"),
        ("range_error_q50_m", f"{m.range_error_q50_m:.6f}"),
        ("range_error_q95_m", f"{m.range_error_q95_m:.6f}"),
        ("n_valid_tracks", m.n_valid_tracks),
        ("false_track_count", m.false_track_count),
    ]
    Path(path).write_text(
        "metric,value\n" + "\n".join(f"{k},{v}" for k, v in rows) + "\n")


# ---------------------------------------------------------------------------
# Analytic model report

def model_report(params: LinkBudgetParams) -> dict:
    """All link-budget outputs in one place (dB at the boundary)."""
    psd = interference_psd(params)
    res = max_range(params)
    w = res.window
    return {
        "r_star_m": res.r_star,
        "r_max_m": res.r_max,
        "branch": res.branch,
        "out_of_window": res.out_of_window,
        "r_sym_m": w.r_sym,
        "r_cp_m": w.r_cp,
        "r_rx_m": w.r_rx,
        "r_low_m": w.r_low_clamped,
        "r_limit_m": w.r_limit,
        "n0_rx_dbm_hz": watt_to_dbm(psd.n0_rx),
        "s3_tx_dbm_hz": watt_to_dbm(psd.s3_tx),
        "s3_rx_dbm_hz": watt_to_dbm(psd.s3_rx),
        "s_total_dbm_hz": watt_to_dbm(psd.s_total),
        "gamma_min_db": lin_to_db(params.gamma_min),
    }


def render_model_report(report: dict) -> str:
    lines = [
        "link budget model",
        f"  noise+interference PSD : {report['s_total_dbm_hz']:8.2f} dBm/Hz",
        f"    thermal (N0*F_rx)    : {report['n0_rx_dbm_hz']:8.2f} dBm/Hz",
        f"    Tx 3rd-order IM      : {report['s3_tx_dbm_hz']:8.2f} dBm/Hz",
        f"    Rx 3rd-order IM      : {report['s3_rx_dbm_hz']:8.2f} dBm/Hz",
        f"  detection threshold    : {report['gamma_min_db']:8.2f} dB",
        f"  achievable distance r* : {report['r_star_m']:8.1f} m",
        f"  max distance r_max     : {report['r_max_m']:8.1f} m"
        f"  (branch: {report['branch']})",
        "  receive window:",
        f"    r_cp    : {report['r_cp_m']:8.1f} m",
        f"    r_rx    : {report['r_rx_m']:8.1f} m",
        f"    r_low   : {report['r_low_m']:8.1f} m",
        f"    r_limit : {report['r_limit_m']:8.1f} m",
    ]
    if report["out_of_window"]:
        lines.append("  WARNING: r_max falls outside the observable window")
    return "\n".join(lines)


def write_sinr_curve_csv(params: LinkBudgetParams, path,
                         start_m: float, stop_m: float, step_m: float) -> None:
    """SINR-vs-range CSV: model, window-limited and thermal-only curves."""
    ranges = np.arange(start_m, stop_m + 0.5 * step_m, step_m)
    curves = sinr_curves(params, ranges)
    rows = ["range_m,sinr_db_model,sinr_db_windowed,snr_db_thermal_only"]
    for k in range(len(ranges)):
        rows.append(f"{curves['range_m'][k]:.3f},"
                    f"{curves['sinr_db_model'][k]:.4f},"
                    f"{curves['sinr_db_windowed'][k]:.4f},"
                    f"{curves['snr_db_thermal_only'][k]:.4f}")
    Path(path).write_text("\n".join(rows) + "\n")
