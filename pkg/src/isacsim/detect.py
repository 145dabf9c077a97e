"""CA-CFAR peak detection with sub-bin interpolation, TDD replica
suppression and SINR annotation."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from .dsp import Periodogram


@dataclass(frozen=True)
class CfarConfig:
    """Cell-averaging CFAR configuration.

    Training/guard extents are per side, in (range, doppler) bins of the
    periodogram grid.  The default false-alarm probability suits
    close-range work; long-range runs trade it up to 1e-4.  The cluster
    extents reduce threshold exceedances to local maxima within a
    +-cluster window per axis, so one target (and its near sidelobes
    after padding) yields a single detection.
    """

    pfa: float = 1e-6
    train_range: int = 8
    train_doppler: int = 8
    guard_range: int = 3
    guard_doppler: int = 3
    cluster_range: int = 3
    cluster_doppler: int = 3

    def __post_init__(self):
        if not 0.0 < self.pfa < 1.0:
            raise ValueError("pfa must lie in (0, 1)")
        if self.train_range < 1 or self.train_doppler < 1:
            raise ValueError("need at least one training cell per dimension")
        if min(self.guard_range, self.guard_doppler,
               self.cluster_range, self.cluster_doppler) < 0:
            raise ValueError("guard/cluster extents must be >= 0")

    @property
    def n_training_cells(self) -> int:
        full = ((2 * (self.train_range + self.guard_range) + 1)
                * (2 * (self.train_doppler + self.guard_doppler) + 1))
        guard = (2 * self.guard_range + 1) * (2 * self.guard_doppler + 1)
        return full - guard

    @property
    def threshold_scale(self) -> float:
        """alpha = N (pfa^(-1/N) - 1): exact CA-CFAR scaling for
        exponentially distributed cell powers."""
        n = self.n_training_cells
        return n * (self.pfa ** (-1.0 / n) - 1.0)


@dataclass(frozen=True)
class Detection:
    frame_index: int
    range_m: float            # sub-bin interpolated
    velocity_mps: float       # signed range rate, sub-bin interpolated
    peak_power: float
    bin: tuple                # (range_idx, doppler_idx) of the peak cell
    sinr_db: float | None = None
    replica_suppressed: bool = False
    clutter_band: bool = False


def cfar_threshold_map(p: Periodogram, cfg: CfarConfig) -> np.ndarray:
    """Adaptive threshold: alpha times the training-ring mean per cell.

    The ring is the rectangular training window minus the guard window,
    evaluated toroidally (the periodogram is a circular DFT grid).
    """
    nr, nd = p.power.shape
    full_r = 2 * (cfg.train_range + cfg.guard_range) + 1
    full_d = 2 * (cfg.train_doppler + cfg.guard_doppler) + 1
    if full_r > nr or full_d > nd:
        raise ValueError(
            f"CFAR window {full_r}x{full_d} exceeds periodogram {nr}x{nd}")
    guard_r = 2 * cfg.guard_range + 1
    guard_d = 2 * cfg.guard_doppler + 1
    power = p.power
    full_mean = ndimage.uniform_filter(power, size=(full_r, full_d), mode="wrap")
    guard_mean = ndimage.uniform_filter(power, size=(guard_r, guard_d), mode="wrap")
    n_full = full_r * full_d
    n_guard = guard_r * guard_d
    ring_mean = (full_mean * n_full - guard_mean * n_guard) / (n_full - n_guard)
    return cfg.threshold_scale * ring_mean


def _parabolic_offset(y_m1: float, y_0: float, y_p1: float) -> float:
    """Sub-bin offset of a parabola through three log-power samples."""
    denom = y_m1 - 2.0 * y_0 + y_p1
    if denom >= 0.0:
        return 0.0
    delta = 0.5 * (y_m1 - y_p1) / denom
    return float(np.clip(delta, -0.5, 0.5))


def _interpolate_peak(p: Periodogram, i: int, j: int) -> tuple[float, float]:
    """Sub-bin (range_m, velocity_mps) via log-power parabolas per axis."""
    nr, nd = p.power.shape
    eps = np.finfo(np.float64).tiny
    lr = [math.log(max(float(p.power[(i + k) % nr, j]), eps)) for k in (-1, 0, 1)]
    ld = [math.log(max(float(p.power[i, (j + k) % nd]), eps)) for k in (-1, 0, 1)]
    di = _parabolic_offset(*lr)
    dj = _parabolic_offset(*ld)
    rng = float(p.range_at((i + di) % nr))
    vel = float(p.velocity_at(j + dj))
    return rng, vel


def cfar_detect(p: Periodogram, cfg: CfarConfig,
                range_limits_m: tuple | None = None,
                clutter_bands_m=()) -> list:
    """CA-CFAR detection with local-max clustering and interpolation.

    Threshold exceedances are reduced to peaks by iteratively taking the
    strongest remaining hit and discarding all hits within the cluster
    window around it, then each peak is parabolic-interpolated to a
    sub-bin range and velocity.  ``range_limits_m`` drops detections
    outside the observable window (e.g. the zero-range leakage ridge);
    ``clutter_bands_m`` only flags detections inside the given range
    bands for bookkeeping, it does not drop them.
    """
    threshold = cfar_threshold_map(p, cfg)
    hits = p.power > threshold
    if not hits.any():
        return []
    nr, nd = p.power.shape
    idx_r, idx_d = np.nonzero(hits)
    powers = p.power[idx_r, idx_d]
    order = np.argsort(powers)[::-1]
    idx_r, idx_d, powers = idx_r[order], idx_d[order], powers[order]
    alive = np.ones(idx_r.size, dtype=bool)
    detections = []
    for k in range(idx_r.size):
        if not alive[k]:
            continue
        i, j = int(idx_r[k]), int(idx_d[k])
        # circular distance to all remaining hits; absorb the cluster
        dr = np.abs((idx_r - i + nr // 2) % nr - nr // 2)
        dd = np.abs((idx_d - j + nd // 2) % nd - nd // 2)
        alive &= (dr > cfg.cluster_range) | (dd > cfg.cluster_doppler)
        rng, vel = _interpolate_peak(p, i, j)
        if range_limits_m is not None:
            lo, hi = range_limits_m
            if not lo < rng < hi:
                continue
        in_band = any(lo <= rng <= hi for lo, hi in clutter_bands_m)
        detections.append(Detection(
            frame_index=p.frame_index, range_m=rng, velocity_mps=vel,
            peak_power=float(powers[k]), bin=(i, j), clutter_band=in_band))
    return detections


def suppress_tdd_replicas(detections: list,
                          velocity_step_mps: float | None,
                          range_tol_m: float,
                          velocity_tol_mps: float = 0.3,
                          max_harmonic: int = 8) -> list:
    """Drop Doppler replicas caused by periodic TDD acquisition holes.

    A detection is a replica when a stronger retained detection exists
    at the same range (within ``range_tol_m``) whose velocity differs by
    a nonzero integer multiple of the gap repetition velocity step.
    With no periodic gaps (``velocity_step_mps`` is None) the input list
    is returned unchanged.  The strongest detection of a frame is never
    removed.  Returns the retained detections; suppressed ones are
    dropped from the active list (flagged copies are not returned).
    """
    if velocity_step_mps is None or not detections:
        return list(detections)
    order = sorted(range(len(detections)),
                   key=lambda k: detections[k].peak_power, reverse=True)
    kept_idx = []
    for k in order:
        det = detections[k]
        is_replica = False
        for kk in kept_idx:
            strong = detections[kk]
            if abs(det.range_m - strong.range_m) > range_tol_m:
                continue
            dv = abs(det.velocity_mps - strong.velocity_mps)
            harmonic = round(dv / velocity_step_mps)
            if (1 <= harmonic <= max_harmonic
                    and abs(dv - harmonic * velocity_step_mps) <= velocity_tol_mps):
                is_replica = True
                break
        if not is_replica:
            kept_idx.append(k)
    return [detections[k] for k in sorted(kept_idx)]


def annotate_sinr(detections: list, p: Periodogram) -> list:
    """Attach measured SINR = peak power over the frame's noise floor."""
    if p.noise_floor_estimate is None:
        raise ValueError("periodogram has no noise floor estimate")
    floor = p.noise_floor_estimate
    return [replace(d, sinr_db=10.0 * math.log10(d.peak_power / floor))
            for d in detections]
