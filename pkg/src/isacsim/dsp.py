"""Sensing processing chain: channel estimation, clutter removal and
range-Doppler periodogram computation.

Per-frame transforms only; all operations are pure and frames can be
processed independently.
"""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.fft

from .scene import RadioFrame
from .units import SPEED_OF_LIGHT as C

_FFT_WORKERS = min(os.cpu_count() or 1, 4)

WINDOW_RECT = "rect"
WINDOW_HANN = "hann"


class StaleClutterMapWarning(UserWarning):
    """Raised (as a warning) when removing clutter with an outdated map."""


@dataclass
class ChannelEstimate:
    """Frequency-domain channel of one frame; UL symbols are zero."""

    grid: np.ndarray
    dl_mask: np.ndarray
    frame_index: int
    n_suppressed_cells: int = 0   # cells zeroed because |tx| fell below epsilon


def estimate_channel(tx: RadioFrame, rx: RadioFrame,
                     epsilon: float = 1e-9) -> ChannelEstimate:
    """Element-wise division of the received by the transmitted grid.

    Cells whose transmit magnitude is below ``epsilon`` are zeroed and
    counted instead of divided (guards against non-constant-modulus
    payloads); UL symbols stay zero.
    """
    if tx.grid.shape != rx.grid.shape:
        raise ValueError(
            f"tx/rx grid shapes differ: {tx.grid.shape} vs {rx.grid.shape}")
    if not np.array_equal(tx.dl_mask, rx.dl_mask):
        raise ValueError("tx/rx DL masks differ")
    dl = np.flatnonzero(tx.dl_mask)
    grid = np.zeros_like(rx.grid)
    tx_dl = tx.grid[:, dl]
    rx_dl = rx.grid[:, dl]
    ok = np.abs(tx_dl) > epsilon
    out = np.zeros_like(rx_dl)
    np.divide(rx_dl, tx_dl, out=out, where=ok)
    grid[:, dl] = out
    return ChannelEstimate(grid=grid, dl_mask=tx.dl_mask,
                           frame_index=rx.frame_index,
                           n_suppressed_cells=int(ok.size - ok.sum()))


def eca_c_remove(ch: ChannelEstimate) -> ChannelEstimate:
    """Remove the per-subcarrier static component.

    Subtracts, per subcarrier, the least-squares projection of the
    slow-time samples onto the all-ones vector restricted to DL symbols,
    i.e. the DL-sample mean.  Annihilates perfectly static reflectors
    (and Tx leakage) but also suppresses targets whose Doppler stays
    within the frame's zero-Doppler resolution cell.
    """
    dl = np.flatnonzero(ch.dl_mask)
    grid = ch.grid.copy()
    mean = grid[:, dl].mean(axis=1, keepdims=True)
    grid[:, dl] -= mean
    return ChannelEstimate(grid=grid, dl_mask=ch.dl_mask,
                           frame_index=ch.frame_index,
                           n_suppressed_cells=ch.n_suppressed_cells)


@dataclass
class ClutterMap:
    """Stored static-scene signature for acquisition-based clutter removal."""

    signature: np.ndarray         # complex grid, coherent average over acquisition
    dl_mask: np.ndarray
    acquisition_frame_count: int
    acquired_at: int              # frame index of the newest acquisition frame
    stale_after: int = 18000      # frames (3 minutes of 10 ms frames)


def crap_acquire(frames: list, stale_after: int = 18000) -> ClutterMap:
    """Average acquisition frames into a clutter signature.

    Coherent mean over at least one channel estimate; anything static
    during acquisition (including a hovering target) enters the
    signature and is later removed.

    This is a simplified stand-in for acquisition-based clutter
    cancellation: the stored signature plus a single per-frame complex
    scale absorbs a common phase rotation of the static scene, which is
    what makes it robust where plain zero-Doppler projection is not.
    """
    if not frames:
        raise ValueError("need at least one acquisition frame")
    acc = np.zeros_like(frames[0].grid, dtype=np.complex128)
    for f in frames:
        if f.grid.shape != acc.shape:
            raise ValueError("acquisition frames must share one grid shape")
        acc += f.grid
    acc /= len(frames)
    return ClutterMap(signature=acc, dl_mask=frames[0].dl_mask,
                      acquisition_frame_count=len(frames),
                      acquired_at=max(f.frame_index for f in frames),
                      stale_after=stale_after)


def crap_remove(ch: ChannelEstimate, cmap: ClutterMap) -> ChannelEstimate:
    """Subtract the best complex-scaled clutter signature from a frame.

    The scale beta is the least-squares fit of the frame onto the
    signature over DL cells.  A map older than ``stale_after`` frames
    triggers a StaleClutterMapWarning but is still applied, mirroring
    acquisition that must be refreshed in the background.
    """
    if ch.grid.shape != cmap.signature.shape:
        raise ValueError("channel and clutter map shapes differ")
    age = ch.frame_index - cmap.acquired_at
    if age > cmap.stale_after:
        warnings.warn(
            f"clutter map is {age} frames old (stale after {cmap.stale_after})",
            StaleClutterMapWarning, stacklevel=2)
    dl = np.flatnonzero(ch.dl_mask)
    sig = cmap.signature[:, dl]
    denom = np.vdot(sig, sig).real
    beta = np.vdot(sig, ch.grid[:, dl]) / denom if denom > 0 else 0.0
    grid = ch.grid.copy()
    grid[:, dl] = grid[:, dl] - (beta * sig).astype(grid.dtype)
    return ChannelEstimate(grid=grid, dl_mask=ch.dl_mask,
                           frame_index=ch.frame_index,
                           n_suppressed_cells=ch.n_suppressed_cells)


@dataclass
class Periodogram:
    """Range-Doppler power map of one frame.

    ``power[i, j]`` is the squared magnitude at range bin i and Doppler
    bin j; both axes are circular DFT grids (ranges wrap at
    n_range_bins * range_bin_m, Doppler at the slow-time sampling rate).
    Doppler bins are stored unshifted; :meth:`velocity_at` maps a
    (fractional) bin index to a signed radial velocity in the range-rate
    convention (negative = approaching).
    """

    power: np.ndarray
    range_bin_m: float
    velocity_bin_mps: float
    frame_index: int
    noise_floor_estimate: float | None = None

    @property
    def n_range_bins(self) -> int:
        return self.power.shape[0]

    @property
    def n_doppler_bins(self) -> int:
        return self.power.shape[1]

    def range_at(self, range_bin) -> float:
        return np.asarray(range_bin, dtype=float) * self.range_bin_m

    def velocity_at(self, doppler_bin):
        """Signed range rate for a (fractional, circular) Doppler bin."""
        n = self.n_doppler_bins
        signed = (np.asarray(doppler_bin, dtype=float) + n / 2.0) % n - n / 2.0
        return -signed * self.velocity_bin_mps

    def doppler_bin_of_velocity(self, velocity_mps) -> float:
        """Inverse of :meth:`velocity_at` (result in [0, n_doppler_bins))."""
        signed = -np.asarray(velocity_mps, dtype=float) / self.velocity_bin_mps
        return signed % self.n_doppler_bins


def periodogram(ch: ChannelEstimate,
                subcarrier_spacing_hz: float,
                symbol_duration_s: float,
                carrier_freq_hz: float,
                pad_range: int = 2,
                pad_doppler: int = 2,
                window: str = WINDOW_RECT) -> Periodogram:
    """Range-Doppler periodogram via batched FFT / inverse FFT.

    Forward FFT across slow time (Doppler) per subcarrier, then an
    inverse FFT across subcarriers (range) per Doppler bin, squared
    magnitude.  The inverse transform is scaled by its length so a
    unit-amplitude exponential filling all N x M DL cells produces a
    peak power of (N*M)^2 and, without padding or windowing, total power
    N*M_fft times the channel energy.  UL symbols enter as zeros, which
    is exactly what creates the impulsive Doppler sidelobes of a gapped
    TDD mask.  Zero-padding refines the bin grid; ``hann`` windowing is
    available for sidelobe studies.
    """
    if pad_range < 1 or pad_doppler < 1:
        raise ValueError("pad factors must be >= 1")
    n_sc, n_sym = ch.grid.shape
    grid = ch.grid
    if window == WINDOW_HANN:
        wr = np.hanning(n_sc)[:, None]
        wd = np.hanning(n_sym)[None, :]
        grid = grid * (wr * wd)
    elif window != WINDOW_RECT:
        raise ValueError(f"unknown window {window!r}")
    n_dopp = n_sym * pad_doppler
    n_rng = n_sc * pad_range
    spec = scipy.fft.fft(grid, n=n_dopp, axis=1, workers=_FFT_WORKERS)
    spec = scipy.fft.ifft(spec, n=n_rng, axis=0, workers=_FFT_WORKERS)
    power = (spec.real ** 2 + spec.imag ** 2) * float(n_rng) ** 2
    range_bin_m = C / (2.0 * n_rng * subcarrier_spacing_hz)
    doppler_bin_hz = 1.0 / (n_dopp * symbol_duration_s)
    velocity_bin_mps = doppler_bin_hz * C / (2.0 * carrier_freq_hz)
    return Periodogram(power=power, range_bin_m=range_bin_m,
                       velocity_bin_mps=velocity_bin_mps,
                       frame_index=ch.frame_index)


def exclusion_mask(p: Periodogram,
                   range_bands_m=(),
                   velocity_bands_mps=()) -> np.ndarray:
    """Boolean mask of cells to EXCLUDE from noise-floor estimation.

    Bands are closed intervals; velocity bands are applied per Doppler
    bin via the signed range-rate mapping, range bands per range bin.
    """
    excl = np.zeros(p.power.shape, dtype=bool)
    ranges = p.range_at(np.arange(p.n_range_bins))
    velocities = p.velocity_at(np.arange(p.n_doppler_bins))
    for lo, hi in range_bands_m:
        excl[(ranges >= lo) & (ranges <= hi), :] = True
    for lo, hi in velocity_bands_mps:
        excl[:, (velocities >= lo) & (velocities <= hi)] = True
    return excl


def estimate_noise_floor(p: Periodogram,
                         exclude: np.ndarray | None = None,
                         min_cells: int = 1000,
                         stride: int = 1) -> float:
    """Noise-plus-interference floor from the cell-power median.

    Median over all non-excluded cells, divided by ln 2 to convert the
    median of exponentially distributed cell powers to their mean.  The
    excluded region should cover the target neighbourhood and clutter
    ridges; what remains still contains any residual clutter, so this is
    an upper bound on the thermal floor.  ``stride`` subsamples the kept
    region along the range axis (the estimate is statistical, a strided
    subgrid of a million cells loses nothing).  Stores the result on ``p``.
    """
    if exclude is None:
        cells = p.power[::stride, :].ravel()
    else:
        if exclude.shape != p.power.shape:
            raise ValueError("exclusion mask shape mismatch")
        cells = p.power[::stride, :][~exclude[::stride, :]]
    if cells.size < min_cells:
        raise ValueError(
            f"only {cells.size} cells left for noise estimation "
            f"(need >= {min_cells})")
    floor = float(np.median(cells)) / np.log(2.0)
    p.noise_floor_estimate = floor
    return floor
