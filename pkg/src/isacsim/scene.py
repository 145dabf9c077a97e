"""Synthetic scene generation for the mono-static sensing chain.

Produces frequency-domain OFDM radio frames (transmit grid plus the
received reflections of moving targets, static clutter and Tx-Rx
leakage, with receiver noise), together with per-frame ground truth.

Conventions:
  * Positions are 2D (x, y) meters with the radar at the origin and
    azimuth 0 along +x; elevation is not modeled.
  * Reported radial velocity is the range rate dr/dt: negative while
    approaching.  The synthesized Doppler shift is +2*|closing speed|
    *f_c/c for an approaching target, and the processing chain maps it
    back to a signed range rate, so sign conventions cancel end to end.
  * Frame grids are N subcarriers x symbols_per_frame; uplink symbols
    are exactly zero in both tx and rx grids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .linkbudget import LinkBudgetParams, default_params, interference_psd, range_window
from .units import SPEED_OF_LIGHT as C

RCS_CONSTANT = "constant"
RCS_SWERLING1 = "swerling1"  # per-frame exponential power fading

_QPSK_SYMBOLS = np.exp(1j * (np.pi / 4.0 + np.pi / 2.0 * np.arange(4)))


@dataclass(frozen=True)
class Beam:
    """Separable Gaussian beam pattern with a scheduled dwell."""

    boresight_az_deg: float
    dwell_s: float
    hpbw_az_deg: float = 14.0
    hpbw_el_deg: float = 6.4
    gain_boresight: float = 1.0   # linear; set to the antenna gain G

    def __post_init__(self):
        if self.dwell_s <= 0 or self.hpbw_az_deg <= 0 or self.hpbw_el_deg <= 0:
            raise ValueError("beam dwell and beam widths must be positive")
        if self.gain_boresight <= 0:
            raise ValueError("boresight gain must be positive")


def beam_gain(beam: Beam, az_offset_deg: float, el_offset_deg: float = 0.0) -> float:
    """One-way linear gain at the given offsets from boresight.

    Gaussian mainlobe: -3 dB at half the HPBW per axis, hence -6 dB
    two-way when applied on both transmit and receive.
    """
    four_ln2 = 4.0 * math.log(2.0)
    shape = (-four_ln2 * (az_offset_deg / beam.hpbw_az_deg) ** 2
             - four_ln2 * (el_offset_deg / beam.hpbw_el_deg) ** 2)
    return beam.gain_boresight * math.exp(shape)


@dataclass
class Target:
    """Point target on a piecewise-linear 2D trajectory.

    ``waypoints`` is a (K, 3) array of rows (time_s, x_m, y_m), time
    sorted.  Before the first and after the last waypoint the target
    hovers at the end position (zero velocity), which is also what the
    clutter-acquisition frames at negative times see.
    """

    target_id: str
    waypoints: np.ndarray
    rcs_mean_m2: float
    rcs_model: str = RCS_CONSTANT

    def __post_init__(self):
        self.waypoints = np.asarray(self.waypoints, dtype=float)
        if self.waypoints.ndim != 2 or self.waypoints.shape[1] != 3:
            raise ValueError("waypoints must be a (K, 3) array of (t, x, y)")
        t = self.waypoints[:, 0]
        if np.any(np.diff(t) <= 0):
            raise ValueError("waypoint times must be strictly increasing")
        if not np.all(np.isfinite(self.waypoints)):
            raise ValueError("waypoints must be finite")
        if self.rcs_mean_m2 <= 0:
            raise ValueError("rcs_mean_m2 must be positive")
        if self.rcs_model not in (RCS_CONSTANT, RCS_SWERLING1):
            raise ValueError(f"unknown rcs_model {self.rcs_model!r}")

    def state(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Position and velocity vectors at time ``t`` (clamped ends)."""
        wp = self.waypoints
        if t <= wp[0, 0]:
            return wp[0, 1:].copy(), np.zeros(2)
        if t >= wp[-1, 0]:
            return wp[-1, 1:].copy(), np.zeros(2)
        k = int(np.searchsorted(wp[:, 0], t, side="right")) - 1
        t0, t1 = wp[k, 0], wp[k + 1, 0]
        v = (wp[k + 1, 1:] - wp[k, 1:]) / (t1 - t0)
        return wp[k, 1:] + v * (t - t0), v

    def range_velocity_azimuth(self, t: float) -> tuple[float, float, float]:
        """Range (m), range rate (m/s, negative approaching), azimuth (deg)."""
        pos, vel = self.state(t)
        r = float(np.hypot(pos[0], pos[1]))
        if r == 0.0:
            return 0.0, 0.0, 0.0
        range_rate = float(np.dot(pos, vel) / r)
        az = math.degrees(math.atan2(pos[1], pos[0]))
        return r, range_rate, az


@dataclass(frozen=True)
class ClutterObject:
    """Static (or slowly drifting) reflector folded into the scene.

    ``coupling_loss`` is the two-way linear loss of this object alone,
    antenna gains included, so the echo power is P_tx / coupling_loss.
    """

    range_m: float
    coupling_loss: float
    doppler_hz: float = 0.0
    phase_jitter_std: float = 0.0   # radians per frame, i.i.d.

    def __post_init__(self):
        if self.range_m <= 0 or self.coupling_loss <= 0:
            raise ValueError("clutter range and coupling loss must be positive")
        if self.phase_jitter_std < 0:
            raise ValueError("phase_jitter_std must be >= 0")


def combined_coupling_loss(clutter) -> float:
    """Aggregate coupling loss: reciprocals of the per-object losses add."""
    if not clutter:
        return math.inf
    return 1.0 / sum(1.0 / c.coupling_loss for c in clutter)


@dataclass(frozen=True)
class TruthRecord:
    target_id: str
    range_m: float
    radial_velocity_mps: float
    az_offset_deg: float


@dataclass(frozen=True)
class RadioFrame:
    """Frequency-domain I/Q grid of one radio frame."""

    grid: np.ndarray          # complex, (n_subcarriers, symbols_per_frame)
    dl_mask: np.ndarray       # bool, per symbol
    frame_index: int
    timestamp: float          # seconds, frame start


def default_dl_mask(symbols_per_frame: int = 1120,
                    symbols_per_slot: int = 14) -> np.ndarray:
    """Repeating DDDSU-style downlink mask.

    Per 5-slot period: three full DL slots, a switching slot with 10 DL
    symbols and 4 gap symbols, and one full UL slot, i.e. 52 of every 70
    symbols are DL.  For the 1120-symbol mu=3 frame this yields exactly
    832 DL symbols, and the 70-symbol gap period puts the Doppler
    replicas of the acquisition holes at multiples of 1600 Hz.
    """
    period = 5 * symbols_per_slot
    if symbols_per_frame % period:
        raise ValueError(
            f"symbols_per_frame {symbols_per_frame} is not a multiple of the "
            f"{period}-symbol TDD period")
    dl_per_period = 3 * symbols_per_slot + 10
    mask = np.zeros(symbols_per_frame, dtype=bool)
    for start in range(0, symbols_per_frame, period):
        mask[start:start + dl_per_period] = True
    return mask


def mask_gap_period_symbols(dl_mask: np.ndarray) -> int | None:
    """Fundamental cyclic period of the mask, or None without gaps.

    A mask that repeats every p < len(mask) symbols concentrates the
    spectrum of its acquisition holes at multiples of 1/(p*T_symbol);
    a gap-free mask produces no replicas at all.  Aperiodic masks return
    len(mask) (spectrally the holes then smear rather than form lines).
    """
    dl_mask = np.asarray(dl_mask, dtype=bool)
    if dl_mask.all():
        return None
    n = len(dl_mask)
    for p in range(1, n):
        if n % p == 0 and np.array_equal(dl_mask, np.roll(dl_mask, p)):
            return p
    return n


@dataclass
class Scenario:
    """Complete description of a synthetic acquisition run."""

    params: LinkBudgetParams
    targets: list
    clutter: list = field(default_factory=list)
    beams: list = field(default_factory=list)
    duration_s: float = 1.0
    rng_seed: int = 0
    frame_duration_s: float = 0.01
    symbols_per_frame: int = 1120
    dl_mask: np.ndarray | None = None
    include_noise: bool = True
    include_leakage: bool = True

    def __post_init__(self):
        if self.dl_mask is None:
            self.dl_mask = default_dl_mask(self.symbols_per_frame)
        self.dl_mask = np.asarray(self.dl_mask, dtype=bool)
        if len(self.dl_mask) != self.symbols_per_frame:
            raise ValueError("dl_mask length must equal symbols_per_frame")
        if int(self.dl_mask.sum()) != self.params.m_symbols:
            raise ValueError(
                f"dl_mask has {int(self.dl_mask.sum())} DL symbols but the "
                f"link budget assumes m_symbols={self.params.m_symbols}")
        t_frame = self.symbols_per_frame * (1.0 + self.params.l_cp) / self.params.delta_f_hz
        if abs(t_frame - self.frame_duration_s) > 1e-9 * self.frame_duration_s:
            raise ValueError(
                f"symbols_per_frame * T_symbol = {t_frame} s does not tile the "
                f"{self.frame_duration_s} s frame")
        if not self.beams:
            self.beams = [Beam(boresight_az_deg=0.0, dwell_s=0.05,
                               gain_boresight=self.params.g_tx)]
        for b in self.beams:
            n = b.dwell_s / self.frame_duration_s
            if abs(n - round(n)) > 1e-9:
                raise ValueError("beam dwells must span whole frames")
        if self.duration_s <= 0:
            raise ValueError("duration_s must be positive")

    @property
    def n_frames(self) -> int:
        return int(round(self.duration_s / self.frame_duration_s))

    @property
    def t_symbol_s(self) -> float:
        return (1.0 + self.params.l_cp) / self.params.delta_f_hz

    @property
    def sweep_period_s(self) -> float:
        return sum(b.dwell_s for b in self.beams)

    def beam_for_frame(self, frame_index: int) -> Beam:
        """Beam active during the given frame of the sweep schedule."""
        dwell_frames = [int(round(b.dwell_s / self.frame_duration_s)) for b in self.beams]
        total = sum(dwell_frames)
        pos = frame_index % total
        for beam, n in zip(self.beams, dwell_frames):
            if pos < n:
                return beam
            pos -= n
        return self.beams[-1]  # unreachable

    def frame_rng(self, frame_index: int) -> np.random.Generator:
        """Deterministic per-frame RNG stream (parallel-safe)."""
        return np.random.default_rng([self.rng_seed, frame_index % (2 ** 32)])

    def truth_at(self, frame_index: int, beam: Beam | None = None) -> list:
        """Ground truth for all targets at the frame's reference time."""
        if beam is None:
            beam = self.beam_for_frame(frame_index)
        t_ref = (frame_index + 0.5) * self.frame_duration_s
        out = []
        for tgt in self.targets:
            r, rr, az = tgt.range_velocity_azimuth(t_ref)
            off = (az - beam.boresight_az_deg + 180.0) % 360.0 - 180.0
            out.append(TruthRecord(target_id=tgt.target_id, range_m=r,
                                   radial_velocity_mps=rr, az_offset_deg=off))
        return out


def noise_cell_variance(p: LinkBudgetParams) -> float:
    """Per-cell complex noise variance in channel-normalized units.

    The grids are normalized to unit transmit cell power, so one cell
    carries P_tx/N watts and the noise in one subcarrier bandwidth is
    S_total * delta_f; their ratio is the dimensionless cell variance.
    """
    s_total = interference_psd(p).s_total
    return p.n_subcarriers * p.delta_f_hz * s_total / p.p_tx_w


def synthesize_frame(scenario: Scenario, frame_index: int,
                     beam: Beam | None = None,
                     dtype=np.complex64):
    """Synthesize one radio frame.

    Returns (tx, rx, truth).  The transmit grid carries unit-magnitude
    QPSK symbols on DL symbols.  Each scene object contributes a rank-one
    steering term alpha * exp(-j 2 pi n df 2r/c) * exp(+j 2 pi f_D m T0)
    scaled by the receive-window overlap; |alpha|^2 is the two-way power
    gain of the radar equation (targets) or 1/coupling_loss (clutter),
    and Tx-Rx leakage adds a flat 1/sqrt(isolation) term.  Noise is
    circularly-symmetric white at the interference PSD.  Targets outside
    the receive window contribute nothing.
    """
    p = scenario.params
    if beam is None:
        beam = scenario.beam_for_frame(frame_index)
    rng = scenario.frame_rng(frame_index)
    n_sc = p.n_subcarriers
    n_sym = scenario.symbols_per_frame
    mask = scenario.dl_mask
    dl_idx = np.flatnonzero(mask)
    t_sym = scenario.t_symbol_s
    window = range_window(p, r_star_m=1.0)
    wavelength = C / p.f_c_hz

    # unit-magnitude QPSK payload on DL symbols
    quadrant = rng.integers(0, 4, size=(n_sc, dl_idx.size))
    tx_dl = _QPSK_SYMBOLS.astype(dtype)[quadrant]

    truth = scenario.truth_at(frame_index, beam)

    # accumulate the channel over all scene contributions; phases are
    # always computed in float64, the outer product in the grid dtype
    sc = np.arange(n_sc)
    channel = np.zeros((n_sc, dl_idx.size), dtype=dtype)
    if scenario.include_leakage:
        channel += np.asarray(1.0 / math.sqrt(p.isolation), dtype=dtype)

    def add_steering(coef: complex, r: float, doppler_hz: float):
        range_phase = coef * np.exp(-2j * np.pi * sc * (p.delta_f_hz * 2.0 * r / C))
        slow_phase = np.exp(2j * np.pi * doppler_hz * dl_idx * t_sym)
        channel[:] += np.outer(range_phase.astype(dtype), slow_phase.astype(dtype))

    for tgt, rec in zip(scenario.targets, truth):
        r = rec.range_m
        w = window.overlap_fraction(r)
        if w <= 0.0 or r <= 0.0:
            continue
        rcs = tgt.rcs_mean_m2
        if tgt.rcs_model == RCS_SWERLING1:
            rcs = rcs * rng.exponential()
        g2 = (beam_gain(beam, rec.az_offset_deg)
              * beam_gain(beam, rec.az_offset_deg))
        power_gain = g2 * wavelength ** 2 * rcs / ((4.0 * math.pi) ** 3 * r ** 4)
        doppler = -2.0 * rec.radial_velocity_mps * p.f_c_hz / C
        coef = (math.sqrt(power_gain) * w
                * np.exp(-2j * np.pi * p.f_c_hz * 2.0 * r / C))
        add_steering(coef, r, doppler)

    for clu in scenario.clutter:
        w = window.overlap_fraction(clu.range_m)
        if w <= 0.0:
            continue
        phase = np.exp(-2j * np.pi * p.f_c_hz * 2.0 * clu.range_m / C)
        if clu.phase_jitter_std > 0.0:
            phase *= np.exp(1j * rng.normal(0.0, clu.phase_jitter_std))
        coef = math.sqrt(1.0 / clu.coupling_loss) * w * phase
        add_steering(coef, clu.range_m, clu.doppler_hz)

    rx_dl = tx_dl * channel
    if scenario.include_noise:
        sigma2 = noise_cell_variance(p)
        scale = math.sqrt(sigma2 / 2.0)
        shape = (n_sc, dl_idx.size, 2)
        if np.dtype(dtype) == np.complex64:
            draws = rng.standard_normal(shape, dtype=np.float32)
        else:
            draws = rng.standard_normal(shape)
        rx_dl += draws.view(rx_dl.dtype)[..., 0] * scale

    tx_grid = np.zeros((n_sc, n_sym), dtype=dtype)
    rx_grid = np.zeros((n_sc, n_sym), dtype=dtype)
    tx_grid[:, dl_idx] = tx_dl
    rx_grid[:, dl_idx] = rx_dl

    ts = frame_index * scenario.frame_duration_s
    tx = RadioFrame(grid=tx_grid, dl_mask=mask, frame_index=frame_index, timestamp=ts)
    rx = RadioFrame(grid=rx_grid, dl_mask=mask, frame_index=frame_index, timestamp=ts)
    return tx, rx, truth


def _waypoints_1d(legs, x0: float):
    """Helper: build (t, x, 0) waypoints from (speed, end_x | dwell) legs."""
    t, x = 0.0, x0
    rows = [(t, x, 0.0)]
    for speed, end_x, dwell in legs:
        if dwell is not None:
            t += dwell
        else:
            t += abs(end_x - x) / abs(speed)
            x = end_x
        rows.append((t, x, 0.0))
    return np.array(rows)


def make_experiment1_scenario(duration_s: float = 6.0,
                              rng_seed: int = 11) -> Scenario:
    """Close-range beam-sweep flight: a loop within 90 m of the radar.

    Six beams of 50 ms dwell (300 ms sweep) cover the route partially;
    the target crosses in and out of individual beams, exercising track
    bridging across uncovered dwells.
    """
    p = default_params()
    corners = np.array([
        [60.0, -20.0],
        [80.0, 15.0],
        [55.0, 25.0],
        [40.0, -5.0],
    ])
    speed = 9.0
    rows = [(0.0, corners[0, 0], corners[0, 1])]
    t = 0.0
    k = 0
    while t < duration_s + 20.0:   # enough laps to cover the duration
        nxt = corners[(k + 1) % len(corners)]
        cur = np.array(rows[-1][1:])
        t += float(np.linalg.norm(nxt - cur)) / speed
        rows.append((t, nxt[0], nxt[1]))
        k += 1
    target = Target(target_id="uav", waypoints=np.array(rows),
                    rcs_mean_m2=default_params().rcs_m2)
    beams = [Beam(boresight_az_deg=az, dwell_s=0.05, gain_boresight=p.g_tx)
             for az in (-25.0, -15.0, -5.0, 5.0, 15.0, 25.0)]
    clutter = [
        ClutterObject(range_m=25.0, coupling_loss=10.0 ** 9.0),
        ClutterObject(range_m=45.0, coupling_loss=10.0 ** 9.7),
    ]
    return Scenario(params=p, targets=[target], clutter=clutter, beams=beams,
                    duration_s=duration_s, rng_seed=rng_seed)


def make_experiment2_scenario(rng_seed: int = 7) -> Scenario:
    """Long-range fixed-beam flight: approach, depart, approach, 250-500 m.

    Desk-scale replica: the route spans exactly 250 to 500 m along the
    beam axis with short hovers at both turn-around points (where the
    zero-Doppler clutter removal swallows the target), against a dominant
    clutter object at 30 m and a weak building band at 250-300 m.  The
    cruise speed is raised well above a real UAV's so the whole route
    fits in a few hundred frames.
    """
    p = default_params()
    legs = [
        (35.0, 250.0, None),    # approach
        (None, None, 0.6),      # hover at the near turn-around
        (35.0, 500.0, None),    # depart
        (None, None, 0.6),      # hover at the far turn-around
        (35.0, 395.0, None),    # approach again
    ]
    waypoints = _waypoints_1d(legs, x0=320.0)
    duration = float(waypoints[-1, 0])
    target = Target(target_id="uav", waypoints=waypoints, rcs_mean_m2=p.rcs_m2)
    clutter = [
        ClutterObject(range_m=30.0, coupling_loss=10.0 ** 8.5),     # 85 dB, dominant
        ClutterObject(range_m=255.0, coupling_loss=10.0 ** 10.8),
        ClutterObject(range_m=270.0, coupling_loss=10.0 ** 11.0),
        ClutterObject(range_m=285.0, coupling_loss=10.0 ** 10.9),
        ClutterObject(range_m=300.0, coupling_loss=10.0 ** 11.1),
    ]
    beams = [Beam(boresight_az_deg=0.0, dwell_s=0.05, gain_boresight=p.g_tx)]
    return Scenario(params=p, targets=[target], clutter=clutter, beams=beams,
                    duration_s=duration, rng_seed=rng_seed)
