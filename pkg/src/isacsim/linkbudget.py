"""Analytic link budget for a mono-static OFDM sensing link.

Models the interference floor at the receiver (thermal noise plus the
dominant 3rd-order intermodulation products of the Tx PA and Rx LNA),
the achievable detection distance for a given radar cross section, and
the reduction of that distance caused by a receive window of one useful
OFDM symbol duration.

All quantities are linear SI units; use :class:`LinkBudgetParams.from_db`
and :func:`LinkBudgetParams.as_db_dict` to convert at the boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from .units import SPEED_OF_LIGHT as C
from .units import db_to_lin, dbm_to_watt, lin_to_db, watt_to_dbm

BRANCH_NEAR = "near"
BRANCH_CP = "cp"
BRANCH_FAR = "far"


@dataclass(frozen=True)
class LinkBudgetParams:
    """System and hardware parameters of the sensing link.

    Gains, losses, isolation, noise figure and the minimum SINR are
    linear power ratios; powers are watts; the noise PSD is W/Hz.
    """

    f_c_hz: float           # carrier frequency
    delta_f_hz: float       # subcarrier spacing
    l_cp: float             # cyclic prefix as fraction of useful symbol
    t_rx_s: float           # receive window offset vs Tx
    n_subcarriers: int
    m_symbols: int          # OFDM symbols used for sensing per frame
    p_tx_w: float           # total radiated power
    oip3_tx_w: float        # Tx 3rd order output intercept point
    iip3_rx_w: float        # Rx 3rd order input intercept point
    n_tx: int               # Tx array factor (radiator count)
    n_rx: int               # Rx array factor
    g_tx: float             # Tx antenna gain
    g_rx: float             # Rx antenna gain
    isolation: float        # Tx-Rx isolation per radiator pair
    c_total: float          # sum coupling loss over all clutter and targets
    noise_psd_w_hz: float   # thermal noise PSD k_B * T
    noise_figure: float     # Rx noise figure
    rcs_m2: float           # target radar cross section
    gamma_min: float        # minimum SINR for robust detection

    def __post_init__(self):
        positive = {
            "f_c_hz": self.f_c_hz, "delta_f_hz": self.delta_f_hz,
            "p_tx_w": self.p_tx_w, "oip3_tx_w": self.oip3_tx_w,
            "iip3_rx_w": self.iip3_rx_w, "g_tx": self.g_tx,
            "g_rx": self.g_rx, "isolation": self.isolation,
            "c_total": self.c_total, "noise_psd_w_hz": self.noise_psd_w_hz,
            "noise_figure": self.noise_figure, "rcs_m2": self.rcs_m2,
            "gamma_min": self.gamma_min,
        }
        for name, value in positive.items():
            if not value > 0.0:
                raise ValueError(f"{name} must be strictly positive, got {value}")
        if self.n_subcarriers < 1 or self.m_symbols < 1:
            raise ValueError("subcarrier and symbol counts must be >= 1")
        if self.n_tx < 1 or self.n_rx < 1:
            raise ValueError("array factors must be >= 1")
        if not 0.0 <= self.l_cp < 1.0:
            raise ValueError(f"l_cp must lie in [0, 1), got {self.l_cp}")
        if self.t_rx_s < 0.0:
            raise ValueError("t_rx_s must be >= 0")

    @classmethod
    def from_db(cls, *, f_c_hz, delta_f_hz, l_cp, t_rx_s, n_subcarriers,
                m_symbols, p_tx_dbm, oip3_tx_dbm, iip3_rx_dbm, n_tx, n_rx,
                g_tx_db, g_rx_db, isolation_db, c_total_db,
                noise_psd_dbm_hz, noise_figure_db, rcs_dbsm,
                gamma_min_db) -> "LinkBudgetParams":
        """Build parameters from the usual dB/dBm/dBsm datasheet values."""
        return cls(
            f_c_hz=f_c_hz, delta_f_hz=delta_f_hz, l_cp=l_cp, t_rx_s=t_rx_s,
            n_subcarriers=int(n_subcarriers), m_symbols=int(m_symbols),
            p_tx_w=dbm_to_watt(p_tx_dbm),
            oip3_tx_w=dbm_to_watt(oip3_tx_dbm),
            iip3_rx_w=dbm_to_watt(iip3_rx_dbm),
            n_tx=int(n_tx), n_rx=int(n_rx),
            g_tx=db_to_lin(g_tx_db), g_rx=db_to_lin(g_rx_db),
            isolation=db_to_lin(isolation_db),
            c_total=db_to_lin(c_total_db),
            noise_psd_w_hz=dbm_to_watt(noise_psd_dbm_hz),
            noise_figure=db_to_lin(noise_figure_db),
            rcs_m2=db_to_lin(rcs_dbsm),
            gamma_min=db_to_lin(gamma_min_db),
        )

    def as_db_dict(self) -> dict:
        """Round-trip representation in dB units (inverse of from_db)."""
        return {
            "f_c_hz": float(self.f_c_hz), "delta_f_hz": float(self.delta_f_hz),
            "l_cp": float(self.l_cp), "t_rx_s": float(self.t_rx_s),
            "n_subcarriers": self.n_subcarriers, "m_symbols": self.m_symbols,
            "p_tx_dbm": float(watt_to_dbm(self.p_tx_w)),
            "oip3_tx_dbm": float(watt_to_dbm(self.oip3_tx_w)),
            "iip3_rx_dbm": float(watt_to_dbm(self.iip3_rx_w)),
            "n_tx": self.n_tx, "n_rx": self.n_rx,
            "g_tx_db": float(lin_to_db(self.g_tx)),
            "g_rx_db": float(lin_to_db(self.g_rx)),
            "isolation_db": float(lin_to_db(self.isolation)),
            "c_total_db": float(lin_to_db(self.c_total)),
            "noise_psd_dbm_hz": float(watt_to_dbm(self.noise_psd_w_hz)),
            "noise_figure_db": float(lin_to_db(self.noise_figure)),
            "rcs_dbsm": float(lin_to_db(self.rcs_m2)),
            "gamma_min_db": float(lin_to_db(self.gamma_min)),
        }

    def replace(self, **changes) -> "LinkBudgetParams":
        d = asdict(self)
        d.update(changes)
        return LinkBudgetParams(**d)


def default_params() -> LinkBudgetParams:
    """FR2 mmWave proof-of-concept configuration (27.6 GHz, mu=3 numerology).

    Matches a commercial 5G radio-unit deployment: 200 MHz of used
    bandwidth (1584 subcarriers at 120 kHz), 832 downlink symbols per
    10 ms frame, small-UAV cross section of -17 dBsm and a 17 dB
    detection threshold.
    """
    return LinkBudgetParams.from_db(
        f_c_hz=27.6e9, delta_f_hz=120e3, l_cp=1.0 / 14.0, t_rx_s=0.0,
        n_subcarriers=1584, m_symbols=832,
        p_tx_dbm=28.1, oip3_tx_dbm=23.1, iip3_rx_dbm=-13.3,
        n_tx=96, n_rx=96, g_tx_db=23.4, g_rx_db=23.4,
        isolation_db=103.0, c_total_db=85.0,
        noise_psd_dbm_hz=-174.0, noise_figure_db=5.0,
        rcs_dbsm=-17.0, gamma_min_db=17.0,
    )


@dataclass(frozen=True)
class InterferencePsd:
    """Noise-plus-interference PSD decomposition at the receiver input, W/Hz."""

    n0_rx: float   # thermal noise scaled by the Rx noise figure
    s3_tx: float   # 3rd order intermodulation of the Tx PA
    s3_rx: float   # 3rd order intermodulation of the Rx LNA
    s_total: float


def interference_psd(p: LinkBudgetParams) -> InterferencePsd:
    """Receiver-referred noise and intermodulation PSDs.

    The intermodulation PSDs follow the intercept-point power law
    P3 = P_rx / (IP3 / P_drive)^2, with the PA driven at the per-radiator
    output power and the LNA at the per-radiator input power; division by
    the used bandwidth N*delta_f converts powers to PSDs.  Only the 3rd
    order products matter in practice, higher orders are ignored.
    """
    n0_rx = p.noise_psd_w_hz * p.noise_figure
    bandwidth = p.n_subcarriers * p.delta_f_hz
    p_pa_out = p.p_tx_w / p.n_tx
    p_lna_in = p.p_tx_w * (1.0 / (p.c_total * p.n_rx) + 1.0 / p.isolation)
    p_rx = p.p_tx_w * (1.0 / p.c_total + 1.0 / p.isolation)
    s3_tx = p_rx / (p.oip3_tx_w / p_pa_out) ** 2 / bandwidth
    s3_rx = p_rx / (p.iip3_rx_w / p_lna_in) ** 2 / bandwidth
    return InterferencePsd(n0_rx=n0_rx, s3_tx=s3_tx, s3_rx=s3_rx,
                           s_total=n0_rx + s3_tx + s3_rx)


def snr_at_unit_range(p: LinkBudgetParams,
                      psd: InterferencePsd | None = None,
                      thermal_only: bool = False) -> float:
    """SNR at 1 m range, in m^4 (divide by r^4 for the SNR at range r).

    Combines the transmitted sensing energy P_tx*M/delta_f with the
    two-way coupling loss at unit range and the interference floor.
    With ``thermal_only`` the intermodulation terms are excluded.
    """
    if psd is None:
        psd = interference_psd(p)
    floor = psd.n0_rx if thermal_only else psd.s_total
    wavelength_sq = (C / p.f_c_hz) ** 2
    return (p.p_tx_w * (p.m_symbols / p.delta_f_hz)
            * p.g_tx * p.g_rx * p.rcs_m2 * wavelength_sq
            / (4.0 * math.pi) ** 3 / floor)


def r_star(p: LinkBudgetParams, psd: InterferencePsd | None = None) -> float:
    """Achievable distance with the receive window shifted onto the echo.

    Fourth root of SNR at unit range over the detection threshold; the
    receive-window truncation applied by :func:`max_range` is not yet
    included here.
    """
    return (snr_at_unit_range(p, psd) / p.gamma_min) ** 0.25


@dataclass(frozen=True)
class RangeWindowModel:
    """Characteristic ranges of the receive-window geometry, meters.

    ``r_low`` is stored unclamped (negative when the window starts at or
    before the transmit instant); use :attr:`r_low_clamped` for reporting.
    ``a`` is the window-truncation parameter r*^2 / (2 r_sym).
    """

    r_sym: float    # delay equals the useful symbol / receive window length
    r_0: float      # delay equals the full symbol including CP
    r_cp: float     # delay equals the CP length
    r_rx: float     # extra range bought by delaying the receive window
    r_low: float    # below this nothing falls into the window (may be < 0)
    r_limit: float  # above this nothing falls into the window
    a: float

    @property
    def r_low_clamped(self) -> float:
        return max(self.r_low, 0.0)

    def overlap_fraction(self, r):
        """Fraction of the echo magnitude captured by the receive window.

        Piecewise linear in range: zero at/below ``r_low``, ramping to 1
        at ``r_rx``, flat 1 while the CP absorbs the delay, then ramping
        back to zero at ``r_limit``.  Vectorized over ``r``.
        """
        r = np.asarray(r, dtype=float)
        near = (r - self.r_low) / self.r_sym
        far = (self.r_limit - r) / self.r_sym
        w = np.minimum(1.0, np.minimum(near, far))
        w = np.maximum(w, 0.0)
        return w if w.ndim else float(w)


def range_window(p: LinkBudgetParams, r_star_m: float | None = None) -> RangeWindowModel:
    """Window geometry for the given parameters (and optional r*)."""
    r_sym = C / (2.0 * p.delta_f_hz)
    r_0 = (1.0 + p.l_cp) * r_sym
    r_cp = p.l_cp * r_sym
    r_rx = p.t_rx_s * C / 2.0
    if r_star_m is None:
        r_star_m = r_star(p)
    return RangeWindowModel(
        r_sym=r_sym, r_0=r_0, r_cp=r_cp, r_rx=r_rx,
        r_low=r_rx - r_sym, r_limit=r_rx + r_0,
        a=r_star_m ** 2 / (2.0 * r_sym),
    )


@dataclass(frozen=True)
class MaxRangeResult:
    r_max: float
    branch: str                 # one of BRANCH_NEAR / BRANCH_CP / BRANCH_FAR
    window: RangeWindowModel
    r_star: float
    out_of_window: bool         # r_max fell outside (r_low, r_limit)


def max_range(p: LinkBudgetParams, r_star_min: float | None = None) -> MaxRangeResult:
    """Maximum detectable distance under the limited receive window.

    Three regimes depending on where r* lands: echoes arriving before
    the (delayed) window are truncated at the front (``near``), echoes
    within the CP budget are untouched (``cp``, r_max = r*), and longer
    delays are truncated at the back of the window (``far``).  The lower
    bound of the near regime defaults to max(r_low, 0); it is not pinned
    down by the window geometry alone and can be overridden.
    """
    rs = r_star(p)
    w = range_window(p, rs)
    if r_star_min is None:
        r_star_min = max(w.r_low, 0.0)
    a = w.a
    if rs < w.r_rx:
        branch = BRANCH_NEAR
        r_max = a + math.sqrt(a * a - 2.0 * a * (w.r_rx - w.r_sym))
    elif rs <= w.r_rx + w.r_cp:
        branch = BRANCH_CP
        r_max = rs
    else:
        branch = BRANCH_FAR
        r_max = -a + math.sqrt(a * a + 2.0 * a * (w.r_rx + w.r_0))
    out = (rs < r_star_min) or not (w.r_low < r_max < w.r_limit)
    return MaxRangeResult(r_max=r_max, branch=branch, window=w,
                          r_star=rs, out_of_window=out)


def expected_sinr_at_range(p: LinkBudgetParams, r_m: float,
                           windowed: bool = True,
                           thermal_only: bool = False) -> float:
    """Expected SINR in dB for an echo at range ``r_m``.

    The r^-4 law scaled from the unit-range SNR; with ``windowed`` the
    squared receive-window overlap fraction is applied on top, which is
    what a correlation peak in the processed frame actually sees.
    Raises for ranges outside the observable window.
    """
    w = range_window(p, r_star_m=1.0)
    if not max(w.r_low, 0.0) < r_m < w.r_limit:
        raise ValueError(
            f"range {r_m} m outside observable window "
            f"({w.r_low_clamped:.1f}, {w.r_limit:.1f}) m")
    snr0 = snr_at_unit_range(p, thermal_only=thermal_only)
    sinr = snr0 / r_m ** 4
    if windowed:
        sinr *= w.overlap_fraction(r_m) ** 2
    return lin_to_db(sinr)


def sinr_curves(p: LinkBudgetParams, ranges_m) -> dict:
    """SINR-vs-range curves for model comparison plots / CSV export.

    Returns arrays over ``ranges_m`` with NaN outside the observable
    window: the pure r^-4 model, the window-limited variant, and the
    thermal-noise-only SNR.
    """
    ranges_m = np.asarray(ranges_m, dtype=float)
    w = range_window(p, r_star_m=1.0)
    valid = (ranges_m > w.r_low) & (ranges_m < w.r_limit) & (ranges_m > 0)
    snr0 = snr_at_unit_range(p)
    snr0_thermal = snr_at_unit_range(p, thermal_only=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        base = np.where(valid, snr0 / ranges_m ** 4, np.nan)
        frac = w.overlap_fraction(ranges_m)
        windowed = np.where(valid, base * frac ** 2, np.nan)
        thermal = np.where(valid, snr0_thermal / ranges_m ** 4, np.nan)
    return {
        "range_m": ranges_m,
        "sinr_db_model": lin_to_db(base),
        "sinr_db_windowed": lin_to_db(windowed),
        "snr_db_thermal_only": lin_to_db(thermal),
    }
