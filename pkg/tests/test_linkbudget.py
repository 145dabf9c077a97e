import math

import numpy as np
import pytest

from isacsim import (default_params, expected_sinr_at_range, interference_psd,
                     max_range, r_star, range_window, sinr_curves,
                     snr_at_unit_range)
from isacsim.linkbudget import BRANCH_CP, BRANCH_FAR, LinkBudgetParams
from isacsim.units import db_to_lin, dbm_to_watt, lin_to_db, watt_to_dbm

# Golden PSD values frozen from an independent step-by-step dB-arithmetic
# evaluation of the intercept-point power law (see docstring of
# interference_psd): P_PAout = 8.277288 dBm, P_Rx = -56.831709 dBm,
# P_LNAin = -72.706127 dBm, bandwidth 1584*120 kHz.
GOLDEN_S3_TX_W_HZ = 1.183996010e-20   # -169.266498 dBm/Hz
GOLDEN_S3_RX_W_HZ = 1.434390204e-29   # -258.433327 dBm/Hz
GOLDEN_N0_RX_W_HZ = 1.258925412e-20   # -169.0 dBm/Hz


class TestInterferencePsd:
    def test_thermal_floor_is_direct_product(self, params):
        psd = interference_psd(params)
        assert watt_to_dbm(psd.n0_rx) == pytest.approx(-174.0 + 5.0, abs=1e-9)

    def test_golden_intermod_psds(self, params):
        psd = interference_psd(params)
        assert psd.s3_tx == pytest.approx(GOLDEN_S3_TX_W_HZ, rel=1e-8)
        assert psd.s3_rx == pytest.approx(GOLDEN_S3_RX_W_HZ, rel=1e-8)
        assert psd.n0_rx == pytest.approx(GOLDEN_N0_RX_W_HZ, rel=1e-12)
        assert psd.s_total == pytest.approx(
            GOLDEN_N0_RX_W_HZ + GOLDEN_S3_TX_W_HZ + GOLDEN_S3_RX_W_HZ, rel=1e-8)

    def test_intermods_vanish_with_tx_power(self, params):
        quiet = params.replace(p_tx_w=1e-12)
        psd = interference_psd(quiet)
        assert psd.s_total == pytest.approx(psd.n0_rx, rel=1e-6)

    def test_intermods_scale_cubically(self, params):
        base = interference_psd(params)
        louder = interference_psd(params.replace(p_tx_w=2.0 * params.p_tx_w))
        assert louder.s3_tx / base.s3_tx == pytest.approx(8.0, rel=1e-9)
        assert louder.s3_rx / base.s3_rx == pytest.approx(8.0, rel=1e-9)

    def test_rejects_nonpositive_intercept(self, params):
        with pytest.raises(ValueError):
            params.replace(oip3_tx_w=0.0)
        with pytest.raises(ValueError):
            params.replace(iip3_rx_w=-1.0)


class TestParams:
    def test_db_roundtrip(self, params):
        d = params.as_db_dict()
        back = LinkBudgetParams.from_db(**d)
        assert back.p_tx_w == pytest.approx(params.p_tx_w, rel=1e-12)
        assert back.g_tx == pytest.approx(params.g_tx, rel=1e-12)
        assert back.rcs_m2 == pytest.approx(params.rcs_m2, rel=1e-12)
        assert back.gamma_min == pytest.approx(params.gamma_min, rel=1e-12)

    def test_validation(self, params):
        with pytest.raises(ValueError):
            params.replace(l_cp=1.0)
        with pytest.raises(ValueError):
            params.replace(t_rx_s=-1e-6)
        with pytest.raises(ValueError):
            params.replace(n_subcarriers=0)
        with pytest.raises(ValueError):
            params.replace(c_total=0.0)


class TestRStar:
    def test_fourth_root_law_in_tx_power(self, params):
        r0 = r_star(params)
        # scale SNR_0 via the RCS (the PSD must stay fixed; scaling P_Tx
        # also scales the intermodulation floor)
        r16 = r_star(params.replace(rcs_m2=16.0 * params.rcs_m2))
        assert r16 / r0 == pytest.approx(2.0, rel=1e-12)

    def test_threshold_fourth_root_law(self, params):
        r0 = r_star(params)
        harder = params.replace(gamma_min=params.gamma_min * db_to_lin(12.04119982655925))
        assert r0 / r_star(harder) == pytest.approx(2.0, rel=1e-9)

    def test_snr0_value(self, params):
        assert snr_at_unit_range(params) == pytest.approx(1.040462020e13, rel=1e-8)


class TestMaxRange:
    def test_poc_reproduction(self, params):
        res = max_range(params)
        assert res.branch == BRANCH_FAR
        assert res.r_max == pytest.approx(540.0, abs=5.0)
        assert res.window.r_cp == pytest.approx(89.3, abs=0.5)
        assert res.window.r_limit == pytest.approx(1339.0, abs=2.0)
        assert not res.out_of_window

    def test_middle_branch_is_identity(self, params):
        # shrink the RCS until r* lands inside [r_rx, r_rx + r_cp]
        small = params.replace(rcs_m2=params.rcs_m2 * 1e-4,
                               t_rx_s=0.3e-6)  # r_rx = 45 m
        res = max_range(small)
        w = res.window
        assert w.r_rx < res.r_star < w.r_rx + w.r_cp
        assert res.branch == BRANCH_CP
        assert res.r_max == res.r_star

    def test_branch_continuity(self, params):
        # evaluate both branch expressions exactly at the cp/far boundary
        w = range_window(params)
        boundary = w.r_rx + w.r_cp
        a = boundary ** 2 / (2.0 * w.r_sym)
        far = -a + math.sqrt(a * a + 2.0 * a * (w.r_rx + w.r_0))
        assert far == pytest.approx(boundary, rel=1e-9)

    def test_near_branch_continuity(self, params):
        p = params.replace(t_rx_s=2e-6)   # r_rx = 300 m
        w = range_window(p)
        a = w.r_rx ** 2 / (2.0 * w.r_sym)
        near = a + math.sqrt(a * a - 2.0 * a * (w.r_rx - w.r_sym))
        assert near == pytest.approx(w.r_rx, rel=1e-9)

    def test_monotonicity_sweeps(self, params):
        rng = np.random.default_rng(42)
        for _ in range(40):
            scale = float(rng.uniform(0.25, 4.0))
            base = params.replace(rcs_m2=params.rcs_m2 * float(rng.uniform(0.5, 2.0)))
            for attr, increasing in [("rcs_m2", True), ("g_tx", True),
                                     ("g_rx", True), ("gamma_min", False),
                                     ("noise_figure", False)]:
                lo = max_range(base).r_max
                hi = max_range(base.replace(**{attr: getattr(base, attr) * (1 + scale)})).r_max
                if increasing:
                    assert hi >= lo - 1e-9
                else:
                    assert hi <= lo + 1e-9

    def test_tx_power_monotone_for_linear_amplifiers(self, params):
        # with the intermodulation floor active, more Tx power eventually
        # HURTS (the 3rd-order products grow cubically); the textbook
        # monotonicity only holds for ideal amplifiers
        linear = params.replace(oip3_tx_w=1e6, iip3_rx_w=1e6)
        last = 0.0
        for scale in (0.5, 1.0, 2.0, 4.0, 8.0):
            r = max_range(linear.replace(p_tx_w=params.p_tx_w * scale)).r_max
            assert r >= last - 1e-9
            last = r
        # and the non-monotone regime really exists in the nominal setup
        nominal = max_range(params).r_max
        overdriven = max_range(params.replace(p_tx_w=params.p_tx_w * 10.0)).r_max
        assert overdriven < nominal

    def test_window_geometry(self, params):
        w = range_window(params)
        c = 299792458.0
        assert w.r_sym == pytest.approx(c / (2 * params.delta_f_hz), rel=1e-12)
        assert w.r_0 == pytest.approx((1 + params.l_cp) * w.r_sym, rel=1e-12)
        assert w.r_cp == pytest.approx(params.l_cp * w.r_sym, rel=1e-12)
        assert w.r_low < w.r_cp + w.r_rx < w.r_limit
        assert w.r_low_clamped == 0.0


class TestExpectedSinr:
    def test_sinr_at_rmax_is_threshold(self, params):
        res = max_range(params)
        sinr = expected_sinr_at_range(params, res.r_max)
        assert sinr == pytest.approx(lin_to_db(params.gamma_min), abs=0.1)

    def test_windowed_matches_plain_inside_cp(self, params):
        w = range_window(params)
        for r in (10.0, 40.0, w.r_cp - 1.0):
            assert expected_sinr_at_range(params, r, windowed=True) == \
                pytest.approx(expected_sinr_at_range(params, r, windowed=False),
                              abs=1e-12)

    def test_r4_law(self, params):
        r = 30.0  # both r and 2r inside the CP range
        drop = expected_sinr_at_range(params, 2 * r) - expected_sinr_at_range(params, r)
        assert drop == pytest.approx(-12.0412, abs=1e-3)

    def test_out_of_window_raises(self, params):
        w = range_window(params)
        with pytest.raises(ValueError):
            expected_sinr_at_range(params, w.r_limit + 1.0)
        with pytest.raises(ValueError):
            expected_sinr_at_range(params, -5.0)

    def test_overlap_fraction_shape(self, params):
        w = range_window(params)
        r = np.array([1.0, w.r_cp, (w.r_cp + w.r_limit) / 2, w.r_limit, 2000.0])
        frac = w.overlap_fraction(r)
        assert frac[0] == 1.0 and frac[1] == pytest.approx(1.0)
        assert 0.0 < frac[2] < 1.0
        assert frac[3] == 0.0 and frac[4] == 0.0

    def test_thermal_only_curve_dominates(self, params):
        curves = sinr_curves(params, np.linspace(10.0, 1300.0, 100))
        ok = np.isfinite(curves["sinr_db_model"])
        assert np.all(curves["snr_db_thermal_only"][ok]
                      >= curves["sinr_db_model"][ok])


def test_dbm_watt_roundtrip():
    for x in (-174.0, -56.831708717, 0.0, 28.1):
        assert watt_to_dbm(dbm_to_watt(x)) == pytest.approx(x, abs=1e-12)
    for x in (1e-20, 1.0, 645.654229):
        assert dbm_to_watt(watt_to_dbm(x)) == pytest.approx(x, rel=1e-12)
