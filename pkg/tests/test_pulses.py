import numpy as np
import pytest

from rydcz import pulses
from rydcz.pulses import (
    TWO_PI,
    CalibrationError,
    DegeneracyError,
    ECDParams,
    ErrorModel,
    PiecewiseControl,
    PulseError,
    SweepParams,
)

T = 0.54e-6
V500 = TWO_PI * 500e6


# ---------------------------------------------------------------------------
# sweep waveforms
# ---------------------------------------------------------------------------

class TestSaffmanSweep:
    def test_rabi_boundary_zeros(self, sweep_s1):
        tol = 1e-9 * sweep_s1.omega_max
        for t in (0.0, T / 2, T):
            assert abs(pulses.saffman_rabi(t, sweep_s1)) < tol

    def test_rabi_peaks_at_centers(self, sweep_s1):
        assert pulses.saffman_rabi(T / 4, sweep_s1) == pytest.approx(sweep_s1.omega_max)
        assert pulses.saffman_rabi(3 * T / 4, sweep_s1) == pytest.approx(sweep_s1.omega_max)

    def test_rabi_continuous_on_grid(self, sweep_s1):
        ts = np.linspace(0.0, T, 4001)
        vals = pulses.saffman_rabi(ts, sweep_s1)
        # max step bounded by derivative scale ~ Omega_max/tau
        assert np.abs(np.diff(vals)).max() < 3 * sweep_s1.omega_max / sweep_s1.tau * (T / 4000)

    def test_rabi_domain_error(self, sweep_s1):
        with pytest.raises(PulseError):
            pulses.saffman_rabi(-0.01 * T, sweep_s1)
        with pytest.raises(PulseError):
            pulses.saffman_rabi(1.01 * T, sweep_s1)

    def test_detuning_anchor_values(self, sweep_s1):
        dm = sweep_s1.delta_max
        assert pulses.saffman_detuning(T / 4, sweep_s1) == pytest.approx(0.0, abs=1e-6 * dm)
        assert pulses.saffman_detuning(0.0, sweep_s1) == pytest.approx(-dm)
        just_below_half = T / 2 * (1 - 1e-12)
        assert pulses.saffman_detuning(just_below_half, sweep_s1) == pytest.approx(dm, rel=1e-9)
        # second half restarts the sweep at -Delta_max
        assert pulses.saffman_detuning(T / 2 + 1e-15 * T, sweep_s1) == pytest.approx(-dm, rel=1e-6)

    def test_detuning_domain_error(self, sweep_s1):
        with pytest.raises(PulseError):
            pulses.saffman_detuning(2 * T, sweep_s1)

    def test_sweep_params_validation(self):
        with pytest.raises(PulseError):
            SweepParams(omega_max=1.0, delta_max=1.0, T=-1.0)
        with pytest.raises(PulseError):
            SweepParams(omega_max=-1.0, delta_max=1.0, T=1e-6)

    def test_from_scale_amplitudes(self):
        p = SweepParams.from_scale(4.8, T)
        assert p.omega_max == pytest.approx(4.8 * TWO_PI * 17e6)
        assert p.delta_max == pytest.approx(4.8 * TWO_PI * 23e6)
        assert p.tau == pytest.approx(0.175 * T)


class TestSmoothedPulse:
    def test_coefficients_solve_boundary_conditions(self, sweep_s1):
        # closed forms from the two linear edge equations, checked against
        # direct evaluation: a = exp(-t0^4/tau^4), b = -(2 t0^2/tau^4) a
        c = pulses.smoothed_rabi_coeffs(sweep_s1, T / 4)
        t0, tau = T / 4, sweep_s1.tau
        assert c.a == pytest.approx(np.exp(-(t0 / tau) ** 4), rel=1e-14)
        assert c.b == pytest.approx(-(2 * t0**2 / tau**4) * np.exp(-(t0 / tau) ** 4), rel=1e-14)

    def test_value_and_slope_vanish_at_edges(self, sweep_s1):
        om = sweep_s1.omega_max
        for t_edge in (0.0, T / 2, T):
            assert abs(pulses.smoothed_rabi(t_edge, sweep_s1)) < 1e-9 * om
        h = 1e-7 * T
        for t_edge, sgn in ((0.0, 1), (T / 2, -1), (T / 2, 1), (T, -1)):
            t1, t2 = t_edge, t_edge + sgn * h
            d = (pulses.smoothed_rabi(t2, sweep_s1) - pulses.smoothed_rabi(t1, sweep_s1)) / (t2 - t1)
            assert abs(d) < 1e-4 * om / T

    def test_normalization_hits_omega_max(self, sweep_s1):
        ts = np.linspace(0.0, T / 2, 200001)
        peak = pulses.smoothed_rabi(ts, sweep_s1).max()
        assert peak == pytest.approx(sweep_s1.omega_max, rel=1e-6)

    def test_derivative_matches_finite_differences(self, sweep_s1):
        ts = np.linspace(0.05 * T, 0.45 * T, 17)
        h = 1e-8 * T
        fd = (pulses.smoothed_rabi(ts + h, sweep_s1) - pulses.smoothed_rabi(ts - h, sweep_s1)) / (2 * h)
        an = pulses.smoothed_rabi_derivative(ts, sweep_s1)
        assert np.abs(fd - an).max() < 1e-5 * sweep_s1.omega_max / T

    def test_degenerate_tau_rejected(self):
        with pytest.raises(PulseError):
            SweepParams(omega_max=1.0, delta_max=1.0, T=1e-6, tau=0.0)

    def test_bad_center_rejected(self, sweep_s1):
        with pytest.raises(PulseError):
            pulses.smoothed_rabi_coeffs(sweep_s1, 0.4 * T)


# ---------------------------------------------------------------------------
# counterdiabatic coefficients
# ---------------------------------------------------------------------------

class TestCDAnalytic:
    def test_constant_waveforms_give_zero(self):
        assert pulses.cd_coefficient_from_values(1e7, 0.0, 2e7, 0.0, 0, eps=1.0) == 0.0
        assert pulses.cd_coefficient_from_values(1e7, 0.0, 2e7, 0.0, 1, eps=1.0) == 0.0

    def test_k1_equals_k0_with_scaled_rabi(self, sweep_s1):
        ts = np.linspace(0.0, T, 101)
        om = pulses.smoothed_rabi(ts, sweep_s1)
        dom = pulses.smoothed_rabi_derivative(ts, sweep_s1)
        de = pulses.saffman_detuning(ts, sweep_s1)
        dde = pulses.saffman_detuning_derivative(ts, sweep_s1)
        eps = 1e-6 * max(sweep_s1.omega_max, sweep_s1.delta_max)
        f1 = pulses.cd_coefficient_analytic(ts, 1, sweep_s1)
        f0_scaled = pulses.cd_coefficient_from_values(
            np.sqrt(2) * om, np.sqrt(2) * dom, de, dde, 0, eps)
        assert np.allclose(f1, f0_scaled, rtol=0, atol=1e-12 * np.abs(f1).max())

    def test_zero_rabi_zero_detuning_slope_case(self):
        # f reduces to Delta dOmega / Delta^2 when Omega = 0 and dDelta = 0
        delta, domega = -2.0e8, 3.0e15
        got = pulses.cd_coefficient_from_values(0.0, domega, delta, 0.0, 0, eps=1.0)
        assert got == pytest.approx(domega / delta, rel=1e-14)

    def test_epsilon_floor_returns_zero(self):
        assert pulses.cd_coefficient_from_values(1e-9, 1.0, 1e-9, 1.0, 0, eps=1e-3) == 0.0

    def test_invalid_k(self, sweep_s1):
        with pytest.raises(PulseError):
            pulses.cd_coefficient_analytic(0.1 * T, 2, sweep_s1)

    def test_symmetry_structure(self, sweep_s1):
        # with Delta odd and Omega even about each center, both numerator
        # terms are even, so f is even about each t0 and the two half
        # pulses carry identical profiles
        us = np.linspace(-0.24, 0.24, 49) * T / 2
        for k in (0, 1):
            left = pulses.cd_coefficient_analytic(T / 4 + us, k, sweep_s1)
            right = pulses.cd_coefficient_analytic(T / 4 - us, k, sweep_s1)
            scale = np.abs(left).max()
            assert np.abs(left - right).max() < 1e-7 * scale
            h1 = pulses.cd_coefficient_analytic(T / 4 + us, k, sweep_s1)
            h2 = pulses.cd_coefficient_analytic(3 * T / 4 + us, k, sweep_s1)
            assert np.abs(h1 - h2).max() < 1e-7 * scale

    def test_nonpositive_along_sweep(self, sweep_s1):
        ts = np.linspace(0.0, T, 2001)
        for k in (0, 1):
            f = pulses.cd_coefficient_analytic(ts, k, sweep_s1)
            assert f.max() <= 1e-9 * np.abs(f).min() + 1e-6 / T


class TestCDNumeric:
    def test_strong_blockade_agreement_and_trend(self, sweep_s1):
        ts = np.linspace(0.02 * T, 0.48 * T, 12)
        worst = {}
        for v_mhz in (250, 500, 1000, 5000):
            V = TWO_PI * v_mhz * 1e6
            rel = []
            for t in ts:
                fn = pulses.cd_coefficient_numeric(t, sweep_s1, V)
                for k, f_num in enumerate(fn):
                    f_an = pulses.cd_coefficient_analytic(t, k, sweep_s1)
                    if abs(f_an) > 1e-3 / T:
                        rel.append(abs(f_num - f_an) / abs(f_an))
            worst[v_mhz] = max(rel)
        assert worst[5000] < 0.01
        assert worst[250] > worst[500] > worst[1000] > worst[5000]
        assert worst[500] > worst[5000]

    def test_time_independent_hamiltonian_gives_zero(self):
        h0 = np.diag([0.0, 1.0e8, 3.0e8]) + 2.0e7 * (np.eye(3, k=1) + np.eye(3, k=-1))
        cd = pulses.counterdiabatic_matrix(lambda t: h0, 0.5, 1e-6)
        assert np.abs(cd).max() < 1e-6

    def test_halving_h_is_second_order(self, sweep_s1):
        t = 0.17 * T
        ref = pulses.cd_coefficient_numeric(t, sweep_s1, V500, h=1e-6 * T)
        err = []
        for h in (4e-4 * T, 2e-4 * T, 1e-4 * T):
            fn = pulses.cd_coefficient_numeric(t, sweep_s1, V500, h=h)
            err.append(abs(fn[0] - ref[0]) + abs(fn[1] - ref[1]))
        assert err[0] / err[1] == pytest.approx(4.0, rel=0.15)
        assert err[1] / err[2] == pytest.approx(4.0, rel=0.15)

    def test_degeneracy_detected(self):
        def h_crossing(t):
            return np.diag([t - 0.5, 0.5 - t]).astype(complex)

        with pytest.raises(DegeneracyError):
            pulses.counterdiabatic_matrix(h_crossing, 0.5, 1e-6, gap_tol=1e-3)


# ---------------------------------------------------------------------------
# eCD controls and calibration
# ---------------------------------------------------------------------------

class TestECDControls:
    def test_zero_coefficients_give_zero_triple(self, sweep_s1):
        e = ECDParams(osc_freq=TWO_PI * 100e6, blockade=V500)
        for g in pulses.controls_from_amplitudes(0.0, 0.0, e.osc_freq, 0.3 * T):
            assert g == 0.0
        # at the half-pulse edge f vanishes up to float cancellation, which
        # the square root amplifies; compare against the drive scale
        g1, g2, g3 = pulses.ecd_controls(0.0, sweep_s1, e)
        for g in (g1, g2, g3):
            assert abs(g) < 1e-6 * sweep_s1.omega_max

    def test_envelope_matches_coefficient(self, sweep_s1):
        e = ECDParams(osc_freq=TWO_PI * 100e6, blockade=V500)
        t = 0.2 * T
        a0, a1 = pulses.ecd_amplitudes(t, sweep_s1, e)
        f0 = pulses.cd_coefficient_analytic(t, 0, sweep_s1)
        f1 = pulses.cd_coefficient_analytic(t, 1, sweep_s1)
        assert abs(a0) == pytest.approx(np.sqrt(e.osc_freq * abs(f0)), rel=1e-12)
        assert abs(a1) == pytest.approx(np.sqrt(e.osc_freq * abs(f1) / np.sqrt(2)), rel=1e-12)
        assert np.sign(a0) == np.sign(f0)

    def test_doubling_frequency_scales_envelopes(self, sweep_s1):
        t = 0.2 * T
        e1 = ECDParams(osc_freq=TWO_PI * 100e6, blockade=V500)
        e2 = ECDParams(osc_freq=TWO_PI * 200e6, blockade=V500)
        a0_1, a1_1 = pulses.ecd_amplitudes(t, sweep_s1, e1)
        a0_2, a1_2 = pulses.ecd_amplitudes(t, sweep_s1, e2)
        assert a0_2 == pytest.approx(np.sqrt(2) * a0_1, rel=1e-12)
        assert a1_2 == pytest.approx(np.sqrt(2) * a1_1, rel=1e-12)

    def test_triple_assembly(self, sweep_s1):
        e = ECDParams(osc_freq=TWO_PI * 100e6, blockade=V500)
        t = 0.13 * T
        a0, a1 = pulses.ecd_amplitudes(t, sweep_s1, e)
        g1, g2, g3 = pulses.ecd_controls(t, sweep_s1, e)
        w = e.osc_freq
        assert g1 == pytest.approx(a0 * np.sin(w * t))
        assert g2 == pytest.approx(a1 * np.cos(w * t))
        assert g3 == pytest.approx(-a1 * np.sin(w * t) + a0 * np.cos(w * t))

    def test_slow_oscillation_warns(self, sweep_s1):
        e = ECDParams(osc_freq=0.5 * TWO_PI / T, blockade=V500)
        with pytest.warns(UserWarning):
            pulses.ecd_controls(0.2 * T, sweep_s1, e)

    def test_osc_freq_must_be_positive(self):
        with pytest.raises(PulseError):
            ECDParams(osc_freq=0.0, blockade=V500)


class TestCalibration:
    def test_quadratic_scaling(self, sweep_s1):
        w1 = pulses.calibrate_osc_freq(sweep_s1.omega_max, sweep_s1)
        w2 = pulses.calibrate_osc_freq(2 * sweep_s1.omega_max, sweep_s1)
        assert w2 == pytest.approx(4.0 * w1, rel=1e-12)

    def test_envelope_hits_target(self, sweep_s1):
        target = sweep_s1.omega_max
        w = pulses.calibrate_osc_freq(target, sweep_s1)
        e = ECDParams(osc_freq=w, blockade=V500)
        ts = np.linspace(0.0, T, 20001)
        a0, a1 = pulses.ecd_amplitudes(ts, sweep_s1, e)
        largest = np.sqrt(a0**2 + a1**2).max()  # g3 envelope dominates
        assert largest == pytest.approx(target, rel=1e-3)

    def test_reference_point_value(self, sweep_s1):
        # frozen regression anchor for the Fig.2 working point
        w = pulses.calibrate_osc_freq(sweep_s1.omega_max, sweep_s1)
        assert np.isfinite(w)
        assert w > TWO_PI / T
        assert w == pytest.approx(391118342.698, rel=1e-6)

    def test_zero_target_rejected(self, sweep_s1):
        with pytest.raises(CalibrationError):
            pulses.calibrate_osc_freq(0.0, sweep_s1)


# ---------------------------------------------------------------------------
# band-limited piecewise controls
# ---------------------------------------------------------------------------

class TestBandLimit:
    CUT = TWO_PI * 20e6

    def make(self, values, n=64, T_ctrl=1e-6):
        return PiecewiseControl(n, np.asarray(values, dtype=float), T_ctrl, self.CUT)

    def test_constant_preserved(self):
        c = self.make(np.full(64, 2.5))
        out = pulses.band_limit(c)
        assert np.allclose(out.values, 2.5, atol=1e-12)

    def test_spike_spreads_with_preserved_integral(self):
        spike = np.zeros(64)
        spike[30] = 7.0
        out = pulses.band_limit(self.make(spike))
        # direct convolution oracle: circulant kernel = filtered unit spike
        w = pulses.band_limit_matrix(64, 1e-6, self.CUT)
        oracle = np.array([7.0 * w[j, 30] for j in range(64)])
        assert np.allclose(out.values, oracle, atol=1e-12)
        assert np.count_nonzero(np.abs(out.values) > 1e-6) > 10
        assert out.values.sum() == pytest.approx(spike.sum(), rel=1e-3)

    def test_tone_below_cutoff_preserved(self):
        n, T_ctrl = 128, 1e-6
        dt = T_ctrl / n
        k_pass = 2  # omega = 2pi*2 MHz << cutoff
        t = (np.arange(n) + 0.5) * dt
        tone = np.cos(TWO_PI * k_pass / T_ctrl * t)
        out = pulses.band_limit(PiecewiseControl(n, tone, T_ctrl, self.CUT))
        amp_in = np.abs(np.fft.rfft(tone))[k_pass]
        amp_out = np.abs(np.fft.rfft(out.values))[k_pass]
        assert amp_out == pytest.approx(amp_in, rel=0.02)

    def test_tone_above_cutoff_attenuated(self):
        n, T_ctrl = 128, 1e-6
        cutoff = TWO_PI * 10e6
        k_stop = 30  # 3x cutoff
        t = (np.arange(n) + 0.5) * (T_ctrl / n)
        tone = np.cos(TWO_PI * k_stop / T_ctrl * t)
        out = pulses.band_limit(PiecewiseControl(n, tone, T_ctrl, cutoff))
        amp_in = np.abs(np.fft.rfft(tone))[k_stop]
        amp_out = np.abs(np.fft.rfft(out.values))[k_stop]
        assert amp_out < amp_in / 10

    def test_linearity(self, rng):
        w = pulses.band_limit_matrix(64, 1e-6, self.CUT)
        x = rng.normal(size=64)
        y = rng.normal(size=64)
        a, b = 1.7, -0.4
        lhs = w @ (a * x + b * y)
        rhs = a * (w @ x) + b * (w @ y)
        assert np.abs(lhs - rhs).max() < 1e-10 * np.abs(lhs).max()

    def test_segment_count_floor(self):
        with pytest.raises(PulseError):
            PiecewiseControl(4, np.zeros(4), 1e-6, self.CUT)

    def test_cutoff_must_be_positive(self):
        with pytest.raises(PulseError):
            pulses.band_limit_matrix(64, 1e-6, -1.0)


# ---------------------------------------------------------------------------
# static error transforms
# ---------------------------------------------------------------------------

class TestErrorTransforms:
    def test_zero_errors_identity(self, sweep_s1):
        om = pulses.saffman_rabi(T / 4, sweep_s1)
        de = pulses.saffman_detuning(T / 4, sweep_s1)
        om2, de2 = pulses.apply_drive_errors((om, de), ErrorModel())
        assert om2 == om and de2 == de

    def test_amplitude_error_scales_peak(self, sweep_s1):
        om = pulses.saffman_rabi(T / 4, sweep_s1)
        om2, _ = pulses.apply_drive_errors((om, 0.0), ErrorModel(omega_rel=0.05))
        assert om2 == pytest.approx(1.05 * sweep_s1.omega_max)

    def test_detuning_offset_shifts_center(self, sweep_s1):
        de = pulses.saffman_detuning(T / 4, sweep_s1)
        _, de2 = pulses.apply_drive_errors((0.0, de), ErrorModel(delta_offset=TWO_PI * 1e6))
        assert de2 == pytest.approx(TWO_PI * 1e6, abs=1e-3)

    def test_ecd_errors(self):
        g1, g2, g3 = 3.0, -2.0, 5.0
        a, b, c = pulses.apply_ecd_errors(g1, g2, g3, ErrorModel())
        assert (a, b, c) == (3.0, -2.0, 5.0)
        a, b, c = pulses.apply_ecd_errors(g1, g2, g3, ErrorModel(omega_rel=-1.0))
        assert a == 0.0 and b == 0.0 and c == 5.0
        a, b, c = pulses.apply_ecd_errors(g1, g2, g3, ErrorModel(delta_offset=0.5))
        assert (a, b) == (3.0, -2.0) and c == 5.5
