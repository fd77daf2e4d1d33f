"""Tests for the 2x2 mixing channel, path model, and fractional delay."""

import numpy as np
import pytest

from rfcancel.channel import (
    MixingScenario,
    ModulatorResponse,
    PathModel,
    apply_path,
    fractional_delay,
    gain_from_db,
    mix,
    true_time_delay,
)
from rfcancel.errors import DelayTooLarge, RateMismatch, RfCancelError
from rfcancel.waveform import BasebandWaveform

from conftest import FS, fm_wave, tone_wave, white_wave


class TestModulatorResponse:
    def test_flat_is_unity(self):
        r = ModulatorResponse("flat")
        assert np.allclose(r.eval([0.0, 1e9, -3e9]), 1.0)

    def test_unity_at_dc(self):
        r = ModulatorResponse("butterworth_lowpass", f3db=9e9, order=4)
        assert abs(r.eval(0.0)[0]) == pytest.approx(1.0, abs=1e-12)

    def test_minus_3db_at_cutoff(self):
        r = ModulatorResponse("butterworth_lowpass", f3db=9e9, order=4)
        mag_db = 20 * np.log10(abs(r.eval(9e9)[0]))
        assert mag_db == pytest.approx(-3.0103, abs=0.05)

    def test_order4_at_twice_cutoff(self):
        """|H| at 2x f3db follows 10*log10(1 + (f/f3db)^(2*order))."""
        r = ModulatorResponse("butterworth_lowpass", f3db=9e9, order=4)
        mag_db = 20 * np.log10(abs(r.eval(18e9)[0]))
        assert mag_db == pytest.approx(-10 * np.log10(1 + 2**8), abs=0.2)

    def test_monotone_above_cutoff(self):
        r = ModulatorResponse("butterworth_lowpass", f3db=9e9, order=4)
        mags = np.abs(r.eval(np.linspace(9e9, 40e9, 50)))
        assert np.all(np.diff(mags) < 0)

    def test_hermitian_symmetry(self):
        r = ModulatorResponse("butterworth_lowpass", f3db=9e9, order=4)
        assert r.eval(-5e9)[0] == pytest.approx(np.conj(r.eval(5e9)[0]))

    def test_invalid_params(self):
        with pytest.raises(RfCancelError):
            ModulatorResponse("butterworth_lowpass", f3db=-1.0)
        with pytest.raises(RfCancelError):
            ModulatorResponse("butterworth_lowpass", f3db=1e9, order=0)
        with pytest.raises(RfCancelError):
            ModulatorResponse("gaussian")


class TestFractionalDelay:
    def test_integer_shift_exact(self):
        w = white_wave(4096)
        d = fractional_delay(w, 5 / FS)
        assert np.array_equal(d.samples[5:], w.samples[:-5])
        assert np.all(d.samples[:5] == 0)
        assert d.invalid_head >= 5

    def test_half_sample_tone_phase(self):
        """Phase matches exp(-j*2*pi*f*tau) within 1e-4 rad in passband."""
        tau = 0.5 / FS
        for fnorm in (0.05, 0.2, 0.4):
            w = tone_wave(fnorm * FS, n=8192)
            d = fractional_delay(w, tau)
            sl = slice(200, 8000)
            expect = w.samples[sl] * np.exp(-2j * np.pi * fnorm * FS * tau)
            err = np.max(np.abs(np.angle(d.samples[sl] * np.conj(expect))))
            assert err < 1e-4

    def test_group_delay_error_in_passband(self):
        """Group-delay error below 1e-3 samples for |f| < 0.4 fs."""
        tau = 7.25 / FS
        for fnorm in np.linspace(-0.4, 0.4, 9):
            if abs(fnorm) < 0.01:
                continue
            w = tone_wave(fnorm * FS, n=4096)
            d = fractional_delay(w, tau)
            sl = slice(300, 3800)
            phase = np.angle(np.vdot(w.samples[sl], d.samples[sl]))
            measured = -phase / (2 * np.pi * fnorm)  # mod 1/|fnorm| samples
            period = 1 / abs(fnorm)
            k = round((7.25 - measured) / period)
            assert abs(measured + k * period - 7.25) < 1e-3

    def test_round_trip(self):
        """Delay by +tau then -tau restores the passband within -80 dB."""
        w = white_wave(16384)
        # bandlimit to 0.35 fs
        taps = np.sinc(np.arange(-64, 65) * 0.7) * 0.7 * np.hanning(129)
        x = np.convolve(w.samples, taps, mode="same")
        w = BasebandWaveform(x, FS)
        d1 = fractional_delay(w, 7.3 / FS)
        d2 = fractional_delay(d1, -7.3 / FS)
        sl = slice(400, 16000)
        err = d2.samples[sl] - w.samples[sl]
        ratio = np.mean(np.abs(err) ** 2) / np.mean(np.abs(w.samples[sl]) ** 2)
        assert 10 * np.log10(ratio) < -80

    def test_negative_delay(self):
        w = white_wave(4096)
        d = fractional_delay(w, -3 / FS)
        assert np.array_equal(d.samples[:-3], w.samples[3:])
        assert d.invalid_tail >= 3

    def test_delay_too_large(self):
        w = white_wave(256)
        with pytest.raises(DelayTooLarge):
            fractional_delay(w, 257 / FS)

    def test_true_time_delay_rotates_carrier(self):
        w = tone_wave(1e6, n=4096, center_freq=2.4e9)
        tau = 2.5 / FS
        d = true_time_delay(w, tau)
        sl = slice(200, 3900)
        expect = (w.samples[sl] * np.exp(-2j * np.pi * 1e6 * tau)
                  * np.exp(-2j * np.pi * 2.4e9 * tau))
        assert np.max(np.abs(d.samples[sl] - expect)) < 1e-3


class TestApplyPath:
    def test_identity(self):
        w = white_wave(4096)
        out = apply_path(w, PathModel(gain=1.0))
        assert np.array_equal(out.samples, w.samples)

    def test_tone_delay_phase(self):
        """Delay theorem on a baseband tone, mid-record, exact shift."""
        f = 3e6
        tau = 12 / FS
        w = tone_wave(f, n=16384)
        out = apply_path(w, PathModel(gain=1.0, delay=tau))
        sl = slice(300, 16000)
        expect = w.samples[sl] * np.exp(-2j * np.pi * f * tau)
        assert np.max(np.abs(out.samples[sl] - expect)) < 1e-6

    def test_tone_fractional_delay_phase(self):
        """Fractional delays hold the theorem at the interpolator tolerance."""
        f = 3e6
        tau = 12.25 / FS
        w = tone_wave(f, n=16384)
        out = apply_path(w, PathModel(gain=1.0, delay=tau))
        sl = slice(300, 16000)
        expect = w.samples[sl] * np.exp(-2j * np.pi * f * tau)
        phase_err = np.max(np.abs(np.angle(out.samples[sl] * np.conj(expect))))
        assert phase_err < 1e-4

    def test_butterworth_3db_through_path(self):
        resp = ModulatorResponse("butterworth_lowpass", f3db=9e9, order=4)
        w = tone_wave(2e6, n=8192, center_freq=9e9 - 2e6)
        out = apply_path(w, PathModel(gain=1.0, response=resp))
        ratio_db = 20 * np.log10(
            np.sqrt(out.power() / w.power())
        )
        assert ratio_db == pytest.approx(-3.0103, abs=0.05)

    def test_noise_psd_scaling(self):
        w = BasebandWaveform(np.zeros(1 << 16, dtype=complex) + 1.0, FS)
        psd = 1e-9
        out = apply_path(w, PathModel(gain=1.0, noise_psd=psd),
                         np.random.default_rng(3))
        noise_power = np.mean(np.abs(out.samples - 1.0) ** 2)
        assert noise_power == pytest.approx(psd * FS, rel=0.05)

    def test_zero_gain(self):
        w = white_wave(1024)
        out = apply_path(w, PathModel(gain=0.0))
        assert np.all(out.samples == 0)

    def test_delay_exceeds_duration(self):
        w = white_wave(128)
        with pytest.raises(DelayTooLarge):
            apply_path(w, PathModel(gain=1.0, delay=129 / FS))


class TestMix:
    def _scenario(self, a11=1.0, a12=1.0, a22=1.0, seed=0):
        return MixingScenario(
            a11=PathModel(gain=a11),
            a12=PathModel(gain=a12),
            a21=PathModel(gain=0.0),
            a22=PathModel(gain=a22),
            reference_mode=True,
            seed=seed,
        )

    def test_no_interference_in_r_l_when_a12_zero(self):
        soi = white_wave(100_000, seed=1)
        intf = fm_wave(100_000, seed=2)
        r_l, _ = mix(soi, intf, self._scenario(a12=0.0))
        rho = abs(np.vdot(r_l.samples, intf.samples)) / (
            np.linalg.norm(r_l.samples) * np.linalg.norm(intf.samples)
        )
        assert rho < 0.01

    def test_reference_is_soi_free(self):
        soi = white_wave(100_000, seed=1)
        intf = fm_wave(100_000, seed=2)
        _, r_h = mix(soi, intf, self._scenario())
        rho = abs(np.vdot(r_h.samples, soi.samples)) / (
            np.linalg.norm(r_h.samples) * np.linalg.norm(soi.samples)
        )
        assert rho < 0.01

    def test_power_addition(self):
        """Independent unit-power sources add their gain-squared powers."""
        soi = white_wave(1 << 17, seed=1)
        intf = fm_wave(1 << 17, seed=2)
        g11, g12 = 0.8, 1.7
        r_l, _ = mix(soi, intf, self._scenario(a11=g11, a12=g12))
        assert r_l.power() == pytest.approx(g11**2 + g12**2, rel=0.02)

    def test_linearity(self):
        soi = white_wave(4096, seed=1)
        intf = fm_wave(4096, seed=2)
        sc = self._scenario(a11=0.9, a12=1.2 * np.exp(0.4j))
        r_l1, r_h1 = mix(soi, intf, sc)
        alpha = 2.5 - 1.0j
        soi2 = soi.with_samples(alpha * soi.samples)
        intf2 = intf.with_samples(alpha * intf.samples)
        r_l2, r_h2 = mix(soi2, intf2, sc)
        assert np.max(np.abs(r_l2.samples - alpha * r_l1.samples)) < 1e-12
        assert np.max(np.abs(r_h2.samples - alpha * r_h1.samples)) < 1e-12

    def test_covariance_matches_mixing_matrix(self):
        """Sample covariance of (r_L, r_H) converges to A A^H."""
        n = 1 << 20
        soi = white_wave(n, seed=4)
        intf = fm_wave(n, seed=5)
        a = np.array([[1.0, 0.7 * np.exp(0.3j)], [0.0, 1.1 * np.exp(-0.8j)]])
        sc = MixingScenario(
            a11=PathModel(gain=a[0, 0]), a12=PathModel(gain=a[0, 1]),
            a21=PathModel(gain=a[1, 0]), a22=PathModel(gain=a[1, 1]),
            reference_mode=True,
        )
        r_l, r_h = mix(soi, intf, sc)
        obs = np.vstack([r_l.samples, r_h.samples])
        cov = (obs @ obs.conj().T) / n
        expect = a @ a.conj().T
        assert np.max(np.abs(cov - expect)) < 0.03 * np.max(np.abs(expect))

    def test_rate_mismatch(self):
        soi = white_wave(1024, fs=FS)
        intf = white_wave(1024, fs=FS / 2)
        with pytest.raises(RateMismatch):
            mix(soi, intf, self._scenario())

    def test_length_mismatch(self):
        soi = white_wave(1024)
        intf = white_wave(512)
        with pytest.raises(RateMismatch):
            mix(soi, intf, self._scenario())

    def test_reference_mode_requires_zero_a21(self):
        with pytest.raises(RfCancelError):
            MixingScenario(
                a11=PathModel(gain=1.0), a12=PathModel(gain=1.0),
                a21=PathModel(gain=0.1), a22=PathModel(gain=1.0),
                reference_mode=True,
            )

    def test_noise_reproducible_from_scenario_seed(self):
        soi = white_wave(8192, seed=1)
        intf = fm_wave(8192, seed=2)
        sc = MixingScenario(
            a11=PathModel(gain=1.0, noise_psd=1e-10),
            a12=PathModel(gain=1.0),
            a21=PathModel(gain=0.0),
            a22=PathModel(gain=1.0, noise_psd=1e-10),
            reference_mode=True, seed=42,
        )
        r_l1, r_h1 = mix(soi, intf, sc)
        r_l2, r_h2 = mix(soi, intf, sc)
        assert np.array_equal(r_l1.samples, r_l2.samples)
        assert np.array_equal(r_h1.samples, r_h2.samples)


def test_gain_from_db():
    g = gain_from_db(6.0205999, 90.0)
    assert abs(g) == pytest.approx(2.0, abs=1e-6)
    assert np.angle(g) == pytest.approx(np.pi / 2, abs=1e-9)
