"""2x2 mixing channel with per-path gain, true-time delay, frequency
response and additive noise.

The delay element models a physical RF/optical delay line: the envelope is
shifted by tau and the carrier picks up exp(-j*2*pi*center_freq*tau).  The
carrier rotation is what makes fixed canceller taps frequency-selective
when scenarios are swept across RF carriers.

Frequency responses are evaluated at absolute RF frequency (center_freq +
baseband offset) with Hermitian symmetry, so they describe real filters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sig

from .errors import DelayTooLarge, RateMismatch, RfCancelError
from .waveform import BasebandWaveform

INTERP_TAPS = 64
INTERP_BETA = 8.0
# fractional parts below the interpolator's own group-delay accuracy are
# realized as integer shifts; the phase error this introduces sits at the
# interpolation error floor
INTERP_SNAP = 1e-4


@dataclass
class ModulatorResponse:
    """Front-end frequency response: flat or Butterworth lowpass."""

    kind: str = "flat"
    f3db: float = 9e9
    order: int = 4

    def __post_init__(self):
        if self.kind not in ("flat", "butterworth_lowpass"):
            raise RfCancelError(f"unknown response kind {self.kind!r}")
        if self.kind == "butterworth_lowpass":
            if self.f3db <= 0:
                raise RfCancelError("f3db must be > 0")
            if self.order < 1:
                raise RfCancelError("order must be >= 1")

    def eval(self, freq_hz) -> np.ndarray:
        """Complex response at absolute RF frequency, H(-f) = conj(H(f))."""
        f = np.atleast_1d(np.asarray(freq_hz, dtype=float))
        if self.kind == "flat":
            return np.ones(f.shape, dtype=np.complex128)
        b, a = sig.butter(self.order, 1.0, analog=True, output="ba")
        _, h = sig.freqs(b, a, worN=np.abs(f) / self.f3db)
        return np.where(f < 0, np.conj(h), h)


@dataclass
class PathModel:
    """One entry of the mixing matrix: complex gain, delay, response, noise."""

    gain: complex = 1.0 + 0.0j
    delay: float = 0.0
    response: ModulatorResponse = field(default_factory=ModulatorResponse)
    noise_psd: float = 0.0

    def __post_init__(self):
        if self.delay < 0:
            raise RfCancelError("path delay must be >= 0")
        if self.noise_psd < 0:
            raise RfCancelError("noise_psd must be >= 0")


@dataclass
class MixingScenario:
    """The four paths of the 2x2 mixer; reference mode pins a21 to zero."""

    a11: PathModel
    a12: PathModel
    a21: PathModel
    a22: PathModel
    reference_mode: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.reference_mode and self.a21.gain != 0:
            raise RfCancelError("reference_mode requires a21.gain == 0")


def _interp_kernel(frac: float, taps: int = INTERP_TAPS,
                   beta: float = INTERP_BETA) -> np.ndarray:
    """Windowed-sinc fractional-delay filter for 0 < frac < 1.

    The kernel's group delay is taps//2 + frac samples; callers compensate
    the integer part.  The Kaiser window is evaluated continuously, centred
    on the fractional target, so the response stays symmetric about the
    actual delay.
    """
    from scipy.special import i0

    center = taps // 2
    x = np.arange(taps + 1) - center - frac
    half = taps / 2 + 1.0
    arg = 1.0 - (x / half) ** 2
    window = np.where(arg > 0, i0(beta * np.sqrt(np.clip(arg, 0, None))), 0.0)
    h = np.sinc(x) * window / i0(beta)
    return h / np.sum(h)


def fractional_delay(w: BasebandWaveform, tau: float,
                     snap: float = INTERP_SNAP) -> BasebandWaveform:
    """Delay the envelope by tau seconds (envelope shift only).

    Integer sample shifts move data exactly; the fractional remainder goes
    through a 64-tap Kaiser-windowed sinc interpolator.  Samples shifted in
    from outside the record are zero and flagged invalid.  ``snap`` is the
    threshold below which a fractional part is realized as an integer
    shift; continuous-search callers set it to 0.
    """
    if abs(tau) >= w.duration:
        raise DelayTooLarge(
            f"|tau| = {abs(tau):.3g} s >= waveform duration {w.duration:.3g} s"
        )
    total = tau * w.sample_rate
    n_int = int(np.floor(total))
    frac = total - n_int
    x = w.samples
    n = x.size
    if frac < max(snap, 1e-12) or frac > 1 - max(snap, 1e-12):
        # pure integer shift (fold any full-sample remainder into n_int)
        n_int += int(round(frac))
        y = np.zeros_like(x)
        if n_int >= 0:
            y[n_int:] = x[: n - n_int]
        else:
            y[: n + n_int] = x[-n_int:]
        kernel_margin = 0
    else:
        h = _interp_kernel(frac)
        center = INTERP_TAPS // 2
        filt = sig.fftconvolve(x, h, mode="full")  # delays by center + frac
        shift = n_int - center  # y[i] = filt[i - shift]
        y = np.zeros_like(x)
        lo = max(shift, 0)
        hi = min(n, filt.size + shift)
        if hi > lo:
            y[lo:hi] = filt[lo - shift: hi - shift]
        kernel_margin = INTERP_TAPS
    head = w.invalid_head + max(n_int, 0) + kernel_margin
    tail = w.invalid_tail + max(-n_int, 0) + kernel_margin
    return w.with_samples(y, invalid_head=head, invalid_tail=tail)


def true_time_delay(w: BasebandWaveform, tau: float) -> BasebandWaveform:
    """Physical delay: envelope shift plus exp(-j*2*pi*center_freq*tau).

    This is the delay a cable or optical line applies to the RF signal the
    envelope represents; the carrier rotation makes the operation
    frequency-selective across scenario carriers.
    """
    out = fractional_delay(w, tau)
    rot = np.exp(-2j * np.pi * w.center_freq * tau)
    return out.with_samples(out.samples * rot)


def _apply_response(w: BasebandWaveform, response: ModulatorResponse) -> np.ndarray:
    if response.kind == "flat":
        return w.samples
    freqs = np.fft.fftfreq(w.samples.size, d=1.0 / w.sample_rate)
    h = response.eval(w.center_freq + freqs)
    return np.fft.ifft(np.fft.fft(w.samples) * h)


def apply_path(w: BasebandWaveform, p: PathModel,
               rng: np.random.Generator | None = None) -> BasebandWaveform:
    """Forward model of one mixing-matrix entry.

    gain * delayed(w) through the path response, plus white Gaussian noise
    of the configured PSD.  The delay rotates the carrier by
    exp(-j*2*pi*center_freq*delay) on top of shifting the envelope.
    """
    if p.delay >= w.duration:
        raise DelayTooLarge(
            f"path delay {p.delay:.3g} s >= waveform duration {w.duration:.3g} s"
        )
    if p.gain == 0:
        return w.with_samples(np.zeros_like(w.samples))
    out = fractional_delay(w, p.delay)
    carrier_phase = np.exp(-2j * np.pi * w.center_freq * p.delay)
    samples = _apply_response(out, p.response) * (p.gain * carrier_phase)
    if p.noise_psd > 0:
        if rng is None:
            rng = np.random.default_rng(0)
        sigma = np.sqrt(p.noise_psd * w.sample_rate / 2.0)
        samples = samples + sigma * (
            rng.standard_normal(samples.size)
            + 1j * rng.standard_normal(samples.size)
        )
    return out.with_samples(samples)


def mix(soi: BasebandWaveform, interference: BasebandWaveform,
        scenario: MixingScenario) -> tuple[BasebandWaveform, BasebandWaveform]:
    """Produce the antenna signal r_L and the reference signal r_H.

    r_L = a11(soi) + a12(interference); r_H = a21(soi) + a22(interference).
    With reference_mode the a21 entry is exactly zero, so r_H carries
    interference only.  Per-path noise draws come from independent
    sub-streams of the scenario seed.
    """
    if soi.sample_rate != interference.sample_rate:
        raise RateMismatch(
            f"sample rates differ: {soi.sample_rate} vs {interference.sample_rate}"
        )
    if len(soi) != len(interference):
        raise RateMismatch(
            f"lengths differ: {len(soi)} vs {len(interference)}"
        )
    streams = np.random.SeedSequence(scenario.seed).spawn(4)
    rngs = [np.random.default_rng(s) for s in streams]
    y11 = apply_path(soi, scenario.a11, rngs[0])
    y12 = apply_path(interference, scenario.a12, rngs[1])
    y21 = apply_path(soi, scenario.a21, rngs[2])
    y22 = apply_path(interference, scenario.a22, rngs[3])
    r_l = y11.with_samples(
        y11.samples + y12.samples,
        invalid_head=max(y11.invalid_head, y12.invalid_head),
        invalid_tail=max(y11.invalid_tail, y12.invalid_tail),
    )
    r_h = y22.with_samples(
        y21.samples + y22.samples,
        invalid_head=max(y21.invalid_head, y22.invalid_head),
        invalid_tail=max(y21.invalid_tail, y22.invalid_tail),
    )
    return r_l, r_h


def gain_from_db(gain_db: float, phase_deg: float = 0.0) -> complex:
    """Convert the config's dB-magnitude + degrees-phase into a linear gain."""
    return 10 ** (gain_db / 20.0) * np.exp(1j * np.deg2rad(phase_deg))


__all__ = [
    "INTERP_BETA",
    "INTERP_TAPS",
    "MixingScenario",
    "ModulatorResponse",
    "PathModel",
    "apply_path",
    "fractional_delay",
    "gain_from_db",
    "mix",
    "true_time_delay",
]
