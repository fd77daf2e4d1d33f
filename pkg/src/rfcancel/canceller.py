"""Interference separation: reference-aided cancellation and blind source
separation.

The reference-aided path exploits the clean reference (no SOI leakage) to
reduce separation to one delay plus one complex gain: a cross-correlation
pass picks the delay, a single inner product gives the least-squares gain,
and a subtraction removes the interference.  The BSS path is the
unsimplified baseline: PCA whitening followed by a complex kurtosis
fixed-point ICA that has to search the full 2x2 de-mixing space.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy import signal as sig

from .channel import fractional_delay, true_time_delay
from .errors import (
    AmbiguousLabeling,
    DegenerateReference,
    NoCoherentReference,
    NotConvergedWarning,
    RateMismatch,
    RfCancelError,
    UnseparableWarning,
)
from .waveform import BasebandWaveform, merge_invalid

COHERENCE_THRESHOLD = 0.2


@dataclass
class CancellerTaps:
    """Delay and complex gain applied to the reference before subtraction."""

    delay: float
    gain: complex
    residual_power_db: float = float("nan")

    def __post_init__(self):
        if not np.isfinite(self.delay):
            raise RfCancelError("tap delay must be finite")
        if not np.isfinite(self.gain):
            raise RfCancelError("tap gain must be finite")


@dataclass
class IcaConfig:
    """Settings for the kurtosis fixed-point iteration."""

    max_iter: int = 200
    tol: float = 1e-6
    seed: int = 0


@dataclass
class SeparationResult:
    """Separated waveforms plus the de-mixing estimate and run metadata.

    ``demix`` is the 2x2 matrix in BSS mode or the CancellerTaps in
    reference mode.  ``free_parameters`` is 2 for the reference method (one
    delay, one complex gain) and 4 for full BSS.
    """

    outputs: list
    demix: object
    iterations: int
    converged: bool
    free_parameters: int


def _check_pair(r_l: BasebandWaveform, r_h: BasebandWaveform) -> None:
    if r_l.sample_rate != r_h.sample_rate:
        raise RateMismatch(
            f"sample rates differ: {r_l.sample_rate} vs {r_h.sample_rate}"
        )
    if len(r_l) != len(r_h):
        raise RateMismatch(f"lengths differ: {len(r_l)} vs {len(r_h)}")


def _xcorr_peak(r_l: BasebandWaveform, r_h: BasebandWaveform,
                max_lag_samples: int) -> tuple[float, float]:
    """(refined lag in samples, normalized peak magnitude) of the
    cross-correlation, restricted to |lag| <= max_lag_samples.

    Both waveforms are trimmed by their common invalid margins so the lag
    axis stays aligned with the original sample grid.
    """
    head, tail = merge_invalid(r_l, r_h)
    stop = len(r_l) - tail
    x = r_l.samples[head:stop]
    y = r_h.samples[head:stop]
    n = x.size
    if 0 < max_lag_samples <= 64 and n > 4 * max_lag_samples:
        # small physical search ranges: direct correlation beats the FFT
        m_lag = max_lag_samples
        lags = np.arange(-m_lag, m_lag + 1)
        width = n - 2 * m_lag
        xw = x[m_lag: m_lag + width]
        corr = np.array(
            [np.vdot(y[m_lag - k: m_lag - k + width], xw) for k in lags]
        )
        norm = np.linalg.norm(xw) * np.linalg.norm(y[m_lag: m_lag + width])
    else:
        corr = sig.correlate(x, y, mode="full", method="fft")
        lags = np.arange(-(n - 1), n)
        keep = np.abs(lags) <= max_lag_samples
        corr, lags = corr[keep], lags[keep]
        norm = np.linalg.norm(x) * np.linalg.norm(y)
    mag = np.abs(corr)
    peak = int(np.argmax(mag))
    peak_norm = mag[peak] / norm if norm > 0 else 0.0
    lag = float(lags[peak])
    if 0 < peak < mag.size - 1:
        c_m, c_0, c_p = mag[peak - 1], mag[peak], mag[peak + 1]
        denom = c_m - 2 * c_0 + c_p
        if denom < 0:
            lag += 0.5 * (c_m - c_p) / denom
    return lag, float(peak_norm)


def estimate_delay(r_l: BasebandWaveform, r_h: BasebandWaveform,
                   max_lag: float) -> float:
    """Delay of r_H's content inside r_L, in seconds.

    The lag maximizing |cross-correlation| is refined to sub-sample
    precision by parabolic interpolation of the magnitude peak.  Raises
    NoCoherentReference when the normalized peak falls below 0.2.
    """
    _check_pair(r_l, r_h)
    fs = r_l.sample_rate
    max_lag_samples = int(round(max_lag * fs))
    if max_lag_samples >= len(r_l) // 4:
        raise RfCancelError("max_lag must be below a quarter of the duration")
    lag, peak_norm = _xcorr_peak(r_l, r_h, max_lag_samples)
    if peak_norm < COHERENCE_THRESHOLD:
        raise NoCoherentReference(
            f"normalized correlation peak {peak_norm:.3f} < "
            f"{COHERENCE_THRESHOLD}; signals do not share content"
        )
    return lag / fs


def refine_delay_by_residual(r_l: BasebandWaveform, r_h: BasebandWaveform,
                             coarse_delay: float,
                             span_samples: float = 1.0) -> float:
    """Polish a delay estimate by maximizing the normalized correlation of
    r_L against the continuously delayed reference.

    Frequency-sweep scenarios need delay matching far below the 0.05-sample
    accuracy of the parabolic stage (picoseconds at GHz carriers), so this
    runs a bounded scalar search on the interpolated correlation magnitude.
    """
    _check_pair(r_l, r_h)
    fs = r_l.sample_rate
    # a slice keeps each probe cheap; accuracy is set by xtol, not length
    n = min(len(r_h), 1 << 16)
    head = max(r_h.invalid_head, int(abs(coarse_delay * fs)) + 80)
    ref = BasebandWaveform(r_h.samples[:n], fs, r_h.center_freq)
    tgt = r_l.samples[:n]

    def neg_corr(tau: float) -> float:
        d = fractional_delay(ref, tau, snap=0.0)
        sl = slice(head + 80, n - 80)
        a, b = tgt[sl], d.samples[sl]
        denom = np.linalg.norm(a) * np.linalg.norm(b)
        if denom == 0:
            return 0.0
        return -abs(np.vdot(b, a)) / denom

    half = span_samples / fs
    res = optimize.minimize_scalar(
        neg_corr,
        bounds=(coarse_delay - half, coarse_delay + half),
        method="bounded",
        options={"xatol": 1e-7 / fs},
    )
    return float(res.x)


def estimate_gain(r_l: BasebandWaveform, r_h: BasebandWaveform,
                  delay: float = 0.0) -> complex:
    """Least-squares complex gain of the (delayed) reference inside r_L.

    The reference is delayed with the same physical (carrier-rotating)
    element the canceller applies, so the estimate plugs straight into
    CancellerTaps.
    """
    _check_pair(r_l, r_h)
    ref = true_time_delay(r_h, delay) if delay != 0.0 else r_h
    head, tail = merge_invalid(r_l, ref)
    stop = len(r_l) - tail
    a = r_l.samples[head:stop]
    b = ref.samples[head:stop]
    energy = np.real(np.vdot(b, b))
    if energy == 0:
        raise DegenerateReference("reference signal has zero energy")
    return complex(np.vdot(b, a) / energy)


def cancel(r_l: BasebandWaveform, r_h: BasebandWaveform,
           taps: CancellerTaps) -> BasebandWaveform:
    """Subtract the matched reference from the antenna signal.

    y = r_L - gain * delayed(r_H); the delay rotates the carrier the same
    way the channel's delay element does, so taps transfer across carriers.
    """
    _check_pair(r_l, r_h)
    ref = true_time_delay(r_h, taps.delay)
    y = r_l.samples - taps.gain * ref.samples
    head, tail = merge_invalid(r_l, ref)
    return r_l.with_samples(y, invalid_head=head, invalid_tail=tail)


def perturb_taps(taps: CancellerTaps, gain_error_mag: float = 0.0,
                 gain_error_phase_deg: float = 0.0,
                 delay_error: float = 0.0) -> CancellerTaps:
    """Inject a calibrated matching error into trained taps.

    Models the finite matching accuracy of real tunable attenuators and
    delay lines; a relative gain error of eps bounds the achievable depth
    at -20*log10(eps).
    """
    gain = taps.gain * (1 + gain_error_mag) * np.exp(
        1j * np.deg2rad(gain_error_phase_deg)
    )
    return CancellerTaps(taps.delay + delay_error, gain, taps.residual_power_db)


def cancel_auto(r_l: BasebandWaveform, r_h: BasebandWaveform,
                max_lag: float | None = None,
                refine: str = "parabolic") -> tuple[BasebandWaveform, CancellerTaps]:
    """End-to-end reference-aided cancellation: delay, gain, subtract.

    When the reference correlates too weakly for a trustworthy delay
    estimate (nothing to cancel, or interference far below the SOI), the
    canceller degrades to the best available lag instead of failing: the
    least-squares gain then shrinks toward zero and the output approaches
    r_L.  A zero-energy reference still raises DegenerateReference.

    ``refine="residual"`` polishes the delay by correlation maximization;
    frequency-sweep training uses it to reach picosecond matching.
    """
    _check_pair(r_l, r_h)
    fs = r_l.sample_rate
    if max_lag is None:
        max_lag_samples = min(1024, len(r_l) // 4 - 1)
    else:
        max_lag_samples = int(round(max_lag * fs))
    lag, peak_norm = _xcorr_peak(r_l, r_h, max_lag_samples)
    n_used = min(r_l.valid.size, r_h.valid.size)
    noise_floor = 8.0 / np.sqrt(max(n_used, 1))
    if peak_norm < noise_floor:
        lag = 0.0
    delay = lag / fs
    if refine == "residual" and peak_norm >= noise_floor:
        delay = refine_delay_by_residual(r_l, r_h, delay)
    gain = estimate_gain(r_l, r_h, delay)
    taps = CancellerTaps(delay, gain)
    out = cancel(r_l, r_h, taps)
    p_in = r_l.power()
    p_out = out.power()
    if p_in > 0 and p_out > 0:
        taps.residual_power_db = float(10 * np.log10(p_out / p_in))
    return out, taps


def reference_separate(r_l: BasebandWaveform, r_h: BasebandWaveform,
                       **kwargs) -> SeparationResult:
    """cancel_auto wrapped as a SeparationResult (free_parameters = 2)."""
    out, taps = cancel_auto(r_l, r_h, **kwargs)
    return SeparationResult(
        outputs=[out],
        demix=taps,
        iterations=1,
        converged=True,
        free_parameters=2,
    )


def _excess_kurtosis(x: np.ndarray) -> float:
    """Circular complex excess kurtosis; zero for complex Gaussian."""
    p = np.mean(np.abs(x) ** 2)
    if p == 0:
        return 0.0
    return float(np.mean(np.abs(x) ** 4) / p**2 - 2.0)


def bss_separate(x1: BasebandWaveform, x2: BasebandWaveform,
                 config: IcaConfig | None = None) -> SeparationResult:
    """Blind 2x2 separation: PCA whitening + complex-kurtosis fixed point.

    Outputs are recovered up to permutation and complex scale.  Warns
    UnseparableWarning when both observed channels look Gaussian, and
    NotConvergedWarning (result still returned, converged=False) when the
    iteration cap is hit.
    """
    _check_pair(x1, x2)
    cfg = config or IcaConfig()
    head, tail = merge_invalid(x1, x2)
    stop = len(x1) - tail
    full = np.vstack([x1.samples, x2.samples])
    full = full - np.mean(full[:, head:stop], axis=1, keepdims=True)
    obs = full[:, head:stop]
    n = obs.shape[1]

    if max(abs(_excess_kurtosis(obs[0])), abs(_excess_kurtosis(obs[1]))) < 0.1:
        warnings.warn(
            "both channels are near-Gaussian; ICA cannot identify sources",
            UnseparableWarning,
        )

    # PCA whitening from the sample covariance
    cov = (obs @ obs.conj().T) / n
    eigval, eigvec = np.linalg.eigh(cov)
    eigval = np.maximum(eigval, 1e-30)
    whiten = (eigvec * (1.0 / np.sqrt(eigval))) @ eigvec.conj().T
    z = whiten @ obs

    # kurtosis-contrast fixed point with deflation; in 2-D the second
    # unmixing vector is the orthogonal complement of the first
    rng = np.random.default_rng(cfg.seed)
    w = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    w /= np.linalg.norm(w)
    iterations = 0
    converged = False
    for iterations in range(1, cfg.max_iter + 1):
        y = w.conj() @ z
        ay2 = np.abs(y) ** 2
        w_new = (z * (np.conj(y) * ay2)) .mean(axis=1) - 2 * np.mean(ay2) * w
        w_new /= np.linalg.norm(w_new)
        alignment = abs(np.vdot(w_new, w))
        w = w_new
        if 1 - alignment < cfg.tol:
            converged = True
            break
    if not converged:
        warnings.warn(
            f"ICA did not converge in {cfg.max_iter} iterations",
            NotConvergedWarning,
        )
    w2 = np.array([-np.conj(w[1]), np.conj(w[0])])
    unmix = np.vstack([w.conj(), w2.conj()])
    demix = unmix @ whiten
    # statistics come from the trimmed window, outputs keep full length so
    # they stay sample-aligned with the inputs
    sources = demix @ full
    outputs = [
        x1.with_samples(s, invalid_head=head, invalid_tail=tail)
        for s in sources
    ]
    return SeparationResult(
        outputs=outputs,
        demix=demix,
        iterations=iterations,
        converged=converged,
        free_parameters=4,
    )


def resolve_permutation(result: SeparationResult,
                        reference: BasebandWaveform) -> SeparationResult:
    """Label BSS outputs using the interference reference.

    The output most correlated with the reference is the interference; the
    other becomes outputs[0], the SOI estimate, rescaled to unit power.
    """
    if len(result.outputs) != 2:
        raise RfCancelError("permutation resolution needs two outputs")
    ref = reference.valid
    corrs = []
    for out in result.outputs:
        v = out.samples[: len(reference)]
        n = min(v.size, ref.size)
        a, b = v[:n], ref[:n]
        denom = np.linalg.norm(a) * np.linalg.norm(b)
        corrs.append(abs(np.vdot(b, a)) / denom if denom > 0 else 0.0)
    if max(corrs) < COHERENCE_THRESHOLD:
        raise AmbiguousLabeling(
            f"neither output correlates with the reference "
            f"(|rho| = {corrs[0]:.3f}, {corrs[1]:.3f})"
        )
    int_idx = int(np.argmax(corrs))
    soi = result.outputs[1 - int_idx]
    rms = np.sqrt(np.mean(np.abs(soi.valid) ** 2))
    soi = soi.with_samples(soi.samples / rms)
    return SeparationResult(
        outputs=[soi, result.outputs[int_idx]],
        demix=result.demix,
        iterations=result.iterations,
        converged=result.converged,
        free_parameters=result.free_parameters,
    )


def nlms_refine(r_l: BasebandWaveform, r_h_aligned: BasebandWaveform,
                initial_gain: complex, step_size: float = 0.05) -> complex:
    """Optional single-tap NLMS polish of the block least-squares gain.

    Disabled by default in scenario configs; block training is quasi-static
    and deterministic, this exists for drift experiments.
    """
    _check_pair(r_l, r_h_aligned)
    head, tail = merge_invalid(r_l, r_h_aligned)
    stop = len(r_l) - tail
    d = r_l.samples[head:stop]
    x = r_h_aligned.samples[head:stop]
    w = complex(initial_gain)
    p = np.mean(np.abs(x) ** 2)
    if p == 0:
        raise DegenerateReference("reference signal has zero energy")
    for k in range(d.size):
        e = d[k] - w * x[k]
        w += step_size * e * np.conj(x[k]) / p
    return w


__all__ = [
    "COHERENCE_THRESHOLD",
    "CancellerTaps",
    "IcaConfig",
    "SeparationResult",
    "bss_separate",
    "cancel",
    "cancel_auto",
    "estimate_delay",
    "estimate_gain",
    "nlms_refine",
    "perturb_taps",
    "refine_delay_by_residual",
    "reference_separate",
    "resolve_permutation",
]
