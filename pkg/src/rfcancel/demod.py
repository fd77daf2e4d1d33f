"""Receiver-side symbol recovery: matched filter plus oracle-timing
decimation.

The simulator passes ground-truth timing, so no blind synchronization is
attempted; the canceller is the quantity under test, not the sync loops.
An optional data-aided frequency fit handles deliberately injected carrier
offsets (off by default).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as sig

from .channel import fractional_delay
from .errors import RfCancelError, TooShort
from .sigsynth import FORMATS, SymbolStream, rrc_taps
from .waveform import BasebandWaveform


@dataclass
class DemodConfig:
    """Receiver parameters; pulse shaping must mirror the transmitter."""

    sps: int
    format: str
    rolloff: float = 0.2
    span_symbols: int = 16
    timing_offset: float = 0.0      # samples, ground truth from the scenario
    carrier_offset_hz: float = 0.0  # enables the data-aided frequency fit
    symbol_rate: float | None = None

    def __post_init__(self):
        if self.sps < 2:
            raise RfCancelError(f"sps must be >= 2, got {self.sps}")
        if self.format not in FORMATS:
            raise RfCancelError(f"unknown format {self.format!r}")


def symbol_count(n_samples: int, cfg: DemodConfig) -> int:
    """Deterministic output length: floor((len - filter_span) / sps)."""
    return (n_samples - cfg.span_symbols * cfg.sps) // cfg.sps


def demodulate(w: BasebandWaveform, cfg: DemodConfig) -> SymbolStream:
    """Matched-filter the waveform and sample at the known symbol instants.

    Output symbols are unnormalized; EVM measurement aligns the complex
    gain downstream.
    """
    n_out = symbol_count(len(w), cfg)
    if n_out <= 0:
        raise TooShort(
            f"waveform of {len(w)} samples shorter than the "
            f"{cfg.span_symbols * cfg.sps}-sample filter span"
        )
    x = w
    if cfg.carrier_offset_hz:
        t = np.arange(len(w)) / w.sample_rate
        x = w.with_samples(
            w.samples * np.exp(-2j * np.pi * cfg.carrier_offset_hz * t)
        )
    frac = cfg.timing_offset - int(np.floor(cfg.timing_offset))
    if frac > 1e-9:
        x = fractional_delay(x, -frac / x.sample_rate)
    offset = int(np.floor(cfg.timing_offset))
    h = rrc_taps(cfg.sps, cfg.rolloff, cfg.span_symbols)
    filtered = sig.fftconvolve(x.samples, h, mode="full")
    start = cfg.span_symbols * cfg.sps + offset
    idx = start + cfg.sps * np.arange(n_out)
    idx = idx[idx < filtered.size]
    symbols = filtered[idx]
    rate = cfg.symbol_rate or w.sample_rate / cfg.sps
    return SymbolStream(symbols, cfg.format, rate)


def valid_symbol_range(w: BasebandWaveform, cfg: DemodConfig) -> tuple[int, int]:
    """Symbol indices untouched by the waveform's invalidated edge samples.

    The matched filter smears each sample across span_symbols, so one full
    span of margin is kept on both sides.
    """
    n_out = symbol_count(len(w), cfg)
    span = cfg.span_symbols * cfg.sps
    first_ok = int(np.ceil((w.invalid_head + span / 2) / cfg.sps))
    last_ok = n_out - int(np.ceil((w.invalid_tail + span / 2) / cfg.sps))
    return max(first_ok, 0), max(last_ok, 0)


def estimate_cfo(rx_symbols: np.ndarray, tx_symbols: np.ndarray,
                 symbol_rate: float) -> float:
    """Data-aided least-squares frequency fit, Hz.

    Fits a line to the unwrapped phase of rx * conj(tx) across the symbol
    grid; used only when a carrier offset was deliberately configured.
    """
    rot = rx_symbols * np.conj(tx_symbols)
    phase = np.unwrap(np.angle(rot))
    t = np.arange(phase.size) / symbol_rate
    slope = np.polyfit(t, phase, 1)[0]
    return float(slope / (2 * np.pi))


__all__ = [
    "DemodConfig",
    "demodulate",
    "estimate_cfo",
    "symbol_count",
    "valid_symbol_range",
]
