"""Complex-envelope waveform container and its on-disk formats.

The binary format is shared by every tool in the repo: little-endian header
``{magic "RCWV", version u32, sample_rate f64, center_freq f64, n_samples
u64}`` followed by interleaved float32 (re, im) pairs.  CSV export writes
``index,re,im`` rows for plotting.
"""

from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass

import numpy as np

from .errors import RfCancelError

MAGIC = b"RCWV"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIddQ")


@dataclass
class BasebandWaveform:
    """Uniformly sampled complex envelope referenced to an RF carrier.

    ``center_freq`` is metadata only: it tells frequency-dependent channel
    elements which part of the RF spectrum this envelope represents.
    ``invalid_head``/``invalid_tail`` count edge samples ruined by delay
    interpolation; metrics exclude them.
    """

    samples: np.ndarray
    sample_rate: float
    center_freq: float = 0.0
    invalid_head: int = 0
    invalid_tail: int = 0

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.complex128)
        if self.sample_rate <= 0:
            raise RfCancelError(f"sample_rate must be > 0, got {self.sample_rate}")
        if self.samples.size == 0:
            raise RfCancelError("waveform must contain at least one sample")
        if not np.all(np.isfinite(self.samples.view(np.float64))):
            raise RfCancelError("waveform contains non-finite samples")
        self.invalid_head = int(min(max(self.invalid_head, 0), self.samples.size))
        self.invalid_tail = int(min(max(self.invalid_tail, 0), self.samples.size))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    @property
    def valid(self) -> np.ndarray:
        """View of the samples with invalidated edges stripped."""
        stop = self.samples.size - self.invalid_tail
        if self.invalid_head >= stop:
            return self.samples[0:0]
        return self.samples[self.invalid_head:stop]

    def power(self) -> float:
        """Mean |s|^2 over the valid region."""
        v = self.valid
        if v.size == 0:
            return 0.0
        return float(np.mean(np.abs(v) ** 2))

    def with_samples(self, samples: np.ndarray, **overrides) -> "BasebandWaveform":
        """Copy metadata onto a new sample array."""
        kw = dict(
            sample_rate=self.sample_rate,
            center_freq=self.center_freq,
            invalid_head=self.invalid_head,
            invalid_tail=self.invalid_tail,
        )
        kw.update(overrides)
        return BasebandWaveform(samples=samples, **kw)


def merge_invalid(*waves: BasebandWaveform) -> tuple[int, int]:
    """Worst-case invalid edge counts across several aligned waveforms."""
    head = max(w.invalid_head for w in waves)
    tail = max(w.invalid_tail for w in waves)
    return head, tail


def _atomic_write(path: str | os.PathLike, payload: bytes) -> None:
    path = os.fspath(path)
    d = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-rcwv-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_waveform(w: BasebandWaveform, path: str | os.PathLike) -> None:
    """Write the shared binary waveform format (atomically)."""
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, w.sample_rate, w.center_freq,
                          w.samples.size)
    inter = np.empty(2 * w.samples.size, dtype=np.float32)
    inter[0::2] = w.samples.real
    inter[1::2] = w.samples.imag
    _atomic_write(path, header + inter.tobytes())


def load_waveform(path: str | os.PathLike) -> BasebandWaveform:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise RfCancelError(f"{path}: truncated waveform file")
    magic, version, fs, fc, n = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise RfCancelError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise RfCancelError(f"{path}: unsupported version {version}")
    body = np.frombuffer(raw, dtype=np.float32, offset=_HEADER.size)
    if body.size != 2 * n:
        raise RfCancelError(f"{path}: expected {2*n} floats, found {body.size}")
    samples = body[0::2].astype(np.float64) + 1j * body[1::2].astype(np.float64)
    return BasebandWaveform(samples=samples, sample_rate=fs, center_freq=fc)


def export_csv(w: BasebandWaveform, path: str | os.PathLike) -> None:
    """Write index,re,im rows (atomically, fixed float format)."""
    lines = ["index,re,im"]
    lines.extend(
        f"{i},{s.real:.10e},{s.imag:.10e}" for i, s in enumerate(w.samples)
    )
    _atomic_write(path, ("\n".join(lines) + "\n").encode())


__all__ = [
    "BasebandWaveform",
    "FORMAT_VERSION",
    "MAGIC",
    "export_csv",
    "load_waveform",
    "merge_invalid",
    "save_waveform",
]
