"""rfcancel: digital-baseband simulator for reference-aided wideband RF
interference cancellation.

The library synthesizes modulated signals and FM-noise interference, mixes
them through a 2x2 channel with a clean reference path, separates them by
closed-form reference cancellation or blind source separation, and measures
EVM, PSD, and cancellation depth.

Quick start:

    >>> from rfcancel.config import load_config
    >>> from rfcancel.runner import run
    >>> report = run(load_config("configs/default.yaml"))
    >>> report.evm_pct  # doctest: +SKIP

or from the shell: ``rfcancel run --config configs/default.yaml``.
"""

from .waveform import BasebandWaveform, load_waveform, save_waveform

__version__ = "0.1.0"

__all__ = [
    "BasebandWaveform",
    "load_waveform",
    "save_waveform",
    "__version__",
]
