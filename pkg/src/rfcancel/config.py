"""Declarative scenario configuration: YAML schema, validation, builders.

A scenario file is a key-value tree with a ``schema_version`` field; every
shipped experiment is one of these files.  Validation collects *all*
offending fields before raising, so a bad config reports everything wrong
with it at once.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
import yaml

from .canceller import IcaConfig
from .channel import MixingScenario, ModulatorResponse, PathModel, gain_from_db
from .errors import ConfigError
from .sigsynth import FORMATS

SCHEMA_VERSION = 1

CANCELLER_MODES = ("off", "reference", "bss")
DELAY_REFINE_MODES = ("parabolic", "residual")
CSV_KINDS = ("report", "constellation", "psd", "depth_curve", "waveforms")


@dataclass
class SoiConfig:
    format: str = "qpsk"
    symbol_rate_hz: float = 5e6
    carrier_hz: float = 2.4e9
    power: float = 1.0
    rolloff: float = 0.2
    span_symbols: int = 16


@dataclass
class InterferenceConfig:
    deviation_pp_hz: float = 80e6
    mod_noise_bw_hz: float = 10e6
    carrier_hz: float = 2.4e9
    isr_db: float = 18.0


@dataclass
class PathConfig:
    gain_db: float = 0.0
    phase_deg: float = 0.0
    delay_s: float = 0.0
    noise_psd: float = 0.0
    response: dict = field(default_factory=dict)
    zero: bool = False

    def to_model(self) -> PathModel:
        resp = ModulatorResponse(
            kind=self.response.get("kind", "flat"),
            f3db=float(self.response.get("f3db_hz", 9e9)),
            order=int(self.response.get("order", 4)),
        )
        gain = 0.0 if self.zero else gain_from_db(self.gain_db, self.phase_deg)
        return PathModel(gain=gain, delay=self.delay_s,
                         response=resp, noise_psd=self.noise_psd)


@dataclass
class ChannelConfig:
    reference_mode: bool = True
    a11: PathConfig = field(default_factory=PathConfig)
    a12: PathConfig = field(default_factory=PathConfig)
    a21: PathConfig = field(default_factory=lambda: PathConfig(zero=True))
    a22: PathConfig = field(default_factory=PathConfig)

    def to_scenario(self, seed: int) -> MixingScenario:
        return MixingScenario(
            a11=self.a11.to_model(),
            a12=self.a12.to_model(),
            a21=self.a21.to_model(),
            a22=self.a22.to_model(),
            reference_mode=self.reference_mode,
            seed=seed,
        )


@dataclass
class TapsErrorConfig:
    """Calibrated matching error injected into trained taps."""

    gain_mag: float = 0.0
    gain_phase_deg: float = 0.0
    delay_s: float = 0.0

    @property
    def active(self) -> bool:
        return bool(self.gain_mag or self.gain_phase_deg or self.delay_s)


@dataclass
class CancellerConfig:
    mode: str = "reference"
    training_window: int = 131072
    max_lag_s: float = 1e-7
    delay_refine: str = "parabolic"
    taps_error: TapsErrorConfig = field(default_factory=TapsErrorConfig)
    ica: IcaConfig = field(default_factory=IcaConfig)
    nlms: bool = False


@dataclass
class SimConfig:
    sample_rate_hz: float = 200e6
    n_symbols: int = 6553
    seed: int = 0


@dataclass
class OutputConfig:
    directory: str = "out"
    csv: tuple = ("report",)


@dataclass
class SweepConfig:
    isr_db: list = field(default_factory=list)
    carriers_hz: list = field(default_factory=list)
    formats: list = field(default_factory=list)
    format_isr_db: float = 9.0
    train_carrier_hz: float | None = None
    probe_offset_hz: float = 2e6
    probe_samples: int = 16384
    train_samples: int = 131072


@dataclass
class ScenarioConfig:
    soi: SoiConfig
    interference: InterferenceConfig
    channel: ChannelConfig
    canceller: CancellerConfig
    sim: SimConfig
    outputs: OutputConfig
    sweep: SweepConfig

    @property
    def sps(self) -> int:
        return int(round(self.sim.sample_rate_hz / self.soi.symbol_rate_hz))


def _get(tree: dict, dotted: str, default=None):
    node = tree
    for part in dotted.split("."):
        if not isinstance(node, dict) or part not in node:
            return default
        node = node[part]
    return node


def _build_path(raw: dict, zero_default: bool = False) -> PathConfig:
    raw = raw or {}
    return PathConfig(
        gain_db=float(raw.get("gain_db", 0.0)),
        phase_deg=float(raw.get("phase_deg", 0.0)),
        delay_s=float(raw.get("delay_s", 0.0)),
        noise_psd=float(raw.get("noise_psd", 0.0)),
        response=raw.get("response", {}) or {},
        zero=bool(raw.get("zero", zero_default)),
    )


def validate_tree(tree: dict) -> list[str]:
    """Return every schema violation as 'dotted.path: reason'."""
    bad: list[str] = []

    def check(cond: bool, path: str, reason: str):
        if not cond:
            bad.append(f"{path}: {reason}")

    check(isinstance(tree, dict), "<root>", "config must be a mapping")
    if not isinstance(tree, dict):
        return bad
    version = tree.get("schema_version")
    check(version == SCHEMA_VERSION, "schema_version",
          f"must be {SCHEMA_VERSION}, got {version!r}")

    fmt = _get(tree, "soi.format", "qpsk")
    check(fmt in FORMATS, "soi.format", f"must be one of {FORMATS}, got {fmt!r}")
    sym_rate = _get(tree, "soi.symbol_rate_hz", 5e6)
    check(isinstance(sym_rate, (int, float)) and sym_rate > 0,
          "soi.symbol_rate_hz", "must be > 0")
    power = _get(tree, "soi.power", 1.0)
    check(isinstance(power, (int, float)) and power > 0, "soi.power", "must be > 0")
    rolloff = _get(tree, "soi.rolloff", 0.2)
    check(isinstance(rolloff, (int, float)) and 0 < rolloff <= 1,
          "soi.rolloff", "must be in (0, 1]")
    span = _get(tree, "soi.span_symbols", 16)
    check(isinstance(span, int) and span >= 4, "soi.span_symbols", "must be >= 4")

    dev = _get(tree, "interference.deviation_pp_hz", 80e6)
    check(isinstance(dev, (int, float)) and dev >= 0,
          "interference.deviation_pp_hz", "must be >= 0")
    mbw = _get(tree, "interference.mod_noise_bw_hz", 10e6)
    check(isinstance(mbw, (int, float)) and mbw > 0,
          "interference.mod_noise_bw_hz", "must be > 0")
    isr = _get(tree, "interference.isr_db", 18.0)
    check(isinstance(isr, (int, float)) and np.isfinite(isr),
          "interference.isr_db", "must be finite")

    for name in ("a11", "a12", "a21", "a22"):
        raw = _get(tree, f"channel.paths.{name}") or {}
        delay = raw.get("delay_s", 0.0)
        check(isinstance(delay, (int, float)) and delay >= 0,
              f"channel.paths.{name}.delay_s", "must be >= 0")
        npsd = raw.get("noise_psd", 0.0)
        check(isinstance(npsd, (int, float)) and npsd >= 0,
              f"channel.paths.{name}.noise_psd", "must be >= 0")
        resp = raw.get("response") or {}
        kind = resp.get("kind", "flat")
        check(kind in ("flat", "butterworth_lowpass"),
              f"channel.paths.{name}.response.kind", f"unknown kind {kind!r}")
        if kind == "butterworth_lowpass":
            check(resp.get("f3db_hz", 0) > 0,
                  f"channel.paths.{name}.response.f3db_hz", "must be > 0")
            check(int(resp.get("order", 0)) >= 1,
                  f"channel.paths.{name}.response.order", "must be >= 1")
    ref_mode = _get(tree, "channel.reference_mode", True)
    a21 = _get(tree, "channel.paths.a21") or {}
    if ref_mode and a21 and not a21.get("zero", True):
        check(a21.get("gain_db") is None, "channel.paths.a21",
              "reference_mode forces a21 to zero; remove its gain")

    mode = _get(tree, "canceller.mode", "reference")
    check(mode in CANCELLER_MODES, "canceller.mode",
          f"must be one of {CANCELLER_MODES}, got {mode!r}")
    window = _get(tree, "canceller.training_window", 131072)
    check(isinstance(window, int) and window > 0,
          "canceller.training_window", "must be a positive integer")
    max_lag = _get(tree, "canceller.max_lag_s", 1e-7)
    check(isinstance(max_lag, (int, float)) and max_lag > 0,
          "canceller.max_lag_s", "must be > 0")
    refine = _get(tree, "canceller.delay_refine", "parabolic")
    check(refine in DELAY_REFINE_MODES, "canceller.delay_refine",
          f"must be one of {DELAY_REFINE_MODES}")
    max_iter = _get(tree, "canceller.ica.max_iter", 200)
    check(isinstance(max_iter, int) and max_iter >= 1,
          "canceller.ica.max_iter", "must be >= 1")
    tol = _get(tree, "canceller.ica.tol", 1e-6)
    check(isinstance(tol, (int, float)) and tol > 0,
          "canceller.ica.tol", "must be > 0")

    fs = _get(tree, "sim.sample_rate_hz", 0)
    check(isinstance(fs, (int, float)) and fs > 0,
          "sim.sample_rate_hz", "must be > 0")
    n_symbols = _get(tree, "sim.n_symbols", 0)
    check(isinstance(n_symbols, int) and n_symbols >= 64,
          "sim.n_symbols", "must be an integer >= 64")
    seed = _get(tree, "sim.seed")
    check(isinstance(seed, int), "sim.seed",
          "mandatory integer (no implicit entropy)")

    if isinstance(fs, (int, float)) and fs > 0 and sym_rate and sym_rate > 0:
        sps = fs / sym_rate
        check(abs(sps - round(sps)) < 1e-9 and round(sps) >= 2,
              "sim.sample_rate_hz",
              f"sample_rate / symbol_rate must be an integer >= 2, got {sps:.6g}")
        if isinstance(dev, (int, float)) and isinstance(mbw, (int, float)):
            soi_c = _get(tree, "soi.carrier_hz", 2.4e9)
            int_c = _get(tree, "interference.carrier_hz", soi_c)
            offset = abs(float(int_c) - float(soi_c))
            check(fs > 2 * (dev + mbw) + 2 * offset, "sim.sample_rate_hz",
                  "must exceed twice the interference occupied bandwidth")

    out_csv = _get(tree, "outputs.csv", ["report"])
    if not isinstance(out_csv, (list, tuple)):
        bad.append("outputs.csv: must be a list")
    else:
        for kind in out_csv:
            check(kind in CSV_KINDS, "outputs.csv",
                  f"unknown artifact {kind!r}, allowed: {CSV_KINDS}")

    for key, want in (("sweep.isr_db", (int, float)),
                      ("sweep.carriers_hz", (int, float))):
        vals = _get(tree, key)
        if vals is not None:
            if not isinstance(vals, list):
                bad.append(f"{key}: must be a list")
            else:
                for v in vals:
                    check(isinstance(v, want), key, f"bad entry {v!r}")
    fmts = _get(tree, "sweep.formats")
    if fmts is not None:
        for f in np.atleast_1d(fmts):
            check(f in FORMATS, "sweep.formats", f"unknown format {f!r}")
    return bad


def from_tree(tree: dict) -> ScenarioConfig:
    """Validate and build a ScenarioConfig; raises ConfigError on problems."""
    bad = validate_tree(tree)
    if bad:
        raise ConfigError(bad)
    soi = SoiConfig(
        format=_get(tree, "soi.format", "qpsk"),
        symbol_rate_hz=float(_get(tree, "soi.symbol_rate_hz", 5e6)),
        carrier_hz=float(_get(tree, "soi.carrier_hz", 2.4e9)),
        power=float(_get(tree, "soi.power", 1.0)),
        rolloff=float(_get(tree, "soi.rolloff", 0.2)),
        span_symbols=int(_get(tree, "soi.span_symbols", 16)),
    )
    interference = InterferenceConfig(
        deviation_pp_hz=float(_get(tree, "interference.deviation_pp_hz", 80e6)),
        mod_noise_bw_hz=float(_get(tree, "interference.mod_noise_bw_hz", 10e6)),
        carrier_hz=float(_get(tree, "interference.carrier_hz", soi.carrier_hz)),
        isr_db=float(_get(tree, "interference.isr_db", 18.0)),
    )
    channel = ChannelConfig(
        reference_mode=bool(_get(tree, "channel.reference_mode", True)),
        a11=_build_path(_get(tree, "channel.paths.a11")),
        a12=_build_path(_get(tree, "channel.paths.a12")),
        a21=_build_path(_get(tree, "channel.paths.a21"), zero_default=True),
        a22=_build_path(_get(tree, "channel.paths.a22")),
    )
    taps_error = TapsErrorConfig(
        gain_mag=float(_get(tree, "canceller.taps_error.gain_mag", 0.0)),
        gain_phase_deg=float(_get(tree, "canceller.taps_error.gain_phase_deg", 0.0)),
        delay_s=float(_get(tree, "canceller.taps_error.delay_s", 0.0)),
    )
    canceller = CancellerConfig(
        mode=_get(tree, "canceller.mode", "reference"),
        training_window=int(_get(tree, "canceller.training_window", 131072)),
        max_lag_s=float(_get(tree, "canceller.max_lag_s", 1e-7)),
        delay_refine=_get(tree, "canceller.delay_refine", "parabolic"),
        taps_error=taps_error,
        ica=IcaConfig(
            max_iter=int(_get(tree, "canceller.ica.max_iter", 200)),
            tol=float(_get(tree, "canceller.ica.tol", 1e-6)),
            seed=int(_get(tree, "canceller.ica.seed", 0)),
        ),
        nlms=bool(_get(tree, "canceller.nlms", False)),
    )
    sim = SimConfig(
        sample_rate_hz=float(_get(tree, "sim.sample_rate_hz", 200e6)),
        n_symbols=int(_get(tree, "sim.n_symbols", 6553)),
        seed=int(_get(tree, "sim.seed", 0)),
    )
    outputs = OutputConfig(
        directory=str(_get(tree, "outputs.directory", "out")),
        csv=tuple(_get(tree, "outputs.csv", ["report"])),
    )
    sweep = SweepConfig(
        isr_db=list(_get(tree, "sweep.isr_db", []) or []),
        carriers_hz=list(_get(tree, "sweep.carriers_hz", []) or []),
        formats=list(_get(tree, "sweep.formats", []) or []),
        format_isr_db=float(_get(tree, "sweep.format_isr_db", 9.0)),
        train_carrier_hz=_get(tree, "sweep.train_carrier_hz"),
        probe_offset_hz=float(_get(tree, "sweep.probe_offset_hz", 2e6)),
        probe_samples=int(_get(tree, "sweep.probe_samples", 16384)),
        train_samples=int(_get(tree, "sweep.train_samples", 131072)),
    )
    return ScenarioConfig(soi, interference, channel, canceller, sim,
                          outputs, sweep)


def load_config(path: str | os.PathLike) -> ScenarioConfig:
    with open(path, "r") as fh:
        tree = yaml.safe_load(fh)
    return from_tree(tree)


__all__ = [
    "CANCELLER_MODES",
    "CSV_KINDS",
    "ChannelConfig",
    "CancellerConfig",
    "InterferenceConfig",
    "OutputConfig",
    "PathConfig",
    "SCHEMA_VERSION",
    "ScenarioConfig",
    "SimConfig",
    "SoiConfig",
    "SweepConfig",
    "TapsErrorConfig",
    "from_tree",
    "load_config",
    "validate_tree",
]
