"""Tests for scenario execution, sweeps, and artifact self-consistency."""

import copy
import json
import math
from dataclasses import replace

import numpy as np
import pytest
import yaml

from rfcancel import metrics as met
from rfcancel import runner
from rfcancel.config import from_tree

BASE_TREE = yaml.safe_load("""
schema_version: 1
soi: {format: qpsk, symbol_rate_hz: 5.0e+06, carrier_hz: 2.4e+09, power: 1.0}
interference:
  deviation_pp_hz: 8.0e+07
  mod_noise_bw_hz: 1.0e+07
  carrier_hz: 2.4e+09
  isr_db: 18.0
channel:
  reference_mode: true
  paths:
    a11: {gain_db: 0.0}
    a12: {gain_db: 0.0, phase_deg: 47.0, delay_s: 2.5e-08}
    a21: {zero: true}
    a22: {gain_db: 0.0, phase_deg: -10.0, delay_s: 1.0e-08}
canceller:
  mode: reference
  training_window: 65536
  taps_error: {gain_mag: 0.01}
sim: {sample_rate_hz: 2.0e+08, n_symbols: 2048, seed: 42}
outputs:
  directory: out
  csv: [report, constellation, psd, depth_curve, waveforms]
""")


@pytest.fixture
def cfg():
    return from_tree(copy.deepcopy(BASE_TREE))


class TestRun:
    def test_reference_mode_report(self, cfg):
        rep = runner.run(cfg)
        assert rep.mode == "reference"
        assert rep.evm_pct < 15
        assert rep.depth_db > 30
        assert rep.isr_db_measured == pytest.approx(18.0, abs=0.5)
        assert rep.taps is not None
        assert rep.taps["delay_s"] == pytest.approx(15e-9, abs=0.2e-9)

    def test_off_mode(self, cfg):
        cfg = replace(cfg, canceller=replace(cfg.canceller, mode="off"))
        rep = runner.run(cfg)
        assert rep.evm_pct > 60
        assert math.isnan(rep.depth_db)
        assert rep.taps is None

    def test_bss_mode(self, cfg):
        tree = copy.deepcopy(BASE_TREE)
        # instantaneous mixing for the blind method
        tree["channel"]["paths"]["a12"]["delay_s"] = 0.0
        tree["channel"]["paths"]["a22"]["delay_s"] = 0.0
        tree["canceller"]["mode"] = "bss"
        tree["sim"]["n_symbols"] = 4096
        rep = runner.run(from_tree(tree))
        assert rep.evm_pct < 15
        assert rep.demix is not None

    def test_isr_calibration_tracks_config(self, cfg):
        for isr in (-10.0, 5.0):
            c = replace(cfg, interference=replace(cfg.interference, isr_db=isr))
            rep = runner.run(c)
            assert rep.isr_db_measured == pytest.approx(isr, abs=0.3)

    def test_determinism_byte_identical(self, cfg, tmp_path):
        """Same config + seed produce byte-identical artifacts."""
        d1, d2 = tmp_path / "a", tmp_path / "b"
        runner.run(cfg, d1)
        runner.run(cfg, d2)
        names = sorted(p.name for p in d1.iterdir())
        assert names == sorted(p.name for p in d2.iterdir())
        for name in names:
            if name == "report.json":
                r1 = json.loads((d1 / name).read_text())
                r2 = json.loads((d2 / name).read_text())
                r1.pop("runtime_ms"), r2.pop("runtime_ms")
                assert r1 == r2
            else:
                assert (d1 / name).read_bytes() == (d2 / name).read_bytes()

    def test_seed_changes_output(self, cfg):
        rep1 = runner.run(cfg)
        rep2 = runner.run(replace(cfg, sim=replace(cfg.sim, seed=43)))
        assert rep1.evm_pct != rep2.evm_pct

    def test_report_recomputable_from_artifacts(self, cfg, tmp_path):
        """EVM and ISR in the report match offline recomputation from CSVs."""
        rep = runner.run(cfg, tmp_path)
        errs = np.loadtxt(tmp_path / "evm_errors.csv", delimiter=",",
                          skiprows=1)
        err_power = np.mean(errs[:, 1] ** 2 + errs[:, 2] ** 2)
        assert 100 * math.sqrt(err_power) == pytest.approx(rep.evm_pct,
                                                           rel=1e-9)
        psd_soi = np.loadtxt(tmp_path / "psd_soi.csv", delimiter=",",
                             skiprows=1)
        psd_int = np.loadtxt(tmp_path / "psd_interference.csv", delimiter=",",
                             skiprows=1)
        k = np.argmin(np.abs(psd_soi[:, 0]))
        isr = psd_int[k, 1] - psd_soi[k, 1]
        assert isr == pytest.approx(rep.isr_db_measured, abs=1e-6)

        from rfcancel.waveform import load_waveform

        before = load_waveform(tmp_path / "int_before.rcwv")
        after = load_waveform(tmp_path / "int_after.rcwv")
        depth = met.cancellation_depth(before, after,
                                       runner.occupied_band(cfg)).depth_db
        assert depth == pytest.approx(rep.depth_db, abs=0.01)

    def test_report_json_fields(self, cfg, tmp_path):
        runner.run(cfg, tmp_path)
        rep = json.loads((tmp_path / "report.json").read_text())
        for key in ("mode", "evm_pct", "depth_db", "isr_db_measured",
                    "taps", "runtime_ms", "seed"):
            assert key in rep


class TestSweepIsr:
    def test_empty_list(self, cfg):
        assert runner.sweep_isr(cfg, []) == []

    def test_single_point_matches_run(self, cfg):
        rows = runner.sweep_isr(cfg, [18.0])
        rep = runner.run(cfg)
        assert rows[0]["evm_on_pct"] == pytest.approx(rep.evm_pct, rel=1e-9)
        off = runner.run(replace(cfg,
                                 canceller=replace(cfg.canceller, mode="off")))
        assert rows[0]["evm_off_pct"] == pytest.approx(off.evm_pct, rel=1e-9)

    def test_table_written(self, cfg, tmp_path):
        runner.sweep_isr(cfg, [0.0, 9.0], tmp_path)
        lines = (tmp_path / "sweep_isr.csv").read_text().strip().split("\n")
        assert lines[0] == "isr_db,evm_off_pct,evm_on_pct,depth_db,error"
        assert len(lines) == 3


class TestSweepFrequency:
    def test_single_carrier_consistent_with_run_depth(self, cfg):
        """Tone-probe depth at the training carrier matches the wideband
        run's depth within the envelope-decorrelation allowance."""
        cfg = replace(cfg, sweep=replace(cfg.sweep, train_carrier_hz=2.4e9))
        rows = runner.sweep_frequency(cfg, [2.4e9])
        rep = runner.run(cfg)
        assert rows[0]["depth_db"] == pytest.approx(rep.depth_db, abs=2.0)

    def test_oracle_column_present(self, cfg, tmp_path):
        rows = runner.sweep_frequency(cfg, [1.0e9, 3.0e9], tmp_path)
        for row in rows:
            assert not math.isnan(row["oracle_db"])
        lines = (tmp_path / "sweep_freq.csv").read_text().strip().split("\n")
        assert lines[0] == "carrier_hz,depth_db,oracle_db,error"


class TestSweepFormat:
    def test_bad_row_flagged_and_sweep_continues(self, cfg):
        rows = runner.sweep_format(cfg, ["qam32", "qpsk"])
        assert rows[0]["error"] != ""
        assert math.isnan(rows[0]["evm_on_pct"])
        assert rows[1]["error"] == ""
        assert rows[1]["evm_on_pct"] < 15

    def test_single_format_consistent(self, cfg):
        rows = runner.sweep_format(cfg, ["qpsk"])
        base = replace(
            cfg,
            soi=replace(cfg.soi, format="qpsk"),
            interference=replace(cfg.interference,
                                 isr_db=cfg.sweep.format_isr_db),
        )
        rep = runner.run(base)
        assert rows[0]["evm_on_pct"] == pytest.approx(rep.evm_pct, rel=1e-9)


class TestCompareSeparators:
    def test_structure(self):
        tree = copy.deepcopy(BASE_TREE)
        tree["channel"]["paths"]["a12"]["delay_s"] = 0.0
        tree["channel"]["paths"]["a22"]["delay_s"] = 0.0
        tree["interference"]["isr_db"] = 9.0
        tree["canceller"]["taps_error"] = {}
        tree["sim"]["n_symbols"] = 4096
        rows = runner.compare_separators(from_tree(tree))
        ref = next(r for r in rows if r["method"] == "reference")
        bss = next(r for r in rows if r["method"] == "bss")
        assert ref["free_parameters"] == 2
        assert bss["free_parameters"] == 4
        assert ref["sir_db"] > 20
        assert bss["sir_db"] > 20
