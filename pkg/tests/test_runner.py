import filecmp
import os

import numpy as np
import pytest

from ssbmem.cli import main as cli_main
from ssbmem.config import default_config, from_dict, to_dict
from ssbmem.reporting import (
    emit_run_report,
    emit_sweep_report,
    load_manifest,
    read_sweep_csv,
    render_report,
)
from ssbmem.runner import SweepResult, run_sequence, run_sweep


def small_cfg(n=120, seed=11, **overrides):
    d = to_dict(default_config())
    d["sequence"]["n_realizations"] = n
    d["sequence"]["master_seed"] = seed
    for section, kv in overrides.items():
        d.setdefault(section, {}).update(kv)
    return from_dict(d)


def _csv_files(outdir):
    return sorted(f for f in os.listdir(outdir) if f.endswith(".csv"))


class TestDeterminism:
    def test_same_seed_byte_identical_reports(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        emit_run_report(run_sequence(small_cfg()), out1, figures=False)
        emit_run_report(run_sequence(small_cfg()), out2, figures=False)
        files = _csv_files(out1)
        assert files == _csv_files(out2)
        for f in files:
            assert filecmp.cmp(out1 / f, out2 / f, shallow=False), f

    def test_worker_count_invariant(self, tmp_path):
        out1, out2 = tmp_path / "w1", tmp_path / "w2"
        emit_run_report(run_sequence(small_cfg(), workers=1), out1,
                        figures=False)
        emit_run_report(run_sequence(small_cfg(), workers=3), out2,
                        figures=False)
        for f in _csv_files(out1):
            assert filecmp.cmp(out1 / f, out2 / f, shallow=False), f

    def test_different_seed_changes_noise(self):
        r1 = run_sequence(small_cfg(seed=11))
        r2 = run_sequence(small_cfg(seed=12))
        assert not np.allclose(r1.signal_raw.mean_x, r2.signal_raw.mean_x)

    def test_manifest_round_trip(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        emit_run_report(run_sequence(small_cfg()), out1, figures=False)
        kind, cfg_back = load_manifest(out1)
        assert kind == "run"
        emit_run_report(run_sequence(cfg_back), out2, figures=False)
        for f in _csv_files(out1):
            assert filecmp.cmp(out1 / f, out2 / f, shallow=False), f


class TestPairingIntegrity:
    def test_subtraction_doubles_noise_distinct_seeds(self):
        # blank partners share the deterministic transient but carry
        # fresh noise; the subtracted variance sits at two shot units
        cfg = small_cfg(n=800, control={"leakage_amp": 4.0})
        res = run_sequence(cfg)
        assert res.subtracted_norm.var_x.mean() == pytest.approx(2.0, abs=0.2)

    def test_transient_removed_from_mean(self):
        # oracle: the same noiseless ensemble synthesized without leakage
        noiseless = {"shot_noise": False, "quantizer": False}
        leaky = run_sequence(small_cfg(n=1, control={"leakage_amp": 20.0},
                                       acquisition=noiseless))
        clean = run_sequence(small_cfg(n=1, acquisition=noiseless))
        assert np.allclose(leaky.subtracted.mean_x, clean.subtracted.mean_x,
                           atol=1e-10)
        assert np.allclose(leaky.subtracted.mean_y, clean.subtracted.mean_y,
                           atol=1e-10)
        # while the raw trace does contain the switching artifact
        assert np.max(np.abs(leaky.signal_raw.mean_x
                             - clean.signal_raw.mean_x)) > 0.5


class TestMetrics:
    def test_paper_point_efficiency(self):
        res = run_sequence(small_cfg(n=600))
        assert res.metrics["eta"] == pytest.approx(0.10, abs=0.01)
        assert res.metrics["shot_scalar"] == pytest.approx(1.0, abs=0.1)

    def test_blank_run_no_peaks(self):
        cfg = small_cfg(n=300, signal={"amplitude": 0.0})
        res = run_sequence(cfg)
        assert np.abs(res.subtracted.mean_x).max() < 1.0
        assert np.isnan(res.metrics["eta"])
        assert res.signal_norm.var_x.mean() == pytest.approx(1.0, abs=0.15)

    def test_full_scale_invariance_of_normalized_variance(self):
        res1 = run_sequence(small_cfg(acquisition={"full_scale": 64.0}))
        res2 = run_sequence(small_cfg(acquisition={"full_scale": 128.0}))
        # same seeds, different ADC scaling: shot-normalized variances agree
        assert res1.metrics["v_out_x"] == pytest.approx(
            res2.metrics["v_out_x"], abs=2e-3
        )
        assert res1.metrics["eta"] == pytest.approx(res2.metrics["eta"],
                                                    abs=1e-3)


class TestConfigValidation:
    def test_rejects_sideband_above_nyquist_margin(self):
        with pytest.raises(ValueError):
            small_cfg(signal={"frequency_hz": 12.0e6})

    def test_rejects_wideband_pulse(self):
        with pytest.raises(ValueError):
            small_cfg(signal={"ramp": 2.0e-8, "duration": 5e-8})

    def test_rejects_unknown_backend(self):
        with pytest.raises(ValueError):
            small_cfg(sequence={"backend": "magic"})

    def test_rejects_unknown_sweep_kind(self):
        with pytest.raises(ValueError):
            small_cfg(sweep={"kind": "voltage", "grid": [1.0]})

    def test_rejects_empty_grid(self):
        with pytest.raises(ValueError):
            small_cfg(sweep={"kind": "larmor", "grid": []})


def _noiseless_sweep_cfg(kind, grid, **extra):
    d = to_dict(default_config())
    d["sequence"]["n_realizations"] = 1
    d["acquisition"]["shot_noise"] = False
    d["acquisition"]["quantizer"] = False
    d["sweep"] = {"kind": kind, "grid": grid, **extra}
    return from_dict(d)


class TestSweeps:
    def test_larmor_sweep_slope(self):
        d = to_dict(default_config())
        d["sequence"]["n_realizations"] = 1
        d["sequence"]["hold_time"] = 20e-6
        d["acquisition"]["shot_noise"] = False
        d["acquisition"]["quantizer"] = False
        d["sweep"] = {"kind": "larmor",
                      "grid_hz": [621e3, 623e3, 625e3, 627e3, 629e3]}
        res = run_sweep(from_dict(d))
        # demodulation-window ramps add O(1e-3) systematic wiggle; the
        # slope tolerance of the acceptance gate is 2%
        assert res.fit["slope_rad_per_khz"] == pytest.approx(
            2 * 2 * np.pi * 1e3 * 20e-6, rel=0.01
        )

    def test_phase_sweep_unit_slope(self):
        grid = list(np.linspace(0, 2 * np.pi, 8, endpoint=False))
        res = run_sweep(_noiseless_sweep_cfg("input_phase", grid))
        assert res.fit["slope"] == pytest.approx(1.0, abs=0.005)

    def test_control_power_sweep(self):
        cfg = _noiseless_sweep_cfg("control_power",
                                   [2e-3, 5e-3, 10e-3, 20e-3])
        res = run_sweep(cfg)
        widths = [r["fwhm_hz"] for r in res.rows]
        assert all(b > a for a, b in zip(widths, widths[1:]))

    def test_dual_vs_single_ordering(self):
        cfg = _noiseless_sweep_cfg("dual_vs_single",
                                   [5e-3, 10e-3, 20e-3, 40e-3])
        res = run_sweep(cfg)
        for row in res.rows:
            assert row["eta_dual"] < row["eta_single"]

    def test_partial_failure_marks_row(self):
        # nanowatt control has no resolvable window: row flagged, sweep
        # continues and flushes the remaining points
        cfg = _noiseless_sweep_cfg("control_power", [1e-9, 10e-3])
        res = run_sweep(cfg)
        assert "error" in res.rows[0]
        assert "fwhm_hz" in res.rows[1]

    def test_storage_time_sweep_fit(self):
        grid = [4e-6, 8e-6, 12e-6, 16e-6, 20e-6]
        res = run_sweep(_noiseless_sweep_cfg("storage_time", grid))
        assert res.fit["tau_m"] == pytest.approx(10e-6, rel=0.02)
        assert res.fit["eta0"] == pytest.approx(0.25, rel=0.02)


class TestReports:
    def test_sweep_csv_shape(self, tmp_path):
        grid = [4e-6, 8e-6, 12e-6, 16e-6]
        res = run_sweep(_noiseless_sweep_cfg("storage_time", grid))
        emit_sweep_report(res, tmp_path, figures=False)
        rows = read_sweep_csv(tmp_path / "sweep.csv")
        assert len(rows) == 4
        with open(tmp_path / "sweep.csv") as f:
            assert len(f.readlines()) == 5  # header + 4 data rows

    def test_empty_results_rejected(self, tmp_path):
        res = SweepResult("storage_time", [], None, default_config())
        with pytest.raises(ValueError):
            emit_sweep_report(res, tmp_path / "x")
        assert not (tmp_path / "x").exists()

    def test_run_report_files_and_rerender(self, tmp_path):
        res = run_sequence(small_cfg(n=60))
        emit_run_report(res, tmp_path)
        for name in ("signal_raw.csv", "subtracted_norm.csv", "summary.txt",
                     "manifest.yaml", "mean_quadratures.png",
                     "variances.png"):
            assert (tmp_path / name).exists(), name
        with open(tmp_path / "summary.txt") as f:
            body = f.read()
        assert "eta = " in body
        # report path re-renders figures from the CSV data alone
        (tmp_path / "mean_quadratures.png").unlink()
        render_report(tmp_path)
        assert (tmp_path / "mean_quadratures.png").exists()


class TestCli:
    def test_run_verb(self, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.yaml"
        cfg_path.write_text(
            "sequence:\n  n_realizations: 50\n  master_seed: 5\n"
        )
        rc = cli_main(["run", "--config", str(cfg_path), "--out",
                       str(tmp_path / "out")])
        assert rc == 0
        assert (tmp_path / "out" / "summary.txt").exists()
        assert "eta" in capsys.readouterr().out

    def test_sweep_and_report_verbs(self, tmp_path):
        cfg_path = tmp_path / "cfg.yaml"
        cfg_path.write_text(
            "sequence:\n  n_realizations: 1\n"
            "acquisition:\n  shot_noise: false\n  quantizer: false\n"
            "sweep:\n  kind: storage_time\n  grid: [4.0e-6, 12.0e-6]\n"
        )
        out = tmp_path / "out"
        assert cli_main(["sweep", "--config", str(cfg_path), "--out",
                         str(out)]) == 0
        assert (out / "sweep.csv").exists()
        assert (out / "sweep_storage_time.png").exists()
        assert cli_main(["report", "--out", str(out)]) == 0

    def test_seed_override_and_dump_records(self, tmp_path):
        cfg_path = tmp_path / "cfg.yaml"
        cfg_path.write_text("sequence:\n  n_realizations: 3\n")
        out = tmp_path / "out"
        rc = cli_main(["run", "--config", str(cfg_path), "--seed", "99",
                       "--out", str(out), "--dump-records"])
        assert rc == 0
        kind, cfg = load_manifest(out)
        assert cfg.sequence.master_seed == 99
        recs = os.listdir(out / "records")
        assert len(recs) == 2 * 3 * 3  # 3 streams x 3 realizations (+meta)

    def test_calibrate_verb(self, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.yaml"
        cfg_path.write_text(
            "sequence:\n  n_realizations: 120\n"
            "propagation:\n  nz: 64\n  dt: 1.0e-8\n"
        )
        rc = cli_main(["calibrate", "--config", str(cfg_path), "--out",
                       str(tmp_path / "cal")])
        assert rc == 0
        assert (tmp_path / "cal" / "calibration.txt").exists()
        out = capsys.readouterr().out
        assert "shot-noise scalar" in out
        assert "propagation" in out
