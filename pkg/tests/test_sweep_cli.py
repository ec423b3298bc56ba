import json
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from nmrclone import cli, sweep, validation
from nmrclone.config import RunConfig, format_config, load_config, parse_run
from nmrclone.nmrsim.system import SystemConfigError

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="module")
def ideal_records():
    from nmrclone.nmrsim.system import default_system

    return sweep.run_sweep(default_system(), RunConfig())


class TestGrid:
    def test_shape_and_order(self, ideal_records):
        assert len(ideal_records) == 312
        assert [(r.theta, r.phi) for r in ideal_records] == sweep.grid()
        assert sweep.THETA_DEG[-1] == 180 and sweep.PHI_DEG[-1] == 345

    def test_poles_repeat(self, ideal_records):
        assert sum(r.theta == 0 for r in ideal_records) == 24

    def test_surfaces_analytic(self, ideal_records):
        for r in ideal_records:
            th, ph = np.radians(r.theta), np.radians(r.phi)
            assert r.integral_a.real == pytest.approx(2 / 3 * np.sin(th) * np.cos(ph), abs=1e-10)
            assert r.integral_b.imag == pytest.approx(2 / 3 * np.sin(th) * np.sin(ph), abs=1e-10)

    def test_phi_column_sum_vanishes(self, ideal_records):
        for t in sweep.THETA_DEG:
            assert abs(sum(r.integral_a.real for r in ideal_records if r.theta == t)) < 1e-12

    def test_pulse_ideal_selective_equivalence(self, sys, ideal_records):
        pulse = sweep.run_sweep(sys, RunConfig(mode="pulse", ideal_selective=True))
        worst = max(abs(a.integral_a - b.integral_a) + abs(a.integral_b - b.integral_b) for a, b in zip(pulse, ideal_records))
        assert worst < 1e-6


class TestFiles:
    def test_csv_header(self, ideal_records):
        assert sweep.records_csv(ideal_records).splitlines()[0] == "theta_deg,phi_deg,re_a,im_a,re_b,im_b"

    def test_golden_surfaces(self, ideal_records, tmp_path):
        paths = sweep.write_outputs(ideal_records, tmp_path, RunConfig())
        for p in paths:
            if p.suffix == ".dat" or p.suffix == ".csv":
                assert p.read_bytes() == (GOLDEN / p.name).read_bytes(), p.name

    def test_metadata_separate(self, ideal_records, tmp_path):
        sweep.write_outputs(ideal_records, tmp_path, RunConfig())
        meta = json.loads((tmp_path / "sweep_ideal.meta.json").read_text())
        assert "created_utc" in meta and meta["records"] == 312
        assert "created" not in (tmp_path / "sweep_ideal.csv").read_text()

    def test_json_records(self, ideal_records, tmp_path):
        sweep.write_outputs(ideal_records, tmp_path, RunConfig(format="json"))
        data = json.loads((tmp_path / "sweep_ideal.json").read_text())
        assert len(data) == 312 and data[0]["theta_deg"] == 0 and data[1]["phi_deg"] == 15

    def test_rerun_overwrites_stale_output(self, ideal_records, tmp_path):
        (tmp_path / "sweep_ideal.csv").write_text("partial")
        (tmp_path / "sweep_ideal.csv.tmp").write_text("junk")
        sweep.write_outputs(ideal_records, tmp_path, RunConfig())
        assert (tmp_path / "sweep_ideal.csv").read_bytes() == (GOLDEN / "sweep_ideal.csv").read_bytes()
        assert not (tmp_path / "sweep_ideal.csv.tmp").exists()

    @pytest.mark.parametrize("mode", ["ideal", "pulse"])
    def test_workers_do_not_change_output(self, sys, mode):
        one = sweep.records_csv(sweep.run_sweep(sys, RunConfig(mode=mode)))
        many = sweep.records_csv(sweep.run_sweep(sys, RunConfig(mode=mode, workers=3)))
        assert one == many


class TestConfig:
    def test_bundled_default(self, sys):
        s, run = load_config()
        assert s == sys and run.eps90_scale == 0.9 and run.mode == "ideal"

    def test_run_section_round_trip(self, sys, tmp_path):
        run = RunConfig(mode="pulse", relaxation=True, eps90_scale=0.8, workers=2)
        p = tmp_path / "c.ini"
        p.write_text(format_config(sys, run))
        s, back = load_config(p)
        assert s == sys and replace(back, system_path=None) == run

    @pytest.mark.parametrize(
        "body, message",
        [
            ("eps90_scale = 1.5", "eps90 scale"),
            ("workers = 0", "worker count"),
            ("mode = fancy", "mode"),
            ("colour = red", "unknown run option"),
            ("relaxation = maybe", "[run] relaxation"),
        ],
    )
    def test_run_errors(self, body, message):
        with pytest.raises(SystemConfigError, match=message.replace("[", r"\[").replace("]", r"\]")):
            parse_run(f"[run]\n{body}\n", "c.ini")

    def test_error_line_number(self):
        with pytest.raises(SystemConfigError, match=r"c.ini:3: \[run\] workers"):
            parse_run("[run]\nmode = ideal\nworkers = lots\n", "c.ini")


class TestCli:
    def test_clone_ideal(self, tmp_path, capsys):
        assert cli.main(["clone", "--theta", "90", "--phi", "0", "--out", str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert "fidelity A 0.833333" in out and "+0.6667" in out
        report = json.loads((tmp_path / "clone_ideal.json").read_text())
        assert report["ideal"]["integral_a"] == pytest.approx([2 / 3, 0])
        assert (tmp_path / "clone_ideal_spectrum.csv").exists()

    def test_clone_pole(self, tmp_path):
        cli.main(["clone", "--theta", "0", "--phi", "0", "--out", str(tmp_path)])
        report = json.loads((tmp_path / "clone_ideal.json").read_text())
        assert report["ideal"]["integral_a"] == pytest.approx([0, 0], abs=1e-12)
        assert report["ideal"]["bloch_a"] == pytest.approx([0, 0, 2 / 3])

    def test_clone_pulse_relaxation_reduces(self, tmp_path):
        cli.main(["clone", "--mode", "pulse", "--relaxation", "--out", str(tmp_path)])
        pulse = json.loads((tmp_path / "clone_pulse.json").read_text())["pulse"]
        assert 0 < pulse["reduction_factor"] < 1
        assert abs(complex(*pulse["integral_a"])) < 2 / 3

    def test_sweep_writes_files(self, tmp_path, capsys):
        assert cli.main(["sweep", "--out", str(tmp_path)]) == 0
        assert (tmp_path / "sweep_ideal.csv").read_bytes() == (GOLDEN / "sweep_ideal.csv").read_bytes()
        assert "312 records" in capsys.readouterr().out

    def test_spectrum(self, tmp_path, capsys):
        rc = cli.main(["spectrum", "--mode", "pulse", "--ideal-selective", "--cyclops", "--imbalance", "0.05", "--out", str(tmp_path), "--points", "64"])
        assert rc == 0
        assert "A: 4 lines" in capsys.readouterr().out
        assert len((tmp_path / "spectrum_pulse_H.dat").read_text().splitlines()) == 65

    def test_bad_config(self, tmp_path, capsys):
        bad = tmp_path / "bad.ini"
        bad.write_text("[spectrometer]\nh_frequency_mhz = 600\np_frequency_mhz = 243\n[P]\noffset_hz = 0\nt1_s = 1\nt2_s = -1\n")
        assert cli.main(["clone", "--config", str(bad)]) == 2
        assert "bad.ini:7: [P] t2_s" in capsys.readouterr().err

    def test_eps90_flag_validated(self, capsys):
        assert cli.main(["clone", "--eps90-scale", "0"]) == 2

    def test_zero_ab_coupling_named_failure(self, sys):
        check = validation.check_echo(sys.with_couplings(AB=0))
        assert not check.passed and "echo-contract" in check.value and "tau_AB" in check.value

    def test_eps90_comparison_reported(self, sys):
        check = validation.check_eps90(sys)
        assert "error(0.9)" in check.value and "error(1.0)" in check.value
