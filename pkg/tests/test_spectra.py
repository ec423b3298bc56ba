import json

import numpy as np
import pytest

from nmrclone import cloner, qcore, spectra
from nmrclone.nmrsim import engine
from nmrclone.nmrsim.engine import RunOptions, op
from nmrclone.pulse import PulseExperiment
from nmrclone.qcore import DensityState

from conftest import random_density


def _ax():
    return op("A", "x") / 4


class TestAcquire:
    def test_ax_four_equal_lines(self, sys):
        spec = spectra.acquire(_ax(), sys)
        lines = spec.for_spin("A")
        assert len(lines) == 4
        np.testing.assert_allclose([l.amplitude for l in lines], [0.25] * 4, atol=1e-15)
        assert spectra.integrate_multiplet(spec, "A") == pytest.approx(1.0)

    def test_ax_line_positions_oracle(self, sys):
        # eigen-decomposition of the secular Hamiltonian, independent of the line loop
        h = engine.hamiltonian(sys) / (2 * np.pi)
        e = np.real(np.diag(h))
        expected = sorted(e[a] - e[a | 2] for a in range(8) if not a & 2)
        got = sorted(l.frequency for l in spectra.acquire(_ax(), sys).for_spin("A"))
        np.testing.assert_allclose(got, expected, atol=1e-12)
        combos = sorted(104 + sa * 14.3 / 2 + sp * 9.1 / 2 for sa in (1, -1) for sp in (1, -1))
        np.testing.assert_allclose(got, combos, atol=1e-12)

    def test_multiplet_windows(self, sys):
        spec = spectra.acquire(_ax(), sys)
        assert all(80 < l.frequency < 130 for l in spec.for_spin("A"))
        assert all(-130 < l.frequency < -80 for l in spec.for_spin("B"))

    def test_eight_proton_lines(self, sys, rng):
        spec = spectra.acquire(DensityState(random_density(rng)), sys)
        assert len(spec.lines) == 8

    def test_az_no_signal(self, sys):
        spec = spectra.acquire(op("A", "z"), sys)
        assert max(abs(l.amplitude) for l in spec.lines) == 0

    def test_px_clone_outer_lines(self, sys):
        spec = spectra.acquire(cloner.deviation_output(np.pi / 2, 0), sys)
        for spin in "AB":
            lines = sorted(spec.for_spin(spin), key=lambda l: l.frequency)
            amps = [l.amplitude for l in lines]
            np.testing.assert_allclose([amps[0], amps[3]], [1 / 3, 1 / 3], atol=1e-12)
            np.testing.assert_allclose([amps[1], amps[2]], [0, 0], atol=1e-12)

    def test_linewidth_from_t2(self, sys):
        line = spectra.acquire(_ax(), sys).for_spin("A")[0]
        assert line.linewidth == pytest.approx(1 / (np.pi * 1.82))

    def test_phosphorus_channel(self, sys):
        spec = spectra.acquire(op("P", "x") / 4, sys, "P")
        assert len(spec.lines) == 4
        assert spectra.integrate_multiplet(spec, "P") == pytest.approx(1.0)

    def test_full_mode_close_to_secular(self, sys):
        rho = cloner.deviation_output(np.pi / 2, 0)
        sec = spectra.integrate_multiplet(spectra.acquire(rho, sys), "A")
        full = spectra.integrate_multiplet(spectra.acquire(rho, sys, mode="full"), "A")
        assert abs(sec - full) < 1e-2

    def test_bad_channel(self, sys):
        with pytest.raises(spectra.SpectrumError):
            spectra.acquire(_ax(), sys, "X")


class TestIntegrals:
    def test_px(self, sys):
        ia, ib = spectra.multiplet_integrals(cloner.deviation_output(np.pi / 2, 0), sys)
        assert ia == pytest.approx(2 / 3) and ib == pytest.approx(2 / 3)

    def test_mixed_input_gives_zero(self, sys):
        out = cloner.clone(DensityState(np.eye(2) / 2, ("P",)))
        assert abs(spectra.multiplet_integrals(out.full, sys)[0]) < 1e-12

    def test_45_90(self, sys):
        ia, _ = spectra.multiplet_integrals(cloner.deviation_output(np.pi / 4, np.pi / 2), sys)
        assert ia == pytest.approx(0.4714045207910317j, abs=1e-12)

    def test_sum_rule(self, sys, rng):
        for _ in range(50):
            s = DensityState(random_density(rng))
            spec = spectra.acquire(s, sys)
            for spin in "AB":
                b = qcore.bloch_vector(qcore.partial_trace(s, [spin]))
                assert spectra.integrate_multiplet(spec, spin) == pytest.approx(complex(b.x, b.y), abs=1e-10)

    def test_unknown_spin(self, sys):
        with pytest.raises(spectra.SpectrumError):
            spectra.integrate_multiplet(spectra.acquire(_ax(), sys), "Q")

    def test_spin_on_other_channel(self, sys):
        with pytest.raises(spectra.SpectrumError):
            spectra.integrate_multiplet(spectra.acquire(_ax(), sys), "P")


class TestLineshape:
    def test_lorentzian_area(self, sys):
        spec = spectra.Spectrum("H", (spectra.Line(10.0, 0.7 + 0j, 0.5, "A"),))
        f = np.linspace(-2000, 2000, 400001)
        area = np.trapezoid(spec.evaluate(f).real, f)
        assert area == pytest.approx(0.7, rel=2e-3)

    def test_peak_height(self):
        spec = spectra.Spectrum("H", (spectra.Line(0.0, 1 + 0j, 2.0, "A"),))
        assert spec.evaluate(np.array([0.0]))[0].real == pytest.approx(1 / np.pi)

    def test_fid_transform_matches_analytic(self, sys):
        spec = spectra.acquire(cloner.deviation_output(np.pi / 2, 0.3), sys)
        sw, n = 1000.0, 1 << 15
        freqs, values = spectra.fft_spectrum(spec.fid(n, sw), sw)
        analytic = spec.evaluate(freqs)
        assert np.max(np.abs(values - analytic)) < 2e-2 * np.max(np.abs(analytic))


class TestReceiver:
    def test_identical_runs(self, sys):
        base = spectra.acquire(cloner.deviation_output(1.0, 2.0), sys)
        runs = [spectra.Spectrum("H", base.rotated(k).lines, k) for k in spectra.cyclops_phases()]
        avg = spectra.cyclops_average(runs)
        np.testing.assert_allclose([l.amplitude for l in avg.lines], [l.amplitude for l in base.lines], atol=1e-12)

    def test_offset_cancels(self, sys):
        exp = PulseExperiment(sys, RunOptions(ideal_selective=True))
        runs = exp.cyclops_runs(np.pi / 2, 0, dc_offset=0.2)
        avg = spectra.cyclops_average(runs)
        assert spectra.image_power(runs[0]) == pytest.approx(0.2)
        assert spectra.image_power(avg) < 1e-12

    def test_quadrature_images_oracle(self, sys):
        exp = PulseExperiment(sys, RunOptions(ideal_selective=True))
        eps = 0.05
        runs = exp.cyclops_runs(np.pi / 3, 0.7, imbalance=eps)
        # explicit 4-term average of the detected signals
        clean = [exp.spectrum(np.pi / 3, 0.7, "H", k) for k in spectra.cyclops_phases()]
        manual = []
        for k, c in zip(spectra.cyclops_phases(), clean):
            amps = np.array([l.amplitude for l in c.lines])
            detected = np.concatenate([amps, -eps / 2 * np.conj(amps)])
            manual.append(detected * np.exp(-1j * k))
        manual = np.mean(manual, axis=0)
        avg = spectra.cyclops_average(runs)
        np.testing.assert_allclose([l.amplitude for l in avg.lines], manual, atol=1e-12)
        assert spectra.image_power(avg) < 1e-3 * spectra.image_power(runs[0])
        assert spectra.image_power(runs[0]) > 0

    def test_wrong_run_count(self, sys):
        base = spectra.acquire(_ax(), sys)
        with pytest.raises(spectra.SpectrumError, match="4 runs"):
            spectra.cyclops_average([base] * 3)

    def test_mismatched_runs(self, sys):
        a = spectra.acquire(_ax(), sys)
        b = spectra.acquire(_ax(), sys.scaled_offsets(2))
        runs = [spectra.Spectrum("H", x.lines, k) for x, k in zip((a, a, a, b), spectra.cyclops_phases())]
        with pytest.raises(spectra.SpectrumError, match="differ"):
            spectra.cyclops_average(runs)

    def test_wrong_phase_order(self, sys):
        a = spectra.acquire(_ax(), sys)
        runs = [spectra.Spectrum("H", a.lines, 0.0) for _ in range(4)]
        with pytest.raises(spectra.SpectrumError, match="receiver phase"):
            spectra.cyclops_average(runs)

    def test_ax_positive_real(self, sys):
        z = spectra.integrate_multiplet(spectra.acquire(_ax(), sys), "A")
        assert z.real > 0 and abs(z.imag) < 1e-15


class TestExport:
    def test_csv(self, sys):
        text = spectra.acquire(_ax(), sys).to_csv()
        rows = text.strip().splitlines()
        assert rows[0] == "frequency_hz,real,imag,linewidth_hz,spin,partners"
        assert len(rows) == 9
        assert "-0.000000000000" not in text

    def test_json(self, sys):
        payload = json.loads(spectra.acquire(_ax(), sys).to_json({"note": "x"}))
        assert payload["channel"] == "H" and len(payload["lines"]) == 8
        assert payload["metadata"] == {"note": "x"}

    def test_fmt_negative_zero(self):
        assert spectra.fmt(-1e-15) == "0.000000000000"
        assert spectra.fmt(-0.5, 2) == "-0.50"
