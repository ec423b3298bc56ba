"""``nmrclone`` command line: clone, sweep, validate, spectrum."""
from __future__ import annotations

import argparse
import json
import sys as _sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import cloner, qcore, spectra, sweep, validation
from .config import FORMATS, MODES, RunConfig, load_config
from .nmrsim.system import SpinSystem, SystemConfigError
from .pulse import PulseExperiment
from .spectra import fmt


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="spin-system INI (default: bundled measured system)")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--relaxation", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--ideal-selective", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--eps90-scale", type=float)
    p.add_argument("--b1-error", type=float)
    p.add_argument("--workers", type=int)
    p.add_argument("--out")
    p.add_argument("--format", choices=FORMATS)


def _angles(p: argparse.ArgumentParser) -> None:
    p.add_argument("--theta", type=float, default=90.0, help="input polar angle, degrees")
    p.add_argument("--phi", type=float, default=0.0, help="input azimuth, degrees")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nmrclone", description="Approximate qubit cloning on a three-spin NMR register.")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("clone", help="clone one input state and report fidelities and integrals")
    _common(p)
    _angles(p)
    p = sub.add_parser("sweep", help="run the 13 x 24 theta/phi grid")
    _common(p)
    p = sub.add_parser("validate", help="run the acceptance checks")
    _common(p)
    p = sub.add_parser("spectrum", help="write the proton (or phosphorus) spectrum of a cloned state")
    _common(p)
    _angles(p)
    p.add_argument("--channel", choices=("H", "P"), default="H")
    p.add_argument("--cyclops", action="store_true", help="average four phase-cycled scans")
    p.add_argument("--dc-offset", type=float, default=0.0)
    p.add_argument("--imbalance", type=float, default=0.0, help="receiver quadrature gain imbalance")
    p.add_argument("--points", type=int, default=4096, help="lineshape samples")
    return ap


def resolve(args: argparse.Namespace) -> tuple[SpinSystem, RunConfig]:
    sys, run = load_config(args.config)
    overrides = {
        k: v
        for k, v in {
            "mode": args.mode,
            "relaxation": args.relaxation,
            "ideal_selective": args.ideal_selective,
            "eps90_scale": args.eps90_scale,
            "b1_error": args.b1_error,
            "workers": args.workers,
            "out": args.out,
            "format": args.format,
        }.items()
        if v is not None
    }
    return sys, replace(run, **overrides)


def _c(z: complex) -> list[float]:
    return [float(fmt(z.real)), float(fmt(z.imag))]


def cmd_clone(args, sys: SpinSystem, run: RunConfig, out=None) -> dict:
    out = out or _sys.stdout
    th, ph = np.radians(args.theta), np.radians(args.phi)
    ideal = cloner.clone_angles(th, ph)
    ia, ib = cloner.ideal_signal(th, ph)
    report = {
        "theta_deg": args.theta,
        "phi_deg": args.phi,
        "ideal": {
            "fidelity_a": ideal.fidelity_a,
            "fidelity_b": ideal.fidelity_b,
            "bloch_a": qcore.bloch_vector(ideal.clone_a).as_array().tolist(),
            "bloch_b": qcore.bloch_vector(ideal.clone_b).as_array().tolist(),
            "bloch_anti": qcore.bloch_vector(ideal.anti).as_array().tolist(),
            "integral_a": _c(ia),
            "integral_b": _c(ib),
        },
    }
    print(f"input theta={args.theta:g} deg phi={args.phi:g} deg", file=out)
    print(f"ideal   fidelity A {ideal.fidelity_a:.6f}  B {ideal.fidelity_b:.6f}", file=out)
    print(f"ideal   integral A {ia.real:+.4f}{ia.imag:+.4f}i  B {ib.real:+.4f}{ib.imag:+.4f}i", file=out)
    print("ideal   Bloch A " + " ".join(f"{v:+.4f}" for v in report["ideal"]["bloch_a"]), file=out)
    out_dir = Path(run.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if run.mode == "pulse":
        exp = PulseExperiment(sys, run.run_options(), run.eps90_scale)
        r = exp.run(th, ph)
        ref = max(abs(ia), abs(ib))
        reduction = (abs(r.integral_a) + abs(r.integral_b)) / (2 * ref) if ref > 1e-12 else None
        report["pulse"] = {
            "options": run.describe(),
            "fidelity_a": r.fidelity_a,
            "fidelity_b": r.fidelity_b,
            "bloch_a": r.bloch_a.tolist(),
            "bloch_b": r.bloch_b.tolist(),
            "integral_a": _c(r.integral_a),
            "integral_b": _c(r.integral_b),
            "reduction_factor": reduction,
        }
        print(f"pulse   fidelity A {r.fidelity_a:.6f}  B {r.fidelity_b:.6f}", file=out)
        za, zb = r.integral_a, r.integral_b
        print(f"pulse   integral A {za.real:+.4f}{za.imag:+.4f}i  B {zb.real:+.4f}{zb.imag:+.4f}i", file=out)
        if reduction is not None:
            print(f"pulse   mean |integral| / ideal = {reduction:.4f}", file=out)
        spec = spectra.acquire(r.state.rho / exp.scale, sys, "H")
    else:
        spec = spectra.acquire(cloner.deviation_output(th, ph), sys, "H")
    _write_spectrum(spec, out_dir / f"clone_{run.mode}_spectrum", run.format)
    (out_dir / f"clone_{run.mode}.json").write_text(json.dumps(report, indent=2) + "\n")
    return report


def _write_spectrum(spec: spectra.Spectrum, stem: Path, kind: str) -> Path:
    path = stem.with_suffix("." + kind)
    path.write_text(spec.to_csv() if kind == "csv" else spec.to_json() + "\n")
    return path


def cmd_sweep(args, sys: SpinSystem, run: RunConfig, out=None) -> list[Path]:
    out = out or _sys.stdout
    records = sweep.run_sweep(sys, run)
    paths = sweep.write_outputs(records, run.out, run)
    worst = max(max(abs(r.fidelity_a - 5 / 6), abs(r.fidelity_b - 5 / 6)) for r in records)
    print(f"{len(records)} records ({run.mode}); max |fidelity - 5/6| = {worst:.3e}", file=out)
    for p in paths:
        print(f"wrote {p}", file=out)
    return paths


def cmd_validate(args, sys: SpinSystem, run: RunConfig, out=None) -> bool:
    out = out or _sys.stdout
    checks = validation.validate(sys)
    for c in checks:
        print(c.line(), file=out)
    ok = all(c.passed or c.observation for c in checks)
    print("all checks pass" if ok else "some checks FAILED", file=out)
    return ok


def cmd_spectrum(args, sys: SpinSystem, run: RunConfig, out=None) -> spectra.Spectrum:
    out = out or _sys.stdout
    th, ph = np.radians(args.theta), np.radians(args.phi)
    receiver = {"dc_offset": args.dc_offset, "imbalance": args.imbalance}
    if run.mode == "pulse":
        exp = PulseExperiment(sys, run.run_options(), run.eps90_scale)
        if args.cyclops:
            spec = exp.cyclops_spectrum(th, ph, args.channel, **receiver)
        else:
            spec = spectra.detect(exp.spectrum(th, ph, args.channel), **receiver)
    else:
        base = spectra.acquire(cloner.deviation_output(th, ph), sys, args.channel)
        if args.cyclops:
            runs = [
                spectra.Spectrum(base.channel, spectra.detect(base.rotated(k), **receiver).lines, k)
                for k in spectra.cyclops_phases()
            ]
            spec = spectra.cyclops_average(runs)
        else:
            spec = spectra.detect(base, **receiver)
    out_dir = Path(run.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = out_dir / f"spectrum_{run.mode}_{args.channel}"
    path = _write_spectrum(spec, stem, run.format)
    freqs = _axis(spec, args.points)
    values = spec.evaluate(freqs)
    dat = stem.with_suffix(".dat")
    dat.write_text(
        "# frequency_hz real imag\n" + "".join(f"{fmt(f, 6)} {fmt(v.real, 9)} {fmt(v.imag, 9)}\n" for f, v in zip(freqs, values))
    )
    for spin in sys.spins_on(args.channel):
        if spec.for_spin(spin):
            z = spectra.integrate_multiplet(spec, spin)
            print(f"{spin}: {len(spec.for_spin(spin))} lines, integral {z.real:+.6f}{z.imag:+.6f}i", file=out)
    print(f"wrote {path}\nwrote {dat}", file=out)
    return spec


def _axis(spec: spectra.Spectrum, n: int) -> np.ndarray:
    freqs = [l.frequency for l in spec.lines] or [0.0]
    pad = 20.0
    return np.linspace(min(freqs) - pad, max(freqs) + pad, n)


COMMANDS = {"clone": cmd_clone, "sweep": cmd_sweep, "validate": cmd_validate, "spectrum": cmd_spectrum}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        sys, run = resolve(args)
        result = COMMANDS[args.command](args, sys, run)
    except (SystemConfigError, ValueError) as exc:
        print(f"nmrclone: error: {exc}", file=_sys.stderr)
        return 2
    if args.command == "validate" and not result:
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
