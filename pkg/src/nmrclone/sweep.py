"""The 13 x 24 (theta, phi) sweep: records, worker pool and file emission.

Data payloads are fixed-decimal and ordered theta-major, so repeated runs
and different worker counts write identical bytes.  Timestamps live only
in the separate ``.meta.json`` file.
"""
from __future__ import annotations

import csv
import io
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import cloner, spectra
from .config import RunConfig
from .nmrsim.system import SpinSystem
from .pulse import PulseExperiment
from .spectra import fmt

THETA_DEG = tuple(range(0, 181, 15))
PHI_DEG = tuple(range(0, 346, 15))
DECIMALS = 12
CSV_HEADER = ("theta_deg", "phi_deg", "re_a", "im_a", "re_b", "im_b")
SURFACES = ("re_a", "im_a", "re_b", "im_b")


@dataclass(frozen=True)
class SweepRecord:
    theta: int
    phi: int
    integral_a: complex
    integral_b: complex
    fidelity_a: float
    fidelity_b: float
    mode: str

    def surface(self, name: str) -> float:
        part, spin = name.split("_")
        z = self.integral_a if spin == "a" else self.integral_b
        return z.real if part == "re" else z.imag


def grid() -> list[tuple[int, int]]:
    return [(t, p) for t in THETA_DEG for p in PHI_DEG]


def ideal_point(theta_deg: int, phi_deg: int) -> SweepRecord:
    th, ph = np.radians(theta_deg), np.radians(phi_deg)
    out = cloner.clone_angles(th, ph)
    ia, ib = spectra.multiplet_integrals(cloner.deviation_output(th, ph), _ideal_system())
    return SweepRecord(theta_deg, phi_deg, ia, ib, out.fidelity_a, out.fidelity_b, "ideal")


def _ideal_system() -> SpinSystem:
    # line positions do not affect integrals; any valid system works
    return SpinSystem()


# Per-process experiment, built once by the pool initializer.
_WORKER: dict = {}


def _init_worker(sys: SpinSystem, run: RunConfig) -> None:
    _WORKER["sys"] = sys
    _WORKER["run"] = run
    _WORKER["exp"] = PulseExperiment(sys, run.run_options(), run.eps90_scale) if run.mode == "pulse" else None


def _compute_row(theta_deg: int) -> list[SweepRecord]:
    run: RunConfig = _WORKER["run"]
    if run.mode == "ideal":
        return [ideal_point(theta_deg, p) for p in PHI_DEG]
    exp: PulseExperiment = _WORKER["exp"]
    rows = []
    for p in PHI_DEG:
        r = exp.run(np.radians(theta_deg), np.radians(p))
        rows.append(SweepRecord(theta_deg, p, r.integral_a, r.integral_b, r.fidelity_a, r.fidelity_b, "pulse"))
    return rows


def run_sweep(sys: SpinSystem, run: RunConfig) -> list[SweepRecord]:
    """All 312 records, theta-major, independent of ``run.workers``."""
    if run.workers == 1:
        _init_worker(sys, run)
        rows = [_compute_row(t) for t in THETA_DEG]
    else:
        with ProcessPoolExecutor(run.workers, initializer=_init_worker, initargs=(sys, run)) as pool:
            rows = list(pool.map(_compute_row, THETA_DEG))
    records = [rec for row in rows for rec in row]
    records.sort(key=lambda r: (r.theta, r.phi))
    return records


# -- serialization -------------------------------------------------------------


def _r(x: float) -> float:
    return round(float(x), DECIMALS) + 0.0


def records_csv(records: list[SweepRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow([r.theta, r.phi] + [fmt(r.surface(s), DECIMALS) for s in SURFACES])
    return buf.getvalue()


def records_json(records: list[SweepRecord]) -> str:
    payload = [
        {
            "theta_deg": r.theta,
            "phi_deg": r.phi,
            "mode": r.mode,
            "integral_a": [_r(r.integral_a.real), _r(r.integral_a.imag)],
            "integral_b": [_r(r.integral_b.real), _r(r.integral_b.imag)],
            "fidelity_a": _r(r.fidelity_a),
            "fidelity_b": _r(r.fidelity_b),
        }
        for r in records
    ]
    return json.dumps(payload, indent=1) + "\n"


def surface_matrix(records: list[SweepRecord], name: str) -> str:
    """gnuplot ``nonuniform matrix`` layout: first row phi, first column theta."""
    table = {(r.theta, r.phi): r.surface(name) for r in records}
    lines = [f"# {name}: rows theta_deg, columns phi_deg"]
    lines.append(" ".join([str(len(PHI_DEG))] + [str(p) for p in PHI_DEG]))
    for t in THETA_DEG:
        lines.append(" ".join([str(t)] + [fmt(table[(t, p)], DECIMALS) for p in PHI_DEG]))
    return "\n".join(lines) + "\n"


def _write(path: Path, text: str) -> None:
    """Atomic replace, so an interrupted run never leaves a half-written file."""
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def write_outputs(records: list[SweepRecord], out_dir: str | Path, run: RunConfig, fmt_kind: str | None = None) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"sweep_{run.mode}"
    kind = fmt_kind or run.format
    written = []
    data = out / f"{stem}.{kind}"
    _write(data, records_csv(records) if kind == "csv" else records_json(records))
    written.append(data)
    for name in SURFACES:
        p = out / f"{stem}_{name}.dat"
        _write(p, surface_matrix(records, name))
        written.append(p)
    meta = {
        "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "records": len(records),
        "config": run.describe(),
        "files": [p.name for p in written],
    }
    mp = out / f"{stem}.meta.json"
    _write(mp, json.dumps(meta, indent=2, sort_keys=True) + "\n")
    written.append(mp)
    return written
