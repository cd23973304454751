"""CSV and manifest serialization of experiment results.

All numbers are written with 17 significant digits through Python's
locale-independent formatting, one record per line, LF line endings.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .experiments import FringeResult, SweepResult, TrajectoryResult
from .observables import ObservableRecord

TRAJECTORY_HEADER = "t,FQ,vNE,T,P20,P11,P02,omega_delta_flag"
SWEEP_HEADER = "g,kappa,t_label,t_value,FQ,vNE,T,P20,P11,P02,completeness"
DENSITY_HEADER = "x,rho"
FRINGES_HEADER = "x,rho,visibility"
FRINGE_SCAN_HEADER = "delay,visibility,norm"
MANIFEST_SCHEMA = 1


def fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.17g}"


def orbitals_header(count: int) -> str:
    return "x," + ",".join(f"lambda{i}*chi{i}_sq" for i in range(count))


@dataclass
class RunManifest:
    command: str
    config: dict
    version: str
    timestamp: str
    diagnostics: dict
    outputs: dict[str, str] = field(default_factory=dict)  # file name -> sha256
    schema: int = MANIFEST_SCHEMA

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema": self.schema,
                "command": self.command,
                "version": self.version,
                "timestamp": self.timestamp,
                "config": self.config,
                "diagnostics": self.diagnostics,
                "outputs": self.outputs,
            },
            indent=2, sort_keys=True, allow_nan=True, default=_json_default,
        ) + "\n"


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


class _Writer:
    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.hashes: dict[str, str] = {}

    def write(self, name: str, header: str, rows: Iterable[Sequence]) -> None:
        lines = [header]
        lines.extend(",".join(c if isinstance(c, str) else fmt(c) for c in row) for row in rows)
        data = ("\n".join(lines) + "\n").encode("ascii")
        path = self.out_dir / name
        tmp = path.with_name(path.name + ".tmp")
        with open(tmp, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
        self.hashes[name] = hashlib.sha256(data).hexdigest()


def _record_row(r: ObservableRecord | None):
    if r is None:
        return [float("nan")] * 6
    return [r.F_Q, r.S, r.T, r.P_20, r.P_11, r.P_02]


def _orbital_rows(orbitals, count: int):
    count = min(count, orbitals.occupations.size)
    lam = orbitals.occupations[:count]
    yield ["nan", *lam]
    dens = np.abs(orbitals.orbitals[:, :count]) ** 2 * lam
    for x, row in zip(orbitals.grid.points, dens):
        yield [x, *row]


def _trajectory_files(w: _Writer, res: TrajectoryResult) -> dict:
    w.write("trajectory.csv", TRAJECTORY_HEADER,
            ([r.t, *_record_row(r), flag] for r, flag in zip(res.records, res.flags)))
    count = res.config.n_orbitals
    for label, orb in res.orbital_snapshots.items():
        w.write(f"orbitals_{label}.csv", orbitals_header(min(count, orb.occupations.size)),
                _orbital_rows(orb, count))
    from .observables import single_particle_density

    for label, st in res.states.items():
        dens = single_particle_density(st)
        w.write(f"density_{label}.csv", DENSITY_HEADER, zip(st.grid.points, dens.values))
    t = res.timing
    return {
        "timing": {"t_A": t.t_A, "t_B": t.t_B, "t_s": t.t_s, "omega_delta": t.omega_delta,
                   "detected": t.detected},
        "at_tA": res.at("tA").__dict__,
        "at_tB": res.at("tB").__dict__,
        **{k: v for k, v in res.diagnostics.items() if k not in ("omega_delta",)},
    }


def _sweep_files(w: _Writer, res: SweepResult) -> dict:
    failures = []
    for label in res.labels:
        rows = []
        for row in res.cells:
            for c in row:
                t_value = float("nan")
                if c.timing is not None:
                    t_value = c.timing.t_A if label == "tA" else c.timing.t_B
                rows.append([c.g, c.kappa, label, t_value, *_record_row(c.records.get(label)),
                             c.completeness])
        w.write(f"sweep_{label}.csv", SWEEP_HEADER, rows)
    for row in res.cells:
        for c in row:
            if c.error:
                failures.append({"g": c.g, "kappa": c.kappa, "error": c.error})
    cells = [{"g": c.g, "kappa": c.kappa, "completeness": c.completeness,
              "omega_delta": c.timing.omega_delta if c.timing else None,
              "timing_detected": c.timing.detected if c.timing else None}
             for row in res.cells for c in row]
    return {"cells": cells, "failures": failures, "shape": [len(res.g_values), len(res.kappa_values)]}


def _fringe_files(w: _Writer, res: FringeResult) -> dict:
    def rows():
        for k, (x, rho) in enumerate(zip(res.x, res.density)):
            yield [x, rho, res.visibility if k == 0 else ""]

    w.write("fringes.csv", FRINGES_HEADER, rows())
    w.write("fringe_scan.csv", FRINGE_SCAN_HEADER, zip(res.delays, res.visibilities, res.norms))
    rep = res.report
    return {
        "visibility": rep.visibility,
        "degenerate": rep.degenerate,
        "low_contrast": res.low_contrast,
        "removal_time": res.removal_time,
        "best_delay": res.best_delay,
        "qfi_at_removal": res.qfi_at_removal,
        "extrema_positions": list(rep.extrema_positions),
        "extrema_values": list(rep.extrema_values),
        "max_norm_error": float(np.max(np.abs(res.norms - res.norms[0]))),
    }


def write_outputs(results, out_dir: str | os.PathLike, command: str, config: dict,
                  version: str | None = None) -> RunManifest:
    """Write the CSV files for ``results`` and ``manifest.json``; returns the manifest."""
    from . import __version__

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise PermissionError(f"output directory {out} is not writable")
    w = _Writer(out)
    if isinstance(results, TrajectoryResult):
        diagnostics = _trajectory_files(w, results)
    elif isinstance(results, SweepResult):
        diagnostics = _sweep_files(w, results)
    elif isinstance(results, FringeResult):
        diagnostics = _fringe_files(w, results)
    elif hasattr(results, "to_dict"):
        diagnostics = results.to_dict()
        data = json.dumps(diagnostics, indent=2, sort_keys=True, default=_json_default) + "\n"
        (out / "validation.json").write_text(data, encoding="ascii")
        w.hashes["validation.json"] = hashlib.sha256(data.encode("ascii")).hexdigest()
    else:
        raise TypeError(f"cannot serialize {type(results).__name__}")
    manifest = RunManifest(
        command=command,
        config=config,
        version=version or __version__,
        timestamp=_dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        diagnostics=diagnostics,
        outputs=dict(sorted(w.hashes.items())),
    )
    (out / "manifest.json").write_text(manifest.to_json(), encoding="utf-8")
    return manifest


def read_csv(path: str | os.PathLike) -> tuple[list[str], np.ndarray]:
    """Header and numeric body of one of the CSV files written here."""
    with open(path, encoding="ascii") as fh:
        header = fh.readline().rstrip("\n").split(",")
        body = np.genfromtxt(fh, delimiter=",", dtype=float, ndmin=2)
    return header, body
