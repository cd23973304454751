"""Acceptance criteria, each evaluated at its stated tolerance.

Every criterion prints one ``CRITERION <n> PASS|FAIL`` line (also collected in
the terminal summary). Trajectory criteria run at the default grid; the
(g, kappa) scans use ``DIMER_SWEEP_POINTS`` grid points (default 121).
Set ``DIMER_ACCEPTANCE_CACHE`` to a directory to keep decompositions between
sessions.

Run alone with ``pytest tests/test_acceptance.py -v -s``.
"""

from __future__ import annotations

import math
import os
import sys

import numpy as np
import pytest

from dimer.cli import main as cli_main
from dimer.experiments import ScenarioConfig, run_cell, run_fringes, run_sweep, run_trajectory
from dimer.grid import GridSpec
from dimer.validation import run_validation

pytestmark = pytest.mark.slow

SWEEP_POINTS = int(os.environ.get("DIMER_SWEEP_POINTS", "121"))
REPORT: list[str] = []


def report(n: int, passed: bool, detail: str) -> None:
    line = f"CRITERION {n} {'PASS' if passed else 'FAIL'}: {detail}"
    REPORT.append(line)
    print("\n" + line, file=sys.__stdout__, flush=True)


@pytest.fixture(scope="session")
def cache_dir(tmp_path_factory):
    return os.environ.get("DIMER_ACCEPTANCE_CACHE") or str(tmp_path_factory.mktemp("decompositions"))


@pytest.fixture(scope="session")
def base(cache_dir):
    return ScenarioConfig(cache_dir=cache_dir)


@pytest.fixture(scope="session")
def sweep_base(base):
    return base.replace(grid=GridSpec(9.0, SWEEP_POINTS))


@pytest.fixture(scope="session")
def noon_run(base):
    return run_trajectory(base.replace(g=-7.0, kappa=0.4))


@pytest.fixture(scope="session")
def repulsive_scan(sweep_base):
    """F_Q(t_A) over kappa at g = 1, 4, 10: coarse axis on [0, 3], then a finer
    pass around each coarse maximum."""
    coarse = [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0]
    res = run_sweep(sweep_base, [1.0, 4.0, 10.0], coarse, times=("tA",))
    scans = {}
    for row in res.cells:
        cells = {c.kappa: c for c in row}
        g = row[0].g
        best = max(cells.values(), key=lambda c: _fq(c))
        for k in (best.kappa - 0.25, best.kappa + 0.25):
            if 0 <= k and k not in cells:
                cells[k] = run_cell(sweep_base.replace(g=g, kappa=k), ("tA",))
        scans[g] = [cells[k] for k in sorted(cells)]
    return scans


def _fq(cell, label="tA"):
    r = cell.records.get(label)
    return r.F_Q if r is not None else -np.inf


def _peak(kappas, values):
    """Location and height of the maximum, refined by a parabola through its neighbours."""
    k = np.asarray(kappas, float)
    v = np.asarray(values, float)
    j = int(np.nanargmax(v))
    if 0 < j < k.size - 1:
        a, b, c = np.polyfit(k[j - 1:j + 2], v[j - 1:j + 2], 2)
        if a < 0:
            x = -b / (2 * a)
            if k[j - 1] <= x <= k[j + 1]:
                return float(x), float(max(v[j], np.polyval([a, b, c], x)))
    return float(k[j]), float(v[j])


# ---------------------------------------------------------------------------


def test_criterion_1_noon_at_tB(noon_run):
    r = noon_run.at("tB")
    ok = r.F_Q >= 3.95 and r.P_11 < 0.02 and abs(r.P_20 - r.P_02) < 0.02
    report(1, ok, f"F_Q(t_B) = {r.F_Q:.4f} (>= 3.95), P_11 = {r.P_11:.4f} (< 0.02), "
                  f"|P_20 - P_02| = {abs(r.P_20 - r.P_02):.4f} (< 0.02), t_B = {noon_run.timing.t_B:.4f}")
    assert ok


def test_criterion_2_scattering_A(noon_run):
    r = noon_run.at("tA")
    ok = abs(r.F_Q - 2.035) <= 0.1
    report(2, ok, f"F_Q(t_A) = {r.F_Q:.4f} (target 2.035 +- 0.1), T = {r.T:.4f}, t_A = {noon_run.timing.t_A:.4f}")
    assert ok


def test_criterion_3_repulsive_optimum(base):
    res = run_trajectory(base.replace(g=1.0, kappa=2.1))
    r = res.at("tB")
    lam = res.orbital_snapshots["tB"].occupations
    ok = abs(r.F_Q - 3.883) <= 0.15 and abs(lam[0] - lam[1]) < 0.05
    report(3, ok, f"F_Q(t_B) = {r.F_Q:.4f} (target 3.883 +- 0.15), |lambda0 - lambda1| = "
                  f"{abs(lam[0] - lam[1]):.4f} (< 0.05)")
    assert ok


def test_criterion_4_repulsive_ceiling(repulsive_scan):
    parts, ok = [], True
    for g, cells in repulsive_scan.items():
        k_star, fq_max = _peak([c.kappa for c in cells], [_fq(c) for c in cells])
        fq_grid = max(_fq(c) for c in cells)
        good = max(fq_grid, fq_max) <= 2.05 and abs(k_star - 1.51) <= 0.1
        ok &= good
        parts.append(f"g={g:g}: max F_Q(t_A) = {fq_grid:.4f} at kappa* = {k_star:.3f}")
    report(4, ok, "; ".join(parts) + " (need max <= 2.05 at kappa = 1.51 +- 0.1)")
    assert ok


def _kappa_for_half_transmission(sweep_base, g, cells):
    """Secant/bisection on T(t_A)(kappa) = 0.5, seeded by the scan and extended past it."""
    pts = sorted((c.kappa, c.records["tA"].T) for c in cells if c.records.get("tA") is not None)
    lo = hi = None
    for (k0, t0), (k1, t1) in zip(pts, pts[1:]):
        if (t0 - 0.5) * (t1 - 0.5) <= 0:
            lo, hi = (k0, t0), (k1, t1)
            break
    k = pts[-1][0]
    while lo is None and k < 40:
        k = 2 * k if k > 0 else 1.0
        c = run_cell(sweep_base.replace(g=g, kappa=k), ("tA",))
        if c.records["tA"] is None:
            return None, None
        t = c.records["tA"].T
        if (pts[-1][1] - 0.5) * (t - 0.5) <= 0:
            lo, hi = pts[-1], (k, t)
        pts.append((k, t))
    if lo is None:
        return None, None
    cell = None
    for _ in range(12):
        k = lo[0] + (0.5 - lo[1]) * (hi[0] - lo[0]) / (hi[1] - lo[1])
        cell = run_cell(sweep_base.replace(g=g, kappa=k), ("tA",))
        t = cell.records["tA"].T
        if abs(t - 0.5) < 2e-3:
            break
        if (lo[1] - 0.5) * (t - 0.5) <= 0:
            hi = (k, t)
        else:
            lo = (k, t)
    return k, cell


def test_criterion_5_repulsive_entropy(sweep_base, repulsive_scan):
    k, cell = _kappa_for_half_transmission(sweep_base, 4.0, repulsive_scan[4.0])
    if cell is None:
        report(5, False, "no kappa found with T(t_A) = 0.5 at g = 4")
        pytest.fail("no T = 0.5 point")
    r = cell.records["tA"]
    ok = abs(r.S - 0.9) <= 0.1
    report(5, ok, f"g=4, kappa(T=0.5) = {k:.4f} (T = {r.T:.4f}): vNE(t_A) = {r.S:.4f} (target 0.9 +- 0.1)")
    assert ok


def test_criterion_6_qfi_and_transmission(sweep_base):
    kappas = [0.0, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 3.0]
    res = run_sweep(sweep_base, [-10.0, -7.0], kappas, times=("tA",))
    fq = res.values("tA", "F_Q")
    tr = res.values("tA", "T")
    region = np.argwhere(fq >= 3.9)
    if region.size == 0:
        i, j = np.unravel_index(np.nanargmax(fq), fq.shape)
        report(6, False, f"no F_Q ~ 4 region in the attractive t_A sweep: max F_Q = {fq[i, j]:.4f} at "
                         f"g={res.g_values[i]:g}, kappa={res.kappa_values[j]:g} (T = {tr[i, j]:.4f})")
        pytest.fail("no F_Q ~ 4 region")
    t_dev = max(abs(tr[i, j] - 0.5) for i, j in region)
    k_region = [res.kappa_values[j] for _, j in region]
    ok = t_dev <= 0.05 and all(0.5 <= k <= 1.5 for k in k_region)
    report(6, ok, f"F_Q >= 3.9 cells at kappa {sorted(set(k_region))}: max |T - 0.5| = {t_dev:.4f} (<= 0.05)")
    assert ok


def test_criterion_7_fringe_contrast(base):
    noon = run_fringes(base.replace(g=-7.0, kappa=0.4))
    shot = run_fringes(base.replace(g=-7.0, kappa=1.0985))
    v1, v2 = noon.visibility, shot.visibility
    ratio = v1 / v2 if v2 > 0 else math.inf
    ok = bool(np.isfinite(v1) and ratio >= 1.5)
    report(7, ok, f"V(kappa=0.4) = {v1:.4f} (F_Q = {noon.qfi_at_removal:.4f}), V(kappa=1.0985) = {v2:.4f} "
                  f"(F_Q = {shot.qfi_at_removal:.4f}), ratio {ratio:.3f} (>= 1.5)")
    assert ok


# oracles named in the criterion; the rest of the suite is reported but not judged here
CRITERION_8 = ("harmonic_spectrum", "half_oscillator_limit", "perturbative_kappa_shift",
               "perturbative_g_shift", "spectral_vs_chebyshev", "timing_kappa0_", "norm_conservation",
               "energy_conservation", "qfi_plateaus", "population_sum", "qfi_range",
               "transmission_range", "occupation_sum", "entropy_range", "product_state_entropy")


def test_criterion_8_oracle_suite(base):
    rep = run_validation("full", base)
    judged = [r for r in rep.results if r.name.startswith(CRITERION_8)]
    failed = [r for r in judged if not r.passed]
    extra = [r for r in rep.results if r not in judged]
    for r in rep.results:
        print(r.line(), file=sys.__stdout__)
    detail = f"{len(judged) - len(failed)}/{len(judged)} listed oracles pass"
    if failed:
        detail += "; failing: " + ", ".join(f"{r.name} ({r.error:.3e} vs {r.tolerance:.1e})" for r in failed)
    detail += "; other oracles " + ", ".join(f"{r.name} {'pass' if r.passed else 'FAIL'}" for r in extra)
    report(8, not failed, detail)
    assert not failed


def test_criterion_9_determinism(tmp_path):
    args = ["sweep", "--grid-points", "41", "--half-width", "6", "--d", "2",
            "--g-axis", "-2,1", "--kappa-axis", "0.4,1.0"]
    codes = [cli_main([*args, "--threads", str(t), "--out-dir", str(tmp_path / f"run{t}")]) for t in (1, 3)]
    same = all((tmp_path / "run1" / f).read_bytes() == (tmp_path / "run3" / f).read_bytes()
               for f in ("sweep_tA.csv", "sweep_tB.csv"))
    ok = codes == [0, 0] and same
    report(9, ok, f"exit codes {codes}, sweep CSVs byte-identical across thread counts: {same}")
    assert ok


def test_supplementary_displacement_reading(sweep_base):
    """Not a criterion: the same NOON scenario released from d = 1.5 (informational)."""
    res = run_trajectory(sweep_base.replace(d=1.5))
    a, b = res.at("tA"), res.at("tB")
    line = (f"SUPPLEMENTARY d=1.5 (n={SWEEP_POINTS}): F_Q(t_A) = {a.F_Q:.4f}, F_Q(t_B) = {b.F_Q:.4f}, "
            f"P_11(t_B) = {b.P_11:.4f}, T(t_A) = {a.T:.4f}")
    REPORT.append(line)
    print("\n" + line, file=sys.__stdout__, flush=True)
