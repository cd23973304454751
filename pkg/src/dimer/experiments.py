"""Experiment pipelines: single trajectories, (g, kappa) sweeps and the
barrier-removal fringe readout."""

from __future__ import annotations

import concurrent.futures
import dataclasses
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .cache import DecompositionCache
from .dynamics import (
    DEFAULT_HORIZON,
    DEFAULT_TIMING_STEP,
    ProjectedState,
    TimingInfo,
    TwoBodyState,
    detect_timing,
    evolve,
    evolve_many,
    prepare_initial_state,
    project,
    remove_barrier_evolve,
)
from .errors import ConfigurationError, DimerError
from .grid import Grid, GridSpec, build_grid
from .hamiltonian import DEFAULT_SIZE_CAP, Retention, build_interferometer_h, diagonalize
from .observables import (
    FringeReport,
    NaturalOrbitalSet,
    ObservableRecord,
    fringe_metrics,
    natural_orbitals,
    observe,
    rspdm,
    single_particle_density,
)

log = logging.getLogger(__name__)

DEFAULT_EPSILON = 5.164
DEFAULT_D = 6.0


@dataclass(frozen=True)
class Tolerances:
    completeness: float = 1e-6
    timing: float = 1e-3
    extrema: float = 0.02  # relative prominence of <x^2> extrema


@dataclass(frozen=True)
class ScenarioConfig:
    grid: GridSpec = GridSpec()
    g: float = -7.0
    kappa: float = 0.4
    epsilon: float = DEFAULT_EPSILON
    d: float = DEFAULT_D
    retention: str = "auto"  # "all", "auto" or a numeric energy cutoff
    size_cap: int = DEFAULT_SIZE_CAP
    time_step: float = 0.02
    timing_step: float = DEFAULT_TIMING_STEP
    search_horizon: float = DEFAULT_HORIZON
    fixed_times: tuple[float, float] | None = None
    barrier: str = "delta"
    n_orbitals: int = 4
    tolerances: Tolerances = Tolerances()
    cache_dir: str | None = None

    def __post_init__(self):
        for name in ("g", "kappa", "epsilon", "d", "time_step", "timing_step", "search_horizon"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ConfigurationError(f"{name} must be a finite number, got {v!r}")
        if self.epsilon <= 0:
            raise ConfigurationError("epsilon must be positive")
        if self.time_step <= 0 or self.timing_step <= 0:
            raise ConfigurationError("time steps must be positive")
        if self.kappa < 0:
            raise ConfigurationError("kappa must be non-negative")
        if self.fixed_times is not None:
            t_a, t_b = self.fixed_times
            if not 0 < t_a < t_b:
                raise ConfigurationError(f"fixed_times needs 0 < t_A < t_B, got {self.fixed_times}")
        if isinstance(self.retention, str):
            if self.retention not in ("all", "auto"):
                raise ConfigurationError(f"retention must be 'all', 'auto' or a number, got {self.retention!r}")
        elif not math.isfinite(float(self.retention)):
            raise ConfigurationError("retention cutoff must be finite")
        if self.barrier not in ("delta", "gaussian"):
            raise ConfigurationError(f"unknown barrier {self.barrier!r}")
        if self.n_orbitals < 1:
            raise ConfigurationError("n_orbitals must be >= 1")

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def cache(self) -> DecompositionCache | None:
        return DecompositionCache(self.cache_dir) if self.cache_dir else None


@dataclass(eq=False)
class TrajectoryResult:
    config: ScenarioConfig
    timing: TimingInfo
    records: list[ObservableRecord]
    flags: list[int]  # 1 marks the t_A sample, 2 the t_B sample
    orbital_snapshots: dict[str, NaturalOrbitalSet]
    states: dict[str, TwoBodyState] = field(repr=False)
    diagnostics: dict = field(default_factory=dict)

    def at(self, label: str) -> ObservableRecord:
        flag = {"tA": 1, "tB": 2}[label]
        return self.records[self.flags.index(flag)]

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])


@dataclass(eq=False)
class SweepCell:
    g: float
    kappa: float
    records: dict[str, ObservableRecord | None]
    timing: TimingInfo | None
    completeness: float
    error: str | None = None


@dataclass(eq=False)
class SweepResult:
    g_values: list[float]
    kappa_values: list[float]
    cells: list[list[SweepCell]]
    labels: tuple[str, ...]

    def lattice(self, label: str) -> list[list[ObservableRecord | None]]:
        return [[c.records.get(label) for c in row] for row in self.cells]

    @property
    def records_at_tA(self):
        return self.lattice("tA")

    @property
    def records_at_tB(self):
        return self.lattice("tB")

    def values(self, label: str, name: str) -> np.ndarray:
        out = np.full((len(self.g_values), len(self.kappa_values)), np.nan)
        for i, row in enumerate(self.cells):
            for j, c in enumerate(row):
                r = c.records.get(label)
                if r is not None:
                    out[i, j] = getattr(r, name)
        return out


@dataclass(eq=False)
class FringeResult:
    config: ScenarioConfig
    timing: TimingInfo
    removal_time: float
    best_delay: float
    report: FringeReport
    density: np.ndarray
    x: np.ndarray
    delays: np.ndarray
    visibilities: np.ndarray
    norms: np.ndarray
    qfi_at_removal: float

    @property
    def visibility(self) -> float:
        return self.report.visibility

    @property
    def low_contrast(self) -> bool:
        return self.report.degenerate or not (self.report.visibility > 0.1)


# ---------------------------------------------------------------------------
# pipeline stages


def _stage(name):
    def wrap(fn):
        def inner(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except DimerError as exc:
                if exc.stage is None:
                    exc.stage = name
                raise
        inner.__name__ = fn.__name__
        inner.__doc__ = fn.__doc__
        return inner
    return wrap


@lru_cache(maxsize=16)
def _prepared(spec: GridSpec, g: float, epsilon: float, d: float) -> TwoBodyState:
    return prepare_initial_state(build_grid(spec), g, epsilon, d)


@_stage("prepare")
def prepared_state(config: ScenarioConfig) -> TwoBodyState:
    return _prepared(config.grid, float(config.g), float(config.epsilon), float(config.d))


def _retention(config: ScenarioConfig, h, state: TwoBodyState) -> Retention:
    if config.retention == "all":
        return Retention("all")
    if config.retention == "auto":
        mean = h.expectation(state.coefficients)
        return Retention("auto", Retention.default_cutoff(mean), config.size_cap)
    return Retention("cutoff", float(config.retention), config.size_cap)


@_stage("diagonalize")
def decompose(config: ScenarioConfig, state: TwoBodyState, kappa: float | None = None):
    grid = state.grid
    h = build_interferometer_h(grid, config.g, config.kappa if kappa is None else kappa, config.barrier)
    return diagonalize(h, _retention(config, h, state), cache=config.cache())


@_stage("project")
def projected_state(config: ScenarioConfig, state, dec) -> ProjectedState:
    return project(state, dec, tol=config.tolerances.completeness)


@_stage("timing")
def timing_for(config: ScenarioConfig, proj: ProjectedState) -> TimingInfo:
    if config.fixed_times is not None:
        return TimingInfo.fixed(*config.fixed_times)
    return detect_timing(proj, config.search_horizon, config.timing_step, config.tolerances.extrema)


def output_mesh(t_A: float, t_B: float, step: float, past: float = 0.5) -> tuple[np.ndarray, list[int]]:
    """Uniform mesh to just past t_B with t_A and t_B inserted exactly."""
    base = np.round(np.arange(0.0, t_B + past + 0.5 * step, step), 12)
    keep = (np.abs(base - t_A) > 1e-9) & (np.abs(base - t_B) > 1e-9)
    times = np.concatenate([base[keep], [t_A, t_B]])
    flags = np.concatenate([np.zeros(keep.sum(), int), [1, 2]])
    order = np.argsort(times, kind="stable")
    return times[order], flags[order].tolist()


def run_trajectory(config: ScenarioConfig) -> TrajectoryResult:
    """Prepare, project, time and evolve one scenario, observing on the output mesh."""
    state0 = prepared_state(config)
    dec = decompose(config, state0)
    proj = projected_state(config, state0, dec)
    timing = timing_for(config, proj)
    times, flags = output_mesh(timing.t_A, timing.t_B, config.time_step)
    records = []
    snapshots: dict[str, NaturalOrbitalSet] = {}
    states: dict[str, TwoBodyState] = {}
    norms = []
    for st, flag in zip(evolve_many(proj, times), flags):
        records.append(observe(st))
        norms.append(st.norm)
        if flag:
            label = "tA" if flag == 1 else "tB"
            snapshots[label] = natural_orbitals(rspdm(st), st.grid)
            states[label] = st
    diagnostics = {
        "completeness": proj.completeness,
        "energy_cutoff": dec.energy_cutoff,
        "retained_states": dec.count,
        "mean_energy": proj.mean_energy(),
        "omega_delta": timing.omega_delta,
        "timing_detected": timing.detected,
        "max_norm_drift": float(np.max(np.abs(np.array(norms) - proj.completeness))),
        **{k: float(v) for k, v in dec.diagnostics.items()},
    }
    return TrajectoryResult(config, timing, records, flags, snapshots, states, diagnostics)


# ---------------------------------------------------------------------------
# sweeps


def run_cell(config: ScenarioConfig, labels: Sequence[str] = ("tA", "tB")) -> SweepCell:
    """One sweep lattice point; failures are captured, never raised."""
    try:
        state0 = prepared_state(config)
        dec = decompose(config, state0)
        proj = projected_state(config, state0, dec)
        timing = timing_for(config, proj)
        recs = {}
        for label in labels:
            t = timing.t_A if label == "tA" else timing.t_B
            recs[label] = observe(evolve(proj, t))
        return SweepCell(config.g, config.kappa, recs, timing, proj.completeness)
    except DimerError as exc:
        stage = exc.stage or "unknown"
        log.warning("sweep cell g=%s kappa=%s failed in %s: %s", config.g, config.kappa, stage, exc)
        return SweepCell(config.g, config.kappa, {lb: None for lb in labels}, None, float("nan"),
                         f"{stage}: {exc}")


def _cell_worker(args):
    config, labels = args
    return run_cell(config, labels)


def run_sweep(base: ScenarioConfig, g_axis: Sequence[float], kappa_axis: Sequence[float],
              times: Sequence[str] = ("tA", "tB"), threads: int = 1) -> SweepResult:
    g_axis = [float(g) for g in g_axis]
    kappa_axis = [float(k) for k in kappa_axis]
    if not g_axis or not kappa_axis:
        raise ConfigurationError("sweep axes must be non-empty")
    if not all(math.isfinite(v) for v in g_axis + kappa_axis):
        raise ConfigurationError("sweep axes must be finite")
    labels = tuple(times)
    if any(lb not in ("tA", "tB") for lb in labels):
        raise ConfigurationError(f"unknown time labels {labels}")
    jobs = [(base.replace(g=g, kappa=k), labels) for g in g_axis for k in kappa_axis]
    if threads <= 1:
        cells = [_cell_worker(job) for job in jobs]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=threads) as pool:
            cells = list(pool.map(_cell_worker, jobs))
    nk = len(kappa_axis)
    grid_cells = [cells[i * nk:(i + 1) * nk] for i in range(len(g_axis))]
    return SweepResult(g_axis, kappa_axis, grid_cells, labels)


# ---------------------------------------------------------------------------
# fringes


def _state_at_tB(config, state0):
    dec = decompose(config, state0)
    proj = projected_state(config, state0, dec)
    timing = timing_for(config, proj)
    return timing, evolve(proj, timing.t_B), (dec if config.kappa == 0.0 else None)


def run_fringes(config: ScenarioConfig, sample_step: float | None = None) -> FringeResult:
    """Evolve to t_B, switch the barrier off, and scan one bare period for the
    density with the highest fringe visibility."""
    state0 = prepared_state(config)
    timing, at_b, same = _state_at_tB(config, state0)
    qfi_b = observe(at_b).F_Q
    # the barrier decomposition is released before the bare one is built
    free = same if same is not None else decompose(config, state0, kappa=0.0)
    step = sample_step or config.time_step
    delays = np.round(np.arange(0.0, 2.0 * math.pi + 0.5 * step, step), 12)
    states = _stage("evolve")(remove_barrier_evolve)(at_b, config.g, delays, decomposition=free,
                                                     tol=config.tolerances.completeness)
    best = None
    vis = np.full(delays.size, np.nan)
    norms = np.empty(delays.size)
    for k, st in enumerate(states):
        dens = single_particle_density(st)
        norms[k] = dens.total
        rep = fringe_metrics(dens, config.tolerances.extrema)
        if not rep.degenerate:
            vis[k] = rep.visibility
            if best is None or rep.visibility > best[1].visibility:
                best = (k, rep, dens)
    if best is None:
        k = 0
        dens = single_particle_density(states[0])
        rep = fringe_metrics(dens, config.tolerances.extrema)
    else:
        k, rep, dens = best
    grid = at_b.grid
    return FringeResult(config, timing, timing.t_B, float(delays[k]), rep, dens.values.copy(),
                        np.asarray(grid.points), delays, vis, norms, qfi_b)
