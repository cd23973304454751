"""Initial-state preparation, eigenbasis projection, spectral time evolution
and detection of the interferometer timing.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from scipy.signal import find_peaks

from .errors import PreparationError, TimingDetectionError, UnconvergedBasisError
from .grid import Grid
from .hamiltonian import (
    ALL,
    Retention,
    SpectralDecomposition,
    TwoBodyHamiltonian,
    build_interferometer_h,
    build_preparatory_h,
    diagonalize,
    index_map_for,
    lowest_eigenpairs,
)

log = logging.getLogger(__name__)

DEFAULT_COMPLETENESS_TOL = 1e-6
DEFAULT_HORIZON = 2.5 * 2.0 * math.pi
DEFAULT_TIMING_STEP = 0.01


@dataclass(frozen=True, eq=False)
class TwoBodyState:
    """Exchange-symmetric two-particle state on the packed grid.

    ``amplitudes`` are wavefunction values (off-diagonal pairs scaled by sqrt(2)),
    normalized so that sum |amplitudes|^2 dx^2 = 1.
    """

    amplitudes: np.ndarray
    grid: Grid
    time: float = 0.0

    @classmethod
    def from_coefficients(cls, u: np.ndarray, grid: Grid, time: float = 0.0) -> "TwoBodyState":
        return cls(np.asarray(u) / grid.spacing, grid, float(time))

    @classmethod
    def from_full(cls, psi: np.ndarray, grid: Grid, time: float = 0.0) -> "TwoBodyState":
        from .hamiltonian import pack_symmetric

        return cls(pack_symmetric(psi), grid, float(time))

    @property
    def coefficients(self) -> np.ndarray:
        """Unit-norm packed coefficient vector (amplitudes times dx)."""
        return self.amplitudes * self.grid.spacing

    @property
    def norm(self) -> float:
        return float(np.sum(np.abs(self.coefficients) ** 2))

    def full(self) -> np.ndarray:
        """Wavefunction psi(x_i, x_j) on the full product grid."""
        return index_map_for(self.grid.n).unpack(self.amplitudes)

    def full_coefficients(self) -> np.ndarray:
        return index_map_for(self.grid.n).unpack(self.coefficients)

    def fidelity(self, other: "TwoBodyState") -> float:
        return float(abs(np.vdot(self.coefficients, other.coefficients)) ** 2)

    def reflected(self) -> "TwoBodyState":
        """Image under x -> -x for both particles."""
        imap = index_map_for(self.grid.n)
        return TwoBodyState(self.amplitudes[imap.parity_partner], self.grid, self.time)


@dataclass(frozen=True, eq=False)
class ProjectedState:
    """Expansion coefficients of a state in a spectral decomposition."""

    block_coefficients: tuple[np.ndarray, ...]
    decomposition: SpectralDecomposition
    completeness: float
    time: float = 0.0  # time of the state that was projected
    converged: bool = True

    @property
    def coefficients(self) -> np.ndarray:
        """Coefficients ordered like ``decomposition.energies``."""
        flat = np.concatenate(self.block_coefficients)
        return flat[self.decomposition._order[0]]

    @property
    def grid(self) -> Grid:
        return self.decomposition.grid

    def mean_energy(self) -> float:
        num = sum(float(np.sum(np.abs(c) ** 2 * b.energies))
                  for c, b in zip(self.block_coefficients, self.decomposition.blocks))
        return num / self.completeness

    def conjugated(self) -> "ProjectedState":
        return ProjectedState(tuple(np.conj(c) for c in self.block_coefficients), self.decomposition,
                              self.completeness, self.time, self.converged)


@dataclass(frozen=True)
class TimingInfo:
    omega_delta: float
    t_s: float
    t_A: float
    t_B: float
    detected: bool = True
    diagnostics: dict = field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def fixed(cls, t_A: float, t_B: float) -> "TimingInfo":
        if not 0 < t_A < t_B:
            raise ValueError(f"need 0 < t_A < t_B, got {t_A}, {t_B}")
        return cls(math.pi / t_A, t_A / 2.0, t_A, t_B, detected=False)


# ---------------------------------------------------------------------------


def product_gaussian(grid: Grid, epsilon: float, d: float) -> np.ndarray:
    """Packed unit coefficients of the non-interacting preparatory ground state."""
    phi = np.exp(-0.5 * epsilon * (grid.points - d) ** 2)
    phi /= np.linalg.norm(phi)
    return index_map_for(grid.n).pack(np.outer(phi, phi))


def prepare_initial_state(grid: Grid, g: float, epsilon: float, d: float) -> TwoBodyState:
    """Ground state of the displaced preparatory trap, released at t = 0."""
    h = build_preparatory_h(grid, g, epsilon, d)
    guess = product_gaussian(grid, epsilon, d)
    w, v = lowest_eigenpairs(h, k=2, guess=guess)
    gap = float(w[1] - w[0])
    if gap < 1e-10:
        raise PreparationError(f"degenerate preparatory ground state (gap = {gap:.3e})")
    u = v[:, 0] / np.linalg.norm(v[:, 0])
    return TwoBodyState.from_coefficients(u.astype(np.complex128), grid, 0.0)


def project(state: TwoBodyState, decomposition: SpectralDecomposition,
            tol: float = DEFAULT_COMPLETENESS_TOL, strict: bool = True) -> ProjectedState:
    """a_n = <phi_n|psi> (conjugated inner product) for every retained eigenstate."""
    if state.grid != decomposition.grid:
        raise ValueError("state and decomposition live on different grids")
    u = state.coefficients
    coefs = []
    for b in decomposition.blocks:
        c = b.reduce(u)
        coefs.append(_real_matmul(b.vectors.T, c))
    completeness = float(sum(np.sum(np.abs(c) ** 2) for c in coefs) / state.norm)
    deficit = 1.0 - completeness
    converged = deficit <= tol
    if not converged:
        msg = (f"retained basis misses {deficit:.3e} of the state's weight "
               f"(tolerance {tol:.1e}, cutoff {decomposition.energy_cutoff})")
        if strict:
            raise UnconvergedBasisError(msg, deficit)
        log.warning(msg)
    return ProjectedState(tuple(coefs), decomposition, completeness, state.time, converged)


def _real_matmul(m: np.ndarray, z: np.ndarray) -> np.ndarray:
    """m @ z for real m and complex z as two real products.

    The real and imaginary views are strided; copying them keeps the product on BLAS.
    """
    re = np.ascontiguousarray(z.real)
    im = np.ascontiguousarray(z.imag)
    return (m @ re) + 1j * (m @ im)


def _evolve_block_coefficients(projected: ProjectedState, times: np.ndarray) -> Iterator[np.ndarray]:
    """Packed coefficient columns at ``times`` (relative to the projected state)."""
    dim = projected.decomposition.dimension
    out = np.zeros((dim, times.size), dtype=np.complex128)
    for c, b in zip(projected.block_coefficients, projected.decomposition.blocks):
        if b.count == 0:
            continue
        phased = c[:, None] * np.exp(-1j * np.outer(b.energies, times))
        local = _real_matmul(b.vectors, phased)
        b.expand(local, out)
    return out


def evolve(projected: ProjectedState, t: float) -> TwoBodyState:
    """State at absolute time ``t``; the norm equals the completeness."""
    u = _evolve_block_coefficients(projected, np.array([t - projected.time]))[:, 0]
    return TwoBodyState.from_coefficients(u, projected.grid, t)


def evolve_many(projected: ProjectedState, times: Sequence[float], chunk: int = 48) -> Iterator[TwoBodyState]:
    times = np.asarray(times, dtype=float)
    for start in range(0, times.size, chunk):
        tt = times[start:start + chunk]
        cols = _evolve_block_coefficients(projected, tt - projected.time)
        for k, t in enumerate(tt):
            yield TwoBodyState.from_coefficients(cols[:, k], projected.grid, float(t))


def expectation_series(projected: ProjectedState, times: Sequence[float], pair_weight: np.ndarray,
                       chunk: int = 48) -> np.ndarray:
    """sum_k |u_k(t)|^2 w_k for a diagonal observable given by per-pair weights."""
    times = np.asarray(times, dtype=float)
    out = np.empty(times.size)
    for start in range(0, times.size, chunk):
        tt = times[start:start + chunk]
        cols = _evolve_block_coefficients(projected, tt - projected.time)
        out[start:start + tt.size] = pair_weight @ (cols.real**2 + cols.imag**2)
    return out


def second_moment_weight(grid: Grid) -> np.ndarray:
    """Per-pair weight of <x^2> for the single-particle density."""
    x2 = grid.points**2
    return index_map_for(grid.n).pair_weights(x2, np.ones(grid.n))


def _refine(t: np.ndarray, f: np.ndarray, j: int) -> float:
    if j <= 0 or j >= t.size - 1:
        return float(t[j])
    y0, y1, y2 = f[j - 1], f[j], f[j + 1]
    denom = y0 - 2.0 * y1 + y2
    if denom == 0:
        return float(t[j])
    h = t[j + 1] - t[j]
    shift = 0.5 * (y0 - y2) / denom
    return float(t[j] + np.clip(shift, -1.0, 1.0) * h)


def locate_revivals(t: np.ndarray, f: np.ndarray, prominence: float = 0.02) -> tuple[float, float] | None:
    """(t_A, t_B) from a sampled <x^2>(t): first maximum after the first minimum and
    the next maximum after the following minimum. Extrema whose prominence is below
    ``prominence`` times the signal range are ignored. A signal whose range is at
    roundoff level relative to its size counts as flat. Returns None if not found.
    """
    span = float(np.max(f) - np.min(f))
    if span <= 1e-9 * max(float(np.max(np.abs(f))), 1e-300):
        return None
    prom = prominence * span
    maxima, _ = find_peaks(f, prominence=prom)
    minima, _ = find_peaks(-f, prominence=prom)
    if minima.size == 0:
        return None
    m1 = minima[0]
    after = maxima[maxima > m1]
    if after.size == 0:
        return None
    a = after[0]
    m2 = minima[minima > a]
    if m2.size == 0:
        return None
    after_b = maxima[maxima > m2[0]]
    if after_b.size == 0:
        return None
    return _refine(t, f, int(a)), _refine(t, f, int(after_b[0]))


def detect_timing(projected: ProjectedState, search_horizon: float = DEFAULT_HORIZON,
                  step: float = DEFAULT_TIMING_STEP, prominence: float = 0.02,
                  stop_early: bool = True) -> TimingInfo:
    """Scan <x^2>(t) of the single-particle density and read off the revivals."""
    if search_horizon < DEFAULT_HORIZON - 1e-12:
        raise ValueError(f"search_horizon must be >= 5*pi, got {search_horizon}")
    t0 = projected.time
    times = t0 + np.arange(0.0, search_horizon + 0.5 * step, step)
    w = second_moment_weight(projected.grid)
    norm = projected.completeness
    values = np.empty(0)
    chunk = max(64, int(round(1.0 / step)))
    found = None
    for start in range(0, times.size, chunk):
        values = np.concatenate([values, expectation_series(projected, times[start:start + chunk], w) / norm])
        found = locate_revivals(times[:values.size], values, prominence)
        # keep scanning a quarter period past t_B so its prominence is measured correctly
        if stop_early and found is not None and times[values.size - 1] > found[1] + 0.5 * math.pi:
            break
    found = locate_revivals(times[:values.size], values, prominence)
    if found is None:
        raise TimingDetectionError(
            f"no <x^2> revival found within horizon {search_horizon:.3f} (step {step})"
        )
    t_A, t_B = found[0] - t0, found[1] - t0
    return TimingInfo(
        omega_delta=math.pi / t_A,
        t_s=t_A / 2.0,
        t_A=t_A,
        t_B=t_B,
        diagnostics={"scan_times": times[:values.size] - t0, "x2": values},
    )


def interferometer_decomposition(grid: Grid, g: float, kappa: float, retain: Retention = ALL,
                                 barrier: str = "delta", cache=None) -> SpectralDecomposition:
    return diagonalize(build_interferometer_h(grid, g, kappa, barrier), retain, cache=cache)


def remove_barrier_evolve(state_at_tB: TwoBodyState, g: float, t_grid: Sequence[float],
                          decomposition: SpectralDecomposition | None = None,
                          tol: float = DEFAULT_COMPLETENESS_TOL, cache=None) -> list[TwoBodyState]:
    """Switch the barrier off at ``state_at_tB.time`` and evolve in the bare trap.

    ``t_grid`` holds times elapsed since the removal.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(np.diff(t_grid) < 0):
        raise ValueError("t_grid must be ascending")
    if decomposition is None:
        decomposition = interferometer_decomposition(state_at_tB.grid, g, 0.0, ALL, cache=cache)
    elif decomposition.params.kappa != 0.0:
        raise ValueError("barrier-free evolution needs a kappa = 0 decomposition")
    proj = project(state_at_tB, decomposition, tol=tol)
    return list(evolve_many(proj, state_at_tB.time + t_grid))


def energy(h: TwoBodyHamiltonian, state: TwoBodyState) -> float:
    return h.expectation(state.coefficients)
