"""Metrology quantities of a two-boson state.

Left/right modes are the half-lines x < 0 and x > 0; the grid point at the
origin counts half to each side. Mode occupations are written |n_L n_R>, so a
pair prepared on the right starts in |02>.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks

from .errors import NumericalError
from .grid import Grid
from .hamiltonian import index_map_for

_LOG2_FLOOR = 1e-15


@dataclass(frozen=True, eq=False)
class Density:
    values: np.ndarray
    grid: Grid

    @property
    def total(self) -> float:
        return float(np.sum(self.values) * self.grid.spacing)


@dataclass(frozen=True, eq=False)
class NaturalOrbitalSet:
    occupations: np.ndarray  # descending
    orbitals: np.ndarray  # columns, normalized with the grid measure
    grid: Grid

    def orbital_density(self, i: int) -> np.ndarray:
        return np.abs(self.orbitals[:, i]) ** 2

    def mean_position(self, i: int) -> float:
        return float(np.sum(self.grid.points * self.orbital_density(i)) * self.grid.spacing)


@dataclass(frozen=True)
class ObservableRecord:
    t: float
    F_Q: float
    S: float
    T: float
    P_20: float
    P_11: float
    P_02: float

    def as_tuple(self) -> tuple[float, ...]:
        return (self.t, self.F_Q, self.S, self.T, self.P_20, self.P_11, self.P_02)


@dataclass(frozen=True)
class FringeReport:
    visibility: float  # nan when degenerate
    degenerate: bool
    extrema_positions: tuple[float, ...] = ()
    extrema_values: tuple[float, ...] = ()
    pair_visibilities: tuple[float, ...] = field(default=(), repr=False)


def side_classifier(grid: Grid) -> np.ndarray:
    """Right-side weight of each grid point: 1 for x > 0, 0 for x < 0, 1/2 at x = 0."""
    w = (grid.points > 0).astype(float)
    w[grid.origin_index] = 0.5
    return w


def _probabilities(state) -> np.ndarray:
    u = state.coefficients
    return u.real**2 + u.imag**2


def single_particle_density(state) -> Density:
    c = state.full_coefficients()
    rho = np.sum(np.abs(c) ** 2, axis=1) / state.grid.spacing
    return Density(rho, state.grid)


def rspdm(state) -> np.ndarray:
    """rho(x_i, x_j) = dx * sum_k psi(x_i, x_k) psi*(x_j, x_k)."""
    c = state.full_coefficients()
    return (c @ c.conj().T) / state.grid.spacing


def natural_orbitals(rho: np.ndarray, grid: Grid) -> NaturalOrbitalSet:
    try:
        lam, vec = np.linalg.eigh(rho * grid.spacing)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"natural-orbital eigensolver failed: {exc}") from exc
    lam = lam[::-1].copy()
    vec = vec[:, ::-1]
    idx = np.argmax(np.abs(vec), axis=0)
    pivot = vec[idx, np.arange(vec.shape[1])]
    vec = vec * (np.abs(pivot) / np.where(pivot == 0, 1.0, pivot))
    return NaturalOrbitalSet(lam, vec / np.sqrt(grid.spacing), grid)


def von_neumann_entropy(orbitals: NaturalOrbitalSet) -> float:
    """S = -sum lambda log2 lambda over occupations above 1e-15."""
    lam = orbitals.occupations
    lam = lam[lam > _LOG2_FLOOR]
    return float(max(-np.sum(lam * np.log2(lam)), 0.0))


def _pair_fields(grid: Grid) -> dict[str, np.ndarray]:
    imap = index_map_for(grid.n)
    w = side_classifier(grid)
    one = np.ones(grid.n)
    a, b = imap.pair_a, imap.pair_b
    return {
        "jz": w[a] + w[b] - 1.0,
        "both_right": w[a] * w[b],
        "both_left": (1 - w[a]) * (1 - w[b]),
        "left": imap.pair_weights(1 - w, one),
    }


_FIELDS: dict = {}


def pair_fields(grid: Grid) -> dict[str, np.ndarray]:
    if grid.spec not in _FIELDS:
        _FIELDS[grid.spec] = _pair_fields(grid)
    return _FIELDS[grid.spec]


def qfi_from_probabilities(p: np.ndarray, grid: Grid) -> float:
    jz = pair_fields(grid)["jz"]
    m1 = float(p @ jz)
    m2 = float(p @ jz**2)
    return 4.0 * (m2 - m1 * m1)


def qfi(state) -> float:
    """4 Var(J_z) with J_z = (n_R - n_L)/2, i.e. the pure-state QFI for a
    relative phase imprinted between the two sides of the barrier."""
    return qfi_from_probabilities(_probabilities(state), state.grid)


def transmission(state) -> float:
    """Single-particle weight on the side opposite the (right-hand) preparation."""
    return float(_probabilities(state) @ pair_fields(state.grid)["left"])


def quadrant_populations(state) -> tuple[float, float, float]:
    p = _probabilities(state)
    f = pair_fields(state.grid)
    p02 = float(p @ f["both_right"])
    p20 = float(p @ f["both_left"])
    return p20, 1.0 - p20 - p02, p02


def observe(state) -> ObservableRecord:
    p = _probabilities(state)
    f = pair_fields(state.grid)
    orbitals = natural_orbitals(rspdm(state), state.grid)
    p02 = float(p @ f["both_right"])
    p20 = float(p @ f["both_left"])
    return ObservableRecord(
        t=float(state.time),
        F_Q=qfi_from_probabilities(p, state.grid),
        S=von_neumann_entropy(orbitals),
        T=float(p @ f["left"]),
        P_20=p20,
        P_11=1.0 - p20 - p02,
        P_02=p02,
    )


def fringe_metrics(density: Density, rel_prominence: float = 0.02) -> FringeReport:
    """Visibility of the interior extrema of a density in |x| <= half_width/2.

    Extrema with prominence below ``rel_prominence`` times the peak density are
    treated as ripple and skipped.
    """
    grid = density.grid
    rho = np.asarray(density.values, dtype=float)
    central = np.abs(grid.points) <= 0.5 * grid.half_width
    seg = rho[central]
    xs = grid.points[central]
    scale = float(np.max(np.abs(seg))) if seg.size else 0.0
    if scale <= 0:
        return FringeReport(float("nan"), True)
    prom = rel_prominence * scale
    maxima, _ = find_peaks(seg, prominence=prom)
    minima, _ = find_peaks(-seg, prominence=prom)
    idx = np.sort(np.concatenate([maxima, minima]))
    if idx.size < 2:
        return FringeReport(float("nan"), True, tuple(xs[idx]), tuple(seg[idx]))
    vals = seg[idx]
    hi = np.maximum(vals[:-1], vals[1:])
    lo = np.minimum(vals[:-1], vals[1:])
    with np.errstate(invalid="ignore", divide="ignore"):
        pair_v = np.where(hi + lo > 0, (hi - lo) / (hi + lo), 0.0)
    pair_v = np.clip(pair_v, 0.0, 1.0)
    return FringeReport(float(np.max(pair_v)), False, tuple(xs[idx].tolist()), tuple(vals.tolist()),
                        tuple(pair_v.tolist()))
