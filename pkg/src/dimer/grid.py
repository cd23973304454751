"""Uniform sinc-DVR grid and single-particle operator blocks.

All quantities are in harmonic-oscillator units of the interferometer trap
(lengths in a_Omega, energies in hbar*Omega). ``g1d_from_3d`` is the only
dimensional routine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, SingularityError

#: Olshanii's constant for the confinement-induced resonance.
CIR_CONSTANT = 1.4603


@dataclass(frozen=True)
class GridSpec:
    half_width: float = 9.0
    n_points: int = 181

    def __post_init__(self):
        if not isinstance(self.n_points, (int, np.integer)) or isinstance(self.n_points, bool):
            raise ConfigurationError(f"n_points must be an integer, got {self.n_points!r}")
        if self.n_points < 3 or self.n_points % 2 == 0:
            raise ConfigurationError(
                f"n_points must be odd and >= 3 so that x=0 is a grid point, got {self.n_points}"
            )
        if not (self.half_width > 0 and math.isfinite(self.half_width)):
            raise ConfigurationError(f"half_width must be positive, got {self.half_width}")


@dataclass(frozen=True, eq=False)
class Grid:
    spec: GridSpec
    points: np.ndarray = field(repr=False)
    spacing: float
    origin_index: int

    @property
    def n(self) -> int:
        return self.points.size

    @property
    def half_width(self) -> float:
        return self.spec.half_width

    def __eq__(self, other):
        return isinstance(other, Grid) and self.spec == other.spec

    def __hash__(self):
        return hash(self.spec)


@dataclass(frozen=True, eq=False)
class SingleParticleOperator:
    """Real symmetric matrix acting on one particle's grid amplitudes."""

    matrix: np.ndarray

    def __add__(self, other: "SingleParticleOperator") -> "SingleParticleOperator":
        return SingleParticleOperator(self.matrix + other.matrix)

    @property
    def is_diagonal(self) -> bool:
        m = self.matrix
        return not np.any(m - np.diag(np.diagonal(m)))


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def build_grid(spec: GridSpec) -> Grid:
    n = spec.n_points
    mid = n // 2
    spacing = 2.0 * spec.half_width / (n - 1)
    # integer offsets keep the origin exact and the grid exactly symmetric
    points = (np.arange(n) - mid) * spacing
    return Grid(spec=spec, points=_frozen(points), spacing=spacing, origin_index=mid)


def kinetic_matrix(grid: Grid) -> SingleParticleOperator:
    """Sinc-DVR representation of -(1/2) d^2/dx^2 on a uniform grid."""
    i = np.arange(grid.n)
    k = i[:, None] - i[None, :]
    off = np.where(k == 0, 1, k).astype(float)
    t = np.where(k == 0, math.pi**2 / 6.0, (-1.0) ** np.abs(k) / off**2)
    return SingleParticleOperator(_frozen(t / grid.spacing**2))


def harmonic_diagonal(grid: Grid, center: float = 0.0, freq_ratio: float = 1.0) -> SingleParticleOperator:
    if not freq_ratio > 0:
        raise ConfigurationError(f"freq_ratio must be positive, got {freq_ratio}")
    v = 0.5 * freq_ratio**2 * (grid.points - center) ** 2
    return SingleParticleOperator(_frozen(np.diag(v)))


def delta_diagonal(grid: Grid, strength: float) -> SingleParticleOperator:
    """Grid delta function: a Kronecker delta at the origin divided by the weight."""
    m = np.zeros((grid.n, grid.n))
    m[grid.origin_index, grid.origin_index] = strength / grid.spacing
    return SingleParticleOperator(_frozen(m))


def gaussian_diagonal(grid: Grid, strength: float, width: float | None = None) -> SingleParticleOperator:
    """Finite-width barrier of area ``strength``; width defaults to the grid spacing.

    The profile is renormalized on the grid so its quadrature equals ``strength``
    exactly, which makes it converge to :func:`delta_diagonal` as width -> 0.
    """
    sigma = grid.spacing if width is None else width
    if not sigma > 0:
        raise ConfigurationError(f"barrier width must be positive, got {sigma}")
    profile = np.exp(-0.5 * (grid.points / sigma) ** 2)
    profile *= strength / (profile.sum() * grid.spacing)
    return SingleParticleOperator(_frozen(np.diag(profile)))


def g1d_from_3d(a_3d: float, a_perp: float, mass: float, omega_perp: float | None = None,
                hbar: float = 1.054571817e-34) -> float:
    """Effective 1D contact coupling from the 3D scattering length.

    ``a_perp`` is the transverse oscillator length sqrt(hbar / (mu * omega_perp))
    with the reduced mass mu = m/2. If ``omega_perp`` is given, ``a_perp`` may be
    None and is derived from it.
    """
    if a_perp is None:
        if omega_perp is None:
            raise ConfigurationError("need a_perp or omega_perp")
        a_perp = math.sqrt(hbar / (0.5 * mass * omega_perp))
    denom = 1.0 - CIR_CONSTANT * a_3d / a_perp
    if abs(denom) < 1e-12:
        raise SingularityError(
            f"confinement-induced resonance: 1 - C a_3d/a_perp = {denom:.3e}"
        )
    return 4.0 * hbar**2 * a_3d / (mass * a_perp**2 * denom)


def parity_permutation(grid: Grid) -> np.ndarray:
    """Index map i -> n-1-i implementing x -> -x."""
    return np.arange(grid.n)[::-1].copy()
