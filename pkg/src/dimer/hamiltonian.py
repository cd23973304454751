"""Two-boson Hamiltonians in the exchange-symmetric sector and their spectra.

Packed vectors hold one entry per unordered grid pair (i <= j). An off-diagonal
pair carries sqrt(2) times the wavefunction value, so the Euclidean norm of a
packed vector equals the norm of the full n x n amplitude array. Internally a
packed *coefficient* vector is normalized to 1; physical amplitudes (the
wavefunction) are coefficients divided by the grid spacing.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from . import kernels
from .errors import ConfigurationError, NumericalError, SymmetryError
from .grid import (
    Grid,
    SingleParticleOperator,
    delta_diagonal,
    gaussian_diagonal,
    harmonic_diagonal,
    kinetic_matrix,
)

log = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)

#: Above this block dimension ``Retention.auto`` switches to an energy cutoff.
DEFAULT_SIZE_CAP = 9000


class SymmetricIndexMap:
    """Bijection between packed indices and unordered grid pairs (i <= j)."""

    def __init__(self, n: int):
        self.n = n
        a, b = np.triu_indices(n)
        self.pair_a = a.astype(np.int64)
        self.pair_b = b.astype(np.int64)
        lookup = np.empty((n, n), dtype=np.int64)
        lookup[a, b] = np.arange(a.size)
        lookup[b, a] = np.arange(a.size)
        self.lookup = lookup
        self.is_diag = a == b
        # overlap <xb|k>_s of an ordered product state with a packed basis state
        self.nu = np.where(self.is_diag, 1.0, 1.0 / SQRT2)
        self.weight = np.where(self.is_diag, 1.0, SQRT2)

    @property
    def dimension(self) -> int:
        return self.pair_a.size

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return list(zip(self.pair_a.tolist(), self.pair_b.tolist()))

    @cached_property
    def parity_partner(self) -> np.ndarray:
        n = self.n
        return self.lookup[n - 1 - self.pair_a, n - 1 - self.pair_b]

    def pair_weights(self, field_a: np.ndarray, field_b: np.ndarray | None = None) -> np.ndarray:
        """Per-pair value of sym(f(x1) g(x2)) for computing expectation values."""
        if field_b is None:
            field_b = field_a
        a, b = self.pair_a, self.pair_b
        return 0.5 * (field_a[a] * field_b[b] + field_a[b] * field_b[a])

    def unpack(self, u: np.ndarray) -> np.ndarray:
        """Packed coefficients -> symmetric n x n coefficient array."""
        out = np.zeros((self.n, self.n), dtype=np.result_type(u.dtype, np.float64))
        return kernels.unpack_pairs(np.ascontiguousarray(u, dtype=out.dtype), self.pair_a,
                                    self.pair_b, 1.0 / SQRT2, out)

    def pack(self, full: np.ndarray) -> np.ndarray:
        a, b = self.pair_a, self.pair_b
        return full[a, b] * self.weight


_INDEX_MAPS: dict[int, SymmetricIndexMap] = {}


def index_map_for(n: int) -> SymmetricIndexMap:
    if n not in _INDEX_MAPS:
        _INDEX_MAPS[n] = SymmetricIndexMap(n)
    return _INDEX_MAPS[n]


class ParityBasis:
    """Symmetry-adapted basis e_i = (|p_i> + s|q_i>)/N_i of one parity sector.

    ``q_i`` is the packed pair reflected through the origin. Self-conjugate pairs
    (i, n-1-i) appear only in the even sector.
    """

    def __init__(self, imap: SymmetricIndexMap, sign: int):
        if sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        self.sign = sign
        self.imap = imap
        q = imap.parity_partner
        k = np.arange(imap.dimension)
        reps = k[k <= q] if sign == 1 else k[k < q]
        self.reps = reps
        self.partners = q[reps]
        self.self_conjugate = self.partners == reps
        self.norm = np.where(self.self_conjugate, 2.0, SQRT2)
        # f = N / sqrt(2): 1 for ordinary pairs, sqrt(2) for self-conjugate ones
        self.f = self.norm / SQRT2
        col = np.full(imap.dimension, -1, dtype=np.int64)
        coef = np.zeros(imap.dimension)
        col[reps] = np.arange(reps.size)
        coef[reps] = 1.0
        ordinary = ~self.self_conjugate
        col[self.partners[ordinary]] = np.arange(reps.size)[ordinary]
        coef[self.partners[ordinary]] = float(sign)
        coef[reps[self.self_conjugate]] = 1.0 + sign
        self.col = col
        self.coef = coef

    @property
    def dimension(self) -> int:
        return self.reps.size

    def reduce(self, u: np.ndarray) -> np.ndarray:
        """Packed vector(s) -> block coordinates (first axis)."""
        norm = self.norm.reshape((-1,) + (1,) * (u.ndim - 1))
        return (u[self.reps] + self.sign * u[self.partners]) / norm

    def expand(self, c: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        shape = (self.imap.dimension,) + c.shape[1:]
        if out is None:
            out = np.zeros(shape, dtype=c.dtype)
        scaled = c / self.norm.reshape((-1,) + (1,) * (c.ndim - 1))
        ordinary = ~self.self_conjugate
        out[self.reps[ordinary]] += scaled[ordinary]
        out[self.partners[ordinary]] += self.sign * scaled[ordinary]
        if self.sign == 1:
            out[self.reps[self.self_conjugate]] += 2.0 * scaled[self.self_conjugate]
        return out


@dataclass(frozen=True)
class TrapParams:
    """Descriptor of the one-body potential a Hamiltonian was built from."""

    kind: str  # "interferometer" or "preparatory"
    g: float
    kappa: float = 0.0
    epsilon: float = 1.0
    d: float = 0.0
    barrier: str = "delta"

    @property
    def centered(self) -> bool:
        return self.kind == "interferometer"


@dataclass(frozen=True, eq=False)
class TwoBodyHamiltonian:
    """Structured two-body operator h x 1 + 1 x h + (g/dx) sum_i |ii><ii|.

    The packed matrix is assembled on demand (``matrix`` or ``parity_block``);
    ``apply`` acts with the operator directly on the n x n amplitude array.
    """

    grid: Grid
    one_body: SingleParticleOperator
    g: float
    params: TrapParams
    index_map: SymmetricIndexMap = field(repr=False)

    @property
    def dimension(self) -> int:
        return self.index_map.dimension

    @property
    def contact(self) -> float:
        return self.g / self.grid.spacing

    @property
    def parity_symmetric(self) -> bool:
        h = self.one_body.matrix
        return self.params.centered and np.array_equal(h, h[::-1, ::-1])

    def _assemble(self, basis: ParityBasis | None) -> np.ndarray:
        imap = self.index_map
        h = np.ascontiguousarray(self.one_body.matrix, dtype=np.float64)
        shift = np.full(imap.n, self.contact)
        if basis is None:
            rows = np.arange(imap.dimension)
            col = rows
            coef = np.ones(imap.dimension)
            f_row = f_col = np.ones(imap.dimension)
        else:
            rows, col, coef = basis.reps, basis.col, basis.coef
            f_row = f_col = basis.f
        out = np.zeros((rows.size, rows.size))
        kernels.assemble_block(h, shift, imap.pair_a[rows], imap.pair_b[rows], imap.lookup,
                               imap.nu, col, coef, f_row, f_col, out)
        # exact symmetry as stored
        out += out.T
        out *= 0.5
        return out

    @property
    def matrix(self) -> np.ndarray:
        """Full packed matrix (dimension n(n+1)/2 squared; small grids only)."""
        return self._assemble(None)

    def parity_block(self, sign: int) -> tuple[np.ndarray, ParityBasis]:
        if not self.parity_symmetric:
            raise SymmetryError("Hamiltonian does not commute with parity")
        basis = ParityBasis(self.index_map, sign)
        return self._assemble(basis), basis

    def apply(self, u: np.ndarray) -> np.ndarray:
        """H u for packed coefficient vector(s) u (first axis packed)."""
        imap = self.index_map
        h = self.one_body.matrix
        if u.ndim == 1:
            c = imap.unpack(u)
            r = h @ c
            r = r + r.T
            r[np.diag_indices(imap.n)] += self.contact * np.diagonal(c)
            return imap.pack(r)
        return np.stack([self.apply(u[:, k]) for k in range(u.shape[1])], axis=1)

    def expectation(self, u: np.ndarray) -> float:
        return float(np.real(np.vdot(u, self.apply(u))) / np.real(np.vdot(u, u)))

    def fingerprint(self) -> str:
        m = hashlib.sha256()
        m.update(repr((self.grid.spec, self.params)).encode())
        m.update(np.ascontiguousarray(self.one_body.matrix).tobytes())
        m.update(np.float64(self.g).tobytes())
        return m.hexdigest()


def pack_symmetric(psi_full: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Pack an exchange-symmetric n x n amplitude array."""
    psi_full = np.asarray(psi_full)
    if psi_full.ndim != 2 or psi_full.shape[0] != psi_full.shape[1]:
        raise ValueError("expected a square two-particle amplitude array")
    asym = np.max(np.abs(psi_full - psi_full.T)) if psi_full.size else 0.0
    if asym > tol:
        raise SymmetryError(f"amplitude not exchange symmetric (max |psi - psi^T| = {asym:.3e})")
    return index_map_for(psi_full.shape[0]).pack(psi_full)


def unpack_symmetric(u: np.ndarray, n: int) -> np.ndarray:
    return index_map_for(n).unpack(u)


def _barrier(grid: Grid, kappa: float, barrier: str) -> SingleParticleOperator:
    if barrier == "delta":
        return delta_diagonal(grid, kappa)
    if barrier == "gaussian":
        return gaussian_diagonal(grid, kappa)
    raise ConfigurationError(f"unknown barrier kind {barrier!r}")


def interferometer_one_body(grid: Grid, kappa: float, barrier: str = "delta") -> SingleParticleOperator:
    return kinetic_matrix(grid) + harmonic_diagonal(grid, 0.0, 1.0) + _barrier(grid, kappa, barrier)


def build_interferometer_h(grid: Grid, g: float, kappa: float, barrier: str = "delta") -> TwoBodyHamiltonian:
    return TwoBodyHamiltonian(
        grid=grid,
        one_body=interferometer_one_body(grid, kappa, barrier),
        g=float(g),
        params=TrapParams("interferometer", float(g), kappa=float(kappa), barrier=barrier),
        index_map=index_map_for(grid.n),
    )


def preparation_margin(epsilon: float) -> float:
    return 3.0 / math.sqrt(epsilon)


def build_preparatory_h(grid: Grid, g: float, epsilon: float, d: float) -> TwoBodyHamiltonian:
    if not epsilon > 0:
        raise ConfigurationError(f"epsilon must be positive, got {epsilon}")
    margin = preparation_margin(epsilon)
    if abs(d) + margin > grid.half_width:
        raise ConfigurationError(
            f"preparatory trap at d={d} needs a margin: |d| + 3/sqrt(epsilon) = {abs(d) + margin:.3f} "
            f"<= half_width = {grid.half_width}"
        )
    one_body = kinetic_matrix(grid) + harmonic_diagonal(grid, d, epsilon)
    return TwoBodyHamiltonian(
        grid=grid,
        one_body=one_body,
        g=float(g),
        params=TrapParams("preparatory", float(g), epsilon=float(epsilon), d=float(d)),
        index_map=index_map_for(grid.n),
    )


# ---------------------------------------------------------------------------
# spectra


@dataclass(frozen=True)
class Retention:
    """Which eigenpairs ``diagonalize`` keeps.

    ``kind`` is ``"all"``, ``"cutoff"`` (energies <= ``energy_cutoff``) or
    ``"auto"`` (all unless a block exceeds ``size_cap``, else the cutoff).
    """

    kind: str = "auto"
    energy_cutoff: float | None = None
    size_cap: int = DEFAULT_SIZE_CAP

    def __post_init__(self):
        if self.kind not in ("all", "cutoff", "auto"):
            raise ConfigurationError(f"unknown retention policy {self.kind!r}")
        if self.kind == "cutoff" and self.energy_cutoff is None:
            raise ConfigurationError("cutoff retention needs energy_cutoff")

    def resolve(self, block_dim: int) -> float | None:
        """Energy cutoff to apply to a block of the given size (None = keep all)."""
        if self.kind == "all":
            return None
        if self.kind == "cutoff":
            return self.energy_cutoff
        if block_dim <= self.size_cap or self.energy_cutoff is None:
            return None
        return self.energy_cutoff

    @staticmethod
    def default_cutoff(mean_energy: float) -> float:
        """Three times the initial-state mean energy (mean + 2|mean| if it is negative)."""
        return mean_energy + 2.0 * abs(mean_energy)


ALL = Retention("all")


@dataclass(frozen=True, eq=False)
class SpectralBlock:
    energies: np.ndarray
    vectors: np.ndarray  # block coordinates, orthonormal columns
    basis: ParityBasis | None  # None = plain packed coordinates
    label: str = "full"

    @property
    def count(self) -> int:
        return self.energies.size

    def reduce(self, u: np.ndarray) -> np.ndarray:
        return u if self.basis is None else self.basis.reduce(u)

    def expand(self, c: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        if self.basis is None:
            if out is None:
                return c.copy()
            out += c
            return out
        return self.basis.expand(c, out)


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Retained eigenpairs, stored per parity block."""

    blocks: tuple[SpectralBlock, ...]
    grid: Grid
    params: TrapParams
    energy_cutoff: float | None = None
    diagnostics: dict = field(default_factory=dict)

    @cached_property
    def _order(self) -> tuple[np.ndarray, np.ndarray]:
        e = np.concatenate([b.energies for b in self.blocks])
        blk = np.concatenate([np.full(b.count, i) for i, b in enumerate(self.blocks)])
        pos = np.concatenate([np.arange(b.count) for b in self.blocks])
        order = np.argsort(e, kind="stable")
        return order, np.stack([blk[order], pos[order]], axis=1)

    @property
    def energies(self) -> np.ndarray:
        e = np.concatenate([b.energies for b in self.blocks])
        return e[self._order[0]]

    @property
    def count(self) -> int:
        return sum(b.count for b in self.blocks)

    @property
    def dimension(self) -> int:
        return index_map_for(self.grid.n).dimension

    def eigenvector(self, k: int) -> np.ndarray:
        """Packed unit coefficient vector of the k-th lowest retained state."""
        blk, pos = self._order[1][k]
        b = self.blocks[blk]
        out = np.zeros(self.dimension)
        return b.expand(b.vectors[:, pos], out)

    @property
    def states(self) -> np.ndarray:
        """All retained eigenvectors as packed columns (memory heavy)."""
        return np.stack([self.eigenvector(k) for k in range(self.count)], axis=1)


def _fix_phase(vectors: np.ndarray) -> None:
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    vectors *= signs


def _eigh_block(matrix: np.ndarray, cutoff: float | None, label: str) -> tuple[np.ndarray, np.ndarray]:
    dim = matrix.shape[0]
    norm = float(np.max(np.abs(matrix))) if dim else 0.0
    try:
        if cutoff is None:
            w, v = scipy.linalg.eigh(matrix, driver="evd", overwrite_a=True, check_finite=False)
        else:
            w, v = scipy.linalg.eigh(matrix, driver="evr", subset_by_value=(-np.inf, cutoff),
                                     overwrite_a=True, check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(
            f"eigensolver failed on {label} block (dim={dim}, max|H|={norm:.3e}, cutoff={cutoff}): {exc}"
        ) from exc
    if not np.all(np.isfinite(w)):
        raise NumericalError(f"non-finite eigenvalues in {label} block (dim={dim}, max|H|={norm:.3e})")
    return w, v


def diagonalize(h: TwoBodyHamiltonian, retain: Retention = ALL, check: bool = True,
                use_parity: bool | None = None, cache=None) -> SpectralDecomposition:
    """Dense diagonalization, split into parity sectors when the trap is centered."""
    if cache is not None:
        hit = cache.load(h, retain)
        if hit is not None:
            return hit
    if use_parity is None:
        use_parity = h.parity_symmetric
    blocks = []
    cut_used = None
    if use_parity:
        for sign, label in ((1, "even"), (-1, "odd")):
            basis = ParityBasis(h.index_map, sign)
            cutoff = retain.resolve(basis.dimension)
            cut_used = cutoff if cutoff is not None else cut_used
            mat, _ = h.parity_block(sign)
            w, v = _eigh_block(mat, cutoff, label)
            del mat
            _fix_phase(v)
            blocks.append(SpectralBlock(w, v, basis, label))
    else:
        cutoff = retain.resolve(h.dimension)
        cut_used = cutoff
        w, v = _eigh_block(h.matrix, cutoff, "full")
        _fix_phase(v)
        blocks.append(SpectralBlock(w, v, None, "full"))
    dec = SpectralDecomposition(tuple(blocks), h.grid, h.params, energy_cutoff=cut_used)
    if check:
        dec.diagnostics.update(_check_spectrum(h, dec))
    if cache is not None:
        cache.store(h, retain, dec)
    return dec


def _check_spectrum(h: TwoBodyHamiltonian, dec: SpectralDecomposition, samples: int = 6) -> dict:
    """Residual and orthonormality checks on a deterministic sample of states."""
    worst_res = 0.0
    worst_gram = 0.0
    for b in dec.blocks:
        if b.count == 0:
            continue
        gram = b.vectors.T @ b.vectors if b.count <= 2500 else b.vectors[:, :samples].T @ b.vectors[:, :samples]
        worst_gram = max(worst_gram, float(np.max(np.abs(gram - np.eye(gram.shape[0])))))
        picks = sorted(set(np.linspace(0, b.count - 1, samples).astype(int).tolist()))
        for k in picks:
            u = b.expand(b.vectors[:, k], np.zeros(h.dimension))
            r = h.apply(u) - b.energies[k] * u
            scale = max(abs(b.energies[k]), 1.0)
            worst_res = max(worst_res, float(np.linalg.norm(r)) / scale)
    out = {"max_relative_residual": worst_res, "max_gram_error": worst_gram}
    if worst_res > 1e-8 or worst_gram > 1e-8:
        log.warning("spectral check: residual %.2e, gram %.2e", worst_res, worst_gram)
    return out


def lowest_eigenpairs(h: TwoBodyHamiltonian, k: int = 2, guess: np.ndarray | None = None,
                      tol: float = 1e-13) -> tuple[np.ndarray, np.ndarray]:
    """Lowest ``k`` eigenpairs by Lanczos on the structured operator.

    Used for the preparatory trap, which has no parity symmetry to split on.
    """
    dim = h.dimension
    if dim <= 1200:
        w, v = scipy.linalg.eigh(h.matrix, subset_by_index=(0, k - 1))
    else:
        op = scipy.sparse.linalg.LinearOperator((dim, dim), matvec=lambda u: h.apply(np.ravel(u)),
                                                dtype=np.float64)
        v0 = guess if guess is not None else np.ones(dim)
        try:
            w, v = scipy.sparse.linalg.eigsh(op, k=k, which="SA", v0=v0, tol=tol,
                                             ncv=max(40, 2 * k + 1), maxiter=20000)
        except scipy.sparse.linalg.ArpackError as exc:
            raise NumericalError(f"Lanczos failed for lowest states (dim={dim}): {exc}") from exc
        order = np.argsort(w)
        w, v = w[order], v[:, order]
    _fix_phase(v)
    return w, v
