import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dimer import kernels
from dimer.cache import DecompositionCache, read_decomposition
from dimer.errors import ConfigurationError, SymmetryError
from dimer.grid import GridSpec, build_grid, harmonic_diagonal, kinetic_matrix
from dimer.hamiltonian import (
    ParityBasis,
    Retention,
    SymmetricIndexMap,
    build_interferometer_h,
    build_preparatory_h,
    diagonalize,
    interferometer_one_body,
    lowest_eigenpairs,
    pack_symmetric,
    unpack_symmetric,
)


def brute_force(grid, one_body, g):
    """Full n^2 x n^2 Hamiltonian restricted to the symmetric sector."""
    n = grid.n
    eye = np.eye(n)
    full = np.kron(one_body, eye) + np.kron(eye, one_body)
    full[np.arange(n) * (n + 1), np.arange(n) * (n + 1)] += g / grid.spacing
    imap = SymmetricIndexMap(n)
    iso = np.zeros((n * n, imap.dimension))  # packed -> full amplitudes
    for k, (a, b) in enumerate(imap.pairs):
        if a == b:
            iso[a * n + a, k] = 1.0
        else:
            iso[a * n + b, k] = iso[b * n + a, k] = 1 / math.sqrt(2)
    return iso.T @ full @ iso


def test_index_map():
    imap = SymmetricIndexMap(5)
    assert imap.dimension == 15
    assert imap.pairs[:6] == [(0, 0), (0, 1), (0, 2), (0, 3), (0, 4), (1, 1)]
    assert len(set(imap.pairs)) == 15
    assert all(a <= b for a, b in imap.pairs)


def test_pack_examples():
    grid = build_grid(GridSpec(1.0, 5))
    psi = np.zeros((5, 5))
    psi[2, 2] = 1.0
    u = pack_symmetric(psi)
    assert u[SymmetricIndexMap(5).lookup[2, 2]] == 1.0 and np.count_nonzero(u) == 1
    psi = np.zeros((5, 5))
    psi[1, 3] = psi[3, 1] = 1 / math.sqrt(2)
    u = pack_symmetric(psi)
    assert u[SymmetricIndexMap(5).lookup[1, 3]] == pytest.approx(1.0)
    bad = np.zeros((5, 5))
    bad[0, 1] = 1
    with pytest.raises(SymmetryError):
        pack_symmetric(bad)


@given(st.integers(2, 25), st.integers(0, 2**31))
def test_pack_roundtrip_and_norm(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    a = a + a.T
    u = pack_symmetric(a)
    assert np.linalg.norm(u) == pytest.approx(np.linalg.norm(a), rel=1e-12)
    np.testing.assert_allclose(unpack_symmetric(u, n), a, atol=1e-12)


@pytest.mark.parametrize("g,kappa", [(0.0, 0.0), (-3.0, 0.7), (2.5, 1.2)])
def test_matrix_matches_brute_force(g, kappa):
    grid = build_grid(GridSpec(3.0, 9))
    h = build_interferometer_h(grid, g, kappa)
    ref = brute_force(grid, interferometer_one_body(grid, kappa).matrix, g)
    np.testing.assert_allclose(h.matrix, ref, atol=1e-12)
    np.testing.assert_array_equal(h.matrix, h.matrix.T)


def test_preparatory_matches_brute_force():
    grid = build_grid(GridSpec(5.0, 11))
    h = build_preparatory_h(grid, -1.5, 2.0, 1.0)
    one = (kinetic_matrix(grid) + harmonic_diagonal(grid, 1.0, 2.0)).matrix
    np.testing.assert_allclose(h.matrix, brute_force(grid, one, -1.5), atol=1e-12)


def test_apply_matches_matrix(small_grid):
    h = build_interferometer_h(small_grid, -2.0, 0.4)
    u = np.random.default_rng(1).normal(size=h.dimension)
    np.testing.assert_allclose(h.apply(u), h.matrix @ u, atol=1e-10)


def test_kernel_backends_agree(small_grid):
    h = build_interferometer_h(small_grid, 1.0, 0.4)
    basis = ParityBasis(h.index_map, 1)
    args = (np.ascontiguousarray(h.one_body.matrix), np.full(small_grid.n, h.contact), h.index_map.pair_a[basis.reps], h.index_map.pair_b[basis.reps],
            h.index_map.lookup, h.index_map.nu, basis.col, basis.coef, basis.f, basis.f)
    a = np.zeros((basis.dimension, basis.dimension))
    b = np.zeros_like(a)
    kernels.assemble_block_numba(*args, a)
    kernels.assemble_block_numpy(*args, b)
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_parity_invariance(small_grid):
    h = build_interferometer_h(small_grid, -7.0, 0.4)
    m = h.matrix
    q = h.index_map.parity_partner
    np.testing.assert_allclose(m[np.ix_(q, q)], m, atol=1e-10)


def test_noninteracting_spectrum(small_grid):
    dec = diagonalize(build_interferometer_h(small_grid, 0.0, 0.0))
    np.testing.assert_allclose(dec.energies[:5], [1, 2, 3, 3, 4], atol=1e-6)
    assert np.all(np.diff(dec.energies) >= 0)


def test_parity_blocks_reproduce_full_spectrum(small_grid):
    h = build_interferometer_h(small_grid, -2.0, 0.4)
    split = diagonalize(h, use_parity=True).energies
    full = np.linalg.eigvalsh(h.matrix)
    np.testing.assert_allclose(split, full, atol=1e-9)


def test_pair_sums_at_g0():
    grid = build_grid(GridSpec(6.0, 41))
    e1 = np.linalg.eigvalsh(interferometer_one_body(grid, 0.4).matrix)
    i, j = np.triu_indices(e1.size)
    dec = diagonalize(build_interferometer_h(grid, 0.0, 0.4))
    np.testing.assert_allclose(dec.energies[:50], np.sort(e1[i] + e1[j])[:50], atol=1e-8)


def test_half_oscillator_pair():
    grid = build_grid(GridSpec(9.0, 361))
    e1 = np.linalg.eigvalsh(interferometer_one_body(grid, 1e4).matrix)
    assert 2 * e1[0] == pytest.approx(3.0, rel=1e-2)


def test_decomposition_contracts(small_grid):
    h = build_interferometer_h(small_grid, -7.0, 0.4)
    dec = diagonalize(h)
    s = dec.states
    np.testing.assert_allclose(s.T @ s, np.eye(dec.count), atol=1e-8)
    r = h.matrix @ s - s * dec.energies
    assert np.max(np.linalg.norm(r, axis=0) / np.maximum(np.abs(dec.energies), 1)) < 1e-8
    assert dec.energies[0] < diagonalize(build_interferometer_h(small_grid, 0.0, 0.4)).energies[0]


def test_phase_convention(small_grid):
    # fixed per parity block: odd states tie in magnitude with their mirror image
    dec = diagonalize(build_interferometer_h(small_grid, 1.0, 0.4))
    for b in dec.blocks:
        v = b.vectors
        assert np.all(v[np.argmax(np.abs(v), axis=0), np.arange(v.shape[1])] > 0)


def test_ground_energy_monotone(small_grid):
    e = [lowest_eigenpairs(build_interferometer_h(small_grid, g, 0.4), 1)[0][0] for g in (-3, -1, 0, 1, 3)]
    assert np.all(np.diff(e) > 0)
    e = [lowest_eigenpairs(build_interferometer_h(small_grid, -1.0, k), 1)[0][0] for k in (0, 0.5, 1, 4)]
    assert np.all(np.diff(e) > 0)


def test_energy_cutoff_retention(small_grid):
    h = build_interferometer_h(small_grid, -2.0, 0.4)
    full = diagonalize(h)
    cut = diagonalize(h, Retention("cutoff", 10.0))
    assert cut.count == np.count_nonzero(full.energies <= 10.0)
    np.testing.assert_allclose(cut.energies, full.energies[: cut.count], atol=1e-9)
    assert cut.energy_cutoff == 10.0


def test_auto_retention_policy():
    pol = Retention("auto", Retention.default_cutoff(27.0), size_cap=100)
    assert pol.resolve(50) is None
    assert pol.resolve(500) == pytest.approx(81.0)
    assert Retention.default_cutoff(-5.0) == pytest.approx(5.0)
    with pytest.raises(ConfigurationError):
        Retention("cutoff")


def test_preparatory_ground_energy(medium_grid):
    w, _ = lowest_eigenpairs(build_preparatory_h(medium_grid, 0.0, 5.164, 2.0), 1)
    assert w[0] == pytest.approx(5.164, abs=1e-4)


@pytest.mark.parametrize("g", [-0.5, 0.5])
def test_preparatory_interaction_sign(medium_grid, g):
    # relative-motion ground energy moves by g |phi_rel(0)|^2 = g sqrt(eps / (2 pi))
    w, _ = lowest_eigenpairs(build_preparatory_h(medium_grid, g, 5.164, 2.0), 1)
    shift = w[0] - 5.164
    assert np.sign(shift) == np.sign(g)
    assert shift == pytest.approx(g * math.sqrt(5.164 / (2 * math.pi)), rel=0.1)


def test_preparatory_margin(medium_grid):
    with pytest.raises(ConfigurationError, match="margin"):
        build_preparatory_h(medium_grid, 0.0, 5.164, 8.5)


def test_cache_roundtrip(tmp_path, small_grid):
    h = build_interferometer_h(small_grid, -1.0, 0.4)
    cache = DecompositionCache(tmp_path)
    dec = diagonalize(h, cache=cache)
    path = cache.path(h, Retention("all"))
    assert path.exists()
    again = read_decomposition(path, h)
    np.testing.assert_array_equal(again.energies, dec.energies)
    np.testing.assert_array_equal(again.states, dec.states)
    assert diagonalize(h, cache=cache).count == dec.count
