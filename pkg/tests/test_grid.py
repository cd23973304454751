import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dimer.errors import ConfigurationError, SingularityError
from dimer.grid import (
    CIR_CONSTANT,
    GridSpec,
    build_grid,
    delta_diagonal,
    g1d_from_3d,
    gaussian_diagonal,
    harmonic_diagonal,
    kinetic_matrix,
    parity_permutation,
)


def test_smallest_grid():
    g = build_grid(GridSpec(1.0, 3))
    np.testing.assert_array_equal(g.points, [-1.0, 0.0, 1.0])
    assert g.spacing == 1.0 and g.origin_index == 1


def test_default_grid():
    g = build_grid(GridSpec())
    assert g.spacing == pytest.approx(0.1, abs=1e-15)
    assert g.points[90] == 0.0


@pytest.mark.parametrize("kwargs", [dict(half_width=9, n_points=180), dict(half_width=0, n_points=11),
                                    dict(half_width=-1, n_points=11), dict(half_width=1, n_points=1)])
def test_invalid_spec(kwargs):
    with pytest.raises(ConfigurationError):
        GridSpec(**kwargs)


@given(st.floats(0.5, 50), st.integers(1, 300))
def test_grid_invariants(half_width, m):
    g = build_grid(GridSpec(half_width, 2 * m + 1))
    assert np.allclose(np.diff(g.points), g.spacing, atol=1e-12, rtol=0)
    assert g.points[g.origin_index] == 0.0
    np.testing.assert_array_equal(g.points, -g.points[::-1])


def test_kinetic_stencil_unit_spacing():
    t = kinetic_matrix(build_grid(GridSpec(3.0, 7))).matrix
    assert t[2, 2] == pytest.approx(math.pi**2 / 6)
    assert t[2, 3] == pytest.approx(-1.0)
    assert t[2, 4] == pytest.approx(0.25)
    np.testing.assert_array_equal(t, t.T)


def test_free_particle_low_spectrum():
    # Low box modes of a wide grid approach k^2/2 with k = m*pi/L
    grid = build_grid(GridSpec(20.0, 401))
    e = np.linalg.eigvalsh(kinetic_matrix(grid).matrix)[:5]
    box = (grid.spec.n_points + 1) * grid.spacing  # walls one spacing past each end point
    k = np.arange(1, 6) * math.pi / box
    np.testing.assert_allclose(e, k**2 / 2, rtol=2e-3)


def test_harmonic_spectrum_default_grid():
    grid = build_grid(GridSpec())
    h = kinetic_matrix(grid) + harmonic_diagonal(grid)
    e = np.linalg.eigvalsh(h.matrix)[:21]
    np.testing.assert_allclose(e, np.arange(21) + 0.5, atol=1e-8, rtol=0)


def test_harmonic_diagonal_values():
    grid = build_grid(GridSpec(9.0, 181))
    i2 = grid.origin_index + 20
    i5, i6 = grid.origin_index + 50, grid.origin_index + 60
    assert harmonic_diagonal(grid).matrix[i2, i2] == pytest.approx(2.0)
    prep = harmonic_diagonal(grid, 6.0, 5.164).matrix
    assert prep[i6, i6] == pytest.approx(0.0, abs=1e-12)
    assert prep[i5, i5] == pytest.approx(0.5 * 5.164**2)
    with pytest.raises(ConfigurationError):
        harmonic_diagonal(grid, 0.0, 0.0)


def test_delta_diagonal():
    grid = build_grid(GridSpec())
    m = delta_diagonal(grid, 0.4).matrix
    assert m[90, 90] == pytest.approx(4.0)
    assert np.count_nonzero(m) == 1
    assert not np.any(delta_diagonal(grid, 0.0).matrix)


def test_gaussian_barrier_area():
    grid = build_grid(GridSpec(6.0, 121))
    v = np.diagonal(gaussian_diagonal(grid, 0.7).matrix)
    assert v.sum() * grid.spacing == pytest.approx(0.7)
    assert np.argmax(v) == grid.origin_index


def test_parity_commutes():
    grid = build_grid(GridSpec(4.0, 21))
    p = np.eye(grid.n)[parity_permutation(grid)]
    for op in (kinetic_matrix(grid), harmonic_diagonal(grid), delta_diagonal(grid, 1.3)):
        np.testing.assert_allclose(p @ op.matrix, op.matrix @ p, atol=1e-12)


def test_operators_symmetric():
    grid = build_grid(GridSpec(4.0, 21))
    for op in (kinetic_matrix(grid), harmonic_diagonal(grid, 1.0, 2.0), delta_diagonal(grid, 2.0)):
        np.testing.assert_array_equal(op.matrix, op.matrix.T)


def test_g1d():
    assert g1d_from_3d(0.0, 1e-6, 1e-25) == 0.0
    assert g1d_from_3d(-1e-9, 1e-6, 1e-25) < 0
    assert g1d_from_3d(1e-9, 1e-6, 1e-25) > 0
    with pytest.raises(SingularityError):
        g1d_from_3d(1e-6 / CIR_CONSTANT, 1e-6, 1e-25)


def test_g1d_formula_and_omega_perp():
    hbar, m, w = 1.054571817e-34, 1.44e-25, 2 * math.pi * 1e4
    a_perp = math.sqrt(hbar / (0.5 * m * w))
    a = 5e-9
    expected = 4 * hbar**2 * a / (m * a_perp**2 * (1 - CIR_CONSTANT * a / a_perp))
    assert g1d_from_3d(a, None, m, omega_perp=w) == pytest.approx(expected)
    assert g1d_from_3d(a, a_perp, m) == pytest.approx(expected)
