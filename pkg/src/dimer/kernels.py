"""Hot loops of the two-body assembly.

Each kernel has a numba implementation and a vectorized numpy twin with the
same signature; ``assemble_block`` dispatches on ``DIMER_DISABLE_NUMBA``.

Matrix elements in the exchange-symmetric basis |ab>_s = (|ab> + |ba>)/sqrt(2(1+d_ab))
follow from <ab|_s (h x 1 + 1 x h) = sum_x sqrt(2/(1+d_ab)) (h_ax <xb| + h_bx <ax|)
projected back onto the packed pair {x,b} (resp. {a,x}) with overlap
``nu = 1`` for diagonal pairs and ``1/sqrt(2)`` otherwise.
"""

from __future__ import annotations

import math

import numpy as np

from ._accel import USE_NUMBA

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None


def _assemble_block_loops(h, diag_shift, rows_a, rows_b, lookup, nu, col, coef, f_row, f_col, out):
    nrows = rows_a.shape[0]
    n = h.shape[0]
    for i in range(nrows):
        a = rows_a[i]
        b = rows_b[i]
        if a == b:
            r = 1.0
        else:
            r = math.sqrt(2.0)
        fi = f_row[i]
        for x in range(n):
            k1 = lookup[x, b]
            j1 = col[k1]
            if j1 >= 0:
                out[i, j1] += r * h[a, x] * nu[k1] * coef[k1] / (fi * f_col[j1])
            k2 = lookup[a, x]
            j2 = col[k2]
            if j2 >= 0:
                out[i, j2] += r * h[b, x] * nu[k2] * coef[k2] / (fi * f_col[j2])
        if a == b:
            k0 = lookup[a, a]
            j0 = col[k0]
            if j0 >= 0:
                out[i, j0] += diag_shift[a] * coef[k0] / (fi * f_col[j0])
    return out


def assemble_block_numpy(h, diag_shift, rows_a, rows_b, lookup, nu, col, coef, f_row, f_col, out):
    nrows = rows_a.shape[0]
    n = h.shape[0]
    ridx = np.arange(nrows)
    r = np.where(rows_a == rows_b, 1.0, math.sqrt(2.0)) / f_row
    flat = out.reshape(-1)
    ncols = out.shape[1]
    for x in range(n):
        for k, hv in ((lookup[x, rows_b], h[rows_a, x]), (lookup[rows_a, x], h[rows_b, x])):
            j = col[k]
            keep = j >= 0
            val = r * hv * nu[k] * coef[k]
            jj = j[keep]
            np.add.at(flat, ridx[keep] * ncols + jj, val[keep] / f_col[jj])
    diag = np.nonzero(rows_a == rows_b)[0]
    if diag.size:
        a = rows_a[diag]
        k0 = lookup[a, a]
        j0 = col[k0]
        keep = j0 >= 0
        d, jj = diag[keep], j0[keep]
        np.add.at(flat, d * ncols + jj, diag_shift[a[keep]] * coef[k0[keep]] / (f_row[d] * f_col[jj]))
    return out


if numba is not None:
    assemble_block_numba = numba.njit(cache=True, nogil=True)(_assemble_block_loops)
else:  # pragma: no cover
    assemble_block_numba = None


def _scatter_unpack_loops(u, rows_a, rows_b, scale_off, out):
    for k in range(u.shape[0]):
        a = rows_a[k]
        b = rows_b[k]
        if a == b:
            out[a, a] = u[k]
        else:
            v = u[k] * scale_off
            out[a, b] = v
            out[b, a] = v
    return out


def unpack_numpy(u, rows_a, rows_b, scale_off, out):
    off = rows_a != rows_b
    out[rows_a, rows_b] = np.where(off, u * scale_off, u)
    out[rows_b, rows_a] = out[rows_a, rows_b]
    return out


if numba is not None:
    unpack_numba = numba.njit(cache=True, nogil=True)(_scatter_unpack_loops)
else:  # pragma: no cover
    unpack_numba = None


if USE_NUMBA and numba is not None:
    assemble_block = assemble_block_numba
    unpack_pairs = unpack_numba
else:
    assemble_block = assemble_block_numpy
    unpack_pairs = unpack_numpy
