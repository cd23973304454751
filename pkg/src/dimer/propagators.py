"""Chebyshev propagator on the full product grid.

Independent of the packed representation and of any eigensolver: it only
uses the one-body matrix, the contact strength, and Gershgorin bounds.
"""

from __future__ import annotations

import numpy as np
from scipy.special import jv


def _gershgorin(m: np.ndarray) -> tuple[float, float]:
    d = np.diagonal(m)
    r = np.sum(np.abs(m), axis=1) - np.abs(d)
    return float(np.min(d - r)), float(np.max(d + r))


def chebyshev_propagate(one_body: np.ndarray, contact: float, psi0: np.ndarray, t: float,
                        tol: float = 1e-16) -> np.ndarray:
    """exp(-i H t) psi0 for H psi = h psi + psi h + contact * diag(psi) * I.

    ``psi0`` is an n x n amplitude array (any normalization).
    """
    h = np.asarray(one_body, dtype=float)
    lo1, hi1 = _gershgorin(h)
    lo = 2 * lo1 + min(contact, 0.0)
    hi = 2 * hi1 + max(contact, 0.0)
    center = 0.5 * (hi + lo)
    half = 0.5 * (hi - lo) * 1.01
    diag = np.diag_indices(h.shape[0])

    def apply(c):
        r = h @ c + c @ h
        r[diag] += contact * np.diagonal(c)
        return (r - center * c) / half

    alpha = half * t
    kmax = int(alpha + 30 * max(alpha, 1.0) ** (1 / 3) + 40)
    k = np.arange(kmax + 1)
    coef = jv(k, alpha)
    # trim the tail once coefficients are negligible
    nz = np.nonzero(np.abs(coef) > tol)[0]
    kmax = int(nz[-1]) + 2 if nz.size else 1
    psi0 = np.asarray(psi0, dtype=np.complex128)
    t_prev = psi0
    t_cur = apply(psi0)
    acc = coef[0] * t_prev + 2.0 * (-1j) * coef[1] * t_cur
    phase = (-1j) ** 2
    for n in range(2, kmax + 1):
        t_next = 2.0 * apply(t_cur) - t_prev
        acc += 2.0 * phase * coef[n] * t_next
        t_prev, t_cur = t_cur, t_next
        phase *= -1j
    return np.exp(-1j * center * t) * acc


def split_operator_propagate(potential: np.ndarray, contact: float, psi0: np.ndarray, t: float,
                             dx: float, dt: float = 1e-3) -> np.ndarray:
    """Strang split-step Fourier propagator (second order in dt) on the full grid.

    ``potential`` is the one-body diagonal. Periodic boundary conditions, so only
    suitable while the wavefunction stays away from the box edges.
    """
    n = potential.size
    k = 2 * np.pi * np.fft.fftfreq(n, d=dx)
    steps = max(1, int(np.ceil(t / dt)))
    dt = t / steps
    v2 = potential[:, None] + potential[None, :]
    v2 = v2 + contact * np.eye(n)
    half_v = np.exp(-0.5j * dt * v2)
    kin = np.exp(-0.5j * dt * (k[:, None] ** 2 + k[None, :] ** 2))
    psi = np.asarray(psi0, dtype=np.complex128) * half_v
    for s in range(steps):
        psi = np.fft.ifft2(kin * np.fft.fft2(psi))
        psi *= half_v if s == steps - 1 else half_v * half_v
    return psi
