"""Numba kernels for the dense density-matrix hot path.

Each kernel makes exactly one pass over the matrix and conjugates rows and
columns together, which keeps the 2^N x 2^N evolution memory-bound instead
of temporary-bound. Every element is written by exactly one loop iteration,
so results do not depend on thread scheduling.
"""

import numpy as np
from numba import njit, prange


@njit(parallel=True, cache=True)
def dm_xrot(rho, mask, c, s):
    """rho <- u rho u^dagger with u = cos(t)*I + i*sin(t)*X on one qubit."""
    dim = rho.shape[0]
    half = dim >> 1
    js = 1j * s
    njs = -1j * s
    low_bits = mask - 1
    for rr in prange(half):
        low = rr & low_bits
        r0 = ((rr - low) << 1) | low
        r1 = r0 | mask
        for cc in range(half):
            lowc = cc & low_bits
            c0 = ((cc - lowc) << 1) | lowc
            c1 = c0 | mask
            b00 = rho[r0, c0]
            b01 = rho[r0, c1]
            b10 = rho[r1, c0]
            b11 = rho[r1, c1]
            t00 = c * b00 + js * b10
            t01 = c * b01 + js * b11
            t10 = js * b00 + c * b10
            t11 = js * b01 + c * b11
            rho[r0, c0] = t00 * c + t01 * njs
            rho[r0, c1] = t00 * njs + t01 * c
            rho[r1, c0] = t10 * c + t11 * njs
            rho[r1, c1] = t10 * njs + t11 * c


@njit(parallel=True, cache=True)
def dm_diag_phase(rho, phase):
    """rho <- D rho D^dagger for a diagonal unitary D = diag(phase)."""
    dim = rho.shape[0]
    for r in prange(dim):
        pr = phase[r]
        for cc in range(dim):
            rho[r, cc] *= pr * np.conj(phase[cc])


@njit(parallel=True, cache=True)
def dm_depolarize(rho, mask, p):
    """Single-qubit depolarizing channel on one qubit of a density matrix.

    rho <- (1-p) rho + (p/3)(X rho X + Y rho Y + Z rho Z), written in its
    block form: off-diagonal blocks scale by (1 - 4p/3), diagonal blocks mix
    with weight 2p/3.
    """
    dim = rho.shape[0]
    half = dim >> 1
    off = 1.0 - 4.0 * p / 3.0
    d_keep = 1.0 - 2.0 * p / 3.0
    d_mix = 2.0 * p / 3.0
    low_bits = mask - 1
    for rr in prange(half):
        low = rr & low_bits
        r0 = ((rr - low) << 1) | low
        r1 = r0 | mask
        for cc in range(half):
            lowc = cc & low_bits
            c0 = ((cc - lowc) << 1) | lowc
            c1 = c0 | mask
            b00 = rho[r0, c0]
            b11 = rho[r1, c1]
            rho[r0, c0] = d_keep * b00 + d_mix * b11
            rho[r1, c1] = d_mix * b00 + d_keep * b11
            rho[r0, c1] *= off
            rho[r1, c0] *= off
