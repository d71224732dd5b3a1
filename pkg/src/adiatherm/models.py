"""Ising Hamiltonians, lattices, and exact thermal-state oracles.

Dense matrices appear only inside the oracles (``gibbs_exact``,
``thermal_reference_curve``, ``lowest_eigenvalues``, ``free_energy``);
circuit evolution never materializes a Hamiltonian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg

from . import paulis
from .errors import BackendCapError
from .paulis import PauliSum, term_masks, _parity_signs
from .states import (
    DM_MAX_QUBITS,
    SV_MAX_QUBITS,
    DensityMatrix,
    StateVector,
    _indices,
    expectation_pauli_sum,
    new_basis_product_state,
    von_neumann_entropy,
)

DENSE_EIG_MAX_QUBITS = 12
ITERATIVE_EIG_MAX_QUBITS = 20


@dataclass(frozen=True)
class Lattice:
    """Site graph: a periodic ring or a periodic rectangular torus.

    Torus edges follow the +x / +y neighbor convention: every site
    contributes the edge to its +x neighbor and to its +y neighbor exactly
    once. At width 2 this produces parallel edges, which are kept.
    """

    kind: str
    n_sites: int
    edges: tuple[tuple[int, int], ...]


def ring(n: int) -> Lattice:
    if n < 2:
        raise ValueError("ring needs at least 2 sites")
    edges = tuple((j, (j + 1) % n) for j in range(n))
    return Lattice("ring", n, edges)


def torus(lx: int, ly: int) -> Lattice:
    if lx < 2 or ly < 2:
        raise ValueError("torus needs both dimensions >= 2")
    edges = []
    for y in range(ly):
        for x in range(lx):
            s = x + lx * y
            edges.append((s, (x + 1) % lx + lx * y))
            edges.append((s, x + lx * ((y + 1) % ly)))
    return Lattice("torus", lx * ly, tuple(edges))


def ising_1d(n: int, j: float, h_x: float, h_z: float, periodic: bool = True) -> PauliSum:
    """J sum Z_i Z_{i+1} + h_x sum X_i + h_z sum Z_i on a chain or ring."""
    if n < 2:
        raise ValueError("1D Ising needs at least 2 sites")
    terms = []
    bonds = n if periodic else n - 1
    for i in range(bonds):
        terms.append(paulis.two_site(n, i, (i + 1) % n, "Z", j))
    for i in range(n):
        if h_x != 0.0:
            terms.append(paulis.single_site(n, i, "X", h_x))
        if h_z != 0.0:
            terms.append(paulis.single_site(n, i, "Z", h_z))
    return PauliSum(n, terms)


def ising_2d_torus(lx: int, ly: int, h_x: float) -> PauliSum:
    """-sum_<ij> Z_i Z_j + h_x sum_j X_j on a periodic square lattice."""
    return hamiltonian_for(torus(lx, ly), -1.0, h_x, 0.0)


def hamiltonian_for(lattice: Lattice, j: float, h_x: float, h_z: float) -> PauliSum:
    """Ising Hamiltonian J*ZZ(edges) + h_x*X + h_z*Z on any lattice."""
    n = lattice.n_sites
    terms = []
    if j != 0.0:
        for a, b in lattice.edges:
            terms.append(paulis.two_site(n, a, b, "Z", j))
    for i in range(n):
        if h_x != 0.0:
            terms.append(paulis.single_site(n, i, "X", h_x))
        if h_z != 0.0:
            terms.append(paulis.single_site(n, i, "Z", h_z))
    return PauliSum(n, terms)


def h0_transverse(n: int, sign: int) -> PauliSum:
    """sign * (-sum_j X_j); sign=+1 has ground state |+...+>, -1 has |-...->."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    return PauliSum(n, [paulis.single_site(n, i, "X", -float(sign)) for i in range(n)])


# --------------------------------------------------------------------------
# exact thermal oracles

def _dense_spectrum(h: PauliSum):
    if h.n_qubits > DENSE_EIG_MAX_QUBITS:
        raise BackendCapError(
            f"dense diagonalization capped at {DENSE_EIG_MAX_QUBITS} qubits, "
            f"got {h.n_qubits}"
        )
    return np.linalg.eigh(h.to_dense())


def _boltzmann_weights(energies: np.ndarray, beta: float) -> np.ndarray:
    w = np.exp(-beta * (energies - energies.min()) if beta >= 0
               else -beta * (energies - energies.max()))
    return w / w.sum()


def gibbs_exact(h: PauliSum, beta: float) -> DensityMatrix:
    """exp(-beta H)/Z via dense Hermitian eigendecomposition."""
    energies, vecs = _dense_spectrum(h)
    p = _boltzmann_weights(energies, beta)
    rho = (vecs * p) @ vecs.conj().T
    return DensityMatrix(h.n_qubits, rho.astype(np.complex128))


@dataclass(frozen=True)
class ThermalReference:
    """Exact Gibbs energy/entropy densities over a grid of inverse temperatures."""

    betas: tuple[float, ...]
    energy_density: tuple[float, ...]
    entropy_density: tuple[float, ...]


def thermal_reference_curve(h: PauliSum, betas) -> ThermalReference:
    """Per-beta exact energy density and full-system entropy density."""
    energies, _ = _dense_spectrum(h)
    n = h.n_qubits
    es, ss = [], []
    for beta in betas:
        p = _boltzmann_weights(energies, beta)
        es.append(float(np.dot(p, energies)) / n)
        pz = p[p > 1e-300]
        ss.append(float(-np.sum(pz * np.log(pz))) / n)
    return ThermalReference(tuple(float(b) for b in betas), tuple(es), tuple(ss))


def product_gibbs_x(n: int, beta0: float) -> DensityMatrix:
    """Product thermal state of -sum X: each site I/2 + tanh(beta0)/2 * X.

    Negative ``beta0`` gives the thermal state of +sum X (X expectation
    -tanh|beta0|), which is what hardware-style runs with the opposite
    initial-Hamiltonian sign use.
    """
    t = math.tanh(beta0)
    site = np.array([[0.5, 0.5 * t], [0.5 * t, 0.5]], dtype=np.complex128)
    rho = np.array([[1.0]], dtype=np.complex128)
    for _ in range(n):
        rho = np.kron(site, rho)
    return DensityMatrix(n, rho)


def sample_product_gibbs_x(n: int, beta0: float, rng: np.random.Generator) -> StateVector:
    """One sample of the product Gibbs mixture: each qubit independently
    |+> with probability (1+tanh beta0)/2, else |->."""
    if n > SV_MAX_QUBITS:
        raise BackendCapError(f"statevector backend capped at {SV_MAX_QUBITS} qubits")
    p_plus = 0.5 * (1.0 + math.tanh(beta0))
    signs = np.where(rng.random(n) < p_plus, 1, -1)
    return new_basis_product_state(n, signs.tolist())


def free_energy(state: DensityMatrix, h: PauliSum, beta: float) -> float:
    """tr(rho H) - S[rho]/beta with the full-system von Neumann entropy."""
    if beta == 0.0:
        raise ValueError("free energy is undefined at beta = 0")
    if not isinstance(state, DensityMatrix):
        raise TypeError("free energy needs the density-matrix backend")
    return expectation_pauli_sum(state, h) - von_neumann_entropy(state) / beta


def _linear_operator(h: PauliSum) -> scipy.sparse.linalg.LinearOperator:
    n = h.n_qubits
    dim = 1 << n
    idx = _indices(n)
    compiled = []
    for coeff, string in h.terms:
        xmask, zmask, ny = term_masks(string)
        signs = _parity_signs(n, zmask).astype(np.float64)
        compiled.append((coeff * (1j**ny), xmask, signs))

    def matvec(v):
        v = np.asarray(v).ravel()
        out = np.zeros(dim, dtype=np.complex128)
        for weight, xmask, signs in compiled:
            out += weight * (signs * v)[idx ^ xmask]
        return out

    return scipy.sparse.linalg.LinearOperator((dim, dim), matvec=matvec, dtype=np.complex128)


def lowest_eigenvalues(h: PauliSum, k: int) -> np.ndarray:
    """The k smallest eigenvalues, ascending.

    Dense diagonalization up to 12 qubits; a matrix-free Lanczos fallback
    (documented, not exact-arithmetic) up to 20.
    """
    dim = 1 << h.n_qubits
    if k < 1 or k > dim:
        raise ValueError(f"k must be in 1..{dim}")
    if h.n_qubits <= DENSE_EIG_MAX_QUBITS:
        energies = np.linalg.eigvalsh(h.to_dense())
        return energies[:k]
    if h.n_qubits > ITERATIVE_EIG_MAX_QUBITS:
        raise BackendCapError(
            f"eigenvalue extraction capped at {ITERATIVE_EIG_MAX_QUBITS} qubits"
        )
    vals = scipy.sparse.linalg.eigsh(
        _linear_operator(h), k=k, which="SA", return_eigenvectors=False,
        maxiter=5000, tol=1e-9,
    )
    return np.sort(vals)
