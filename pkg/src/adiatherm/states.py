"""State backends: dense density matrices and statevectors.

Conventions fixed here and relied on everywhere else:

* qubit ``j`` is bit ``j`` (least significant first) of a basis-state index;
* the half-system subsystem is qubits ``0 .. N/2-1``;
* rotations are ``exp(+i*theta*P)``; negative angles give inverses;
* the depolarizing channel is
  ``rho -> (1-p) rho + (p/3)(X rho X + Y rho Y + Z rho Z)``,
  i.e. ``p`` is the total probability of applying an error. Under the
  alternative ``rho -> (1-p) rho + p*I/2`` convention, rates differ by 4/3.
* entropies are in nats (natural logarithm).

Gate application is in-place with bit-masked index arithmetic; layers are
never materialized as matrices.
"""

from __future__ import annotations

import os
from functools import lru_cache

import numpy as np

from .circuits import Circuit, NoiseLayer, XRotationAll, ZRotationAll, ZZRotation
from .errors import BackendCapError
from .paulis import PauliSum, term_masks, _parity_signs

DM_MAX_QUBITS = 12
SV_MAX_QUBITS = 24

EIG_CLAMP = 1e-12  # eigenvalues below this contribute nothing to entropy

try:  # pragma: no cover - exercised implicitly by every dm test
    if os.environ.get("ADIATHERM_NO_NUMBA"):
        raise ImportError("numba disabled by ADIATHERM_NO_NUMBA")
    from . import _kernels

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _kernels = None
    _HAVE_NUMBA = False


class StateVector:
    """Pure state of ``n_qubits`` qubits as 2^n complex amplitudes."""

    __slots__ = ("n_qubits", "amplitudes")

    def __init__(self, n_qubits: int, amplitudes: np.ndarray):
        if n_qubits < 1 or n_qubits > SV_MAX_QUBITS:
            raise BackendCapError(
                f"statevector backend supports 1..{SV_MAX_QUBITS} qubits, got {n_qubits}"
            )
        amplitudes = np.asarray(amplitudes, dtype=np.complex128)
        if amplitudes.shape != (1 << n_qubits,):
            raise ValueError(
                f"amplitude vector must have length {1 << n_qubits}, got {amplitudes.shape}"
            )
        self.n_qubits = n_qubits
        self.amplitudes = amplitudes

    def copy(self) -> "StateVector":
        return StateVector(self.n_qubits, self.amplitudes.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


class DensityMatrix:
    """Mixed state of ``n_qubits`` qubits as a dense 2^n x 2^n matrix."""

    __slots__ = ("n_qubits", "data")

    def __init__(self, n_qubits: int, data: np.ndarray, *, cap: int = DM_MAX_QUBITS):
        if n_qubits < 1 or n_qubits > cap:
            raise BackendCapError(
                f"density-matrix backend supports 1..{cap} qubits, got {n_qubits}"
            )
        data = np.asarray(data, dtype=np.complex128)
        dim = 1 << n_qubits
        if data.shape != (dim, dim):
            raise ValueError(f"matrix must be {dim}x{dim}, got {data.shape}")
        self.n_qubits = n_qubits
        self.data = data

    @classmethod
    def from_statevector(cls, sv: StateVector) -> "DensityMatrix":
        return cls(sv.n_qubits, np.outer(sv.amplitudes, sv.amplitudes.conj()))

    def copy(self) -> "DensityMatrix":
        return DensityMatrix(self.n_qubits, self.data.copy())

    def trace(self) -> complex:
        return complex(np.trace(self.data))

    def purity(self) -> float:
        return float(np.sum(np.abs(self.data) ** 2))

    def check(self, atol: float = 1e-10, psd_tol: float = 1e-9) -> None:
        """Raise if trace, Hermiticity or positivity are violated."""
        if abs(self.trace() - 1.0) > atol:
            raise ValueError(f"trace {self.trace()} deviates from 1")
        herm = np.max(np.abs(self.data - self.data.conj().T))
        if herm > atol:
            raise ValueError(f"Hermiticity violated by {herm}")
        w = np.linalg.eigvalsh(self.data)
        if w.min() < -psd_tol:
            raise ValueError(f"negative eigenvalue {w.min()}")


State = StateVector | DensityMatrix


def new_basis_product_state(n_qubits: int, x_signs) -> StateVector:
    """Tensor product of X eigenstates |+> / |-> with the given signs."""
    x_signs = list(x_signs)
    if len(x_signs) != n_qubits:
        raise ValueError("need one sign per qubit")
    if any(s not in (1, -1) for s in x_signs):
        raise ValueError("signs must be +1 or -1")
    neg_mask = 0
    for j, s in enumerate(x_signs):
        if s == -1:
            neg_mask |= 1 << j
    idx = _indices(n_qubits)
    par = (np.bitwise_count(idx & neg_mask) & 1).astype(np.int8)
    amp = (1 - 2 * par).astype(np.complex128)
    amp *= 2.0 ** (-n_qubits / 2.0)
    return StateVector(n_qubits, amp)


# --------------------------------------------------------------------------
# cached index machinery

@lru_cache(maxsize=32)
def _indices(n_qubits: int) -> np.ndarray:
    idx = np.arange(1 << n_qubits, dtype=np.int64)
    idx.setflags(write=False)
    return idx


@lru_cache(maxsize=32)
def _popcounts(n_qubits: int) -> np.ndarray:
    pc = np.bitwise_count(_indices(n_qubits)).astype(np.int16)
    pc.setflags(write=False)
    return pc


@lru_cache(maxsize=64)
def _zz_weights(n_qubits: int, edges: tuple[tuple[int, int], ...]) -> np.ndarray:
    """Sum over edges of the Z_j Z_k eigenvalue (+/-1) per basis index."""
    idx = _indices(n_qubits)
    w = np.full(1 << n_qubits, len(edges), dtype=np.int16)
    for a, b in edges:
        w -= 2 * (((idx >> a) ^ (idx >> b)) & 1).astype(np.int16)
    w.setflags(write=False)
    return w


def _phase_from_weights(weights: np.ndarray, theta: float) -> np.ndarray:
    """exp(i*theta*w) via a lookup over the distinct integer weights."""
    lo = int(weights.min())
    hi = int(weights.max())
    table = np.exp(1j * theta * np.arange(lo, hi + 1, dtype=np.float64))
    return table[weights.astype(np.int64) - lo]


# --------------------------------------------------------------------------
# statevector kernels (numpy views)

def _sv_xrot(amp: np.ndarray, n: int, qubit: int, theta: float) -> None:
    c = np.cos(theta)
    js = 1j * np.sin(theta)
    v = amp.reshape(1 << (n - 1 - qubit), 2, 1 << qubit)
    a0 = v[:, 0, :].copy()
    v[:, 0, :] *= c
    v[:, 0, :] += js * v[:, 1, :]
    v[:, 1, :] *= c
    v[:, 1, :] += js * a0


def _sv_hadamard_all(amp: np.ndarray, n: int) -> None:
    inv_sqrt2 = 2.0**-0.5
    for qubit in range(n):
        v = amp.reshape(1 << (n - 1 - qubit), 2, 1 << qubit)
        a0 = v[:, 0, :].copy()
        v[:, 0, :] += v[:, 1, :]
        v[:, 1, :] *= -1.0
        v[:, 1, :] += a0
        v *= inv_sqrt2


def _sv_pauli(amp: np.ndarray, n: int, qubit: int, which: str) -> None:
    v = amp.reshape(1 << (n - 1 - qubit), 2, 1 << qubit)
    if which == "X":
        a0 = v[:, 0, :].copy()
        v[:, 0, :] = v[:, 1, :]
        v[:, 1, :] = a0
    elif which == "Y":
        a0 = v[:, 0, :].copy()
        v[:, 0, :] = -1j * v[:, 1, :]
        v[:, 1, :] = 1j * a0
    elif which == "Z":
        v[:, 1, :] *= -1.0
    else:
        raise ValueError(f"unknown Pauli {which!r}")


# --------------------------------------------------------------------------
# density-matrix kernels (numba with numpy fallback)

def _dm_xrot(rho: np.ndarray, n: int, qubit: int, theta: float) -> None:
    c = np.cos(theta)
    s = np.sin(theta)
    if _HAVE_NUMBA:
        _kernels.dm_xrot(rho, 1 << qubit, c, s)
        return
    dim = 1 << n
    js = 1j * s
    h = 1 << (n - 1 - qubit)
    l = 1 << qubit
    v = rho.reshape(h, 2, l * dim)
    a0 = v[:, 0, :].copy()
    v[:, 0, :] *= c
    v[:, 0, :] += js * v[:, 1, :]
    v[:, 1, :] *= c
    v[:, 1, :] += js * a0
    w = rho.reshape(dim, h, 2, l)
    b0 = w[:, :, 0, :].copy()
    w[:, :, 0, :] *= c
    w[:, :, 0, :] += -js * w[:, :, 1, :]
    w[:, :, 1, :] *= c
    w[:, :, 1, :] += -js * b0


def _dm_diag_phase(rho: np.ndarray, phase: np.ndarray) -> None:
    if _HAVE_NUMBA:
        _kernels.dm_diag_phase(rho, phase)
        return
    rho *= phase[:, None]
    rho *= phase.conj()[None, :]


def _dm_depolarize(rho: np.ndarray, n: int, qubit: int, p: float) -> None:
    if _HAVE_NUMBA:
        _kernels.dm_depolarize(rho, 1 << qubit, p)
        return
    dim = 1 << n
    h = 1 << (n - 1 - qubit)
    l = 1 << qubit
    v = rho.reshape(h, 2, l, dim // (2 * l), 2, l)
    off = 1.0 - 4.0 * p / 3.0
    d_keep = 1.0 - 2.0 * p / 3.0
    d_mix = 2.0 * p / 3.0
    b00 = v[:, 0, :, :, 0, :].copy()
    b11 = v[:, 1, :, :, 1, :].copy()
    v[:, 0, :, :, 0, :] = d_keep * b00 + d_mix * b11
    v[:, 1, :, :, 1, :] = d_mix * b00 + d_keep * b11
    v[:, 0, :, :, 1, :] *= off
    v[:, 1, :, :, 0, :] *= off


# --------------------------------------------------------------------------
# layer application

def apply_gate_layer(state: State, layer) -> State:
    """Apply one rotation layer in place (G|psi> or G rho G^dagger)."""
    n = state.n_qubits
    if isinstance(layer, XRotationAll):
        if isinstance(state, StateVector):
            for q in range(n):
                _sv_xrot(state.amplitudes, n, q, layer.theta)
        else:
            for q in range(n):
                _dm_xrot(state.data, n, q, layer.theta)
        return state
    if isinstance(layer, ZRotationAll):
        weights = (n - 2 * _popcounts(n)).astype(np.int16)
        phase = _phase_from_weights(weights, layer.theta)
    elif isinstance(layer, ZZRotation):
        for a, b in layer.edges:
            if not (0 <= a < n and 0 <= b < n):
                raise ValueError(f"edge ({a},{b}) outside {n} qubits")
        phase = _phase_from_weights(_zz_weights(n, layer.edges), layer.theta)
    else:
        raise TypeError(f"not a gate layer: {layer!r}")
    if isinstance(state, StateVector):
        state.amplitudes *= phase
    else:
        _dm_diag_phase(state.data, phase)
    return state


def apply_depolarizing(dm: DensityMatrix, qubit: int, p: float) -> DensityMatrix:
    """Exact single-qubit depolarizing channel on a density matrix."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"depolarizing amplitude {p} outside [0, 1]")
    if not 0 <= qubit < dm.n_qubits:
        raise ValueError(f"qubit {qubit} outside {dm.n_qubits}")
    if p > 0.0:
        _dm_depolarize(dm.data, dm.n_qubits, qubit, p)
    return dm


def sample_depolarizing_trajectory(
    sv: StateVector, qubit: int, p: float, rng: np.random.Generator
) -> StateVector:
    """Trajectory unraveling of the depolarizing channel on a pure state.

    With probability 1-p the state is untouched; otherwise X, Y or Z is
    applied with equal probability. Averaging over trajectories reproduces
    ``apply_depolarizing`` in expectation.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"depolarizing amplitude {p} outside [0, 1]")
    if not 0 <= qubit < sv.n_qubits:
        raise ValueError(f"qubit {qubit} outside {sv.n_qubits}")
    if p == 0.0:
        return sv
    if rng.random() < p:
        which = "XYZ"[rng.integers(3)]
        _sv_pauli(sv.amplitudes, sv.n_qubits, qubit, which)
    return sv


def apply_noise_layer(state: State, layer: NoiseLayer, rng=None) -> State:
    qubits = layer.qubits if layer.qubits is not None else range(state.n_qubits)
    if isinstance(state, DensityMatrix):
        for q in qubits:
            apply_depolarizing(state, q, layer.p)
    else:
        if rng is None and layer.p > 0.0:
            raise ValueError("trajectory noise on a statevector needs an rng")
        for q in qubits:
            sample_depolarizing_trajectory(state, q, layer.p, rng)
    return state


def apply_step(state: State, step, rng=None) -> State:
    for layer in step:
        if isinstance(layer, NoiseLayer):
            apply_noise_layer(state, layer, rng)
        else:
            apply_gate_layer(state, layer)
    return state


def apply_circuit(state: State, circuit: Circuit, rng=None) -> State:
    if circuit.n_qubits != state.n_qubits:
        raise ValueError("circuit and state qubit counts differ")
    for step in circuit.steps:
        apply_step(state, step, rng)
    return state


def iter_circuit_steps(state: State, circuit: Circuit, rng=None):
    """Apply the circuit step by step, yielding the state after each step."""
    if circuit.n_qubits != state.n_qubits:
        raise ValueError("circuit and state qubit counts differ")
    for step in circuit.steps:
        apply_step(state, step, rng)
        yield state


# --------------------------------------------------------------------------
# reductions and observables

def partial_trace(dm: DensityMatrix, keep) -> DensityMatrix:
    """Reduced density matrix on the kept qubits (new qubit i = old keep[i])."""
    keep = sorted(set(int(q) for q in keep))
    n = dm.n_qubits
    if not keep:
        raise ValueError("keep set must be nonempty")
    if keep[0] < 0 or keep[-1] >= n:
        raise ValueError(f"keep set {keep} outside {n} qubits")
    if len(keep) == n:
        return dm.copy()
    keepset = set(keep)
    t = dm.data.reshape((2,) * (2 * n))
    row_lab: dict[int, int] = {}
    col_lab: dict[int, int] = {}
    lab = 0
    for j in keep:
        row_lab[j] = lab
        lab += 1
    for j in keep:
        col_lab[j] = lab
        lab += 1
    for j in range(n):
        if j not in keepset:
            row_lab[j] = col_lab[j] = lab
            lab += 1
    axes = [0] * (2 * n)
    for j in range(n):
        axes[n - 1 - j] = row_lab[j]
        axes[2 * n - 1 - j] = col_lab[j]
    out_axes = [row_lab[q] for q in reversed(keep)] + [col_lab[q] for q in reversed(keep)]
    red = np.einsum(t, axes, out_axes)
    k = len(keep)
    return DensityMatrix(k, np.ascontiguousarray(red.reshape(1 << k, 1 << k)))


def von_neumann_entropy(dm: DensityMatrix) -> float:
    """-sum(w log w) over eigenvalues, in nats; tiny eigenvalues contribute 0."""
    w = np.linalg.eigvalsh(dm.data)
    w = w[w > EIG_CLAMP]
    return float(-np.sum(w * np.log(w)))


def _entropy_from_probs(p: np.ndarray) -> float:
    p = p[p > EIG_CLAMP]
    return float(-np.sum(p * np.log(p)))


def entropy_density_half(state: State) -> float:
    """Entropy of the reduced state on qubits 0..N/2-1, per site (nats)."""
    n = state.n_qubits
    if n % 2 != 0:
        raise ValueError("half-system entropy needs an even qubit count")
    half = n // 2
    if isinstance(state, DensityMatrix):
        red = partial_trace(state, range(half))
        return von_neumann_entropy(red) / half
    m = state.amplitudes.reshape(1 << half, 1 << half)
    s = np.linalg.svd(m, compute_uv=False)
    return _entropy_from_probs(s**2) / half


def expectation_pauli_sum(state: State, op: PauliSum) -> float:
    """<P> summed over terms; the (roundoff) imaginary residue is discarded."""
    n = state.n_qubits
    if op.n_qubits != n:
        raise ValueError("operator and state qubit counts differ")
    idx = _indices(n)
    total = 0.0 + 0.0j
    if isinstance(state, StateVector):
        amp = state.amplitudes
        conj = amp.conj()
        for coeff, string in op.terms:
            xmask, zmask, ny = term_masks(string)
            signs = _parity_signs(n, zmask).astype(np.float64)
            if xmask:
                gathered = amp[idx ^ xmask]
            else:
                gathered = amp
            total += coeff * (1j**ny) * np.dot(conj * gathered, signs)
    else:
        rho = state.data
        for coeff, string in op.terms:
            xmask, zmask, ny = term_masks(string)
            signs = _parity_signs(n, zmask).astype(np.float64)
            diag = rho[idx, idx ^ xmask]
            total += coeff * (1j**ny) * np.dot(diag, signs)
    return float(total.real)


@lru_cache(maxsize=32)
def _x_mean_op(n: int) -> PauliSum:
    terms = []
    for j in range(n):
        chars = ["I"] * n
        chars[j] = "X"
        terms.append((1.0 / n, "".join(chars)))
    return PauliSum(n, terms)


def mean_x(state: State) -> float:
    """Site-averaged X expectation value (1/N) sum_j <X_j>."""
    return expectation_pauli_sum(state, _x_mean_op(state.n_qubits))


def fidelity(a: StateVector, b: StateVector) -> float:
    return float(np.abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)


# --------------------------------------------------------------------------
# measurement sampling

def sample_measurements(
    sv: StateVector, basis: str, shots: int, rng: np.random.Generator
) -> np.ndarray:
    """Sample basis measurements, returned as a (shots, n_qubits) 0/1 array.

    Basis "z" samples computational outcomes; "x" rotates with Hadamards
    first, so bit 0 means the +1 eigenvalue of X and bit 1 means -1.
    """
    if shots < 1:
        raise ValueError("need at least one shot")
    basis = basis.lower()
    if basis == "z":
        amp = sv.amplitudes
    elif basis == "x":
        amp = sv.amplitudes.copy()
        _sv_hadamard_all(amp, sv.n_qubits)
    else:
        raise ValueError(f"unknown basis {basis!r}")
    probs = np.abs(amp) ** 2
    probs /= probs.sum()
    outcomes = rng.choice(len(probs), size=shots, p=probs)
    bits = (outcomes[:, None] >> np.arange(sv.n_qubits)) & 1
    return bits.astype(np.uint8)
