"""Experiment orchestration for the thermal-preparation protocol.

The three-step protocol (forward energy, mirror entropy, finite-difference
temperature), entropy time traces, the adiabaticity diagnostic, the
20-qubit observable table, shot-noise emulation, and the perturbed-evolution
entropy-scaling experiment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .circuits import Circuit
from .errors import BackendCapError, NumericalError
from .models import (
    Lattice,
    gibbs_exact,
    hamiltonian_for,
    ising_2d_torus,
    product_gibbs_x,
    sample_product_gibbs_x,
)
from .paulis import PauliSum
from .protocol import (
    CurveRecord,
    HardwareObservables,
    TimeSeries,
    entropy_from_x,
    estimate_beta_curve,
    hardware_summary,
    predicted_noisy_entropy,
)
from .schedules import (
    NOISE_PER_TROTTER_STEP,
    LinearSchedule,
    PowerLawSchedule,
    ProbeSpec,
    adiabaticity_probe_circuit,
    attach_noise,
    fixed_hamiltonian_circuit,
    hardware_circuit,
    linear_trotter_circuit,
    mirror_circuit,
)
from .states import (
    DensityMatrix,
    StateVector,
    apply_circuit,
    entropy_density_half,
    expectation_pauli_sum,
    iter_circuit_steps,
    mean_x,
    new_basis_product_state,
    sample_measurements,
)

BACKEND_DM = "dm"
BACKEND_TRAJ = "traj"


def _traj_rng(seed: int, *stream) -> np.random.Generator:
    """Independent, reproducible stream for one trajectory."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, stream)]))


def _check_finite(value: float, what: str, beta0: float) -> float:
    if not math.isfinite(value):
        raise NumericalError(f"{what} became non-finite at beta0={beta0}")
    return value


# --------------------------------------------------------------------------
# three-step protocol

@dataclass(frozen=True)
class ThermalPrepResult:
    records: list[CurveRecord]
    entropy_traces: dict[float, TimeSeries]


def run_thermal_prep(
    lattice: Lattice,
    schedule: LinearSchedule,
    beta0_grid,
    *,
    p: float = 0.0,
    placement: str = NOISE_PER_TROTTER_STEP,
    backend: str = BACKEND_DM,
    n_traj: int = 0,
    seed: int = 0,
    collect_timeseries: bool = False,
    single_beta0_shortcut: bool = False,
) -> ThermalPrepResult:
    """The three-step protocol over a grid of initial inverse temperatures.

    Step 1 evolves the product thermal state through the (noisy) adiabatic
    circuit and records the final energy density. Step 2 evolves a fresh
    copy through the halved mirror circuit and converts the measured mean X
    into an entropy density. Step 3 differentiates the collected columns to
    estimate the final inverse temperature per grid point.

    With ``single_beta0_shortcut`` the mirror runs only at the largest
    nonzero beta0; the entropy column is then extended assuming the mirror X
    decays as r*tanh(beta0) with an r fitted from that single run.
    """
    beta0_grid = [float(b) for b in beta0_grid]
    if len(beta0_grid) < 3:
        raise ValueError("need at least 3 beta0 grid points")
    if any(b2 <= b1 for b1, b2 in zip(beta0_grid, beta0_grid[1:])):
        raise ValueError("beta0 grid must be strictly increasing")
    if backend not in (BACKEND_DM, BACKEND_TRAJ):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == BACKEND_TRAJ and n_traj < 1:
        raise ValueError("trajectory backend needs n_traj >= 1")

    n = lattice.n_sites
    h_f = hamiltonian_for(lattice, schedule.j, schedule.h_x, schedule.h_z)
    base = linear_trotter_circuit(schedule, lattice)
    forward = attach_noise(base, p, placement)
    mirror = attach_noise(mirror_circuit(base, halve=True), p, placement)

    shortcut_index = None
    if single_beta0_shortcut:
        nonzero = [i for i, b in enumerate(beta0_grid) if b != 0.0]
        if not nonzero:
            raise ValueError("shortcut needs a nonzero beta0 in the grid")
        shortcut_index = nonzero[-1]

    energies: list[float] = []
    mirror_x: dict[int, float] = {}
    traces: dict[float, TimeSeries] = {}

    for i, beta0 in enumerate(beta0_grid):
        signed_beta0 = schedule.h0_sign * beta0
        if backend == BACKEND_DM:
            state = product_gibbs_x(n, signed_beta0)
            if collect_timeseries:
                times = [0.0]
                values = [entropy_density_half(state)]
                for step_idx, _ in enumerate(iter_circuit_steps(state, forward)):
                    times.append((step_idx + 1) * schedule.dt)
                    values.append(entropy_density_half(state))
                traces[beta0] = TimeSeries(tuple(times), tuple(values), "entropy")
            else:
                apply_circuit(state, forward)
            energy = expectation_pauli_sum(state, h_f) / n
            if shortcut_index is None or i == shortcut_index:
                mstate = product_gibbs_x(n, signed_beta0)
                apply_circuit(mstate, mirror)
                mirror_x[i] = mean_x(mstate)
        else:
            e_acc = 0.0
            for t in range(n_traj):
                sv = sample_product_gibbs_x(n, signed_beta0, _traj_rng(seed, i, t, 0))
                apply_circuit(sv, forward, _traj_rng(seed, i, t, 1))
                e_acc += expectation_pauli_sum(sv, h_f) / n
            energy = e_acc / n_traj
            if shortcut_index is None or i == shortcut_index:
                m_acc = 0.0
                for t in range(n_traj):
                    sv = sample_product_gibbs_x(n, signed_beta0, _traj_rng(seed, i, t, 2))
                    apply_circuit(sv, mirror, _traj_rng(seed, i, t, 3))
                    m_acc += mean_x(sv)
                mirror_x[i] = m_acc / n_traj
        energies.append(_check_finite(energy, "energy", beta0))

    if shortcut_index is not None:
        b_star = beta0_grid[shortcut_index]
        m_star = mirror_x[shortcut_index]
        r = m_star / (schedule.h0_sign * math.tanh(b_star))
        r = min(max(r, 1e-12), 1.0)
        entropies = [predicted_noisy_entropy(b, r) if b != 0.0 else math.log(2.0)
                     for b in beta0_grid]
    else:
        entropies = [entropy_from_x(mirror_x[i]) for i in range(len(beta0_grid))]

    records = [
        CurveRecord(
            beta0=beta0_grid[i],
            energy=energies[i],
            entropy=_check_finite(entropies[i], "entropy", beta0_grid[i]),
            p=p,
            m_steps=schedule.m_steps,
            dt=schedule.dt,
            n_qubits=n,
        )
        for i in range(len(beta0_grid))
    ]
    return ThermalPrepResult(estimate_beta_curve(records), traces)


# --------------------------------------------------------------------------
# entropy time traces

SETTING_QUENCH = "quench"
SETTING_ADIABATIC = "adiabatic"
SETTING_MIRROR = "mirror"


@dataclass(frozen=True)
class EntropyTrace:
    """Exact and X-estimated entropy densities after every Trotter step."""

    setting: str
    n_qubits: int
    p: float
    exact: TimeSeries
    x_estimate: TimeSeries


def run_entropy_timeseries(
    lattice: Lattice,
    schedule: LinearSchedule,
    beta0: float,
    *,
    setting: str = SETTING_ADIABATIC,
    p: float = 0.0,
    placement: str = NOISE_PER_TROTTER_STEP,
) -> EntropyTrace:
    """Exact half-system entropy density along a circuit, plus the X-based
    estimate at every step (exact density-matrix backend only).

    ``quench`` evolves under the fixed final Hamiltonian, ``adiabatic``
    follows the interpolation schedule, ``mirror`` runs the halved mirror of
    the adiabatic circuit.
    """
    if setting == SETTING_QUENCH:
        base = fixed_hamiltonian_circuit(
            lattice, schedule.j, schedule.h_x, schedule.h_z,
            schedule.m_steps, schedule.dt,
        )
    elif setting == SETTING_ADIABATIC:
        base = linear_trotter_circuit(schedule, lattice)
    elif setting == SETTING_MIRROR:
        base = mirror_circuit(linear_trotter_circuit(schedule, lattice), halve=True)
    else:
        raise ValueError(f"unknown setting {setting!r}")
    noisy = attach_noise(base, p, placement)
    state = product_gibbs_x(lattice.n_sites, schedule.h0_sign * beta0)
    times = [0.0]
    exact = [entropy_density_half(state)]
    est = [entropy_from_x(mean_x(state))]
    for step_idx, _ in enumerate(iter_circuit_steps(state, noisy)):
        times.append((step_idx + 1) * schedule.dt)
        exact.append(entropy_density_half(state))
        est.append(entropy_from_x(mean_x(state)))
    return EntropyTrace(
        setting=setting,
        n_qubits=lattice.n_sites,
        p=p,
        exact=TimeSeries(tuple(times), tuple(exact), "entropy"),
        x_estimate=TimeSeries(tuple(times), tuple(est), "entropy"),
    )


# --------------------------------------------------------------------------
# adiabaticity diagnostic

@dataclass(frozen=True)
class DiagnosticRow:
    m_steps: int
    k: int
    s_estimate: float
    s_exact: float
    adiabatic: bool


def run_adiabaticity_diagnostic(
    lattice: Lattice,
    schedule_for_m,
    m_list,
    k_list,
    beta0: float,
    *,
    p: float = 0.0,
    placement: str = NOISE_PER_TROTTER_STEP,
    dt_probe: float | None = None,
    threshold: float = 0.01,
) -> list[DiagnosticRow]:
    """Full-mirror probe: U_M (k extra final-Hamiltonian steps) U_M^dagger.

    ``schedule_for_m`` maps a step count M to the LinearSchedule used for
    that circuit (fixed dt: longer circuits are more adiabatic). Per M, the
    verdict is adiabatic iff every k>0 X-based estimate agrees with the k=0
    estimate within ``threshold``.
    """
    k_list = sorted(set(int(k) for k in k_list))
    if any(k < 0 for k in k_list):
        raise ValueError("probe step counts must be >= 0")
    if 0 not in k_list:
        k_list = [0] + k_list
    rows: list[DiagnosticRow] = []
    for m in m_list:
        schedule: LinearSchedule = schedule_for_m(m)
        base = linear_trotter_circuit(schedule, lattice)
        estimates = {}
        m_rows = []
        for k in k_list:
            probe = ProbeSpec(k, dt_probe if dt_probe is not None else schedule.dt)
            circ = adiabaticity_probe_circuit(
                base, probe, lattice, schedule.j, schedule.h_x, schedule.h_z
            )
            noisy = attach_noise(circ, p, placement)
            state = product_gibbs_x(lattice.n_sites, schedule.h0_sign * beta0)
            apply_circuit(state, noisy)
            s_est = entropy_from_x(mean_x(state))
            s_exact = entropy_density_half(state)
            estimates[k] = s_est
            m_rows.append((k, s_est, s_exact))
        verdict = all(
            abs(estimates[k] - estimates[0]) <= threshold for k in k_list if k > 0
        )
        for k, s_est, s_exact in m_rows:
            rows.append(DiagnosticRow(m, k, s_est, s_exact, verdict))
    return rows


# --------------------------------------------------------------------------
# 20-qubit observable table

@dataclass(frozen=True)
class HardwareTableResult:
    observables: HardwareObservables
    derived: dict
    two_qubit_gates_forward: int
    two_qubit_gates_mirror: int


def _split_energy_observables(h: PauliSum):
    n = h.n_qubits
    zz = PauliSum(n, [(c, s) for c, s in h.terms if s.count("Z") == 2])
    x = PauliSum(n, [(c, s) for c, s in h.terms if "X" in s])
    return zz, x


def _bit_values(bits: np.ndarray) -> np.ndarray:
    """Map measurement bits 0/1 to eigenvalues +1/-1."""
    return 1.0 - 2.0 * bits.astype(np.float64)


def _shot_stats(samples: np.ndarray) -> tuple[float, float]:
    mean = float(samples.mean())
    if len(samples) < 2:
        return mean, 0.0
    return mean, float(samples.std(ddof=1) / math.sqrt(len(samples)))


def run_hardware_table(
    lx: int,
    ly: int,
    h_x: float,
    spec: PowerLawSchedule,
    *,
    flip_site: int = 0,
    shots: bool = False,
    z_shots: int = 1500,
    x_shots: int = 1500,
    m_shots: int = 1000,
    seed: int = 0,
) -> HardwareTableResult:
    """Observable table of the power-law adiabatic preparation at 5x4 scale.

    Runs the forward circuit on |-...-> and on the one-site-flipped state,
    and the halved mirror on both; derives the entropy density, inverse
    temperature and temperature. With ``shots`` the expectation values come
    from sampled Z- and X-basis measurements with binomial standard errors;
    otherwise they are exact.
    """
    from .models import torus  # local import keeps module load light

    lattice = torus(lx, ly)
    n = lattice.n_sites
    h = ising_2d_torus(lx, ly, h_x)
    zz_op, x_op = _split_energy_observables(h)
    forward = hardware_circuit(spec, lattice)
    mirror = mirror_circuit(forward, halve=True)

    signs_minus = [-1] * n
    signs_flip = [-1] * n
    signs_flip[flip_site] = 1

    def forward_observables(signs, rng_tag):
        sv = new_basis_product_state(n, signs)
        apply_circuit(sv, forward)
        if not shots:
            zz = -expectation_pauli_sum(sv, zz_op) / n
            x = expectation_pauli_sum(sv, x_op) / (n * h_x)
            e = expectation_pauli_sum(sv, h) / n
            return zz, 0.0, x, 0.0, e, 0.0
        rng_z = _traj_rng(seed, rng_tag, 0)
        rng_x = _traj_rng(seed, rng_tag, 1)
        zbits = sample_measurements(sv, "z", z_shots, rng_z)
        zvals = _bit_values(zbits)
        per_shot_zz = np.zeros(z_shots)
        for a, b in lattice.edges:
            per_shot_zz += zvals[:, a] * zvals[:, b]
        zz_mean, zz_se = _shot_stats(per_shot_zz / n)
        xbits = sample_measurements(sv, "x", x_shots, rng_x)
        x_mean, x_se = _shot_stats(_bit_values(xbits).sum(axis=1) / n)
        e_mean = -zz_mean + h_x * x_mean
        e_se = math.sqrt(zz_se**2 + (h_x * x_se) ** 2)
        return zz_mean, zz_se, x_mean, x_se, e_mean, e_se

    def mirror_mean_x(signs, rng_tag):
        sv = new_basis_product_state(n, signs)
        apply_circuit(sv, mirror)
        if not shots:
            return mean_x(sv), 0.0
        rng = _traj_rng(seed, rng_tag, 2)
        bits = sample_measurements(sv, "x", m_shots, rng)
        return _shot_stats(_bit_values(bits).sum(axis=1) / n)

    zz, se_zz, x, se_x, e, se_e = forward_observables(signs_minus, 0)
    zzp, se_zzp, xp, se_xp, ep, se_ep = forward_observables(signs_flip, 1)
    m, se_m = mirror_mean_x(signs_minus, 2)
    mp, se_mp = mirror_mean_x(signs_flip, 3)

    obs = HardwareObservables(
        zz=zz, x=x, e=e,
        zz_prime=zzp, x_prime=xp, e_prime=ep,
        m=m, m_prime=mp,
        se_zz=se_zz, se_x=se_x, se_e=se_e,
        se_zz_prime=se_zzp, se_x_prime=se_xp, se_e_prime=se_ep,
        se_m=se_m, se_m_prime=se_mp,
    )
    return HardwareTableResult(
        observables=obs,
        derived=hardware_summary(obs),
        two_qubit_gates_forward=forward.two_qubit_gate_count,
        two_qubit_gates_mirror=mirror.two_qubit_gate_count,
    )


# --------------------------------------------------------------------------
# perturbed-evolution entropy scaling

PERTURB_MAX_QUBITS = 8


@dataclass(frozen=True)
class ScalingRow:
    lam: float
    t: float
    delta_s_full: float
    delta_s_half: float
    second_order: float


@dataclass(frozen=True)
class PerturbationScalingResult:
    rows: list[ScalingRow]
    slope: float
    intercept: float
    lambda_metrics: dict[float, float]


def second_order_component(delta_full: float, delta_half: float) -> float:
    """Isolate the quadratic-in-perturbation part from runs at eps and eps/2.

    For d(eps) = a1 eps + a2 eps^2 + a3 eps^3, the combination
    2*(d(eps) - 2*d(eps/2)) equals a2 eps^2 + (3/2) a3 eps^3: the linear
    part cancels exactly and the cubic residue is small for small eps.
    """
    return 2.0 * (delta_full - 2.0 * delta_half)


def run_perturbation_scaling(
    h: PauliSum,
    delta_h: PauliSum,
    beta: float,
    t_grid,
    lambda_grid=(1.0, 2.0, 4.0),
) -> PerturbationScalingResult:
    """Entropy-density change of a Gibbs state under a perturbed evolution.

    Evolves exp(i t (H + dH/lam)) on the Gibbs state of H (dense eigensolve
    of the perturbed Hamiltonian), records the half-system entropy change,
    and isolates the second-order-in-dH component by combining runs at dH
    and dH/2. The log-log slope over t is fitted at lam = 1; the per-lambda
    metric is the largest |second order| over the t grid.
    """
    n = h.n_qubits
    if n > PERTURB_MAX_QUBITS:
        raise BackendCapError(
            f"perturbation experiment capped at {PERTURB_MAX_QUBITS} qubits"
        )
    t_grid = [float(t) for t in t_grid]
    if len(t_grid) < 3:
        raise ValueError("need at least 3 time points to fit a slope")
    rho0 = gibbs_exact(h, beta)
    s0 = entropy_density_half(rho0)
    zero_perturbation = not delta_h.terms

    def entropy_change(eps_scale: float, t: float) -> float:
        if zero_perturbation and eps_scale != 0.0:
            return 0.0
        w, v = np.linalg.eigh((h + delta_h.scaled(eps_scale)).to_dense())
        rho_t = v.conj().T @ rho0.data @ v
        phases = np.exp(1j * t * w)
        rho_t = rho_t * np.outer(phases, phases.conj())
        rho_t = v @ rho_t @ v.conj().T
        return entropy_density_half(DensityMatrix(n, rho_t)) - s0

    rows: list[ScalingRow] = []
    lambda_metrics: dict[float, float] = {}
    for lam in lambda_grid:
        worst = 0.0
        for t in t_grid:
            full = entropy_change(1.0 / lam, lam * t)
            half = entropy_change(0.5 / lam, lam * t)
            r2 = second_order_component(full, half)
            rows.append(ScalingRow(lam, t, full, half, r2))
            worst = max(worst, abs(r2))
        lambda_metrics[lam] = worst

    base_rows = [r for r in rows if r.lam == lambda_grid[0]]
    logs = [(math.log(r.t), math.log(abs(r.second_order)))
            for r in base_rows if abs(r.second_order) > 0.0]
    if len(logs) >= 2 and not zero_perturbation:
        xs = np.array([a for a, _ in logs])
        ys = np.array([b for _, b in logs])
        slope, intercept = np.polyfit(xs, ys, 1)
    else:
        slope, intercept = math.nan, math.nan
    return PerturbationScalingResult(
        rows=rows,
        slope=float(slope),
        intercept=float(intercept),
        lambda_metrics=lambda_metrics,
    )
