"""Trotterized circuit construction: interpolation schedules, the optimized
power-law sequence, mirrors, the adiabaticity probe, and noise attachment.

Every Trotter step applies its ZZ layer first, then the Z-field layer, then
the X layer (the step operator is written exp(i f sum X) exp(i J sum ZZ), so
the rightmost factor acts first). Interpolation coefficients are sampled at
step midpoints t_n = (n + 1/2) / M.
"""

from __future__ import annotations

from dataclasses import dataclass

from .circuits import Circuit, NoiseLayer, XRotationAll, ZRotationAll, ZZRotation
from .models import Lattice

NOISE_PER_TROTTER_STEP = "per_trotter_step"
NOISE_PER_TWO_QUBIT_GATE = "per_two_qubit_gate"


@dataclass(frozen=True)
class LinearSchedule:
    """Linear interpolation (1-t) H0 + t H_f over M Trotter steps of size dt.

    H0 = h0_sign * (-sum X); H_f = j*ZZ + h_x*X + h_z*Z on the target lattice.
    """

    m_steps: int
    dt: float
    j: float
    h_x: float
    h_z: float
    h0_sign: int = 1

    def __post_init__(self):
        if self.m_steps < 1:
            raise ValueError("need at least one Trotter step")
        if not self.dt > 0:
            raise ValueError("step size must be positive")
        if self.h0_sign not in (1, -1):
            raise ValueError("h0_sign must be +1 or -1")

    @property
    def total_time(self) -> float:
        return self.m_steps * self.dt


@dataclass(frozen=True)
class PowerLawSchedule:
    """Optimized hardware sequence f_n = (a+bn)^-c, J_n = -(f_n/h_x)((n+1/2)/M)^d."""

    m_steps: int
    a: float
    b: float
    c: float
    d: float
    h_x: float

    def __post_init__(self):
        if self.m_steps < 1:
            raise ValueError("need at least one Trotter step")
        if self.m_steps % 2 != 0:
            raise ValueError("step count must be even (mirrors need M/2)")
        if self.h_x == 0.0:
            raise ValueError("h_x must be nonzero")
        for n in range(self.m_steps):
            if self.a + self.b * n <= 0.0:
                raise ValueError(f"a + b*n not positive at step {n}")


@dataclass(frozen=True)
class ProbeSpec:
    """Extra fixed-Hamiltonian Trotter steps inserted inside a mirror."""

    k: int
    dt_probe: float

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("probe step count must be >= 0")
        if self.k > 0 and not self.dt_probe > 0:
            raise ValueError("probe step size must be positive")


def _ising_step(lattice: Lattice, zz_angle: float, z_angle: float, x_angle: float):
    layers = []
    if lattice.edges and zz_angle != 0.0:
        layers.append(ZZRotation(lattice.edges, zz_angle))
    if z_angle != 0.0:
        layers.append(ZRotationAll(z_angle))
    layers.append(XRotationAll(x_angle))
    return tuple(layers)


def linear_trotter_circuit(schedule: LinearSchedule, lattice: Lattice) -> Circuit:
    """First-order Trotterization of the linear interpolation schedule."""
    steps = []
    m = schedule.m_steps
    for n in range(m):
        t = (n + 0.5) / m
        steps.append(
            _ising_step(
                lattice,
                zz_angle=schedule.dt * t * schedule.j,
                z_angle=schedule.dt * t * schedule.h_z,
                x_angle=schedule.dt * ((1.0 - t) * (-schedule.h0_sign) + t * schedule.h_x),
            )
        )
    return Circuit(lattice.n_sites, steps)


def fixed_hamiltonian_circuit(
    lattice: Lattice, j: float, h_x: float, h_z: float, m_steps: int, dt: float
) -> Circuit:
    """m_steps first-order Trotter steps of the fixed Hamiltonian (a quench)."""
    if m_steps < 0:
        raise ValueError("step count must be >= 0")
    step = _ising_step(lattice, zz_angle=dt * j, z_angle=dt * h_z, x_angle=dt * h_x)
    return Circuit(lattice.n_sites, [step] * m_steps)


def hardware_schedule(spec: PowerLawSchedule) -> list[tuple[float, float]]:
    """The (J_n, f_n) sequence of the power-law schedule."""
    out = []
    for n in range(spec.m_steps):
        f_n = (spec.a + spec.b * n) ** (-spec.c)
        j_n = -(f_n / spec.h_x) * ((n + 0.5) / spec.m_steps) ** spec.d
        out.append((j_n, f_n))
    return out


def hardware_circuit(spec: PowerLawSchedule, lattice: Lattice) -> Circuit:
    """Product of steps V(J_n, f_n) = exp(i f_n sum X) exp(i J_n sum ZZ)."""
    steps = []
    for j_n, f_n in hardware_schedule(spec):
        steps.append((ZZRotation(lattice.edges, j_n), XRotationAll(f_n)))
    return Circuit(lattice.n_sites, steps)


def mirror_circuit(base: Circuit, halve: bool) -> Circuit:
    """Forward evolution followed by its exact layer-wise inverse.

    With ``halve`` the forward part is the first half of ``base`` (the
    mirror then has the same depth as ``base``); otherwise the full circuit
    is inverted, doubling the depth. ``base`` must be noise-free; attach
    noise to the mirrored circuit afterwards.
    """
    if base.has_noise:
        raise ValueError("mirror a noise-free circuit, then attach noise")
    if halve:
        if base.step_count % 2 != 0:
            raise ValueError("halved mirror needs an even step count")
        forward = base.steps[: base.step_count // 2]
    else:
        forward = base.steps
    inverse = Circuit(base.n_qubits, forward).inverse()
    return Circuit(base.n_qubits, forward + inverse.steps)


def adiabaticity_probe_circuit(
    base: Circuit,
    probe: ProbeSpec,
    lattice: Lattice,
    j: float,
    h_x: float,
    h_z: float,
) -> Circuit:
    """Full mirror with k Trotter steps of the final Hamiltonian inserted.

    k = 0 reduces to the plain full mirror of ``base``.
    """
    if base.has_noise:
        raise ValueError("probe a noise-free circuit, then attach noise")
    middle = fixed_hamiltonian_circuit(lattice, j, h_x, h_z, probe.k, probe.dt_probe)
    return Circuit(
        base.n_qubits, base.steps + middle.steps + base.inverse().steps
    )


def attach_noise(circuit: Circuit, p: float, placement: str) -> Circuit:
    """Insert depolarizing noise layers into a circuit.

    ``per_trotter_step`` appends one all-qubit noise layer at the end of
    every step; ``per_two_qubit_gate`` inserts a noise layer on the two
    touched qubits after each ZZ edge rotation. ``p = 0`` returns the
    circuit unchanged.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"depolarizing amplitude {p} outside [0, 1]")
    if placement not in (NOISE_PER_TROTTER_STEP, NOISE_PER_TWO_QUBIT_GATE):
        raise ValueError(f"unknown noise placement {placement!r}")
    if p == 0.0:
        return circuit
    steps = []
    if placement == NOISE_PER_TROTTER_STEP:
        for step in circuit.steps:
            steps.append(step + (NoiseLayer(p, None),))
    else:
        for step in circuit.steps:
            new_step = []
            for layer in step:
                new_step.append(layer)
                if isinstance(layer, ZZRotation):
                    for edge in layer.edges:
                        new_step.append(NoiseLayer(p, edge))
            steps.append(tuple(new_step))
    return Circuit(circuit.n_qubits, steps)
