"""Adiabatic preparation of locally-thermal quantum states, with
mirror-circuit entropy benchmarking under depolarizing noise."""

__version__ = "0.1.0"

from .circuits import Circuit, NoiseLayer, XRotationAll, ZRotationAll, ZZRotation
from .errors import BackendCapError, NumericalError
from .models import (
    Lattice,
    ThermalReference,
    free_energy,
    gibbs_exact,
    h0_transverse,
    hamiltonian_for,
    ising_1d,
    ising_2d_torus,
    lowest_eigenvalues,
    product_gibbs_x,
    ring,
    sample_product_gibbs_x,
    thermal_reference_curve,
    torus,
)
from .paulis import PauliSum
from .protocol import (
    BetaEstimate,
    CurveRecord,
    DecayFit,
    HardwareObservables,
    TimeSeries,
    beta_closed_form,
    beta_from_observables,
    beta_max_scaling,
    d_noisy_entropy_d_beta0,
    entropy_from_x,
    estimate_beta_curve,
    fit_decay,
    hardware_summary,
    predicted_noisy_entropy,
    s0_of_beta0,
)
from .schedules import (
    LinearSchedule,
    PowerLawSchedule,
    ProbeSpec,
    adiabaticity_probe_circuit,
    attach_noise,
    fixed_hamiltonian_circuit,
    hardware_circuit,
    hardware_schedule,
    linear_trotter_circuit,
    mirror_circuit,
)
from .states import (
    DensityMatrix,
    StateVector,
    apply_circuit,
    apply_depolarizing,
    apply_gate_layer,
    entropy_density_half,
    expectation_pauli_sum,
    mean_x,
    new_basis_product_state,
    partial_trace,
    sample_depolarizing_trajectory,
    sample_measurements,
    von_neumann_entropy,
)
from .experiments import (
    run_adiabaticity_diagnostic,
    run_entropy_timeseries,
    run_hardware_table,
    run_perturbation_scaling,
    run_thermal_prep,
)
